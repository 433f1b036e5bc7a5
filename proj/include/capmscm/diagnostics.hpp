#pragma once

// The empirical battery: shock-day attenuation, environment betas, lead-lag
// profiles, leave-one-out index comparison and post-hedge residual loadings.

#include "capmscm/data_io.hpp"
#include "capmscm/graph_analysis.hpp"
#include "capmscm/regression.hpp"

#include <optional>
#include <string>
#include <vector>

namespace capmscm::diagnostics {

using io::Date;
using io::ReturnPanel;
using io::ShockControls;

struct Slope {
    double beta = 0.0;
    double se = 0.0;
};

struct AttenuationRecord {
    Slope without_controls;
    Slope with_controls;
    std::optional<double> ratio;  // with / without
    std::optional<Slope> with_controls_no_sector;
    std::vector<std::string> controls_used;
    std::size_t n_events = 0;
    std::size_t n_obs = 0;
};

struct AttenuationOptions {
    std::size_t min_events = 10;
    regression::SeKind se_kind = regression::SeKind::cluster_by_date;
};

/// Pools every (asset, event date) row and regresses R_i on R_m, then on R_m
/// plus the controls. Errors: too_few_events, missing_market_series.
AttenuationRecord shock_day_attenuation(const ReturnPanel& panel, const std::vector<Date>& events,
                                        const ShockControls& controls, const AttenuationOptions& options = {});

// ---------------------------------------------------------------------------

struct EnvironmentOptions {
    std::size_t min_rows = regression::kDefaultEnvironmentFloor;
    regression::SeKind se_kind = regression::SeKind::cluster_by_date;
    std::string base_environment;  // empty: "Base" if present, else the first label
};

struct EnvironmentTable {
    std::string scheme;
    regression::InteractionFit fit;
    std::size_t unlabeled_rows = 0;
};

/// Pooled interaction regression over all labeled (asset, date) rows.
EnvironmentTable environment_betas(const ReturnPanel& panel, const io::EnvironmentLabeling& labeling,
                                   const ShockControls& controls, const EnvironmentOptions& options = {});

// ---------------------------------------------------------------------------

enum class LeadDirection { neither, market_leads, asset_leads, both };

std::string_view to_string(LeadDirection d) noexcept;

struct LeadLagOptions {
    int max_lag = 5;
    double threshold = 4.0;  // |coef| / se for a lag to count as nonzero
    std::vector<std::string> assets;  // empty: all
    regression::SeKind se_kind = regression::SeKind::cluster_by_date;
};

struct LeadLagResult {
    regression::LagProfile market_leads;  // R_i on lags of R_m
    regression::LagProfile asset_leads;   // R_m on lags of R_i
    bool market_leads_significant = false;
    bool asset_leads_significant = false;
    LeadDirection direction = LeadDirection::neither;
};

/// Both directions include the dependent variable's own lags 1..max_lag and
/// the common controls. Only lags k >= 1 decide the direction.
LeadLagResult lead_lag_test(const ReturnPanel& panel, const ShockControls& controls,
                            const LeadLagOptions& options = {});

// ---------------------------------------------------------------------------

struct LeaveOneOut {
    std::string asset;
    Slope full;
    Slope loo;
    std::optional<double> drop_fraction;  // 1 - loo / full; absent when full == 0
    bool renormalized = false;
    std::vector<std::string> notes;
};

/// Regresses the asset on sum_j w_j R_j and on the same sum without the
/// asset. With `renormalize` the second index is divided by 1 - w_i.
LeaveOneOut leave_one_out_compare(const ReturnPanel& panel, const std::string& asset,
                                  const graph::AggregatorSpec& weights, bool renormalize = false);

// ---------------------------------------------------------------------------

struct Loading {
    std::string control;
    double coef = 0.0;
    double se = 0.0;
    bool identified = true;
};

struct EventLoadings {
    Date date;
    std::size_t n_assets = 0;
    std::vector<Loading> loadings;
};

struct ResidualLoadings {
    std::vector<EventLoadings> per_event;
    std::vector<Loading> pooled;
    std::size_t n_obs = 0;
    std::vector<std::string> notes;
};

struct ResidualOptions {
    std::size_t window = 250;
    std::size_t gap = 5;  // estimation window ends this many rows before the event
    regression::SeKind se_kind = regression::SeKind::cluster_by_date;
};

/// Per-asset CAPM fitted on the pre-event window; event-day residuals are
/// regressed on the controls standardized over the pooled event rows.
/// Events without enough history are skipped with a note.
ResidualLoadings post_hedge_residual_loadings(const ReturnPanel& panel, const std::vector<Date>& events,
                                              const ShockControls& controls, const ResidualOptions& options = {});

// ---------------------------------------------------------------------------

enum class SectionStatus { ok, skipped, failed };

std::string_view to_string(SectionStatus s) noexcept;

struct SectionState {
    SectionStatus status = SectionStatus::skipped;
    std::string note;
};

struct BatteryInputs {
    const ReturnPanel* panel = nullptr;
    const ShockControls* controls = nullptr;
    const std::vector<Date>* events = nullptr;
    const io::EnvironmentLabeling* labeling = nullptr;
    const graph::AggregatorSpec* weights = nullptr;
};

struct BatteryConfig {
    AttenuationOptions attenuation;
    EnvironmentOptions environment;
    LeadLagOptions lead_lag;
    ResidualOptions residual;
    bool renormalize = false;
    std::string loo_asset;  // empty: the largest weight
    double z_critical = 1.96;
    double strong_attenuation = 0.5;  // |with| <= this * |without|
    double large_drop = 0.5;
};

struct DiagnosticReport {
    std::optional<AttenuationRecord> attenuation;
    std::optional<EnvironmentTable> env_betas;
    std::optional<LeadLagResult> lag_profile;
    std::optional<LeaveOneOut> leave_one_out;
    std::optional<ResidualLoadings> residual_loadings;
    SectionState attenuation_state;
    SectionState env_state;
    SectionState lag_state;
    SectionState loo_state;
    SectionState residual_state;
    std::vector<std::string> verdict_notes;
};

/// Followed by ": attenuation" and whichever of "+ state-dependent betas" and
/// "+ residual loadings" the report supports.
inline constexpr const char* kForkNote = "pattern consistent with fork";
inline constexpr const char* kLaggedNote = "lagged-mechanism signature: market leads assets";
inline constexpr const char* kAssetLeadsNote = "asset leads market: points to cases (c)/(f)";
inline constexpr const char* kLargeDropNote = "large leave-one-out drop: points to cases (c)/(f)";

/// Runs every section whose inputs are present; a failing section is
/// recorded and the rest still run.
DiagnosticReport run_full_battery(const BatteryInputs& inputs, const BatteryConfig& config = {});

} // namespace capmscm::diagnostics
