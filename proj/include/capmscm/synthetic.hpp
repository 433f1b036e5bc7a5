#pragma once

// Return panels generated from unrolled SEM templates: forks, chains in
// either direction and a regime-switching fork.

#include "capmscm/data_io.hpp"
#include "capmscm/scm_core.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace capmscm::synthetic {

inline constexpr const char* kMarketId = "MKT";

io::Date default_start();  // 2015-01-02

/// A01, A02, ...
std::vector<std::string> asset_names(std::size_t count);

struct PanelShape {
    std::size_t periods = 2000;
    std::size_t assets = 10;
    std::size_t event_spacing = 5;  // every k-th date is an event
    std::size_t burn_in = 256;
};

/// Panel plus its companions. The control `z` on date t is the driver Z at
/// t - 1, the value that moves X and the assets on date t.
struct SyntheticPanel {
    io::ReturnPanel panel;
    io::ShockControls controls;
    std::vector<io::Date> events;
    std::map<std::string, double> weights;
    std::string focus_asset;  // largest weight
};

/// Z@0 -> X@1 (a), Z@0 -> A@1 (b) for every asset.
struct ForkPanelParams {
    double a = 1.0;
    double b = 1.0;
    double sigma_z = 1.0;
    double sigma_x = 0.5;
    double sigma_y = 1.0;
};

/// Z@0 -> X@1 (a) -> A@2 (c): the market leads every asset by one period.
struct ChainBParams {
    double a = 1.0;
    double c = 0.5;
    double sigma_z = 1.0;
    double sigma_x = 1.0;
    double sigma_y = 1.0;
};

/// Z@0 -> A@1 (b); the index aggregates the assets in the same period and
/// the first asset (weight `focus_weight`) also moves the index one period
/// later with coefficient g.
struct ChainCParams {
    double b = 0.3;
    double focus_weight = 0.4;
    double g = 0.5;
    double sigma_z = 1.0;
    double sigma_x = 0.1;
    double sigma_y = 1.0;
};

scm::LinearSem fork_template(const ForkPanelParams& p, const std::vector<std::string>& assets);
scm::LinearSem chain_b_template(const ChainBParams& p, const std::vector<std::string>& assets);
scm::LinearSem chain_c_template(const ChainCParams& p, const std::vector<std::string>& assets,
                                const std::map<std::string, double>& weights);

SyntheticPanel fork_panel(const ForkPanelParams& p, const PanelShape& shape, std::uint64_t seed);
SyntheticPanel chain_b_panel(const ChainBParams& p, const PanelShape& shape, std::uint64_t seed);
SyntheticPanel chain_c_panel(const ChainCParams& p, const PanelShape& shape, std::uint64_t seed);

/// Wraps an unrolled series as a panel: `market` becomes the market column,
/// `assets` the asset columns and `driver` the lagged control z.
SyntheticPanel panel_from_series(const scm::SeriesPanel& series, const std::string& market,
                                 const std::vector<std::string>& assets, const std::string& driver,
                                 std::size_t event_spacing);

struct Regime {
    std::string label;
    double b = 1.0;
};

struct RegimePanel {
    io::ReturnPanel panel;
    io::ShockControls controls;
    io::EnvironmentLabeling labeling;
};

/// Consecutive blocks of a one-asset fork panel, one block per regime with
/// its own Z -> asset coefficient. The first regime's label must be the
/// base label "Base"; later regimes are declared as episodes.
RegimePanel regime_fork_panel(const ForkPanelParams& base, const std::vector<Regime>& regimes,
                              std::size_t rows_per_regime, std::uint64_t seed);

} // namespace capmscm::synthetic
