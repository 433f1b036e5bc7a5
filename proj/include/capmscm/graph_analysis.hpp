#pragma once

// What an OLS slope means under a hypothesised graph: d-separation,
// back-door checks, the aggregator contradiction, the necessary-condition
// checklist and the seven-case taxonomy of three-node time-indexed DAGs.

#include "capmscm/scm_core.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace capmscm::graph {

using scm::NodeRef;
using scm::TimeIndexedDag;

/// Bitset view of a DAG with at most 64 nodes, for repeated queries.
class DagIndex {
public:
    explicit DagIndex(const TimeIndexedDag& dag);
    /// Raw form: `parents[v]` is the bitmask of v's parents.
    explicit DagIndex(std::vector<std::uint64_t> parents);

    std::size_t size() const { return parents_.size(); }
    std::uint64_t parents(std::size_t v) const { return parents_[v]; }
    std::uint64_t children(std::size_t v) const { return children_[v]; }
    /// Bitmask of `nodes` and all their ancestors.
    std::uint64_t ancestors_of(std::uint64_t nodes) const;
    /// Bitmask of strict descendants of v.
    std::uint64_t descendants(std::size_t v) const;
    /// Copy without the edges leaving v.
    DagIndex without_outgoing(std::size_t v) const;

private:
    std::vector<std::uint64_t> parents_;
    std::vector<std::uint64_t> children_;
};

/// d-separation of x and y given the node set `conditioning` (bitmask),
/// by reachability over (node, direction) states.
bool d_separated(const DagIndex& dag, std::size_t x, std::size_t y, std::uint64_t conditioning);

/// Throws Error(invalid_argument) when x == y or x/y is conditioned on.
bool d_separated(const TimeIndexedDag& dag, const NodeRef& x, const NodeRef& y,
                 const std::vector<NodeRef>& conditioning);

/// True iff `conditioning` holds no descendant of treatment and blocks every
/// path from treatment to outcome that starts with an edge into treatment.
bool backdoor_clear(const DagIndex& dag, std::size_t treatment, std::size_t outcome,
                    std::uint64_t conditioning);

bool backdoor_clear(const TimeIndexedDag& dag, const NodeRef& treatment, const NodeRef& outcome,
                    const std::vector<NodeRef>& conditioning);

// ---------------------------------------------------------------------------
// Aggregator contradiction

struct AggregatorSpec {
    std::vector<std::string> constituents;
    std::map<std::string, double> weights;  // w_{j,t-1}
    std::string target;                     // asset i

    /// Throws Error(invalid_argument) unless weights form a simplex over the
    /// constituents (sum within 1e-12 of one) and target is a constituent.
    void validate() const;
    double weight(const std::string& asset) const;
};

inline constexpr double kSimplexTolerance = 1e-12;

enum class AdmissibilityStatus { admissible, contradiction, degenerate };
enum class AdmissibilityReason { beta_zero, leave_one_out, single_asset_market, cycle_detected };
enum class Corollary { lagged_market, leave_one_out_index, single_asset };

std::string_view to_string(AdmissibilityStatus s) noexcept;
std::string_view to_string(AdmissibilityReason r) noexcept;
/// "i", "ii" or "iii".
std::string_view to_string(Corollary c) noexcept;

struct AdmissibilityVerdict {
    AdmissibilityStatus status;
    AdmissibilityReason rationale;
    std::optional<Corollary> corollary;
};

/// Case split for a same-period equation Y_i := beta * X + Z against the
/// aggregate X = sum_j w_j Y_j:
///   beta == 0                         -> admissible, beta_zero (corollary i)
///   w_i == 0                          -> admissible, leave_one_out (corollary ii)
///   w_i > 0, all other weights zero   -> degenerate, single_asset_market (iii)
///   otherwise                         -> contradiction, cycle_detected
AdmissibilityVerdict check_aggregator_contradiction(const AggregatorSpec& agg, double beta);

/// Adds A@t -> M@t for every offset t where both the asset and the market
/// node exist: the market at t aggregates the constituent at t.
TimeIndexedDag with_aggregator_edges(const TimeIndexedDag& dag, const std::string& market_name,
                                     const std::string& asset_name);

// ---------------------------------------------------------------------------
// Necessary conditions for a proposed edge

struct ChecklistReport {
    bool temporal_priority = false;
    bool acyclicity = false;
    bool mechanism = false;
    bool causal_elimination = false;
    bool overall = false;
    std::vector<std::string> warnings;
};

/// Temporal priority and acyclicity are computed from the graph; mechanism
/// and causal elimination are caller judgments recorded as given. A
/// same-offset edge passes temporal priority only with `allow_same_period`,
/// and then carries a warning.
ChecklistReport necessary_conditions_checklist(const TimeIndexedDag& dag, const scm::Edge& edge,
                                               bool mechanism_declared, bool intervention_wellposed,
                                               bool allow_same_period = false);

// ---------------------------------------------------------------------------
// Taxonomy

enum class CaseLabel {
    a_fork,
    b_chain_via_market,
    c_chain_via_asset,
    d_collider_at_Z,
    e_market_causes_asset,
    f_asset_causes_market,
    g_latent_confounder,
    unclassified,
};

enum class BetaReading { proxy, causal_direct, backward_looking, unbiased_but_collider_risk, latent_shadow };

std::string_view to_string(CaseLabel c) noexcept;
std::string_view to_string(BetaReading r) noexcept;

inline constexpr std::string_view kColliderWarning = "conditioning on Z opens collider path";

struct DagClass {
    CaseLabel case_label = CaseLabel::unclassified;
    std::optional<BetaReading> beta_reading;
    std::vector<std::string> warnings;
};

/// Matches graphs over exactly the names {Z, X, Y} (one node each) against
/// the seven cases. Offsets matter only through their order: every edge must
/// point strictly forward in time. Case (g) is the fork with Z unobserved.
DagClass classify_dag(const TimeIndexedDag& dag);

} // namespace capmscm::graph
