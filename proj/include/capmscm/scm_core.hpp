#pragma once

// Time-indexed linear Gaussian structural equation models: graph type,
// validation, seeded simulation and interventional (do) slopes.

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace capmscm::scm {

/// A variable at a time offset, in units of the sampling interval.
struct NodeRef {
    std::string name;
    int offset = 0;

    /// Parses "NAME@OFFSET" (e.g. "Z@0", "Y@2", "X@-1").
    static NodeRef parse(std::string_view text);
    std::string str() const;

    auto operator<=>(const NodeRef&) const = default;
};

struct Edge {
    NodeRef from;
    NodeRef to;

    auto operator<=>(const Edge&) const = default;
};

/// Directed graph over time-indexed nodes. Edges are stored as given;
/// `validate_dag` reports backward-in-time edges, self loops and cycles.
class TimeIndexedDag {
public:
    const NodeRef& add_node(std::string name, int offset = 0);
    void add_edge(const NodeRef& from, const NodeRef& to);
    bool remove_edge(const NodeRef& from, const NodeRef& to);

    /// Observation flag is per variable name; defaults to observed.
    void set_observed(const std::string& name, bool observed);
    bool observed(const std::string& name) const { return !latent_.contains(name); }

    bool contains(const NodeRef& node) const { return index_of(node).has_value(); }
    std::optional<std::size_t> index_of(const NodeRef& node) const;
    bool has_edge(const NodeRef& from, const NodeRef& to) const;

    /// Resolves "NAME@OFFSET", or a bare "NAME" when that name occurs once.
    NodeRef resolve(std::string_view text) const;

    std::vector<NodeRef> parents(const NodeRef& node) const;
    std::vector<NodeRef> children(const NodeRef& node) const;

    const std::vector<NodeRef>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::vector<std::string> names() const;

private:
    std::vector<NodeRef> nodes_;
    std::vector<Edge> edges_;
    std::set<std::string> latent_;
};

enum class ViolationKind { empty_graph, backward_edge, self_loop, cycle };

std::string_view to_string(ViolationKind kind) noexcept;

struct Violation {
    ViolationKind kind;
    std::vector<NodeRef> nodes;  // cycle members (in cycle order) or edge endpoints
    std::string message;
};

struct ValidationVerdict {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
};

ValidationVerdict validate_dag(const TimeIndexedDag& dag);

/// True iff the directed graph has no cycle (ignores time ordering).
bool is_acyclic(const TimeIndexedDag& dag);

/// Deterministic topological order: ties broken by (offset, insertion order).
/// Throws Error(invalid_dag) on a cycle.
std::vector<NodeRef> topological_order(const TimeIndexedDag& dag);

/// Linear SEM over a TimeIndexedDag. Every node equals the coefficient-weighted
/// sum of its parents plus an independent N(0, sd^2) shock; the shock sd is
/// declared per variable name. Intervened nodes are clamped constants.
class LinearSem {
public:
    LinearSem(TimeIndexedDag dag, std::map<Edge, double> coefficients,
              std::map<std::string, double> noise_std);

    const TimeIndexedDag& dag() const { return dag_; }
    const std::map<Edge, double>& coefficients() const { return coefficients_; }
    const std::map<std::string, double>& noise() const { return noise_std_; }
    const std::map<NodeRef, double>& clamps() const { return clamps_; }

    double coefficient(const NodeRef& from, const NodeRef& to) const;
    double noise_std(const std::string& name) const;
    /// Zero for clamped nodes, otherwise the name's noise sd.
    double effective_noise_std(const NodeRef& node) const;
    std::optional<double> clamp(const NodeRef& node) const;

    friend LinearSem intervene(const LinearSem& sem, const NodeRef& node, double value);

private:
    TimeIndexedDag dag_;
    std::map<Edge, double> coefficients_;
    std::map<std::string, double> noise_std_;
    std::map<NodeRef, double> clamps_;
};

/// Fluent construction for tests and presets.
class SemBuilder {
public:
    SemBuilder& node(std::string name, int offset = 0, bool observed = true);
    SemBuilder& edge(std::string_view from, std::string_view to, double coef);
    SemBuilder& noise(std::string name, double sd);
    LinearSem build() const;

private:
    TimeIndexedDag dag_;
    std::map<Edge, double> coefficients_;
    std::map<std::string, double> noise_;
};

/// Draws from a LinearSem; one row per independent realisation of the template.
struct SamplePanel {
    Eigen::MatrixXd draws;
    std::vector<NodeRef> columns;  // topological order
    std::uint64_t seed = 0;

    Eigen::Index column_index(const NodeRef& node) const;
    Eigen::VectorXd column(const NodeRef& node) const { return draws.col(column_index(node)); }
    Eigen::VectorXd column(std::string_view node) const { return column(NodeRef::parse(node)); }
};

struct SimulationOptions {
    unsigned threads = 1;
};

/// Rows are generated in fixed blocks; the shock stream of each (node, block)
/// is seeded from (seed, node name, node offset, block index), so the output
/// does not depend on `threads`.
SamplePanel simulate(const LinearSem& sem, std::size_t n_samples, std::uint64_t seed,
                     const SimulationOptions& options = {});

/// Stationary time series obtained by unrolling the template: an edge
/// A@p -> B@q contributes coef * A[t - (q - p)] to B[t]. Each variable name is
/// one column. The leading `burn_in` periods are simulated and discarded.
struct SeriesPanel {
    Eigen::MatrixXd values;  // periods x names
    std::vector<std::string> names;
    std::uint64_t seed = 0;

    Eigen::Index column_index(std::string_view name) const;
    Eigen::VectorXd series(std::string_view name) const { return values.col(column_index(name)); }
};

struct SeriesOptions {
    std::size_t burn_in = 256;
};

SeriesPanel simulate_series(const LinearSem& sem, std::size_t n_periods, std::uint64_t seed,
                            const SeriesOptions& options = {});

/// d E[outcome | do(treatment = r)] / dr: sum over directed paths of the
/// product of path coefficients.
double causal_effect_slope(const LinearSem& sem, const NodeRef& treatment, const NodeRef& outcome);

/// Graph surgery: drop all edges into `node` and clamp it to `value`.
LinearSem intervene(const LinearSem& sem, const NodeRef& node, double value);

} // namespace capmscm::scm
