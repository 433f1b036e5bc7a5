#include "capmscm/graph_analysis.hpp"

#include "capmscm/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

namespace capmscm::graph {

namespace {

constexpr std::uint64_t bit(std::size_t v) { return std::uint64_t{1} << v; }

std::size_t index_or_throw(const TimeIndexedDag& dag, const NodeRef& node) {
    const auto idx = dag.index_of(node);
    if (!idx) throw Error(Errc::invalid_argument, "unknown node " + node.str());
    return *idx;
}

struct Query {
    DagIndex index;
    std::size_t x;
    std::size_t y;
    std::uint64_t conditioning;
};

Query prepare(const TimeIndexedDag& dag, const NodeRef& x, const NodeRef& y,
              const std::vector<NodeRef>& conditioning) {
    if (!scm::is_acyclic(dag)) throw Error(Errc::invalid_dag, "graph contains a directed cycle");
    if (x == y) throw Error(Errc::invalid_argument, "the two query nodes must differ");
    Query q{DagIndex(dag), index_or_throw(dag, x), index_or_throw(dag, y), 0};
    for (const auto& c : conditioning) {
        if (c == x || c == y) {
            throw Error(Errc::invalid_argument, "query node " + c.str() + " is in the conditioning set");
        }
        q.conditioning |= bit(index_or_throw(dag, c));
    }
    return q;
}

} // namespace

DagIndex::DagIndex(const TimeIndexedDag& dag) {
    const std::size_t n = dag.nodes().size();
    if (n > 64) throw Error(Errc::invalid_argument, "graph analysis supports at most 64 nodes");
    parents_.assign(n, 0);
    children_.assign(n, 0);
    for (const auto& e : dag.edges()) {
        const std::size_t f = *dag.index_of(e.from);
        const std::size_t t = *dag.index_of(e.to);
        parents_[t] |= bit(f);
        children_[f] |= bit(t);
    }
}

DagIndex::DagIndex(std::vector<std::uint64_t> parents) : parents_(std::move(parents)) {
    if (parents_.size() > 64) throw Error(Errc::invalid_argument, "graph analysis supports at most 64 nodes");
    children_.assign(parents_.size(), 0);
    for (std::size_t v = 0; v < parents_.size(); ++v) {
        for (std::size_t p = 0; p < parents_.size(); ++p) {
            if (parents_[v] & bit(p)) children_[p] |= bit(v);
        }
    }
}

std::uint64_t DagIndex::ancestors_of(std::uint64_t nodes) const {
    std::uint64_t result = nodes;
    std::uint64_t frontier = nodes;
    while (frontier) {
        std::uint64_t next = 0;
        for (std::uint64_t f = frontier; f; f &= f - 1) {
            next |= parents_[static_cast<std::size_t>(std::countr_zero(f))];
        }
        frontier = next & ~result;
        result |= next;
    }
    return result;
}

std::uint64_t DagIndex::descendants(std::size_t v) const {
    std::uint64_t result = 0;
    std::uint64_t frontier = children_[v];
    while (frontier) {
        result |= frontier;
        std::uint64_t next = 0;
        for (std::uint64_t f = frontier; f; f &= f - 1) {
            next |= children_[static_cast<std::size_t>(std::countr_zero(f))];
        }
        frontier = next & ~result;
    }
    return result;
}

DagIndex DagIndex::without_outgoing(std::size_t v) const {
    DagIndex copy = *this;
    for (std::uint64_t c = children_[v]; c; c &= c - 1) {
        copy.parents_[static_cast<std::size_t>(std::countr_zero(c))] &= ~bit(v);
    }
    copy.children_[v] = 0;
    return copy;
}

bool d_separated(const DagIndex& dag, std::size_t x, std::size_t y, std::uint64_t conditioning) {
    const std::uint64_t opens_collider = dag.ancestors_of(conditioning);
    // visited[0]: reached travelling up (from a child), visited[1]: travelling down.
    std::uint64_t visited[2] = {0, 0};
    std::vector<std::pair<std::size_t, int>> stack{{x, 0}};
    std::uint64_t reachable = 0;
    while (!stack.empty()) {
        const auto [v, dir] = stack.back();
        stack.pop_back();
        if (visited[dir] & bit(v)) continue;
        visited[dir] |= bit(v);
        const bool observed = conditioning & bit(v);
        if (!observed) reachable |= bit(v);

        auto push = [&](std::uint64_t mask, int d) {
            for (; mask; mask &= mask - 1) stack.emplace_back(std::countr_zero(mask), d);
        };
        if (dir == 0 && !observed) {
            push(dag.parents(v), 0);
            push(dag.children(v), 1);
        } else if (dir == 1) {
            if (!observed) push(dag.children(v), 1);
            if (opens_collider & bit(v)) push(dag.parents(v), 0);
        }
    }
    return !(reachable & bit(y));
}

bool d_separated(const TimeIndexedDag& dag, const NodeRef& x, const NodeRef& y,
                 const std::vector<NodeRef>& conditioning) {
    const Query q = prepare(dag, x, y, conditioning);
    return d_separated(q.index, q.x, q.y, q.conditioning);
}

bool backdoor_clear(const DagIndex& dag, std::size_t treatment, std::size_t outcome,
                    std::uint64_t conditioning) {
    if (conditioning & dag.descendants(treatment)) return false;
    return d_separated(dag.without_outgoing(treatment), treatment, outcome, conditioning);
}

bool backdoor_clear(const TimeIndexedDag& dag, const NodeRef& treatment, const NodeRef& outcome,
                    const std::vector<NodeRef>& conditioning) {
    const Query q = prepare(dag, treatment, outcome, conditioning);
    return backdoor_clear(q.index, q.x, q.y, q.conditioning);
}

// ---------------------------------------------------------------------------

void AggregatorSpec::validate() const {
    if (constituents.empty()) throw Error(Errc::invalid_argument, "aggregator has no constituents");
    std::set<std::string> seen;
    for (const auto& c : constituents) {
        if (!seen.insert(c).second) throw Error(Errc::duplicate_key, "duplicate constituent " + c);
        if (!weights.contains(c)) throw Error(Errc::invalid_argument, "no weight for constituent " + c);
    }
    double sum = 0.0;
    for (const auto& [name, w] : weights) {
        if (!seen.contains(name)) throw Error(Errc::invalid_argument, "weight given for non-constituent " + name);
        if (!std::isfinite(w) || w < 0.0) {
            throw Error(Errc::invalid_argument, "weight of " + name + " must be finite and nonnegative");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
        throw Error(Errc::invalid_argument, "weights sum to " + std::to_string(sum) + ", not 1");
    }
    if (!seen.contains(target)) throw Error(Errc::invalid_argument, "target " + target + " is not a constituent");
}

double AggregatorSpec::weight(const std::string& asset) const {
    const auto it = weights.find(asset);
    if (it == weights.end()) throw Error(Errc::invalid_argument, "no weight for " + asset);
    return it->second;
}

std::string_view to_string(AdmissibilityStatus s) noexcept {
    switch (s) {
    case AdmissibilityStatus::admissible: return "admissible";
    case AdmissibilityStatus::contradiction: return "contradiction";
    case AdmissibilityStatus::degenerate: return "degenerate";
    }
    return "unknown";
}

std::string_view to_string(AdmissibilityReason r) noexcept {
    switch (r) {
    case AdmissibilityReason::beta_zero: return "beta_zero";
    case AdmissibilityReason::leave_one_out: return "leave_one_out";
    case AdmissibilityReason::single_asset_market: return "single_asset_market";
    case AdmissibilityReason::cycle_detected: return "cycle_detected";
    }
    return "unknown";
}

std::string_view to_string(Corollary c) noexcept {
    switch (c) {
    case Corollary::lagged_market: return "i";
    case Corollary::leave_one_out_index: return "ii";
    case Corollary::single_asset: return "iii";
    }
    return "unknown";
}

AdmissibilityVerdict check_aggregator_contradiction(const AggregatorSpec& agg, double beta) {
    agg.validate();
    if (!std::isfinite(beta)) throw Error(Errc::invalid_argument, "beta must be finite");
    if (beta == 0.0) {
        return {AdmissibilityStatus::admissible, AdmissibilityReason::beta_zero, Corollary::lagged_market};
    }
    if (agg.weight(agg.target) == 0.0) {
        return {AdmissibilityStatus::admissible, AdmissibilityReason::leave_one_out,
                Corollary::leave_one_out_index};
    }
    const bool others = std::any_of(agg.weights.begin(), agg.weights.end(), [&](const auto& kv) {
        return kv.first != agg.target && kv.second > 0.0;
    });
    if (!others) {
        return {AdmissibilityStatus::degenerate, AdmissibilityReason::single_asset_market, Corollary::single_asset};
    }
    return {AdmissibilityStatus::contradiction, AdmissibilityReason::cycle_detected, std::nullopt};
}

TimeIndexedDag with_aggregator_edges(const TimeIndexedDag& dag, const std::string& market_name,
                                     const std::string& asset_name) {
    TimeIndexedDag out = dag;
    for (const auto& node : dag.nodes()) {
        if (node.name != asset_name) continue;
        const NodeRef market{market_name, node.offset};
        if (out.contains(market) && !out.has_edge(node, market)) out.add_edge(node, market);
    }
    return out;
}

ChecklistReport necessary_conditions_checklist(const TimeIndexedDag& dag, const scm::Edge& edge,
                                               bool mechanism_declared, bool intervention_wellposed,
                                               bool allow_same_period) {
    if (!dag.contains(edge.from) || !dag.contains(edge.to)) {
        throw Error(Errc::invalid_argument,
                    "edge endpoints " + edge.from.str() + ", " + edge.to.str() + " must be graph nodes");
    }
    ChecklistReport r;
    if (edge.from.offset < edge.to.offset) {
        r.temporal_priority = true;
    } else if (edge.from.offset == edge.to.offset && allow_same_period) {
        r.temporal_priority = true;
        r.warnings.push_back("same-period edge " + edge.from.str() + " -> " + edge.to.str() +
                             " accepted only because same-period edges were explicitly allowed");
    }

    TimeIndexedDag with_edge = dag;
    if (edge.from != edge.to && !with_edge.has_edge(edge.from, edge.to)) with_edge.add_edge(edge.from, edge.to);
    r.acyclicity = edge.from != edge.to && scm::is_acyclic(with_edge);

    r.mechanism = mechanism_declared;
    r.causal_elimination = intervention_wellposed;
    r.overall = r.temporal_priority && r.acyclicity && r.mechanism && r.causal_elimination;
    return r;
}

// ---------------------------------------------------------------------------

std::string_view to_string(CaseLabel c) noexcept {
    switch (c) {
    case CaseLabel::a_fork: return "a_fork";
    case CaseLabel::b_chain_via_market: return "b_chain_via_market";
    case CaseLabel::c_chain_via_asset: return "c_chain_via_asset";
    case CaseLabel::d_collider_at_Z: return "d_collider_at_Z";
    case CaseLabel::e_market_causes_asset: return "e_market_causes_asset";
    case CaseLabel::f_asset_causes_market: return "f_asset_causes_market";
    case CaseLabel::g_latent_confounder: return "g_latent_confounder";
    case CaseLabel::unclassified: return "unclassified";
    }
    return "unknown";
}

std::string_view to_string(BetaReading r) noexcept {
    switch (r) {
    case BetaReading::proxy: return "proxy";
    case BetaReading::causal_direct: return "causal_direct";
    case BetaReading::backward_looking: return "backward_looking";
    case BetaReading::unbiased_but_collider_risk: return "unbiased_but_collider_risk";
    case BetaReading::latent_shadow: return "latent_shadow";
    }
    return "unknown";
}

DagClass classify_dag(const TimeIndexedDag& dag) {
    DagClass out;
    const auto& nodes = dag.nodes();
    if (nodes.size() != 3) return out;
    std::set<std::string> names;
    for (const auto& n : nodes) names.insert(n.name);
    if (names != std::set<std::string>{"X", "Y", "Z"}) return out;

    std::set<std::string> shape;
    for (const auto& e : dag.edges()) {
        if (e.to.offset <= e.from.offset) return out;
        shape.insert(e.from.name + e.to.name);
    }
    using S = std::set<std::string>;
    if (shape == S{"ZX", "ZY"}) {
        if (!dag.observed("Z")) {
            out.case_label = CaseLabel::g_latent_confounder;
            out.beta_reading = BetaReading::latent_shadow;
            out.warnings.push_back("Z is unobserved: the back-door path X <- Z -> Y cannot be blocked");
        } else {
            out.case_label = CaseLabel::a_fork;
            out.beta_reading = BetaReading::proxy;
            out.warnings.push_back("beta is exposure to Z, not market impact; hedging on X leaves Z exposure");
        }
    } else if (shape == S{"ZX", "XY"}) {
        out.case_label = CaseLabel::b_chain_via_market;
        out.beta_reading = BetaReading::causal_direct;
    } else if (shape == S{"ZY", "YX"}) {
        out.case_label = CaseLabel::c_chain_via_asset;
        out.beta_reading = BetaReading::backward_looking;
        out.warnings.push_back("causal direction is Y -> X; compare against a leave-one-out index");
    } else if (shape == S{"XZ", "YZ"}) {
        out.case_label = CaseLabel::d_collider_at_Z;
        out.beta_reading = BetaReading::unbiased_but_collider_risk;
        out.warnings.emplace_back(kColliderWarning);
    } else if (shape == S{"XY", "ZY"}) {
        out.case_label = CaseLabel::e_market_causes_asset;
        out.beta_reading = BetaReading::causal_direct;
    } else if (shape == S{"YX", "ZX"}) {
        out.case_label = CaseLabel::f_asset_causes_market;
        out.beta_reading = BetaReading::backward_looking;
        out.warnings.push_back("causal direction is Y -> X; compare against a leave-one-out index");
    }
    return out;
}

} // namespace capmscm::graph
