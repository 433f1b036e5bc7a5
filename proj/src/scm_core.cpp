#include "capmscm/scm_core.hpp"

#include "capmscm/error.hpp"
#include "capmscm/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <queue>
#include <thread>
#include <tuple>

namespace capmscm::scm {

namespace {

constexpr std::size_t kBlockRows = 4096;
constexpr std::uint64_t kSeriesTag = 0x5e51e5ULL;

std::vector<std::vector<std::size_t>> adjacency(const TimeIndexedDag& dag) {
    std::vector<std::vector<std::size_t>> out(dag.nodes().size());
    for (const auto& e : dag.edges()) {
        out[*dag.index_of(e.from)].push_back(*dag.index_of(e.to));
    }
    return out;
}

// Tarjan's strongly connected components; returns components with more than one node.
std::vector<std::vector<std::size_t>> nontrivial_sccs(const std::vector<std::vector<std::size_t>>& adj) {
    const std::size_t n = adj.size();
    std::vector<int> index(n, -1), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> out;
    int counter = 0;

    std::function<void(std::size_t)> visit = [&](std::size_t v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
        for (std::size_t w : adj[v]) {
            if (index[w] < 0) {
                visit(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            std::vector<std::size_t> comp;
            std::size_t w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                comp.push_back(w);
            } while (w != v);
            if (comp.size() > 1) {
                std::sort(comp.begin(), comp.end());
                out.push_back(std::move(comp));
            }
        }
    };
    for (std::size_t v = 0; v < n; ++v) {
        if (index[v] < 0) visit(v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void check_finite(double v, const std::string& what) {
    if (!std::isfinite(v)) throw Error(Errc::invalid_argument, what + " must be finite");
}

} // namespace

NodeRef NodeRef::parse(std::string_view text) {
    const auto at = text.rfind('@');
    if (at == std::string_view::npos || at == 0 || at + 1 == text.size()) {
        throw Error(Errc::invalid_argument,
                    "node reference '" + std::string(text) + "' must look like NAME@OFFSET");
    }
    int offset = 0;
    const auto digits = text.substr(at + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), offset);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
        throw Error(Errc::invalid_argument, "bad time offset in node reference '" + std::string(text) + "'");
    }
    return NodeRef{std::string(text.substr(0, at)), offset};
}

std::string NodeRef::str() const { return name + "@" + std::to_string(offset); }

const NodeRef& TimeIndexedDag::add_node(std::string name, int offset) {
    if (name.empty()) throw Error(Errc::invalid_argument, "node name must be non-empty");
    if (name.find('@') != std::string::npos) {
        throw Error(Errc::invalid_argument, "node name '" + name + "' must not contain '@'");
    }
    NodeRef ref{std::move(name), offset};
    if (contains(ref)) throw Error(Errc::duplicate_key, "duplicate node " + ref.str());
    nodes_.push_back(std::move(ref));
    return nodes_.back();
}

void TimeIndexedDag::add_edge(const NodeRef& from, const NodeRef& to) {
    if (!contains(from)) throw Error(Errc::invalid_argument, "unknown edge source " + from.str());
    if (!contains(to)) throw Error(Errc::invalid_argument, "unknown edge target " + to.str());
    if (has_edge(from, to)) {
        throw Error(Errc::duplicate_key, "duplicate edge " + from.str() + " -> " + to.str());
    }
    edges_.push_back(Edge{from, to});
}

bool TimeIndexedDag::remove_edge(const NodeRef& from, const NodeRef& to) {
    const auto it = std::find(edges_.begin(), edges_.end(), Edge{from, to});
    if (it == edges_.end()) return false;
    edges_.erase(it);
    return true;
}

void TimeIndexedDag::set_observed(const std::string& name, bool observed) {
    if (observed) {
        latent_.erase(name);
    } else {
        latent_.insert(name);
    }
}

std::optional<std::size_t> TimeIndexedDag::index_of(const NodeRef& node) const {
    const auto it = std::find(nodes_.begin(), nodes_.end(), node);
    if (it == nodes_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - nodes_.begin());
}

bool TimeIndexedDag::has_edge(const NodeRef& from, const NodeRef& to) const {
    return std::find(edges_.begin(), edges_.end(), Edge{from, to}) != edges_.end();
}

NodeRef TimeIndexedDag::resolve(std::string_view text) const {
    if (text.find('@') != std::string_view::npos) {
        NodeRef ref = NodeRef::parse(text);
        if (!contains(ref)) throw Error(Errc::invalid_argument, "unknown node " + ref.str());
        return ref;
    }
    const NodeRef* found = nullptr;
    for (const auto& n : nodes_) {
        if (n.name == text) {
            if (found) {
                throw Error(Errc::invalid_argument,
                            "node name '" + std::string(text) + "' is ambiguous; use NAME@OFFSET");
            }
            found = &n;
        }
    }
    if (!found) throw Error(Errc::invalid_argument, "unknown node '" + std::string(text) + "'");
    return *found;
}

std::vector<NodeRef> TimeIndexedDag::parents(const NodeRef& node) const {
    std::vector<NodeRef> out;
    for (const auto& e : edges_) {
        if (e.to == node) out.push_back(e.from);
    }
    return out;
}

std::vector<NodeRef> TimeIndexedDag::children(const NodeRef& node) const {
    std::vector<NodeRef> out;
    for (const auto& e : edges_) {
        if (e.from == node) out.push_back(e.to);
    }
    return out;
}

std::vector<std::string> TimeIndexedDag::names() const {
    std::vector<std::string> out;
    for (const auto& n : nodes_) {
        if (std::find(out.begin(), out.end(), n.name) == out.end()) out.push_back(n.name);
    }
    return out;
}

std::string_view to_string(ViolationKind kind) noexcept {
    switch (kind) {
    case ViolationKind::empty_graph: return "empty_graph";
    case ViolationKind::backward_edge: return "temporal_priority";
    case ViolationKind::self_loop: return "self_loop";
    case ViolationKind::cycle: return "cycle";
    }
    return "unknown";
}

ValidationVerdict validate_dag(const TimeIndexedDag& dag) {
    ValidationVerdict verdict;
    if (dag.nodes().empty()) {
        verdict.violations.push_back({ViolationKind::empty_graph, {}, "graph has no nodes"});
        return verdict;
    }
    for (const auto& e : dag.edges()) {
        if (e.from == e.to) {
            verdict.violations.push_back(
                {ViolationKind::self_loop, {e.from, e.to}, "self edge on " + e.from.str()});
        } else if (e.to.offset < e.from.offset) {
            verdict.violations.push_back({ViolationKind::backward_edge,
                                          {e.from, e.to},
                                          "edge " + e.from.str() + " -> " + e.to.str() +
                                              " points backward in time"});
        }
    }
    for (const auto& comp : nontrivial_sccs(adjacency(dag))) {
        Violation v{ViolationKind::cycle, {}, "directed cycle through"};
        for (std::size_t i : comp) {
            v.nodes.push_back(dag.nodes()[i]);
            v.message += " " + dag.nodes()[i].str();
        }
        verdict.violations.push_back(std::move(v));
    }
    return verdict;
}

bool is_acyclic(const TimeIndexedDag& dag) {
    for (const auto& e : dag.edges()) {
        if (e.from == e.to) return false;
    }
    return nontrivial_sccs(adjacency(dag)).empty();
}

std::vector<NodeRef> topological_order(const TimeIndexedDag& dag) {
    const auto& nodes = dag.nodes();
    const auto adj = adjacency(dag);
    std::vector<int> indegree(nodes.size(), 0);
    for (const auto& out : adj) {
        for (std::size_t w : out) ++indegree[w];
    }
    using Key = std::tuple<int, std::size_t>;
    std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (indegree[i] == 0) ready.emplace(nodes[i].offset, i);
    }
    std::vector<NodeRef> order;
    order.reserve(nodes.size());
    while (!ready.empty()) {
        const auto [offset, i] = ready.top();
        ready.pop();
        order.push_back(nodes[i]);
        for (std::size_t w : adj[i]) {
            if (--indegree[w] == 0) ready.emplace(nodes[w].offset, w);
        }
    }
    if (order.size() != nodes.size()) throw Error(Errc::invalid_dag, "graph contains a directed cycle");
    return order;
}

LinearSem::LinearSem(TimeIndexedDag dag, std::map<Edge, double> coefficients,
                     std::map<std::string, double> noise_std)
    : dag_(std::move(dag)), coefficients_(std::move(coefficients)), noise_std_(std::move(noise_std)) {
    for (const auto& e : dag_.edges()) {
        const auto it = coefficients_.find(e);
        if (it == coefficients_.end()) {
            throw Error(Errc::invalid_argument,
                        "edge " + e.from.str() + " -> " + e.to.str() + " has no coefficient");
        }
        check_finite(it->second, "coefficient of " + e.from.str() + " -> " + e.to.str());
    }
    for (const auto& [e, coef] : coefficients_) {
        if (!dag_.has_edge(e.from, e.to)) {
            throw Error(Errc::invalid_argument,
                        "coefficient given for missing edge " + e.from.str() + " -> " + e.to.str());
        }
    }
    const auto names = dag_.names();
    for (const auto& name : names) {
        const auto it = noise_std_.find(name);
        if (it == noise_std_.end()) throw Error(Errc::invalid_argument, "no noise sd for node " + name);
    }
    for (const auto& [name, sd] : noise_std_) {
        if (std::find(names.begin(), names.end(), name) == names.end()) {
            throw Error(Errc::invalid_argument, "noise sd given for unknown node " + name);
        }
        check_finite(sd, "noise sd of " + name);
        if (sd < 0.0) throw Error(Errc::invalid_argument, "noise sd of " + name + " is negative");
    }
}

double LinearSem::coefficient(const NodeRef& from, const NodeRef& to) const {
    const auto it = coefficients_.find(Edge{from, to});
    if (it == coefficients_.end()) {
        throw Error(Errc::invalid_argument, "no edge " + from.str() + " -> " + to.str());
    }
    return it->second;
}

double LinearSem::noise_std(const std::string& name) const {
    const auto it = noise_std_.find(name);
    if (it == noise_std_.end()) throw Error(Errc::invalid_argument, "unknown node " + name);
    return it->second;
}

double LinearSem::effective_noise_std(const NodeRef& node) const {
    if (clamps_.contains(node)) return 0.0;
    return noise_std(node.name);
}

std::optional<double> LinearSem::clamp(const NodeRef& node) const {
    const auto it = clamps_.find(node);
    if (it == clamps_.end()) return std::nullopt;
    return it->second;
}

SemBuilder& SemBuilder::node(std::string name, int offset, bool observed) {
    const auto& ref = dag_.add_node(std::move(name), offset);
    if (!observed) dag_.set_observed(ref.name, false);
    return *this;
}

SemBuilder& SemBuilder::edge(std::string_view from, std::string_view to, double coef) {
    const NodeRef f = dag_.resolve(from);
    const NodeRef t = dag_.resolve(to);
    dag_.add_edge(f, t);
    coefficients_[Edge{f, t}] = coef;
    return *this;
}

SemBuilder& SemBuilder::noise(std::string name, double sd) {
    noise_[std::move(name)] = sd;
    return *this;
}

LinearSem SemBuilder::build() const { return LinearSem(dag_, coefficients_, noise_); }

Eigen::Index SamplePanel::column_index(const NodeRef& node) const {
    const auto it = std::find(columns.begin(), columns.end(), node);
    if (it == columns.end()) throw Error(Errc::invalid_argument, "no column for " + node.str());
    return static_cast<Eigen::Index>(it - columns.begin());
}

SamplePanel simulate(const LinearSem& sem, std::size_t n_samples, std::uint64_t seed,
                     const SimulationOptions& options) {
    if (n_samples == 0) throw Error(Errc::invalid_argument, "n_samples must be positive");
    const auto verdict = validate_dag(sem.dag());
    if (!verdict.ok()) throw Error(Errc::invalid_dag, verdict.violations.front().message);

    SamplePanel panel;
    panel.seed = seed;
    panel.columns = topological_order(sem.dag());
    const std::size_t k = panel.columns.size();

    struct Plan {
        std::vector<std::pair<Eigen::Index, double>> parents;
        double sd = 0.0;
        std::optional<double> clamp;
        std::uint64_t stream_key = 0;
        std::uint64_t offset_key = 0;
    };
    std::vector<Plan> plan(k);
    for (std::size_t c = 0; c < k; ++c) {
        const NodeRef& node = panel.columns[c];
        plan[c].clamp = sem.clamp(node);
        plan[c].sd = sem.effective_noise_std(node);
        plan[c].stream_key = hash_name(node.name);
        plan[c].offset_key = static_cast<std::uint64_t>(static_cast<std::int64_t>(node.offset));
        for (const auto& p : sem.dag().parents(node)) {
            plan[c].parents.emplace_back(panel.column_index(p), sem.coefficient(p, node));
        }
    }

    panel.draws.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(k));
    const std::size_t n_blocks = (n_samples + kBlockRows - 1) / kBlockRows;

    auto run_block = [&](std::size_t b) {
        const auto r0 = static_cast<Eigen::Index>(b * kBlockRows);
        const auto r1 = static_cast<Eigen::Index>(std::min(n_samples, (b + 1) * kBlockRows));
        for (std::size_t c = 0; c < k; ++c) {
            const Plan& p = plan[c];
            auto col = panel.draws.col(static_cast<Eigen::Index>(c));
            if (p.clamp) {
                col.segment(r0, r1 - r0).setConstant(*p.clamp);
                continue;
            }
            NormalStream shocks(derive_seed(seed, p.stream_key, p.offset_key, b));
            for (Eigen::Index r = r0; r < r1; ++r) {
                double v = 0.0;
                for (const auto& [pc, coef] : p.parents) v += coef * panel.draws(r, pc);
                // Draw even when sd == 0 so streams stay aligned across parameter changes.
                const double z = shocks.next();
                col(r) = v + p.sd * z;
            }
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n_blocks)));
    if (threads == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t b = t; b < n_blocks; b += threads) run_block(b);
            });
        }
        for (auto& th : pool) th.join();
    }
    return panel;
}

Eigen::Index SeriesPanel::column_index(std::string_view name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(Errc::invalid_argument, "no series named " + std::string(name));
    return static_cast<Eigen::Index>(it - names.begin());
}

SeriesPanel simulate_series(const LinearSem& sem, std::size_t n_periods, std::uint64_t seed,
                            const SeriesOptions& options) {
    if (n_periods == 0) throw Error(Errc::invalid_argument, "n_periods must be positive");
    const auto verdict = validate_dag(sem.dag());
    if (!verdict.ok()) throw Error(Errc::invalid_dag, verdict.violations.front().message);

    const auto declared = sem.dag().names();
    const std::size_t m = declared.size();
    auto name_index = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(declared.begin(), declared.end(), name) - declared.begin());
    };

    struct Term {
        std::size_t source;
        int lag;
        double coef;
    };
    std::vector<std::vector<Term>> equations(m);
    for (const auto& [e, coef] : sem.coefficients()) {
        const std::size_t src = name_index(e.from.name);
        const std::size_t dst = name_index(e.to.name);
        const int lag = e.to.offset - e.from.offset;
        auto& eq = equations[dst];
        const auto dup = std::find_if(eq.begin(), eq.end(),
                                      [&](const Term& t) { return t.source == src && t.lag == lag; });
        if (dup != eq.end()) {
            if (dup->coef != coef) {
                throw Error(Errc::invalid_dag, "conflicting coefficients for " + e.from.name + " -> " +
                                                   e.to.name + " at lag " + std::to_string(lag));
            }
            continue;
        }
        eq.push_back(Term{src, lag, coef});
    }

    std::vector<std::optional<double>> clamp(m);
    for (const auto& [node, value] : sem.clamps()) {
        auto& slot = clamp[name_index(node.name)];
        if (slot && *slot != value) {
            throw Error(Errc::invalid_argument, "conflicting interventions on " + node.name);
        }
        slot = value;
    }

    // Order names so that contemporaneous (lag 0) parents come first.
    std::vector<int> indegree(m, 0);
    std::vector<std::vector<std::size_t>> contemporaneous(m);
    for (std::size_t v = 0; v < m; ++v) {
        if (clamp[v]) continue;
        for (const auto& t : equations[v]) {
            if (t.lag == 0) {
                contemporaneous[t.source].push_back(v);
                ++indegree[v];
            }
        }
    }
    std::vector<std::size_t> order;
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t v = 0; v < m; ++v) {
        if (indegree[v] == 0) ready.push(v);
    }
    while (!ready.empty()) {
        const std::size_t v = ready.top();
        ready.pop();
        order.push_back(v);
        for (std::size_t w : contemporaneous[v]) {
            if (--indegree[w] == 0) ready.push(w);
        }
    }
    if (order.size() != m) {
        throw Error(Errc::invalid_dag, "same-period edges between variable names form a cycle");
    }

    const std::size_t total = options.burn_in + n_periods;
    Eigen::MatrixXd values(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(m));
    Eigen::MatrixXd shocks(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(m));
    for (std::size_t v = 0; v < m; ++v) {
        const std::uint64_t key = hash_name(declared[v]);
        for (std::size_t b = 0; b * kBlockRows < total; ++b) {
            NormalStream stream(derive_seed(seed, key, kSeriesTag, b));
            const std::size_t end = std::min(total, (b + 1) * kBlockRows);
            for (std::size_t t = b * kBlockRows; t < end; ++t) {
                shocks(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v)) = stream.next();
            }
        }
    }

    for (std::size_t t = 0; t < total; ++t) {
        const auto row = static_cast<Eigen::Index>(t);
        for (std::size_t v : order) {
            const auto col = static_cast<Eigen::Index>(v);
            if (clamp[v]) {
                values(row, col) = *clamp[v];
                continue;
            }
            double x = 0.0;
            for (const auto& term : equations[v]) {
                if (static_cast<std::size_t>(term.lag) <= t) {
                    x += term.coef * values(row - term.lag, static_cast<Eigen::Index>(term.source));
                }
            }
            values(row, col) = x + sem.noise_std(declared[v]) * shocks(row, col);
        }
    }

    SeriesPanel out;
    out.names = declared;
    out.seed = seed;
    out.values = values.bottomRows(static_cast<Eigen::Index>(n_periods));
    return out;
}

double causal_effect_slope(const LinearSem& sem, const NodeRef& treatment, const NodeRef& outcome) {
    const auto& dag = sem.dag();
    if (!dag.contains(treatment)) throw Error(Errc::invalid_argument, "unknown node " + treatment.str());
    if (!dag.contains(outcome)) throw Error(Errc::invalid_argument, "unknown node " + outcome.str());
    if (treatment == outcome) throw Error(Errc::invalid_argument, "treatment and outcome must differ");
    const auto verdict = validate_dag(dag);
    if (!verdict.ok()) throw Error(Errc::invalid_dag, verdict.violations.front().message);

    std::map<NodeRef, double> effect;
    for (const auto& node : topological_order(dag)) {
        if (node == treatment) {
            effect[node] = 1.0;
            continue;
        }
        double total = 0.0;
        for (const auto& p : dag.parents(node)) {
            const auto it = effect.find(p);
            if (it != effect.end()) total += sem.coefficient(p, node) * it->second;
        }
        effect[node] = total;
    }
    return effect.at(outcome);
}

LinearSem intervene(const LinearSem& sem, const NodeRef& node, double value) {
    if (!sem.dag().contains(node)) throw Error(Errc::invalid_argument, "unknown node " + node.str());
    check_finite(value, "intervention value");
    LinearSem out = sem;
    for (const auto& p : sem.dag().parents(node)) {
        out.dag_.remove_edge(p, node);
        out.coefficients_.erase(Edge{p, node});
    }
    out.clamps_[node] = value;
    return out;
}

} // namespace capmscm::scm
