#include <doctest.h>

#include "oracles.hpp"

#include "capmscm/error.hpp"
#include "capmscm/graph_analysis.hpp"

#include <random>

using namespace capmscm;
using namespace capmscm::graph;
using scm::Edge;

namespace {

TimeIndexedDag make(const std::vector<NodeRef>& nodes, const std::vector<std::pair<NodeRef, NodeRef>>& edges) {
    TimeIndexedDag dag;
    for (const auto& n : nodes) dag.add_node(n.name, n.offset);
    for (const auto& [f, t] : edges) dag.add_edge(f, t);
    return dag;
}

const NodeRef Z0{"Z", 0}, X1{"X", 1}, Y1{"Y", 1}, Y2{"Y", 2}, X0{"X", 0}, Y0{"Y", 0}, Z1{"Z", 1}, X2{"X", 2};

TimeIndexedDag fork_dag() { return make({Z0, X1, Y1}, {{Z0, X1}, {Z0, Y1}}); }

AggregatorSpec spec(std::map<std::string, double> w, std::string target) {
    AggregatorSpec a;
    for (const auto& [k, v] : w) a.constituents.push_back(k);
    a.weights = std::move(w);
    a.target = std::move(target);
    return a;
}

TimeIndexedDag swap_xy(const TimeIndexedDag& dag) {
    auto rename = [](NodeRef n) {
        if (n.name == "X") n.name = "Y";
        else if (n.name == "Y") n.name = "X";
        return n;
    };
    TimeIndexedDag out;
    for (const auto& n : dag.nodes()) out.add_node(rename(n).name, n.offset);
    for (const auto& e : dag.edges()) out.add_edge(rename(e.from), rename(e.to));
    for (const auto& name : dag.names()) out.set_observed(rename({name, 0}).name, dag.observed(name));
    return out;
}

} // namespace

TEST_CASE("d-separation on the basic motifs") {
    const auto f = fork_dag();
    CHECK(d_separated(f, X1, Y1, {Z0}));
    CHECK_FALSE(d_separated(f, X1, Y1, {}));

    const auto collider = make({X0, Y0, Z1}, {{X0, Z1}, {Y0, Z1}});
    CHECK(d_separated(collider, X0, Y0, {}));
    CHECK_FALSE(d_separated(collider, X0, Y0, {Z1}));

    const NodeRef D{"D", 2};
    auto desc = collider;
    desc.add_node("D", 2);
    desc.add_edge(Z1, D);
    CHECK_FALSE(d_separated(desc, X0, Y0, {D}));

    const auto chain = make({Z0, X1, Y2}, {{Z0, X1}, {X1, Y2}});
    CHECK_FALSE(d_separated(chain, Z0, Y2, {}));
    CHECK(d_separated(chain, Z0, Y2, {X1}));

    CHECK_THROWS_AS(d_separated(f, X1, X1, {}), Error);
    CHECK_THROWS_AS(d_separated(f, X1, Y1, {X1}), Error);
}

TEST_CASE("d-separation agrees with path enumeration on random graphs") {
    std::mt19937_64 gen(7);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t n = 3 + gen() % 4;
        oracle::Parents p(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (gen() % 2) p[j] |= std::uint64_t{1} << i;
            }
        }
        const DagIndex idx(p);
        const std::size_t x = gen() % n;
        std::size_t y = gen() % n;
        if (x == y) y = (y + 1) % n;
        std::uint64_t z = gen() & ((std::uint64_t{1} << n) - 1);
        z &= ~((std::uint64_t{1} << x) | (std::uint64_t{1} << y));
        CHECK(d_separated(idx, x, y, z) == oracle::d_separated(p, x, y, z));
        CHECK(backdoor_clear(idx, x, y, z) == oracle::backdoor_clear(p, x, y, z));
    }
}

TEST_CASE("back-door criterion") {
    const auto capm = make({X0, Z0, Y0}, {{X0, Y0}, {Z0, Y0}});
    CHECK(backdoor_clear(capm, X0, Y0, {}));

    const auto f = fork_dag();
    CHECK_FALSE(backdoor_clear(f, X1, Y1, {}));
    CHECK(backdoor_clear(f, X1, Y1, {Z0}));

    const auto chain = make({Z0, X1, Y2}, {{Z0, X1}, {X1, Y2}});
    CHECK(backdoor_clear(chain, X1, Y2, {}));

    // Conditioning on a descendant of the treatment fails.
    const NodeRef M{"M", 3};
    auto med = chain;
    med.add_node("M", 3);
    med.add_edge(Y2, M);
    CHECK_FALSE(backdoor_clear(med, X1, Y2, {M}));
}

TEST_CASE("aggregator contradiction case split") {
    using S = AdmissibilityStatus;
    using R = AdmissibilityReason;

    auto v = check_aggregator_contradiction(spec({{"i", 0.5}, {"j", 0.5}}, "i"), 0.7);
    CHECK(v.status == S::contradiction);
    CHECK(v.rationale == R::cycle_detected);
    CHECK_FALSE(v.corollary.has_value());

    v = check_aggregator_contradiction(spec({{"i", 0.0}, {"j", 1.0}}, "i"), 0.7);
    CHECK(v.status == S::admissible);
    CHECK(v.rationale == R::leave_one_out);
    REQUIRE(v.corollary.has_value());
    CHECK(to_string(*v.corollary) == "ii");

    v = check_aggregator_contradiction(spec({{"i", 1.0}}, "i"), 0.7);
    CHECK(v.status == S::degenerate);
    CHECK(v.rationale == R::single_asset_market);
    CHECK(to_string(*v.corollary) == "iii");

    for (double w : {0.0, 0.3, 1.0}) {
        v = check_aggregator_contradiction(spec({{"i", w}, {"j", 1.0 - w}}, "i"), 0.0);
        CHECK(v.status == S::admissible);
        CHECK(v.rationale == R::beta_zero);
    }
}

TEST_CASE("aggregator sweep matches substitution") {
    const std::vector<std::string> names{"A", "B", "C", "D"};
    int checked = 0;
    for (std::size_t k = 1; k <= 4; ++k) {
        // All weight vectors on the 0.25 grid summing to one.
        std::vector<int> q(k, 0);
        std::function<void(std::size_t, int)> fill = [&](std::size_t pos, int left) {
            if (pos + 1 == k) {
                q[pos] = left;
                std::map<std::string, double> w;
                std::vector<double> wv;
                for (std::size_t j = 0; j < k; ++j) {
                    w[names[j]] = 0.25 * q[j];
                    wv.push_back(0.25 * q[j]);
                }
                for (std::size_t t = 0; t < k; ++t) {
                    for (double beta : {0.0, 0.5, -0.5, 1.0, -1.0}) {
                        const auto v = check_aggregator_contradiction(spec(w, names[t]), beta);
                        const auto want = oracle::aggregator_outcome(wv, t, beta);
                        switch (want) {
                        case oracle::Outcome::contradiction: CHECK(v.rationale == AdmissibilityReason::cycle_detected); break;
                        case oracle::Outcome::beta_zero: CHECK(v.rationale == AdmissibilityReason::beta_zero); break;
                        case oracle::Outcome::leave_one_out: CHECK(v.rationale == AdmissibilityReason::leave_one_out); break;
                        case oracle::Outcome::single_asset_market: CHECK(v.rationale == AdmissibilityReason::single_asset_market); break;
                        }
                        ++checked;
                    }
                }
                return;
            }
            for (int take = 0; take <= left; ++take) {
                q[pos] = take;
                fill(pos + 1, left - take);
            }
        };
        fill(0, 4);
    }
    CHECK(checked > 0);
}

TEST_CASE("aggregator spec validation") {
    CHECK_THROWS_AS(spec({{"i", 0.5}, {"j", 0.4}}, "i").validate(), Error);
    CHECK_THROWS_AS(spec({{"i", 1.5}, {"j", -0.5}}, "i").validate(), Error);
    CHECK_THROWS_AS(spec({{"i", 0.5}, {"j", 0.5}}, "k").validate(), Error);
    CHECK_NOTHROW(spec({{"i", 0.5}, {"j", 0.5 + 1e-13}}, "i").validate());
    CHECK_THROWS_AS(check_aggregator_contradiction(spec({{"i", 0.5}, {"j", 0.6}}, "i"), 0.0), Error);
}

TEST_CASE("aggregator edges close a same-period loop") {
    const NodeRef M0{"M", 0}, A0{"A", 0};
    const auto dag = make({M0, A0}, {{M0, A0}});
    const auto closed = with_aggregator_edges(dag, "M", "A");
    CHECK(closed.has_edge(A0, M0));
    CHECK_FALSE(scm::validate_dag(closed).ok());
}

TEST_CASE("necessary conditions checklist") {
    const NodeRef Mm1{"M", -1}, M0{"M", 0}, A0{"A", 0};
    const auto lagged = make({Mm1, A0}, {});
    auto r = necessary_conditions_checklist(lagged, Edge{Mm1, A0}, true, true);
    CHECK(r.temporal_priority);
    CHECK(r.acyclicity);
    CHECK(r.overall);
    CHECK(r.warnings.empty());

    const auto agg = with_aggregator_edges(make({M0, A0}, {}), "M", "A");
    r = necessary_conditions_checklist(agg, Edge{M0, A0}, true, true, true);
    CHECK(r.temporal_priority);
    CHECK_FALSE(r.acyclicity);
    CHECK_FALSE(r.overall);
    CHECK_FALSE(r.warnings.empty());

    r = necessary_conditions_checklist(make({M0, A0}, {}), Edge{M0, A0}, true, true);
    CHECK_FALSE(r.temporal_priority);

    r = necessary_conditions_checklist(lagged, Edge{Mm1, A0}, false, true);
    CHECK_FALSE(r.mechanism);
    CHECK_FALSE(r.overall);
    r = necessary_conditions_checklist(lagged, Edge{Mm1, A0}, true, false);
    CHECK_FALSE(r.overall);
}

TEST_CASE("taxonomy of three-node graphs") {
    auto c = classify_dag(fork_dag());
    CHECK(c.case_label == CaseLabel::a_fork);
    CHECK(c.beta_reading == BetaReading::proxy);

    c = classify_dag(make({Z0, X1, Y2}, {{Z0, X1}, {X1, Y2}}));
    CHECK(c.case_label == CaseLabel::b_chain_via_market);
    CHECK(c.beta_reading == BetaReading::causal_direct);

    c = classify_dag(make({Z0, Y1, X2}, {{Z0, Y1}, {Y1, X2}}));
    CHECK(c.case_label == CaseLabel::c_chain_via_asset);

    c = classify_dag(make({X0, Y0, Z1}, {{X0, Z1}, {Y0, Z1}}));
    CHECK(c.case_label == CaseLabel::d_collider_at_Z);
    REQUIRE_FALSE(c.warnings.empty());
    CHECK(c.warnings.front() == kColliderWarning);

    c = classify_dag(make({X0, Z0, Y1}, {{X0, Y1}, {Z0, Y1}}));
    CHECK(c.case_label == CaseLabel::e_market_causes_asset);

    c = classify_dag(make({Y0, Z0, X1}, {{Y0, X1}, {Z0, X1}}));
    CHECK(c.case_label == CaseLabel::f_asset_causes_market);

    auto latent = fork_dag();
    latent.set_observed("Z", false);
    c = classify_dag(latent);
    CHECK(c.case_label == CaseLabel::g_latent_confounder);
    CHECK(c.beta_reading == BetaReading::latent_shadow);

    // Same-period edges and extra nodes are not part of the taxonomy.
    CHECK(classify_dag(make({Z0, X0, Y0}, {{Z0, X0}, {Z0, Y0}})).case_label == CaseLabel::unclassified);
    auto extra = fork_dag();
    extra.add_node("W", 0);
    CHECK(classify_dag(extra).case_label == CaseLabel::unclassified);
    // Absolute offsets do not matter.
    CHECK(classify_dag(make({{"Z", 5}, {"X", 9}, {"Y", 7}}, {{{"Z", 5}, {"X", 9}}, {{"Z", 5}, {"Y", 7}}})).case_label ==
          CaseLabel::a_fork);
}

TEST_CASE("swapping X and Y maps b to c and e to f") {
    const std::vector<TimeIndexedDag> graphs{
        fork_dag(),
        make({Z0, X1, Y2}, {{Z0, X1}, {X1, Y2}}),
        make({Z0, Y1, X2}, {{Z0, Y1}, {Y1, X2}}),
        make({X0, Y0, Z1}, {{X0, Z1}, {Y0, Z1}}),
        make({X0, Z0, Y1}, {{X0, Y1}, {Z0, Y1}}),
        make({Y0, Z0, X1}, {{Y0, X1}, {Z0, X1}}),
    };
    const std::map<CaseLabel, CaseLabel> mirror{
        {CaseLabel::a_fork, CaseLabel::a_fork},
        {CaseLabel::b_chain_via_market, CaseLabel::c_chain_via_asset},
        {CaseLabel::c_chain_via_asset, CaseLabel::b_chain_via_market},
        {CaseLabel::d_collider_at_Z, CaseLabel::d_collider_at_Z},
        {CaseLabel::e_market_causes_asset, CaseLabel::f_asset_causes_market},
        {CaseLabel::f_asset_causes_market, CaseLabel::e_market_causes_asset},
        {CaseLabel::g_latent_confounder, CaseLabel::g_latent_confounder},
    };
    auto latent = fork_dag();
    latent.set_observed("Z", false);
    auto all = graphs;
    all.push_back(latent);
    for (const auto& g : all) {
        const auto before = classify_dag(g).case_label;
        REQUIRE(before != CaseLabel::unclassified);
        CHECK(classify_dag(swap_xy(g)).case_label == mirror.at(before));
    }
}
