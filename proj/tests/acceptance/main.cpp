// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "oracles.hpp"

#include "capmscm/analytics.hpp"
#include "capmscm/cli.hpp"
#include "capmscm/diagnostics.hpp"
#include "capmscm/graph_analysis.hpp"
#include "capmscm/monte_carlo.hpp"
#include "capmscm/regression.hpp"
#include "capmscm/scm_core.hpp"
#include "capmscm/synthetic.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace capmscm;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass;
    std::string line;
};
std::map<int, Verdict> results;

void report(int id, const char* what, bool pass, const std::string& detail) {
    char head[16];
    std::snprintf(head, sizeof head, "%s %2d ", pass ? "PASS" : "FAIL", id);
    results[id] = {pass, head + std::string(what) + ": " + detail};
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

graph::AggregatorSpec spec_of(const std::map<std::string, double>& w, const std::string& target) {
    graph::AggregatorSpec a;
    for (const auto& [k, v] : w) a.constituents.push_back(k);
    a.weights = w;
    a.target = target;
    return a;
}

void fork_curve_and_loading() {
    analytics::ForkParams p;  // a = b = sigma_z = sigma_y = 1
    const auto grid = analytics::default_sigma_grid();
    const auto t0 = std::chrono::steady_clock::now();
    const auto mc = analytics::monte_carlo_fork(p, grid, 100000, 20240101);
    const double secs = seconds_since(t0);

    double beta_dev = 0.0, load_dev = 0.0;
    for (const auto& pt : mc) {
        const double s2 = pt.sigma_x * pt.sigma_x;
        const double beta = 1.0 / (1.0 + s2);
        const double loading = s2 / (1.0 + s2);
        beta_dev = std::max(beta_dev, std::abs(pt.beta_hat - beta));
        load_dev = std::max(load_dev, std::abs(pt.loading_hat - loading));
    }
    report(1, "fork slope over sigma_x grid", mc.size() == 21 && beta_dev <= 0.02 && secs <= 10.0,
           fmt("21 points, max |beta_hat - beta| = %.4f, %.2f s", beta_dev, secs));
    report(3, "post-hedge residual loading", mc.size() == 21 && load_dev <= 0.03,
           fmt("max |loading_hat - loading| = %.4f", load_dev));
}

void chain_curve() {
    analytics::ChainParams p;  // c = 1
    const auto mc = analytics::monte_carlo_chain(p, analytics::default_sigma_grid(), 100000, 20240102);
    double dev = 0.0;
    for (const auto& pt : mc) dev = std::max(dev, std::abs(pt.beta_hat - 1.0));
    report(2, "chain slope over sigma_x grid", mc.size() == 21 && dev <= 0.02,
           fmt("max |beta_hat - 1| = %.4f", dev));
}

void aggregator_sweep() {
    const std::vector<std::string> names{"A", "B", "C", "D"};
    std::size_t checked = 0, mismatches = 0;
    for (std::size_t k = 1; k <= 4; ++k) {
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
                        using R = graph::AdmissibilityReason;
                        const auto got = graph::check_aggregator_contradiction(spec_of(w, names[t]), beta).rationale;
                        R want = R::cycle_detected;
                        switch (oracle::aggregator_outcome(wv, t, beta)) {
                        case oracle::Outcome::contradiction: want = R::cycle_detected; break;
                        case oracle::Outcome::beta_zero: want = R::beta_zero; break;
                        case oracle::Outcome::leave_one_out: want = R::leave_one_out; break;
                        case oracle::Outcome::single_asset_market: want = R::single_asset_market; break;
                        }
                        if (got != want) ++mismatches;
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
    report(4, "aggregator case split", mismatches == 0,
           std::to_string(checked) + " cases, " + std::to_string(mismatches) + " mismatches");
}

void dsep_exhaustive() {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t dags = 0, queries = 0, mismatches = 0;
    for (std::size_t n = 2; n <= 5; ++n) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
        // Each unordered pair is absent, i -> j or j -> i.
        std::size_t total = 1;
        for (std::size_t k = 0; k < pairs.size(); ++k) total *= 3;
        for (std::size_t code = 0; code < total; ++code) {
            oracle::Parents p(n, 0);
            std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
            std::size_t c = code;
            for (const auto& [i, j] : pairs) {
                const auto d = c % 3;
                c /= 3;
                if (d == 1) {
                    p[j] |= std::uint64_t{1} << i;
                    adj[i][j] = true;
                } else if (d == 2) {
                    p[i] |= std::uint64_t{1} << j;
                    adj[j][i] = true;
                }
            }
            if (!oracle::acyclic(adj)) continue;
            ++dags;
            const graph::DagIndex index(p);
            for (std::size_t x = 0; x < n; ++x) {
                for (std::size_t y = 0; y < n; ++y) {
                    if (x == y) continue;
                    const std::uint64_t free = ((std::uint64_t{1} << n) - 1) & ~(std::uint64_t{1} << x) &
                                               ~(std::uint64_t{1} << y);
                    // Every subset of the remaining nodes.
                    for (std::uint64_t z = free;; z = (z - 1) & free) {
                        if (graph::d_separated(index, x, y, z) != oracle::d_separated(p, x, y, z)) ++mismatches;
                        ++queries;
                        if (z == 0) break;
                    }
                }
            }
        }
    }
    const double secs = seconds_since(t0);
    report(5, "d-separation against path enumeration", mismatches == 0 && secs <= 60.0,
           std::to_string(dags) + " labeled DAGs, " + std::to_string(queries) + " queries, " +
               std::to_string(mismatches) + " mismatches" + fmt(", %.2f s", secs));
}

void ols_equals_do() {
    std::mt19937_64 gen(606);
    std::uniform_real_distribution<double> coef(-2.0, 2.0), sd(0.1, 2.0), unit(0.0, 1.0);
    constexpr int kWanted = 500;
    constexpr std::size_t kNodes = 6;
    int found = 0, within = 0, tries = 0;
    double worst = 0.0;
    while (found < kWanted && tries < 100000) {
        ++tries;
        // Random order, random edges forward in that order.
        std::vector<std::size_t> order(kNodes);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), gen);
        scm::SemBuilder b;
        std::vector<std::string> names;
        for (std::size_t v = 0; v < kNodes; ++v) {
            names.push_back("V" + std::to_string(v));
            b.node(names.back());
            b.noise(names.back(), sd(gen));
        }
        for (std::size_t i = 0; i < kNodes; ++i) {
            for (std::size_t j = i + 1; j < kNodes; ++j) {
                if (unit(gen) < 0.45) b.edge(names[order[i]] + "@0", names[order[j]] + "@0", coef(gen));
            }
        }
        const auto sem = b.build();
        const std::size_t xi = gen() % kNodes;
        std::size_t yi = gen() % (kNodes - 1);
        if (yi >= xi) ++yi;
        const auto x = scm::NodeRef::parse(names[xi] + "@0");
        const auto y = scm::NodeRef::parse(names[yi] + "@0");
        if (!graph::backdoor_clear(sem.dag(), x, y, {})) continue;

        const auto draws = scm::simulate(sem, 100000, 7000 + static_cast<std::uint64_t>(found));
        const auto fit = regression::ols(regression::DesignMatrix::with_intercept(draws.column(y)).add("x", draws.column(x)));
        const double truth = scm::causal_effect_slope(sem, x, y);
        const double z = std::abs(fit.coefficient("x") - truth) / fit.std_error("x");
        worst = std::max(worst, z);
        if (z <= 4.0) ++within;
        ++found;
    }
    const double share = found > 0 ? static_cast<double>(within) / found : 0.0;
    report(6, "OLS equals the do-slope when the back door is clear", found == kWanted && share >= 0.99,
           std::to_string(within) + "/" + std::to_string(found) + " within 4 SE" + fmt(", worst %.2f SE", worst));
}

void lag_signatures() {
    int b_ok = 0, c_ok = 0;
    constexpr int kReps = 200;
    for (int r = 0; r < kReps; ++r) {
        const auto s = synthetic::chain_b_panel({}, {}, 50000 + static_cast<std::uint64_t>(r));
        const auto ll = diagnostics::lead_lag_test(s.panel, s.controls);
        const auto& c1 = ll.market_leads.lags.at(1);
        if (std::abs(c1.coef - 0.5) <= 4.0 * c1.se && ll.direction == diagnostics::LeadDirection::market_leads) ++b_ok;
    }
    synthetic::PanelShape shape;
    shape.assets = 4;
    shape.periods = 1500;
    diagnostics::LeadLagOptions focus;
    focus.assets = {"A01"};
    for (int r = 0; r < kReps; ++r) {
        const auto s = synthetic::chain_c_panel({}, shape, 60000 + static_cast<std::uint64_t>(r));
        const auto ll = diagnostics::lead_lag_test(s.panel, s.controls, focus);
        const auto loo = diagnostics::leave_one_out_compare(s.panel, s.focus_asset, spec_of(s.weights, s.focus_asset));
        if (ll.direction == diagnostics::LeadDirection::asset_leads && loo.drop_fraction && *loo.drop_fraction >= 0.5)
            ++c_ok;
    }
    const bool pass = b_ok >= 190 && c_ok >= 190;
    report(7, "lag-profile signatures", pass,
           "market leads " + std::to_string(b_ok) + "/200, asset leads with drop >= 0.5 " + std::to_string(c_ok) + "/200");
}

void environment_betas() {
    synthetic::ForkPanelParams base;
    base.sigma_x = 0.5;  // proxy slope b / 1.25
    const auto rp = synthetic::regime_fork_panel(base, {{"Base", 1.0}, {"Stress", 1.5}}, 50000, 808);
    const io::ShockControls none{rp.panel.dates, {}, std::nullopt, false};
    const auto t = diagnostics::environment_betas(rp.panel, rp.labeling, none);
    bool pass = t.fit.betas.size() == 2;
    double dev = 0.0;
    if (pass) {
        dev = std::max(std::abs(t.fit.betas[0].beta - 0.8), std::abs(t.fit.betas[1].beta - 1.2));
        pass = dev <= 0.05;
    }
    report(8, "environment betas", pass,
           pass || t.fit.betas.size() == 2
               ? fmt("Base %.4f, Stress %.4f, max dev %.4f", t.fit.betas[0].beta, t.fit.betas[1].beta, dev)
               : "expected two environments");
}

void fork_attenuation() {
    const auto f = synthetic::fork_panel({}, {}, 909);
    const auto r = diagnostics::shock_day_attenuation(f.panel, f.events, f.controls);
    const double with_t = std::abs(r.with_controls.beta) / r.with_controls.se;
    const double without_t = r.without_controls.beta / r.without_controls.se;
    report(9, "shock-day attenuation on a synthetic fork", with_t <= 4.0 && without_t > 10.0,
           fmt("with controls %.2f SE from 0, without controls %.1f SE", with_t, without_t));
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    if (!fs::exists(dir)) return files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        files[fs::relative(e.path(), dir).generic_string()] = s.str();
    }
    return files;
}

int run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    return cli::run(args, out, err);
}

void cli_determinism() {
    const fs::path root = fs::current_path() / "acceptance_work";
    fs::remove_all(root);
    fs::create_directories(root);
    {
        std::ofstream(root / "dag.json") << R"({"nodes":[{"name":"Z","offset":0},{"name":"X","offset":1},{"name":"Y","offset":1}],
  "edges":[{"from":"Z@0","to":"X@1","coef":1},{"from":"Z@0","to":"Y@1","coef":1}],
  "weights":{"Y":0.2,"B":0.8},"target":"Y"})";
        std::ofstream(root / "sem.json") << R"({"nodes":[{"name":"Z","offset":0},{"name":"X","offset":0},{"name":"Y","offset":0}],
  "edges":[{"from":"Z@0","to":"X@0","coef":0.8},{"from":"Z@0","to":"Y@0","coef":-0.5},{"from":"X@0","to":"Y@0","coef":1.5}],
  "noise":{"Z":1,"X":0.7,"Y":1.2}})";
    }
    // The bundle for diagnose comes from simulate itself.
    const bool bundle = run_cli({"simulate", "--preset", "fork", "--grid-points", "2", "--n", "2000", "--tolerance", "1",
                                 "--loading-tolerance", "1", "--emit-panel", "--seed", "17",
                                 "--out", (root / "bundle").string()}) == cli::ok;

    const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
        {"simulate", {"simulate", "--preset", "fork", "--grid-points", "5", "--n", "20000", "--tolerance", "1",
                      "--loading-tolerance", "1", "--emit-panel", "--seed", "21"}},
        {"simulate-chain", {"simulate", "--preset", "chain", "--grid-points", "5", "--n", "20000", "--tolerance", "1",
                            "--emit-panel", "--seed", "22"}},
        {"simulate-sem", {"simulate", "--sem", (root / "sem.json").string(), "--treatment", "X@0", "--outcome", "Y@0",
                          "--n", "20000", "--tolerance", "1", "--seed", "23"}},
        {"replicate-fig3", {"replicate-fig3", "--grid-points", "5", "--n", "20000", "--seed", "24"}},
        {"check-dag", {"check-dag", "--dag", (root / "dag.json").string()}},
        {"diagnose", {"diagnose", "--config", (root / "bundle" / "panel" / "diagnose.json").string()}},
    };

    std::vector<std::string> broken;
    for (const auto& [label, base] : commands) {
        std::vector<std::map<std::string, std::string>> runs;
        int first_code = -1;
        bool same_code = true;
        for (const auto& [tag, threads] : std::vector<std::pair<std::string, std::string>>{{"a", "1"}, {"b", "1"}, {"c", "4"}}) {
            auto args = base;
            const auto dir = root / label / tag;
            args.insert(args.end(), {"--threads", threads, "--out", dir.string()});
            const int code = run_cli(args);
            if (first_code < 0) first_code = code;
            same_code = same_code && code == first_code;
            runs.push_back(snapshot(dir));
        }
        const bool ok = bundle && same_code && (first_code == cli::ok || first_code == cli::tolerance) &&
                        !runs[0].empty() && runs[0] == runs[1] && runs[0] == runs[2];
        if (!ok) broken.push_back(label);
    }
    std::string detail = std::to_string(commands.size()) + " invocations x (rerun, threads 1 vs 4)";
    if (!broken.empty()) {
        detail += "; differing:";
        for (const auto& b : broken) detail += " " + b;
    }
    report(10, "byte-identical CLI outputs", broken.empty(), detail);
}

} // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    fork_curve_and_loading();
    chain_curve();
    aggregator_sweep();
    dsep_exhaustive();
    ols_equals_do();
    lag_signatures();
    environment_betas();
    fork_attenuation();
    cli_determinism();
    int failures = 0;
    for (const auto& [id, r] : results) {
        std::printf("%s\n", r.line.c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%d failed, %.1f s\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
