#include "capmscm/synthetic.hpp"

#include "capmscm/error.hpp"
#include "capmscm/rng.hpp"

#include <algorithm>
#include <cstdio>

namespace capmscm::synthetic {

namespace {

std::map<std::string, double> equal_weights(const std::vector<std::string>& assets) {
    std::map<std::string, double> w;
    for (const auto& a : assets) w[a] = 1.0 / static_cast<double>(assets.size());
    return w;
}

void check_shape(const PanelShape& shape) {
    if (shape.periods < 2 || shape.assets == 0 || shape.event_spacing == 0) {
        throw Error(Errc::invalid_argument, "synthetic panel needs periods >= 2, assets >= 1 and event_spacing >= 1");
    }
}

scm::SeriesPanel unroll(const scm::LinearSem& sem, const PanelShape& shape, std::uint64_t seed) {
    // One extra period so the lagged driver exists on the first date.
    return scm::simulate_series(sem, shape.periods + 1, seed, {shape.burn_in});
}

} // namespace

io::Date default_start() { return io::parse_date("2015-01-02"); }

std::vector<std::string> asset_names(std::size_t count) {
    std::vector<std::string> out;
    for (std::size_t k = 1; k <= count; ++k) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "A%02zu", k);
        out.emplace_back(buf);
    }
    return out;
}

scm::LinearSem fork_template(const ForkPanelParams& p, const std::vector<std::string>& assets) {
    scm::SemBuilder b;
    b.node("Z", 0).node("X", 1).edge("Z@0", "X@1", p.a).noise("Z", p.sigma_z).noise("X", p.sigma_x);
    for (const auto& a : assets) b.node(a, 1).edge("Z@0", a + "@1", p.b).noise(a, p.sigma_y);
    return b.build();
}

scm::LinearSem chain_b_template(const ChainBParams& p, const std::vector<std::string>& assets) {
    scm::SemBuilder b;
    b.node("Z", 0).node("X", 1).edge("Z@0", "X@1", p.a).noise("Z", p.sigma_z).noise("X", p.sigma_x);
    for (const auto& a : assets) b.node(a, 2).edge("X@1", a + "@2", p.c).noise(a, p.sigma_y);
    return b.build();
}

scm::LinearSem chain_c_template(const ChainCParams& p, const std::vector<std::string>& assets,
                                const std::map<std::string, double>& weights) {
    if (assets.empty()) throw Error(Errc::invalid_argument, "chain panel needs at least one asset");
    scm::SemBuilder b;
    b.node("Z", 0).node("X", 1).node("X", 2).noise("Z", p.sigma_z).noise("X", p.sigma_x);
    for (const auto& a : assets) {
        b.node(a, 1).edge("Z@0", a + "@1", p.b).edge(a + "@1", "X@1", weights.at(a)).noise(a, p.sigma_y);
    }
    b.edge(assets.front() + "@1", "X@2", p.g);
    return b.build();
}

SyntheticPanel panel_from_series(const scm::SeriesPanel& series, const std::string& market,
                                 const std::vector<std::string>& assets, const std::string& driver,
                                 std::size_t event_spacing) {
    const auto total = static_cast<std::size_t>(series.values.rows());
    if (total < 2) throw Error(Errc::invalid_argument, "series too short for a panel");
    const std::size_t n = total - 1;
    const auto rows = static_cast<Eigen::Index>(n);

    SyntheticPanel out;
    auto& panel = out.panel;
    panel.market_id = kMarketId;
    panel.assets = assets;
    panel.dates = io::business_days(default_start(), n);
    panel.market_return = series.series(market).tail(rows);
    panel.asset_returns.resize(rows, static_cast<Eigen::Index>(assets.size()));
    for (std::size_t a = 0; a < assets.size(); ++a) {
        panel.asset_returns.col(static_cast<Eigen::Index>(a)) = series.series(assets[a]).tail(rows);
    }
    out.controls.dates = panel.dates;
    out.controls.common["z"] = series.series(driver).head(rows);
    for (std::size_t r = 0; r < n; r += event_spacing) out.events.push_back(panel.dates[r]);
    return out;
}

SyntheticPanel fork_panel(const ForkPanelParams& p, const PanelShape& shape, std::uint64_t seed) {
    check_shape(shape);
    const auto assets = asset_names(shape.assets);
    auto out = panel_from_series(unroll(fork_template(p, assets), shape, seed), "X", assets, "Z", shape.event_spacing);
    out.weights = equal_weights(assets);
    out.focus_asset = assets.front();
    return out;
}

SyntheticPanel chain_b_panel(const ChainBParams& p, const PanelShape& shape, std::uint64_t seed) {
    check_shape(shape);
    const auto assets = asset_names(shape.assets);
    auto out = panel_from_series(unroll(chain_b_template(p, assets), shape, seed), "X", assets, "Z",
                                 shape.event_spacing);
    out.weights = equal_weights(assets);
    out.focus_asset = assets.front();
    return out;
}

SyntheticPanel chain_c_panel(const ChainCParams& p, const PanelShape& shape, std::uint64_t seed) {
    check_shape(shape);
    if (!(p.focus_weight > 0.0 && p.focus_weight <= 1.0)) {
        throw Error(Errc::invalid_argument, "focus_weight must lie in (0, 1]");
    }
    if (shape.assets == 1 && p.focus_weight != 1.0) {
        throw Error(Errc::invalid_argument, "a one-asset index needs focus_weight 1");
    }
    const auto assets = asset_names(shape.assets);
    std::map<std::string, double> weights;
    for (std::size_t k = 0; k < assets.size(); ++k) {
        weights[assets[k]] = k == 0 ? p.focus_weight : (1.0 - p.focus_weight) / static_cast<double>(assets.size() - 1);
    }
    auto out = panel_from_series(unroll(chain_c_template(p, assets, weights), shape, seed), "X", assets, "Z",
                                 shape.event_spacing);
    out.weights = std::move(weights);
    out.focus_asset = assets.front();
    return out;
}

RegimePanel regime_fork_panel(const ForkPanelParams& base, const std::vector<Regime>& regimes,
                              std::size_t rows_per_regime, std::uint64_t seed) {
    if (regimes.empty() || rows_per_regime < 2) {
        throw Error(Errc::invalid_argument, "need at least one regime with two or more rows");
    }
    io::LabelParams params;
    if (regimes.front().label != params.base_label) {
        throw Error(Errc::invalid_argument, "the first regime must be labelled " + params.base_label);
    }
    const auto assets = asset_names(1);
    const auto n = static_cast<Eigen::Index>(rows_per_regime * regimes.size());
    const auto block = static_cast<Eigen::Index>(rows_per_regime);

    RegimePanel out;
    auto& panel = out.panel;
    panel.market_id = kMarketId;
    panel.assets = assets;
    panel.dates = io::business_days(default_start(), static_cast<std::size_t>(n));
    panel.market_return.resize(n);
    panel.asset_returns.resize(n, 1);
    Eigen::VectorXd z(n);

    for (std::size_t k = 0; k < regimes.size(); ++k) {
        ForkPanelParams p = base;
        p.b = regimes[k].b;
        PanelShape shape;
        shape.periods = rows_per_regime;
        shape.assets = 1;
        const auto series = unroll(fork_template(p, assets), shape, derive_seed(seed, hash_name(regimes[k].label), k));
        const auto at = static_cast<Eigen::Index>(k) * block;
        panel.market_return.segment(at, block) = series.series("X").tail(block);
        panel.asset_returns.col(0).segment(at, block) = series.series(assets[0]).tail(block);
        z.segment(at, block) = series.series("Z").head(block);
        if (k > 0) {
            params.episodes.push_back({regimes[k].label, panel.dates[static_cast<std::size_t>(at)],
                                       panel.dates[static_cast<std::size_t>(at + block - 1)]});
        }
    }
    out.controls.dates = panel.dates;
    out.controls.common["z"] = std::move(z);
    out.labeling = io::label_environments(panel, io::EnvScheme::episodes, nullptr, params);
    return out;
}

} // namespace capmscm::synthetic
