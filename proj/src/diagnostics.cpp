#include "capmscm/diagnostics.hpp"

#include "capmscm/error.hpp"
#include "capmscm/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace capmscm::diagnostics {

namespace {

using regression::Controls;
using regression::DesignMatrix;
using regression::RegressionFit;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_panel(const ReturnPanel& panel) {
    if (panel.size() == 0) throw Error(Errc::invalid_argument, "panel is empty");
    if (static_cast<std::size_t>(panel.market_return.size()) != panel.size()) {
        throw Error(Errc::missing_market_series, "panel has no market return series");
    }
}

void check_controls(const ReturnPanel& panel, const ShockControls& controls) {
    if (controls.dates != panel.dates) {
        throw Error(Errc::invalid_argument, "controls are not aligned with the panel dates");
    }
}

std::vector<std::size_t> event_rows(const ReturnPanel& panel, const std::vector<Date>& events) {
    std::set<std::size_t> rows;
    for (const Date d : events) {
        if (const auto r = panel.date_index(d)) rows.insert(*r);
    }
    return {rows.begin(), rows.end()};
}

/// Stacked (asset, row) observations with the controls in names() order.
struct PooledRows {
    Eigen::VectorXd y;
    Eigen::VectorXd market;
    Controls controls;
    std::vector<std::int64_t> clusters;
};

PooledRows pool(const ReturnPanel& panel, const std::vector<std::size_t>& rows, const ShockControls* controls) {
    PooledRows out;
    const std::size_t n_assets = panel.assets.size();
    const auto n = static_cast<Eigen::Index>(rows.size() * n_assets);
    out.y.resize(n);
    out.market.resize(n);
    if (controls) out.controls.names = controls->names();
    const auto k = static_cast<Eigen::Index>(out.controls.names.size());
    out.controls.values.resize(n, k);
    std::vector<double> buf(static_cast<std::size_t>(k));
    Eigen::Index i = 0;
    for (const std::size_t r : rows) {
        for (std::size_t a = 0; a < n_assets; ++a, ++i) {
            out.y(i) = panel.asset_returns(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a));
            out.market(i) = panel.market_return(static_cast<Eigen::Index>(r));
            if (k > 0) {
                controls->fill_row(r, a, buf.data());
                for (Eigen::Index j = 0; j < k; ++j) out.controls.values(i, j) = buf[static_cast<std::size_t>(j)];
            }
            out.clusters.push_back(static_cast<std::int64_t>(r));
        }
    }
    return out;
}

Slope market_slope(const PooledRows& rows, const Controls& controls, regression::SeKind se_kind) {
    DesignMatrix d = DesignMatrix::with_intercept(rows.y);
    d.clusters = rows.clusters;
    d.add("market", rows.market);
    for (std::size_t j = 0; j < controls.names.size(); ++j) {
        d.add(controls.names[j], controls.values.col(static_cast<Eigen::Index>(j)));
    }
    const RegressionFit fit = regression::ols(d, se_kind);
    return {fit.coefficient("market"), fit.std_error("market")};
}

Controls select(const Controls& c, const std::vector<std::string>& names) {
    Controls out;
    for (std::size_t j = 0; j < c.names.size(); ++j) {
        if (std::find(names.begin(), names.end(), c.names[j]) == names.end()) continue;
        out.names.push_back(c.names[j]);
    }
    out.values.resize(c.values.rows(), static_cast<Eigen::Index>(out.names.size()));
    Eigen::Index k = 0;
    for (std::size_t j = 0; j < c.names.size(); ++j) {
        if (std::find(names.begin(), names.end(), c.names[j]) == names.end()) continue;
        out.values.col(k++) = c.values.col(static_cast<Eigen::Index>(j));
    }
    return out;
}

bool significant(const regression::LagProfile& p, double threshold) {
    for (const auto& l : p.lags) {
        if (l.lag >= 1 && l.se > 0.0 && std::abs(l.coef) / l.se > threshold) return true;
    }
    return false;
}

Controls lagged_self(const Eigen::VectorXd& y, int max_lag) {
    Controls c;
    c.values = Eigen::MatrixXd::Constant(y.size(), max_lag, kNaN);
    for (int k = 1; k <= max_lag; ++k) {
        c.names.push_back("own_lag_" + std::to_string(k));
        for (Eigen::Index t = k; t < y.size(); ++t) c.values(t, k - 1) = y(t - k);
    }
    return c;
}

Controls concat(const Controls& a, const Controls& b) {
    Controls out;
    out.names = a.names;
    out.names.insert(out.names.end(), b.names.begin(), b.names.end());
    const Eigen::Index rows = a.empty() ? b.values.rows() : a.values.rows();
    out.values.resize(rows, static_cast<Eigen::Index>(out.names.size()));
    if (!a.empty()) out.values.leftCols(a.values.cols()) = a.values;
    if (!b.empty()) out.values.rightCols(b.values.cols()) = b.values;
    return out;
}

} // namespace

AttenuationRecord shock_day_attenuation(const ReturnPanel& panel, const std::vector<Date>& events,
                                        const ShockControls& controls, const AttenuationOptions& options) {
    check_panel(panel);
    check_controls(panel, controls);
    if (controls.empty()) throw Error(Errc::invalid_argument, "shock-day attenuation needs at least one control");
    const auto rows = event_rows(panel, events);
    if (rows.size() < options.min_events) {
        throw Error(Errc::too_few_events, std::to_string(rows.size()) + " event dates fall in the panel, need " +
                                              std::to_string(options.min_events));
    }

    const PooledRows pooled = pool(panel, rows, &controls);
    const Controls kept = pooled.controls.without_constant_columns();

    AttenuationRecord out;
    out.n_events = rows.size();
    out.n_obs = static_cast<std::size_t>(pooled.y.size());
    out.controls_used = kept.names;
    out.without_controls = market_slope(pooled, Controls{}, options.se_kind);
    out.with_controls = kept.empty() ? out.without_controls : market_slope(pooled, kept, options.se_kind);
    if (out.without_controls.beta != 0.0) out.ratio = out.with_controls.beta / out.without_controls.beta;
    if (controls.sector_ret) {
        std::vector<std::string> common;
        for (const auto& n : kept.names) {
            if (n != "sector_ret") common.push_back(n);
        }
        const Controls no_sector = select(kept, common);
        out.with_controls_no_sector =
            no_sector.empty() ? out.without_controls : market_slope(pooled, no_sector, options.se_kind);
    }
    return out;
}

EnvironmentTable environment_betas(const ReturnPanel& panel, const io::EnvironmentLabeling& labeling,
                                   const ShockControls& controls, const EnvironmentOptions& options) {
    check_panel(panel);
    if (labeling.labels.size() != panel.size()) {
        throw Error(Errc::invalid_argument, "labeling does not cover the panel dates");
    }
    const bool use_controls = !controls.empty();
    if (use_controls) check_controls(panel, controls);

    std::vector<std::size_t> rows;
    std::set<std::string> labels;
    for (std::size_t r = 0; r < panel.size(); ++r) {
        if (labeling.labels[r].empty()) continue;
        rows.push_back(r);
        labels.insert(labeling.labels[r]);
    }
    if (rows.empty()) throw Error(Errc::insufficient_observations, "no labeled dates");

    std::string base = options.base_environment;
    if (base.empty()) base = labels.contains("Base") ? "Base" : *labels.begin();

    PooledRows pooled = pool(panel, rows, use_controls ? &controls : nullptr);
    regression::EnvironmentRows env;
    env.y = std::move(pooled.y);
    env.market = std::move(pooled.market);
    env.controls = std::move(pooled.controls);
    env.clusters = std::move(pooled.clusters);
    for (const std::size_t r : rows) {
        for (std::size_t a = 0; a < panel.assets.size(); ++a) env.environment.push_back(labeling.labels[r]);
    }

    EnvironmentTable out;
    out.scheme = std::string(io::to_string(labeling.scheme));
    out.unlabeled_rows = (panel.size() - rows.size()) * panel.assets.size();
    out.fit = regression::interaction_fit(env, base, {options.min_rows, options.se_kind});
    return out;
}

std::string_view to_string(LeadDirection d) noexcept {
    switch (d) {
    case LeadDirection::neither: return "neither";
    case LeadDirection::market_leads: return "market_leads";
    case LeadDirection::asset_leads: return "asset_leads";
    case LeadDirection::both: return "both";
    }
    return "unknown";
}

LeadLagResult lead_lag_test(const ReturnPanel& panel, const ShockControls& controls, const LeadLagOptions& options) {
    check_panel(panel);
    if (options.max_lag < 1) throw Error(Errc::invalid_argument, "lead-lag test needs max_lag >= 1");
    const bool use_controls = !controls.empty();
    if (use_controls) check_controls(panel, controls);

    std::vector<std::size_t> assets;
    if (options.assets.empty()) {
        for (std::size_t a = 0; a < panel.assets.size(); ++a) assets.push_back(a);
    } else {
        for (const auto& name : options.assets) {
            const auto a = panel.asset_index(name);
            if (!a) throw Error(Errc::invalid_argument, "lead-lag asset '" + name + "' is not in the panel");
            assets.push_back(*a);
        }
    }

    const auto n = static_cast<Eigen::Index>(panel.size());
    const auto width = static_cast<std::size_t>(2 * options.max_lag + 2) + (use_controls ? controls.names().size() : 0);
    if (panel.size() <= static_cast<std::size_t>(options.max_lag) + width) {
        throw Error(Errc::insufficient_observations, "panel too short for " + std::to_string(options.max_lag) + " lags");
    }

    // Common controls with any constant column removed, shared by every block.
    Controls common;
    if (use_controls) {
        for (const auto& [name, series] : controls.common) common.names.push_back(name);
        common.values.resize(n, static_cast<Eigen::Index>(common.names.size()));
        Eigen::Index j = 0;
        for (const auto& [name, series] : controls.common) common.values.col(j++) = series;
        common = common.without_constant_columns();
    }
    std::vector<std::int64_t> time_ids(panel.size());
    for (std::size_t t = 0; t < panel.size(); ++t) time_ids[t] = static_cast<std::int64_t>(t);

    const Controls market_own = lagged_self(panel.market_return, options.max_lag);
    std::vector<regression::LagBlock> forward;
    std::vector<regression::LagBlock> backward;
    for (const std::size_t a : assets) {
        const Eigen::VectorXd y = panel.asset_returns.col(static_cast<Eigen::Index>(a));
        Controls fc = common;
        if (use_controls && controls.sector_ret) {
            Controls sector;
            sector.names = {"sector_ret"};
            sector.values = controls.sector_ret->col(static_cast<Eigen::Index>(a));
            fc = concat(fc, sector);
        }
        forward.push_back({y, panel.market_return, concat(fc, lagged_self(y, options.max_lag)), time_ids});
        backward.push_back({panel.market_return, y, concat(common, market_own), time_ids});
    }

    LeadLagResult out;
    out.market_leads = regression::lag_profile(forward, options.max_lag, options.se_kind);
    out.asset_leads = regression::lag_profile(backward, options.max_lag, options.se_kind);
    out.market_leads_significant = significant(out.market_leads, options.threshold);
    out.asset_leads_significant = significant(out.asset_leads, options.threshold);
    if (out.market_leads_significant && out.asset_leads_significant) {
        out.direction = LeadDirection::both;
    } else if (out.market_leads_significant) {
        out.direction = LeadDirection::market_leads;
    } else if (out.asset_leads_significant) {
        out.direction = LeadDirection::asset_leads;
    }
    return out;
}

LeaveOneOut leave_one_out_compare(const ReturnPanel& panel, const std::string& asset,
                                  const graph::AggregatorSpec& weights, bool renormalize) {
    check_panel(panel);
    weights.validate();
    const auto target = panel.asset_index(asset);
    if (!target) throw Error(Errc::invalid_argument, "asset '" + asset + "' is not in the panel");
    if (std::find(weights.constituents.begin(), weights.constituents.end(), asset) == weights.constituents.end()) {
        throw Error(Errc::invalid_argument, "asset '" + asset + "' is not an index constituent");
    }

    const auto n = static_cast<Eigen::Index>(panel.size());
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd loo = Eigen::VectorXd::Zero(n);
    for (const auto& name : weights.constituents) {
        const auto col = panel.asset_index(name);
        if (!col) throw Error(Errc::invalid_argument, "constituent '" + name + "' is not in the panel");
        const double w = weights.weight(name);
        if (w == 0.0) continue;
        const auto series = panel.asset_returns.col(static_cast<Eigen::Index>(*col));
        full += w * series;
        if (name != asset) loo += w * series;
    }
    const double own = weights.weight(asset);
    if (renormalize) {
        if (own >= 1.0) throw Error(Errc::degenerate_regressor, "asset holds the whole index; nothing is left out");
        loo /= 1.0 - own;
    }

    const Eigen::VectorXd y = panel.asset_returns.col(static_cast<Eigen::Index>(*target));
    const auto fit_on = [&](const Eigen::VectorXd& x, const char* what) {
        if ((x.array() == x(0)).all()) {
            throw Error(Errc::degenerate_regressor, std::string(what) + " index is constant");
        }
        DesignMatrix d = DesignMatrix::with_intercept(y);
        d.add("index", x);
        const RegressionFit fit = regression::ols(d);
        return Slope{fit.coefficient("index"), fit.std_error("index")};
    };

    LeaveOneOut out;
    out.asset = asset;
    out.renormalized = renormalize;
    out.full = fit_on(full, "full");
    out.loo = fit_on(loo, "leave-one-out");
    if (out.full.beta != 0.0) {
        out.drop_fraction = 1.0 - out.loo.beta / out.full.beta;
    } else {
        out.notes.push_back(std::string(to_string(Errc::zero_full_beta)) + ": drop fraction undefined");
    }
    return out;
}

ResidualLoadings post_hedge_residual_loadings(const ReturnPanel& panel, const std::vector<Date>& events,
                                              const ShockControls& controls, const ResidualOptions& options) {
    check_panel(panel);
    check_controls(panel, controls);
    if (controls.empty()) throw Error(Errc::invalid_argument, "residual loadings need at least one control");
    if (options.window < 3 || options.gap < 1) {
        throw Error(Errc::invalid_argument, "window must be >= 3 and gap >= 1 so the window ends before the event");
    }

    ResidualLoadings out;
    const auto names = controls.names();
    const std::size_t k = names.size();
    const std::size_t n_assets = panel.assets.size();

    std::vector<double> resid;
    std::vector<double> cells;  // row-major, k per row
    std::vector<std::int64_t> clusters;
    std::vector<std::pair<std::size_t, std::size_t>> event_spans;  // [begin, end) into resid
    std::vector<Date> event_dates;
    std::vector<double> buf(k);

    for (const std::size_t r : event_rows(panel, events)) {
        if (r < options.gap + options.window - 1) {
            out.notes.push_back(std::string(to_string(Errc::insufficient_history)) + ": event " +
                                io::format_date(panel.dates[r]) + " skipped");
            continue;
        }
        const auto start = static_cast<Eigen::Index>(r - options.gap - options.window + 1);
        const auto len = static_cast<Eigen::Index>(options.window);
        const Eigen::VectorXd m = panel.market_return.segment(start, len);
        const std::size_t begin = resid.size();
        try {
            std::vector<double> event_resid;
            for (std::size_t a = 0; a < n_assets; ++a) {
                const Eigen::VectorXd y = panel.asset_returns.col(static_cast<Eigen::Index>(a)).segment(start, len);
                const auto bn = regression::beta_neutral_residual(y, m);
                const auto row = static_cast<Eigen::Index>(r);
                event_resid.push_back(panel.asset_returns(row, static_cast<Eigen::Index>(a)) - bn.alpha -
                                      bn.beta * panel.market_return(row));
            }
            for (std::size_t a = 0; a < n_assets; ++a) {
                resid.push_back(event_resid[a]);
                controls.fill_row(r, a, buf.data());
                cells.insert(cells.end(), buf.begin(), buf.end());
                clusters.push_back(static_cast<std::int64_t>(r));
            }
        } catch (const Error& e) {
            out.notes.push_back("event " + io::format_date(panel.dates[r]) + " skipped: " + e.what());
            continue;
        }
        event_spans.emplace_back(begin, resid.size());
        event_dates.push_back(panel.dates[r]);
    }
    if (event_spans.empty()) {
        throw Error(Errc::insufficient_history, "no event has " + std::to_string(options.window + options.gap) +
                                                    " prior trading days");
    }

    const auto rows = static_cast<Eigen::Index>(resid.size());
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(resid.data(), rows);
    Eigen::MatrixXd x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cells.data(), rows, static_cast<Eigen::Index>(k));
    std::vector<bool> usable(k, true);
    for (std::size_t j = 0; j < k; ++j) {
        Eigen::VectorXd col = x.col(static_cast<Eigen::Index>(j));
        if ((col.array() == col(0)).all()) {
            usable[j] = false;
            out.notes.push_back("control " + names[j] + " is constant over the event rows; loading not identified");
            continue;
        }
        io::standardize(col);
        x.col(static_cast<Eigen::Index>(j)) = col;
    }
    out.n_obs = static_cast<std::size_t>(rows);

    const auto fit_loadings = [&](Eigen::Index from, Eigen::Index count, const std::vector<bool>& use,
                                  regression::SeKind se_kind, const std::vector<std::int64_t>* keys) {
        std::vector<Loading> loadings;
        DesignMatrix d = DesignMatrix::with_intercept(y.segment(from, count));
        for (std::size_t j = 0; j < k; ++j) {
            if (use[j]) d.add(names[j], x.col(static_cast<Eigen::Index>(j)).segment(from, count));
        }
        if (keys) d.clusters.assign(keys->begin() + from, keys->begin() + from + count);
        std::optional<RegressionFit> fit;
        if (d.cols() > 1 && d.rows() > d.cols()) fit = regression::ols(d, se_kind);
        for (std::size_t j = 0; j < k; ++j) {
            if (use[j] && fit) {
                loadings.push_back({names[j], fit->coefficient(names[j]), fit->std_error(names[j]), true});
            } else {
                loadings.push_back({names[j], 0.0, 0.0, false});
            }
        }
        return loadings;
    };

    out.pooled = fit_loadings(0, rows, usable, options.se_kind, &clusters);

    for (std::size_t e = 0; e < event_spans.size(); ++e) {
        const auto [begin, end] = event_spans[e];
        const auto from = static_cast<Eigen::Index>(begin);
        const auto count = static_cast<Eigen::Index>(end - begin);
        std::vector<bool> varies(k, false);
        for (std::size_t j = 0; j < k; ++j) {
            const auto col = x.col(static_cast<Eigen::Index>(j)).segment(from, count);
            varies[j] = usable[j] && !(col.array() == col(0)).all();
        }
        EventLoadings ev;
        ev.date = event_dates[e];
        ev.n_assets = static_cast<std::size_t>(count);
        try {
            ev.loadings = fit_loadings(from, count, varies, regression::SeKind::classical, nullptr);
        } catch (const Error&) {
            ev.loadings = fit_loadings(from, count, std::vector<bool>(k, false), regression::SeKind::classical, nullptr);
        }
        out.per_event.push_back(std::move(ev));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SectionStatus s) noexcept {
    switch (s) {
    case SectionStatus::ok: return "ok";
    case SectionStatus::skipped: return "skipped";
    case SectionStatus::failed: return "failed";
    }
    return "unknown";
}

namespace {

template <class F>
void run_section(SectionState& state, F&& body) {
    try {
        body();
        state.status = SectionStatus::ok;
    } catch (const Error& e) {
        state.status = SectionStatus::failed;
        state.note = std::string(to_string(e.code())) + ": " + e.what();
    } catch (const std::exception& e) {
        state.status = SectionStatus::failed;
        state.note = e.what();
    }
}

void skip(SectionState& state, std::string note) {
    state.status = SectionStatus::skipped;
    state.note = std::move(note);
}

} // namespace

DiagnosticReport run_full_battery(const BatteryInputs& inputs, const BatteryConfig& config) {
    if (!inputs.panel) throw Error(Errc::invalid_argument, "diagnostics need a return panel");
    const ReturnPanel& panel = *inputs.panel;
    const ShockControls none{panel.dates, {}, std::nullopt, false};
    const ShockControls& controls = inputs.controls ? *inputs.controls : none;
    const bool have_events = inputs.events && !inputs.events->empty();

    DiagnosticReport report;

    if (!have_events) {
        skip(report.attenuation_state, "no event dates supplied");
    } else if (controls.empty()) {
        skip(report.attenuation_state, "no shock controls supplied");
    } else {
        run_section(report.attenuation_state, [&] {
            report.attenuation = shock_day_attenuation(panel, *inputs.events, controls, config.attenuation);
        });
    }

    if (!inputs.labeling) {
        skip(report.env_state, "no environment labeling supplied");
    } else {
        run_section(report.env_state, [&] {
            report.env_betas = environment_betas(panel, *inputs.labeling, controls, config.environment);
        });
    }

    run_section(report.lag_state, [&] { report.lag_profile = lead_lag_test(panel, controls, config.lead_lag); });

    if (!inputs.weights) {
        skip(report.loo_state, "no index weights supplied");
    } else {
        run_section(report.loo_state, [&] {
            std::string asset = config.loo_asset;
            if (asset.empty()) {
                double best = -1.0;
                for (const auto& c : inputs.weights->constituents) {
                    if (inputs.weights->weight(c) > best) {
                        best = inputs.weights->weight(c);
                        asset = c;
                    }
                }
            }
            report.leave_one_out = leave_one_out_compare(panel, asset, *inputs.weights, config.renormalize);
        });
    }

    if (!have_events) {
        skip(report.residual_state, "no event dates supplied");
    } else if (controls.empty()) {
        skip(report.residual_state, "no shock controls supplied");
    } else {
        run_section(report.residual_state, [&] {
            report.residual_loadings = post_hedge_residual_loadings(panel, *inputs.events, controls, config.residual);
        });
    }

    // Verdict notes.
    const double z = config.z_critical;
    bool strong = false;
    if (report.attenuation) {
        const auto& a = *report.attenuation;
        strong = a.without_controls.se > 0.0 && std::abs(a.without_controls.beta) / a.without_controls.se > z &&
                 std::abs(a.with_controls.beta) <= config.strong_attenuation * std::abs(a.without_controls.beta);
    }
    bool state_dependent = false;
    if (report.env_betas) {
        const auto& fit = report.env_betas->fit;
        for (std::size_t k = 1; k < fit.betas.size(); ++k) {
            const double se = fit.fit.std_error("market:env[" + fit.betas[k].environment + "]");
            if (se > 0.0 && std::abs(fit.betas[k].beta - fit.betas[0].beta) / se > z) state_dependent = true;
        }
    }
    bool loads = false;
    if (report.residual_loadings) {
        for (const auto& l : report.residual_loadings->pooled) {
            if (l.identified && l.se > 0.0 && std::abs(l.coef) / l.se > z) loads = true;
        }
    }
    const bool market_leads = report.lag_profile && report.lag_profile->market_leads_significant;
    const bool asset_leads = report.lag_profile && report.lag_profile->asset_leads_significant;
    const bool large_drop = report.leave_one_out && report.leave_one_out->drop_fraction &&
                            *report.leave_one_out->drop_fraction >= config.large_drop;

    if (strong && !market_leads) {
        report.verdict_notes.push_back(std::string(kForkNote) + ": attenuation" +
                                       (state_dependent ? " + state-dependent betas" : "") +
                                       (loads ? " + residual loadings" : ""));
    }
    if (market_leads) report.verdict_notes.emplace_back(kLaggedNote);
    if (asset_leads) report.verdict_notes.emplace_back(kAssetLeadsNote);
    if (large_drop) report.verdict_notes.emplace_back(kLargeDropNote);
    if (report.verdict_notes.empty()) report.verdict_notes.emplace_back("no taxonomy signature detected");
    return report;
}

} // namespace capmscm::diagnostics
