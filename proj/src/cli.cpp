#include "capmscm/cli.hpp"

#include "capmscm/analytics.hpp"
#include "capmscm/data_io.hpp"
#include "capmscm/diagnostics.hpp"
#include "capmscm/error.hpp"
#include "capmscm/format.hpp"
#include "capmscm/graph_analysis.hpp"
#include "capmscm/monte_carlo.hpp"
#include "capmscm/report_json.hpp"
#include "capmscm/rng.hpp"
#include "capmscm/scm_core.hpp"
#include "capmscm/sem_json.hpp"
#include "capmscm/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace capmscm::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum Command : unsigned { kSimulate = 1, kCheckDag = 2, kDiagnose = 4, kFig3 = 8, kAll = 15 };
enum class Kind { integer, real, text, flag, path };

struct Knob {
    const char* key;
    Kind kind;
    json fallback;
    const char* help;
    unsigned commands;
};

const std::vector<Knob>& knobs() {
    static const std::vector<Knob> table{
        {"seed", Kind::integer, nullptr, "master seed; required by simulate and replicate-fig3", kAll},
        {"out", Kind::path, "out", "output directory, created if absent", kAll},
        {"overwrite", Kind::flag, false, "replace existing output files", kAll},
        {"threads", Kind::integer, 1, "worker threads for simulation; results do not depend on it", kAll},

        {"preset", Kind::text, "fork", "built-in SEM: fork or chain", kSimulate},
        {"n", Kind::integer, 100000, "draws per grid point", kSimulate | kFig3},
        {"grid_min", Kind::real, 0.0, "smallest sigma_x", kSimulate | kFig3},
        {"grid_max", Kind::real, 5.0, "largest sigma_x", kSimulate | kFig3},
        {"grid_points", Kind::integer, 21, "number of evenly spaced sigma_x values", kSimulate | kFig3},
        {"a", Kind::real, 1.0, "Z -> X coefficient", kSimulate | kFig3},
        {"b", Kind::real, 1.0, "Z -> Y coefficient (fork)", kSimulate | kFig3},
        {"c", Kind::real, 1.0, "X -> Y coefficient (chain)", kSimulate | kFig3},
        {"sigma_z", Kind::real, 1.0, "sd of the driver shock", kSimulate | kFig3},
        {"sigma_y", Kind::real, 1.0, "sd of the asset shock", kSimulate | kFig3},
        {"tolerance", Kind::real, 0.02, "max |beta_hat - beta| for exit 0", kSimulate | kFig3},
        {"loading_tolerance", Kind::real, 0.03, "max |loading_hat - loading| for exit 0 (fork)", kSimulate | kFig3},
        {"sem", Kind::path, nullptr, "SEM specification file; replaces the preset", kSimulate},
        {"treatment", Kind::text, nullptr, "node for the OLS-versus-do comparison (with --sem)", kSimulate},
        {"outcome", Kind::text, nullptr, "node for the OLS-versus-do comparison (with --sem)", kSimulate},
        {"emit_panel", Kind::flag, false, "also write a synthetic panel bundle for diagnose", kSimulate},
        {"panel_periods", Kind::integer, 2000, "dates in the emitted panel", kSimulate},
        {"panel_assets", Kind::integer, 10, "assets in the emitted panel", kSimulate},
        {"panel_sigma_x", Kind::real, 0.5, "market noise sd in the emitted panel", kSimulate},
        {"event_spacing", Kind::integer, 5, "every k-th emitted date is an event", kSimulate},
        {"burn_in", Kind::integer, 256, "discarded periods before the emitted panel", kSimulate},

        {"dag", Kind::path, nullptr, "graph specification file", kCheckDag},

        {"returns", Kind::path, nullptr, "returns CSV", kDiagnose},
        {"prices", Kind::path, nullptr, "prices CSV (log returns are computed)", kDiagnose},
        {"long_format", Kind::flag, false, "returns/prices file is long (date, id, value)", kDiagnose},
        {"date_column", Kind::text, "date", "date column name", kDiagnose},
        {"id_column", Kind::text, "id", "id column name (long format)", kDiagnose},
        {"value_column", Kind::text, "value", "value column name (long format)", kDiagnose},
        {"market_id", Kind::text, nullptr, "market series id", kDiagnose},
        {"sectors", Kind::path, nullptr, "asset,sector CSV", kDiagnose},
        {"controls", Kind::path, nullptr, "ready-made control series CSV", kDiagnose},
        {"macro", Kind::path, nullptr, "macro levels CSV (vix_level, dgs10_level, dxy_level)", kDiagnose},
        {"sector_returns", Kind::path, nullptr, "sector return CSV keyed by sector label", kDiagnose},
        {"standardize", Kind::flag, false, "standardize the control series", kDiagnose},
        {"events", Kind::path, nullptr, "event dates CSV", kDiagnose},
        {"weights", Kind::path, nullptr, "index weights CSV (asset, weight[, date])", kDiagnose},
        {"environment_scheme", Kind::text, nullptr,
         "vix_terciles, rates_trend_60d, usd_trend_60d or episodes", kDiagnose},
        {"episodes", Kind::path, nullptr, "episode CSV (label, start, end)", kDiagnose},
        {"base_environment", Kind::text, nullptr, "reference environment", kDiagnose},
        {"lookback", Kind::integer, 60, "trend lookback in dates", kDiagnose},
        {"max_lag", Kind::integer, 5, "lags in the lead-lag test", kDiagnose},
        {"lead_lag_assets", Kind::text, nullptr, "comma-separated assets for the lead-lag test", kDiagnose},
        {"threshold", Kind::real, 4.0, "|coef|/se for a lag to count as nonzero", kDiagnose},
        {"window", Kind::integer, 250, "pre-event CAPM window", kDiagnose},
        {"gap", Kind::integer, 5, "dates between window end and event", kDiagnose},
        {"se_kind", Kind::text, "cluster_by_date",
         "classical, heteroskedasticity_robust or cluster_by_date", kDiagnose},
        {"min_rows", Kind::integer, 30, "row floor per environment", kDiagnose},
        {"min_events", Kind::integer, 10, "event floor for attenuation", kDiagnose},
        {"renormalize", Kind::flag, false, "divide the leave-one-out index by 1 - w_i", kDiagnose},
        {"loo_asset", Kind::text, nullptr, "asset for leave-one-out (default: largest weight)", kDiagnose},
        {"z_critical", Kind::real, 1.96, "critical value for verdict notes", kDiagnose},
    };
    return table;
}

std::string flag_name(const std::string& key) {
    std::string f = key;
    std::replace(f.begin(), f.end(), '_', '-');
    return "--" + f;
}

const Knob& knob(const std::string& key) {
    for (const auto& k : knobs()) {
        if (key == k.key) return k;
    }
    throw Error(Errc::unknown_field, "unknown setting '" + key + "'");
}

class Settings {
public:
    Settings(unsigned command, std::string name) : command_(command), name_(std::move(name)) {
        for (const auto& k : knobs()) {
            if (k.commands & command_) values_[k.key] = k.fallback;
        }
    }

    const std::string& name() const { return name_; }

    void set_from_json(const std::string& key, const json& v, const fs::path& base) {
        const Knob& k = accepted(key);
        const auto bad = [&] { return Error(Errc::invalid_argument, "config key '" + key + "' has the wrong type"); };
        switch (k.kind) {
        case Kind::integer:
            if (!v.is_number_integer()) throw bad();
            values_[key] = v.get<std::int64_t>();
            break;
        case Kind::real:
            if (!v.is_number()) throw bad();
            values_[key] = v.get<double>();
            break;
        case Kind::flag:
            if (!v.is_boolean()) throw bad();
            values_[key] = v.get<bool>();
            break;
        case Kind::text:
            if (!v.is_string()) throw bad();
            values_[key] = v.get<std::string>();
            break;
        case Kind::path: {
            if (!v.is_string()) throw bad();
            fs::path p = v.get<std::string>();
            if (p.is_relative()) p = base / p;
            values_[key] = p.lexically_normal().string();
            break;
        }
        }
    }

    void set_from_text(const std::string& key, const std::string& text) {
        const Knob& k = accepted(key);
        const auto bad = [&] { return Error(Errc::invalid_argument, flag_name(key) + " expects " + kind_name(k.kind)); };
        switch (k.kind) {
        case Kind::integer: {
            std::int64_t v = 0;
            const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
            if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) throw bad();
            values_[key] = v;
            break;
        }
        case Kind::real: {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(text, &used);
            } catch (const std::exception&) {
                throw bad();
            }
            if (used != text.size() || !std::isfinite(v)) throw bad();
            values_[key] = v;
            break;
        }
        case Kind::flag: values_[key] = true; break;
        case Kind::text:
        case Kind::path: values_[key] = text; break;
        }
    }

    bool has(const std::string& key) const {
        const auto it = values_.find(key);
        return it != values_.end() && !it->second.is_null();
    }

    std::int64_t integer(const std::string& key) const { return get(key).get<std::int64_t>(); }
    std::size_t count(const std::string& key, std::int64_t min = 0) const {
        const auto v = integer(key);
        if (v < min) throw Error(Errc::invalid_argument, key + " must be at least " + std::to_string(min));
        return static_cast<std::size_t>(v);
    }
    double real(const std::string& key) const { return get(key).get<double>(); }
    bool flag(const std::string& key) const { return get(key).get<bool>(); }
    std::string text(const std::string& key) const { return get(key).get<std::string>(); }
    std::optional<std::string> optional_text(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return text(key);
    }
    std::uint64_t seed() const {
        if (!has("seed")) throw Error(Errc::invalid_argument, name_ + " needs --seed");
        return static_cast<std::uint64_t>(integer("seed"));
    }

private:
    static const char* kind_name(Kind k) {
        switch (k) {
        case Kind::integer: return "an integer";
        case Kind::real: return "a number";
        case Kind::flag: return "no value";
        case Kind::text: return "text";
        case Kind::path: return "a path";
        }
        return "a value";
    }

    const Knob& accepted(const std::string& key) const {
        const Knob& k = knob(key);
        if (!(k.commands & command_)) {
            throw Error(Errc::unknown_field, "setting '" + key + "' does not apply to " + name_);
        }
        return k;
    }

    const json& get(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end() || it->second.is_null()) {
            throw Error(Errc::invalid_argument, name_ + " needs " + flag_name(key));
        }
        return it->second;
    }

    unsigned command_;
    std::string name_;
    std::map<std::string, json> values_;
};

/// Buffers every output so that nothing is written when any target exists.
class Outputs {
public:
    explicit Outputs(const Settings& s) : dir_(s.text("out")), overwrite_(s.flag("overwrite")) {}

    void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

    void commit() {
        if (!overwrite_) {
            for (const auto& [name, content] : files_) {
                if (fs::exists(dir_ / name)) {
                    throw Error(Errc::invalid_argument,
                                (dir_ / name).string() + " exists; pass --overwrite to replace it");
                }
            }
        }
        for (const auto& [name, content] : files_) {
            const fs::path target = dir_ / name;
            std::error_code ec;
            fs::create_directories(target.parent_path(), ec);
            if (ec) throw Error(Errc::io_error, "cannot create " + target.parent_path().string() + ": " + ec.message());
            std::ofstream f(target, std::ios::binary | std::ios::trunc);
            f << content;
            if (!f) throw Error(Errc::io_error, "cannot write " + target.string());
        }
    }

private:
    fs::path dir_;
    bool overwrite_;
    std::vector<std::pair<std::string, std::string>> files_;
};

template <class F>
std::string render(F&& body) {
    std::ostringstream os;
    body(os);
    return os.str();
}

// ---------------------------------------------------------------------------
// simulate / replicate-fig3

std::vector<double> grid_of(const Settings& s) {
    const auto points = s.integer("grid_points");
    if (points < 1 || points > 100000) throw Error(Errc::invalid_argument, "grid_points must be in [1, 100000]");
    return analytics::linear_grid(s.real("grid_min"), s.real("grid_max"), static_cast<int>(points));
}

std::size_t draws_of(const Settings& s) {
    const auto n = s.integer("n");
    if (n < 3) throw Error(Errc::invalid_argument, "n must be at least 3");
    return static_cast<std::size_t>(n);
}

unsigned threads_of(const Settings& s) {
    const auto t = s.integer("threads");
    if (t < 1 || t > 256) throw Error(Errc::invalid_argument, "threads must be in [1, 256]");
    return static_cast<unsigned>(t);
}

/// Runs one preset, stages its files and returns the comparison record.
json run_preset(const std::string& preset, const Settings& s, Outputs& outputs) {
    const auto grid = grid_of(s);
    const std::size_t n = draws_of(s);
    const std::uint64_t seed = s.seed();
    const unsigned threads = threads_of(s);
    const double tol = s.real("tolerance");
    const double loading_tol = s.real("loading_tolerance");

    json cmp{{"preset", preset}, {"n", n}, {"seed", seed}, {"grid_points", grid.size()}, {"tolerance", report::number(tol)}};
    double max_beta = 0.0;
    bool pass = true;
    if (preset == "fork") {
        analytics::ForkParams p{s.real("a"), s.real("b"), s.real("sigma_z"), grid.front(), s.real("sigma_y")};
        const auto curve = analytics::attenuation_curve(p, grid);
        const auto mc = analytics::monte_carlo_fork(p, grid, n, seed, threads);
        double max_loading = 0.0;
        for (const auto& pt : mc) {
            max_beta = std::max(max_beta, std::abs(pt.beta_hat - pt.beta_analytic));
            max_loading = std::max(max_loading, std::abs(pt.loading_hat - pt.loading_analytic));
        }
        pass = max_beta <= tol && max_loading <= loading_tol;
        outputs.add("fork_curve.csv", render([&](std::ostream& os) { analytics::write_curve_csv(os, curve); }));
        outputs.add("fork_mc.csv", render([&](std::ostream& os) {
                        os << "sigma_x,beta_hat,beta_se,beta_analytic,loading_hat,loading_se,loading_analytic\n";
                        for (const auto& pt : mc) {
                            os << format_number(pt.sigma_x) << ',' << format_number(pt.beta_hat) << ','
                               << format_number(pt.beta_se) << ',' << format_number(pt.beta_analytic) << ','
                               << format_number(pt.loading_hat) << ',' << format_number(pt.loading_se) << ','
                               << format_number(pt.loading_analytic) << '\n';
                        }
                    }));
        cmp["max_abs_loading_deviation"] = report::number(max_loading);
        cmp["loading_tolerance"] = report::number(loading_tol);
        cmp["params"] = {{"a", p.a}, {"b", p.b}, {"sigma_z", p.sigma_z}, {"sigma_y", p.sigma_y}};
    } else if (preset == "chain") {
        analytics::ChainParams p{s.real("a"), s.real("c"), s.real("sigma_z"), grid.front(), s.real("sigma_y")};
        const auto mc = analytics::monte_carlo_chain(p, grid, n, seed, threads);
        for (const auto& pt : mc) max_beta = std::max(max_beta, std::abs(pt.beta_hat - pt.beta_analytic));
        pass = max_beta <= tol;
        outputs.add("chain_curve.csv", render([&](std::ostream& os) {
                        os << "sigma_x,beta\n";
                        for (const double sx : grid) {
                            analytics::ChainParams q = p;
                            q.sigma_x = sx;
                            os << format_number(sx) << ',' << format_number(analytics::chain_beta(q)) << '\n';
                        }
                    }));
        outputs.add("chain_mc.csv", render([&](std::ostream& os) {
                        os << "sigma_x,beta_hat,beta_se,beta_analytic\n";
                        for (const auto& pt : mc) {
                            os << format_number(pt.sigma_x) << ',' << format_number(pt.beta_hat) << ','
                               << format_number(pt.beta_se) << ',' << format_number(pt.beta_analytic) << '\n';
                        }
                    }));
        cmp["params"] = {{"a", p.a}, {"c", p.c}, {"sigma_z", p.sigma_z}, {"sigma_y", p.sigma_y}};
    } else {
        throw Error(Errc::invalid_argument, "unknown preset '" + preset + "' (fork or chain)");
    }
    cmp["max_abs_beta_deviation"] = report::number(max_beta);
    cmp["pass"] = pass;
    return cmp;
}

void emit_panel(const std::string& preset, const Settings& s, Outputs& outputs) {
    synthetic::PanelShape shape;
    shape.periods = s.count("panel_periods", 2);
    shape.assets = s.count("panel_assets", 1);
    shape.event_spacing = s.count("event_spacing", 1);
    shape.burn_in = s.count("burn_in");
    const std::uint64_t seed = derive_seed(s.seed(), hash_name("panel"));
    synthetic::SyntheticPanel bundle;
    if (preset == "fork") {
        bundle = synthetic::fork_panel({s.real("a"), s.real("b"), s.real("sigma_z"), s.real("panel_sigma_x"),
                                        s.real("sigma_y")},
                                       shape, seed);
    } else {
        bundle = synthetic::chain_b_panel({s.real("a"), s.real("c"), s.real("sigma_z"), s.real("panel_sigma_x"),
                                           s.real("sigma_y")},
                                          shape, seed);
    }
    outputs.add("panel/returns.csv", render([&](std::ostream& os) { io::write_panel_csv(os, bundle.panel); }));
    outputs.add("panel/controls.csv", render([&](std::ostream& os) { io::write_controls_csv(os, bundle.controls); }));
    outputs.add("panel/events.csv", render([&](std::ostream& os) {
                    os << "date\n";
                    for (const auto d : bundle.events) os << io::format_date(d) << '\n';
                }));
    outputs.add("panel/weights.csv", render([&](std::ostream& os) {
                    os << "asset,weight\n";
                    for (const auto& [a, w] : bundle.weights) os << a << ',' << format_exact(w) << '\n';
                }));
    const json config{{"returns", "returns.csv"},  {"market_id", synthetic::kMarketId},
                      {"controls", "controls.csv"}, {"events", "events.csv"},
                      {"weights", "weights.csv"},   {"loo_asset", bundle.focus_asset}};
    outputs.add("panel/diagnose.json", report::dump(config));
}

int cmd_simulate_sem(const Settings& s, Outputs& outputs) {
    const json doc = scm::read_json_file(s.text("sem"));
    const scm::LinearSem sem = scm::sem_from_json(doc);
    const std::size_t n = draws_of(s);
    const auto draws = scm::simulate(sem, n, s.seed(), {threads_of(s)});

    outputs.add("samples.csv", render([&](std::ostream& os) {
                    for (std::size_t c = 0; c < draws.columns.size(); ++c) os << (c ? "," : "") << draws.columns[c].str();
                    os << '\n';
                    for (Eigen::Index r = 0; r < draws.draws.rows(); ++r) {
                        for (Eigen::Index c = 0; c < draws.draws.cols(); ++c) {
                            os << (c ? "," : "") << format_exact(draws.draws(r, c));
                        }
                        os << '\n';
                    }
                }));

    json summary{{"n", n}, {"seed", s.seed()}, {"columns", json::array()}};
    for (std::size_t c = 0; c < draws.columns.size(); ++c) {
        const Eigen::VectorXd col = draws.draws.col(static_cast<Eigen::Index>(c));
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n > 1 ? n - 1 : 1));
        summary["columns"].push_back({{"node", draws.columns[c].str()}, {"mean", report::number(mean)}, {"sd", report::number(sd)}});
    }
    if (s.has("treatment") != s.has("outcome")) {
        throw Error(Errc::invalid_argument, "--treatment and --outcome go together");
    }
    if (s.has("treatment")) {
        const scm::NodeRef t = sem.dag().resolve(s.text("treatment"));
        const scm::NodeRef o = sem.dag().resolve(s.text("outcome"));
        regression::DesignMatrix d = regression::DesignMatrix::with_intercept(draws.column(o));
        d.add(t.str(), draws.column(t));
        const auto fit = regression::ols(d);
        summary["comparison"] = {{"treatment", t.str()},
                                 {"outcome", o.str()},
                                 {"ols_slope", report::number(fit.coef(1))},
                                 {"ols_se", report::number(fit.se(1))},
                                 {"causal_effect_slope", report::number(scm::causal_effect_slope(sem, t, o))},
                                 {"backdoor_clear", graph::backdoor_clear(sem.dag(), t, o, {})}};
    }
    outputs.add("summary.json", report::dump(summary));
    outputs.commit();
    return ExitCode::ok;
}

int cmd_simulate(const Settings& s, std::ostream& out) {
    Outputs outputs(s);
    if (s.has("sem")) return cmd_simulate_sem(s, outputs);
    const std::string preset = s.text("preset");
    json cmp = run_preset(preset, s, outputs);
    outputs.add(preset + "_comparison.json", report::dump(cmp));
    if (s.flag("emit_panel")) emit_panel(preset, s, outputs);
    outputs.commit();
    out << report::dump(cmp);
    return cmp["pass"].get<bool>() ? ExitCode::ok : ExitCode::tolerance;
}

int cmd_fig3(const Settings& s, std::ostream& out) {
    Outputs outputs(s);
    json summary;
    bool pass = true;
    for (const std::string preset : {"fork", "chain"}) {
        json cmp = run_preset(preset, s, outputs);
        pass = pass && cmp["pass"].get<bool>();
        outputs.add(preset + "_comparison.json", report::dump(cmp));
        summary[preset] = std::move(cmp);
    }
    summary["pass"] = pass;
    outputs.add("fig3_summary.json", report::dump(summary));
    outputs.commit();
    out << report::dump(summary);
    return pass ? ExitCode::ok : ExitCode::tolerance;
}

// ---------------------------------------------------------------------------
// check-dag

const std::set<std::string> kDagExtras{"weights", "target", "beta", "market_node", "asset_node", "hypotheses"};

std::string text_field(const json& doc, const char* key, const std::string& fallback) {
    if (!doc.contains(key)) return fallback;
    if (!doc[key].is_string()) throw Error(Errc::parse_error, std::string("'") + key + "' must be a string");
    return doc[key].get<std::string>();
}

/// Coefficient of the same-period market -> asset edge: its "coef", 1 when
/// the edge carries none, 0 when there is no such edge.
double implied_beta(const json& doc, const scm::TimeIndexedDag& dag, const std::string& market,
                    const std::string& asset) {
    if (!doc.contains("edges")) return 0.0;
    for (const auto& e : doc["edges"]) {
        const auto from = dag.resolve(e["from"].get<std::string>());
        const auto to = dag.resolve(e["to"].get<std::string>());
        if (from.name == market && to.name == asset && from.offset == to.offset) {
            return e.contains("coef") ? e["coef"].get<double>() : 1.0;
        }
    }
    return 0.0;
}

int cmd_check_dag(const Settings& s, std::ostream& out) {
    Outputs outputs(s);
    const json doc = scm::read_json_file(s.text("dag"));
    const scm::TimeIndexedDag dag = scm::dag_from_json(doc, kDagExtras);
    const std::string market = text_field(doc, "market_node", "X");
    const std::string asset = text_field(doc, "asset_node", "Y");

    json verdict;
    verdict["validation"] = report::to_json(scm::validate_dag(dag));
    verdict["classification"] = report::to_json(graph::classify_dag(dag));

    scm::TimeIndexedDag checked = dag;
    if (doc.contains("weights")) {
        const json& w = doc["weights"];
        if (!w.is_object() || w.empty()) throw Error(Errc::parse_error, "'weights' must be a nonempty object");
        graph::AggregatorSpec agg;
        for (const auto& [name, value] : w.items()) {
            if (!value.is_number()) throw Error(Errc::parse_error, "weights." + name + " must be a number");
            agg.constituents.push_back(name);
            agg.weights[name] = value.get<double>();
        }
        if (!doc.contains("target")) throw Error(Errc::parse_error, "'target' is required with 'weights'");
        agg.target = text_field(doc, "target", "");
        agg.validate();
        double beta = 0.0;
        if (doc.contains("beta")) {
            if (!doc["beta"].is_number()) throw Error(Errc::parse_error, "'beta' must be a number");
            beta = doc["beta"].get<double>();
        } else {
            beta = implied_beta(doc, dag, market, asset);
        }
        json agg_json = report::to_json(graph::check_aggregator_contradiction(agg, beta));
        agg_json["beta"] = report::number(beta);
        agg_json["target"] = agg.target;
        agg_json["target_weight"] = report::number(agg.weight(agg.target));
        if (agg.weight(agg.target) > 0.0) checked = graph::with_aggregator_edges(dag, market, asset);
        agg_json["aggregated_validation"] = report::to_json(scm::validate_dag(checked));
        verdict["aggregator"] = agg_json;
    } else {
        for (const char* key : {"target", "beta"}) {
            if (doc.contains(key)) throw Error(Errc::parse_error, std::string("'") + key + "' needs 'weights'");
        }
        verdict["aggregator"] = nullptr;
    }

    struct Hypothesis {
        bool mechanism = false;
        bool wellposed = false;
        bool same_period = false;
    };
    std::map<scm::Edge, Hypothesis> hypotheses;
    if (doc.contains("hypotheses")) {
        const json& hs = doc["hypotheses"];
        if (!hs.is_array()) throw Error(Errc::parse_error, "'hypotheses' must be an array");
        for (std::size_t i = 0; i < hs.size(); ++i) {
            const std::string where = "hypotheses[" + std::to_string(i) + "]";
            scm::require_known_fields(hs[i], {"from", "to", "mechanism", "intervention_wellposed", "same_period"}, where);
            if (!hs[i].contains("from") || !hs[i].contains("to")) {
                throw Error(Errc::parse_error, where + " needs 'from' and 'to'");
            }
            const scm::Edge e{dag.resolve(hs[i]["from"].get<std::string>()), dag.resolve(hs[i]["to"].get<std::string>())};
            Hypothesis h;
            h.mechanism = hs[i].value("mechanism", false);
            h.wellposed = hs[i].value("intervention_wellposed", false);
            h.same_period = hs[i].value("same_period", false);
            hypotheses[e] = h;
        }
    }
    json checklist = json::array();
    std::vector<scm::Edge> edges = dag.edges();
    for (const auto& [e, h] : hypotheses) {
        if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(e);
    }
    for (const auto& e : edges) {
        const Hypothesis h = hypotheses.contains(e) ? hypotheses.at(e) : Hypothesis{};
        json row = report::to_json(graph::necessary_conditions_checklist(checked, e, h.mechanism, h.wellposed, h.same_period));
        row["edge"] = e.from.str() + " -> " + e.to.str();
        checklist.push_back(row);
    }
    verdict["checklist"] = checklist;

    outputs.add("verdict.json", report::dump(verdict));
    outputs.commit();
    out << report::dump(verdict);
    return ExitCode::ok;
}

// ---------------------------------------------------------------------------
// diagnose

int cmd_diagnose(const Settings& s, std::ostream& out) {
    Outputs outputs(s);
    if (s.has("returns") == s.has("prices")) {
        throw Error(Errc::invalid_argument, "diagnose needs exactly one of --returns and --prices");
    }
    io::TableSchema schema;
    schema.wide = !s.flag("long_format");
    schema.date_column = s.text("date_column");
    schema.id_column = s.text("id_column");
    schema.value_column = s.text("value_column");
    const bool from_prices = s.has("prices");
    const io::PriceTable table = io::load_prices_csv(s.text(from_prices ? "prices" : "returns"), schema);
    const auto sectors = s.has("sectors") ? io::load_sector_map(s.text("sectors")) : std::map<std::string, std::string>{};
    const io::ReturnPanel panel = io::build_panel(table, s.text("market_id"), sectors,
                                                  from_prices ? io::PanelMode::from_prices : io::PanelMode::from_returns);

    std::vector<std::string> notes;
    if (panel.dropped_rows > 0) notes.push_back(std::to_string(panel.dropped_rows) + " dates dropped for missing values");

    std::optional<io::PriceTable> macro;
    if (s.has("macro")) macro = io::load_prices_csv(s.text("macro"));
    if (s.has("controls") && s.has("macro")) throw Error(Errc::invalid_argument, "use either --controls or --macro");
    io::ShockControls controls{panel.dates, {}, std::nullopt, false};
    if (s.has("controls")) {
        controls = io::controls_from_table(panel, io::load_prices_csv(s.text("controls")), s.flag("standardize"));
    } else if (macro) {
        std::optional<io::PriceTable> sector_returns;
        if (s.has("sector_returns")) sector_returns = io::load_prices_csv(s.text("sector_returns"));
        controls = io::build_controls(panel, *macro, sector_returns ? &*sector_returns : nullptr,
                                      {s.flag("standardize"), true});
    }

    std::optional<std::vector<io::Date>> events;
    if (s.has("events")) {
        if (fs::exists(s.text("events"))) {
            events = io::load_events(s.text("events")).dates;
        } else {
            notes.push_back("events file " + s.text("events") + " not found; event sections skipped");
        }
    }

    std::optional<graph::AggregatorSpec> weights;
    if (s.has("weights")) {
        graph::AggregatorSpec agg;
        for (const auto& [asset, w] : io::load_weights(s.text("weights"))) {
            agg.constituents.push_back(asset);
            agg.weights[asset] = w;
        }
        agg.target = s.optional_text("loo_asset").value_or(agg.constituents.empty() ? "" : agg.constituents.front());
        weights = std::move(agg);
    }

    std::optional<io::EnvironmentLabeling> labeling;
    if (s.has("environment_scheme")) {
        const auto scheme = io::env_scheme_from_string(s.text("environment_scheme"));
        io::LabelParams params;
        params.lookback = static_cast<int>(s.count("lookback", 1));
        if (scheme == io::EnvScheme::episodes) {
            if (!s.has("episodes")) throw Error(Errc::invalid_argument, "episodes scheme needs --episodes");
            params.episodes = io::load_episodes(s.text("episodes"));
            labeling = io::label_environments(panel, scheme, nullptr, params);
        } else {
            if (!macro) throw Error(Errc::invalid_argument, std::string(io::to_string(scheme)) + " needs --macro");
            const char* column = scheme == io::EnvScheme::vix_terciles   ? "vix_level"
                                 : scheme == io::EnvScheme::rates_trend_60d ? "dgs10_level"
                                                                             : "dxy_level";
            const Eigen::VectorXd levels = io::align_levels(panel.dates, *macro, column).levels;
            labeling = io::label_environments(panel, scheme, &levels, params);
        }
        notes.insert(notes.end(), labeling->notes.begin(), labeling->notes.end());
    }

    diagnostics::BatteryConfig config;
    const auto se_kind = regression::se_kind_from_string(s.text("se_kind"));
    config.attenuation.min_events = s.count("min_events", 2);
    config.attenuation.se_kind = se_kind;
    config.environment.min_rows = s.count("min_rows", 1);
    config.environment.se_kind = se_kind;
    config.environment.base_environment = s.optional_text("base_environment").value_or("");
    config.lead_lag.max_lag = static_cast<int>(s.count("max_lag", 1));
    config.lead_lag.threshold = s.real("threshold");
    config.lead_lag.se_kind = se_kind;
    if (const auto list = s.optional_text("lead_lag_assets")) {
        std::stringstream ss(*list);
        for (std::string a; std::getline(ss, a, ',');) {
            if (!a.empty()) config.lead_lag.assets.push_back(a);
        }
    }
    config.residual.window = s.count("window", 3);
    config.residual.gap = s.count("gap", 1);
    config.residual.se_kind = se_kind;
    config.renormalize = s.flag("renormalize");
    config.loo_asset = s.optional_text("loo_asset").value_or("");
    config.z_critical = s.real("z_critical");

    diagnostics::BatteryInputs inputs;
    inputs.panel = &panel;
    inputs.controls = &controls;
    inputs.events = events ? &*events : nullptr;
    inputs.labeling = labeling ? &*labeling : nullptr;
    inputs.weights = weights ? &*weights : nullptr;
    const auto rep = diagnostics::run_full_battery(inputs, config);

    json doc = report::to_json(rep);
    doc["inputs"] = {{"market_id", panel.market_id},
                     {"assets", panel.assets.size()},
                     {"dates", panel.size()},
                     {"first_date", io::format_date(panel.dates.front())},
                     {"last_date", io::format_date(panel.dates.back())},
                     {"controls", controls.names()},
                     {"notes", notes}};
    outputs.add("report.json", report::dump(doc));
    if (rep.attenuation) {
        outputs.add("attenuation.csv", render([&](std::ostream& os) { report::write_attenuation_csv(os, *rep.attenuation); }));
    }
    if (rep.env_betas) {
        outputs.add("env_betas.csv", render([&](std::ostream& os) { report::write_env_betas_csv(os, *rep.env_betas); }));
    }
    if (rep.lag_profile) {
        outputs.add("lag_profile.csv", render([&](std::ostream& os) { report::write_lag_profile_csv(os, *rep.lag_profile); }));
    }
    if (rep.leave_one_out) {
        outputs.add("leave_one_out.csv",
                    render([&](std::ostream& os) { report::write_leave_one_out_csv(os, *rep.leave_one_out); }));
    }
    if (rep.residual_loadings) {
        outputs.add("residual_loadings.csv",
                    render([&](std::ostream& os) { report::write_residual_loadings_csv(os, *rep.residual_loadings); }));
    }
    outputs.commit();

    out << report::dump(doc["sections"]);
    const diagnostics::SectionState* states[] = {&rep.attenuation_state, &rep.env_state, &rep.lag_state,
                                                 &rep.loo_state, &rep.residual_state};
    const bool any_ok = std::any_of(std::begin(states), std::end(states), [](const diagnostics::SectionState* st) {
        return st->status == diagnostics::SectionStatus::ok;
    });
    return any_ok ? ExitCode::ok : ExitCode::runtime;
}

// ---------------------------------------------------------------------------

int exit_code_for(Errc code) {
    switch (code) {
    case Errc::invalid_argument:
    case Errc::invalid_dag:
    case Errc::unknown_field:
    case Errc::io_error:
    case Errc::parse_error:
    case Errc::duplicate_key:
    case Errc::unknown_column:
    case Errc::missing_market_id:
    case Errc::unlabeled_assets:
    case Errc::overlapping_episodes:
        return ExitCode::validation;
    default:
        return ExitCode::runtime;
    }
}

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
    err << json{{"error", code}, {"message", message}}.dump() << '\n';
}

struct Subcommand {
    const char* name;
    unsigned bit;
    const char* help;
    int (*run)(const Settings&, std::ostream&);
};

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    static const Subcommand commands[] = {
        {"simulate", kSimulate, "Monte Carlo check of a preset SEM against its closed form, or draws from --sem",
         cmd_simulate},
        {"replicate-fig3", kFig3, "simulate the fork and chain presets over the sigma_x grid", cmd_fig3},
        {"check-dag", kCheckDag, "validate, classify and check a hypothesised graph", cmd_check_dag},
        {"diagnose", kDiagnose, "run the diagnostic battery on a return panel", cmd_diagnose},
    };

    CLI::App app{"Structural causal readings of CAPM betas"};
    app.require_subcommand(1);
    std::map<std::string, std::string> raw_config;
    std::map<std::string, std::map<std::string, std::string>> raw;
    std::map<std::string, std::map<std::string, bool>> raw_flags;
    std::map<std::string, CLI::App*> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        subs[c.name] = sub;
        sub->add_option("--config", raw_config[c.name], "JSON file of settings (keys as below, with underscores)");
        for (const auto& k : knobs()) {
            if (!(k.commands & c.bit)) continue;
            std::string help = k.help;
            if (!k.fallback.is_null()) help += " [" + (k.fallback.is_string() ? k.fallback.get<std::string>() : k.fallback.dump()) + "]";
            if (k.kind == Kind::flag) {
                sub->add_flag(flag_name(k.key), raw_flags[c.name][k.key], help);
            } else {
                sub->add_option(flag_name(k.key), raw[c.name][k.key], help);
            }
        }
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            const CLI::App* target = &app;
            for (const auto& [name, sub] : subs) {
                if (sub->parsed()) target = sub;
            }
            out << target->help();
            return ExitCode::ok;
        }
        report_error(err, "invalid_argument", e.what());
        return ExitCode::validation;
    }

    for (const auto& c : commands) {
        CLI::App* sub = subs[c.name];
        if (!sub->parsed()) continue;
        try {
            Settings settings(c.bit, c.name);
            if (!raw_config[c.name].empty()) {
                const fs::path path = raw_config[c.name];
                const json cfg = scm::read_json_file(path);
                if (!cfg.is_object()) throw Error(Errc::parse_error, path.string() + ": config must be a JSON object");
                for (const auto& [key, value] : cfg.items()) settings.set_from_json(key, value, path.parent_path());
            }
            for (const auto& k : knobs()) {
                if (!(k.commands & c.bit)) continue;
                if (sub->count(flag_name(k.key)) == 0) continue;
                settings.set_from_text(k.key, k.kind == Kind::flag ? "" : raw[c.name][k.key]);
            }
            return c.run(settings, out);
        } catch (const Error& e) {
            report_error(err, to_string(e.code()), e.what());
            return exit_code_for(e.code());
        } catch (const std::exception& e) {
            report_error(err, "runtime_error", e.what());
            return ExitCode::runtime;
        }
    }
    return ExitCode::validation;
}

} // namespace capmscm::cli
