#include "capmscm/report_json.hpp"

#include "capmscm/format.hpp"

#include <cmath>
#include <cstdlib>
#include <ostream>

namespace capmscm::report {

namespace {

json nodes_json(const std::vector<scm::NodeRef>& nodes) {
    json out = json::array();
    for (const auto& n : nodes) out.push_back(n.str());
    return out;
}

json slope_json(const diagnostics::Slope& s) { return {{"beta", number(s.beta)}, {"se", number(s.se)}}; }

json section_json(const diagnostics::SectionState& s) {
    json out{{"status", diagnostics::to_string(s.status)}};
    if (!s.note.empty()) out["note"] = s.note;
    return out;
}

json loadings_json(const std::vector<diagnostics::Loading>& ls) {
    json out = json::array();
    for (const auto& l : ls) {
        json row{{"control", l.control}, {"identified", l.identified}};
        if (l.identified) {
            row["coef"] = number(l.coef);
            row["se"] = number(l.se);
        }
        out.push_back(row);
    }
    return out;
}

json lags_json(const regression::LagProfile& p) {
    json out = json::array();
    for (const auto& l : p.lags) out.push_back({{"lag", l.lag}, {"coef", number(l.coef)}, {"se", number(l.se)}});
    return out;
}

std::string cell(double v) { return format_number(v); }

} // namespace

json number(double value) {
    if (!std::isfinite(value)) return nullptr;
    return std::strtod(format_number(value).c_str(), nullptr);
}

json to_json(const scm::ValidationVerdict& v) {
    json out{{"ok", v.ok()}, {"violations", json::array()}};
    for (const auto& x : v.violations) {
        out["violations"].push_back({{"kind", scm::to_string(x.kind)}, {"nodes", nodes_json(x.nodes)}, {"message", x.message}});
    }
    return out;
}

json to_json(const graph::AdmissibilityVerdict& v) {
    json out{{"status", graph::to_string(v.status)}, {"rationale", graph::to_string(v.rationale)}};
    out["corollary"] = v.corollary ? json(graph::to_string(*v.corollary)) : json(nullptr);
    return out;
}

json to_json(const graph::ChecklistReport& c) {
    return {{"temporal_priority", c.temporal_priority},
            {"acyclicity", c.acyclicity},
            {"mechanism", c.mechanism},
            {"causal_elimination", c.causal_elimination},
            {"overall", c.overall},
            {"warnings", c.warnings}};
}

json to_json(const graph::DagClass& c) {
    json out{{"class", graph::to_string(c.case_label)}, {"warnings", c.warnings}};
    out["beta_reading"] = c.beta_reading ? json(graph::to_string(*c.beta_reading)) : json(nullptr);
    return out;
}

json to_json(const regression::RegressionFit& fit) {
    json coefs = json::array();
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        const auto k = static_cast<Eigen::Index>(j);
        coefs.push_back({{"name", fit.names[j]}, {"coef", number(fit.coef(k))}, {"se", number(fit.se(k))}});
    }
    json out{{"coefficients", coefs},
             {"r_squared", number(fit.r_squared)},
             {"n_obs", fit.n_obs},
             {"se_kind", regression::to_string(fit.se_kind)}};
    if (fit.se_kind == regression::SeKind::cluster_by_date) out["n_clusters"] = fit.n_clusters;
    return out;
}

json to_json(const diagnostics::DiagnosticReport& r) {
    json out;
    out["sections"] = {{"attenuation", section_json(r.attenuation_state)},
                       {"env_betas", section_json(r.env_state)},
                       {"lag_profile", section_json(r.lag_state)},
                       {"leave_one_out", section_json(r.loo_state)},
                       {"residual_loadings", section_json(r.residual_state)}};
    out["verdict_notes"] = r.verdict_notes;

    if (r.attenuation) {
        const auto& a = *r.attenuation;
        json j{{"beta_without_controls", number(a.without_controls.beta)},
               {"se_without_controls", number(a.without_controls.se)},
               {"beta_with_controls", number(a.with_controls.beta)},
               {"se_with_controls", number(a.with_controls.se)},
               {"controls", a.controls_used},
               {"n_events", a.n_events},
               {"n_obs", a.n_obs}};
        j["ratio"] = a.ratio ? number(*a.ratio) : json(nullptr);
        if (a.with_controls_no_sector) j["no_sector"] = slope_json(*a.with_controls_no_sector);
        out["attenuation"] = j;
    } else {
        out["attenuation"] = nullptr;
    }

    if (r.env_betas) {
        const auto& t = *r.env_betas;
        json rows = json::array();
        for (const auto& b : t.fit.betas) {
            rows.push_back({{"environment", b.environment}, {"beta", number(b.beta)}, {"se", number(b.se)}, {"n_obs", b.n_obs}});
        }
        out["env_betas"] = {{"scheme", t.scheme},
                            {"base", t.fit.base_environment},
                            {"rows", rows},
                            {"dropped_controls", t.fit.dropped_controls},
                            {"unlabeled_rows", t.unlabeled_rows}};
    } else {
        out["env_betas"] = nullptr;
    }

    if (r.lag_profile) {
        const auto& l = *r.lag_profile;
        out["lag_profile"] = {{"market_leads", lags_json(l.market_leads)},
                              {"asset_leads", lags_json(l.asset_leads)},
                              {"market_leads_significant", l.market_leads_significant},
                              {"asset_leads_significant", l.asset_leads_significant},
                              {"direction", diagnostics::to_string(l.direction)}};
    } else {
        out["lag_profile"] = nullptr;
    }

    if (r.leave_one_out) {
        const auto& l = *r.leave_one_out;
        json j{{"asset", l.asset},
               {"beta_full", number(l.full.beta)},
               {"se_full", number(l.full.se)},
               {"beta_loo", number(l.loo.beta)},
               {"se_loo", number(l.loo.se)},
               {"renormalized", l.renormalized},
               {"notes", l.notes}};
        j["drop_fraction"] = l.drop_fraction ? number(*l.drop_fraction) : json(nullptr);
        out["leave_one_out"] = j;
    } else {
        out["leave_one_out"] = nullptr;
    }

    if (r.residual_loadings) {
        const auto& rl = *r.residual_loadings;
        json events = json::array();
        for (const auto& e : rl.per_event) {
            events.push_back({{"date", io::format_date(e.date)}, {"n_assets", e.n_assets}, {"loadings", loadings_json(e.loadings)}});
        }
        out["residual_loadings"] = {{"pooled", loadings_json(rl.pooled)},
                                    {"per_event", events},
                                    {"n_obs", rl.n_obs},
                                    {"notes", rl.notes}};
    } else {
        out["residual_loadings"] = nullptr;
    }
    return out;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

void write_attenuation_csv(std::ostream& out, const diagnostics::AttenuationRecord& a) {
    out << "specification,beta,se\n";
    out << "without_controls," << cell(a.without_controls.beta) << ',' << cell(a.without_controls.se) << '\n';
    out << "with_controls," << cell(a.with_controls.beta) << ',' << cell(a.with_controls.se) << '\n';
    if (a.with_controls_no_sector) {
        out << "with_controls_no_sector," << cell(a.with_controls_no_sector->beta) << ','
            << cell(a.with_controls_no_sector->se) << '\n';
    }
}

void write_env_betas_csv(std::ostream& out, const diagnostics::EnvironmentTable& t) {
    out << "scheme,environment,beta,se,ci_low,ci_high,n_obs\n";
    for (const auto& b : t.fit.betas) {
        out << t.scheme << ',' << b.environment << ',' << cell(b.beta) << ',' << cell(b.se) << ','
            << cell(b.beta - 1.96 * b.se) << ',' << cell(b.beta + 1.96 * b.se) << ',' << b.n_obs << '\n';
    }
}

void write_lag_profile_csv(std::ostream& out, const diagnostics::LeadLagResult& r) {
    out << "direction,lag,coef,se,ci_low,ci_high\n";
    const auto rows = [&](const char* name, const regression::LagProfile& p) {
        for (const auto& l : p.lags) {
            out << name << ',' << l.lag << ',' << cell(l.coef) << ',' << cell(l.se) << ','
                << cell(l.coef - 1.96 * l.se) << ',' << cell(l.coef + 1.96 * l.se) << '\n';
        }
    };
    rows("market_leads", r.market_leads);
    rows("asset_leads", r.asset_leads);
}

void write_leave_one_out_csv(std::ostream& out, const diagnostics::LeaveOneOut& l) {
    out << "asset,beta_full,se_full,beta_loo,se_loo,drop_fraction,renormalized\n";
    out << l.asset << ',' << cell(l.full.beta) << ',' << cell(l.full.se) << ',' << cell(l.loo.beta) << ','
        << cell(l.loo.se) << ',' << (l.drop_fraction ? cell(*l.drop_fraction) : std::string()) << ','
        << (l.renormalized ? "true" : "false") << '\n';
}

void write_residual_loadings_csv(std::ostream& out, const diagnostics::ResidualLoadings& r) {
    out << "event,control,coef,se,identified\n";
    const auto rows = [&](const std::string& event, const std::vector<diagnostics::Loading>& ls) {
        for (const auto& l : ls) {
            out << event << ',' << l.control << ',' << (l.identified ? cell(l.coef) : std::string()) << ','
                << (l.identified ? cell(l.se) : std::string()) << ',' << (l.identified ? "true" : "false") << '\n';
        }
    };
    rows("pooled", r.pooled);
    for (const auto& e : r.per_event) rows(io::format_date(e.date), e.loadings);
}

} // namespace capmscm::report
