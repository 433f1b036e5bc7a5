#pragma once

// JSON and CSV renderings of verdicts, fits and diagnostic reports. Numbers
// carry at most twelve significant digits; object keys are sorted.

#include "capmscm/diagnostics.hpp"
#include "capmscm/graph_analysis.hpp"
#include "capmscm/regression.hpp"
#include "capmscm/scm_core.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace capmscm::report {

using nlohmann::json;

/// Rounded to twelve significant digits; non-finite values become null.
json number(double value);

json to_json(const scm::ValidationVerdict& v);
json to_json(const graph::AdmissibilityVerdict& v);
json to_json(const graph::ChecklistReport& c);
json to_json(const graph::DagClass& c);
json to_json(const regression::RegressionFit& fit);
json to_json(const diagnostics::DiagnosticReport& report);

/// Two-space indent and a trailing newline.
std::string dump(const json& doc);

void write_attenuation_csv(std::ostream& out, const diagnostics::AttenuationRecord& a);
void write_env_betas_csv(std::ostream& out, const diagnostics::EnvironmentTable& t);
void write_lag_profile_csv(std::ostream& out, const diagnostics::LeadLagResult& r);
void write_leave_one_out_csv(std::ostream& out, const diagnostics::LeaveOneOut& l);
void write_residual_loadings_csv(std::ostream& out, const diagnostics::ResidualLoadings& r);

} // namespace capmscm::report
