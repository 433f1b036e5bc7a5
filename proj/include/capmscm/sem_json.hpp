#pragma once

// JSON form of SEM and DAG specifications:
//
//   {
//     "nodes": [{"name": "Z", "offset": 0}, {"name": "X", "offset": 1, "observed": true}],
//     "edges": [{"from": "Z@0", "to": "X@1", "coef": 1.0}],
//     "noise": {"Z": 1.0, "X": 0.5}
//   }
//
// Edge endpoints are "NAME@OFFSET" or a bare name that occurs once. Unknown
// fields are rejected at every level.

#include "capmscm/scm_core.hpp"

#include <json.hpp>

#include <filesystem>
#include <set>
#include <string>

namespace capmscm::scm {

/// Full SEM: every edge needs "coef" and every node name a noise sd.
/// `extra_top_level` lists additional accepted top-level keys (ignored here).
LinearSem sem_from_json(const nlohmann::json& doc, const std::set<std::string>& extra_top_level = {});

/// Graph only: "coef" and "noise" are optional.
TimeIndexedDag dag_from_json(const nlohmann::json& doc, const std::set<std::string>& extra_top_level = {});

nlohmann::json to_json(const TimeIndexedDag& dag);
nlohmann::json to_json(const LinearSem& sem);

/// Reads and parses a JSON file; parse failures carry line/column context.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Rejects keys of `obj` outside `allowed`; `where` names the object in messages.
void require_known_fields(const nlohmann::json& obj, const std::set<std::string>& allowed,
                          const std::string& where);

} // namespace capmscm::scm
