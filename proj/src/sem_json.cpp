#include "capmscm/sem_json.hpp"

#include "capmscm/error.hpp"

#include <fstream>
#include <sstream>

namespace capmscm::scm {

namespace {

using nlohmann::json;

const json& field(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw Error(Errc::parse_error, where + ": missing field '" + key + "'");
    return *it;
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) throw Error(Errc::parse_error, where + " must be a number");
    return v.get<double>();
}

struct Parsed {
    TimeIndexedDag dag;
    std::map<Edge, double> coefficients;
    std::map<std::string, double> noise;
    bool all_coefficients = true;
    bool has_noise = false;
};

Parsed parse(const json& doc, const std::set<std::string>& extra) {
    if (!doc.is_object()) throw Error(Errc::parse_error, "specification must be a JSON object");
    std::set<std::string> allowed{"nodes", "edges", "noise"};
    allowed.insert(extra.begin(), extra.end());
    require_known_fields(doc, allowed, "specification");

    Parsed out;
    const json& nodes = field(doc, "nodes", "specification");
    if (!nodes.is_array()) throw Error(Errc::parse_error, "'nodes' must be an array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = "nodes[" + std::to_string(i) + "]";
        const json& n = nodes[i];
        if (!n.is_object()) throw Error(Errc::parse_error, where + " must be an object");
        require_known_fields(n, {"name", "offset", "observed"}, where);
        const json& name = field(n, "name", where);
        if (!name.is_string()) throw Error(Errc::parse_error, where + ".name must be a string");
        int offset = 0;
        if (n.contains("offset")) {
            if (!n["offset"].is_number_integer()) {
                throw Error(Errc::parse_error, where + ".offset must be an integer");
            }
            offset = n["offset"].get<int>();
        }
        const auto& ref = out.dag.add_node(name.get<std::string>(), offset);
        if (n.contains("observed")) {
            if (!n["observed"].is_boolean()) throw Error(Errc::parse_error, where + ".observed must be boolean");
            if (!n["observed"].get<bool>()) out.dag.set_observed(ref.name, false);
        }
    }

    if (doc.contains("edges")) {
        const json& edges = doc["edges"];
        if (!edges.is_array()) throw Error(Errc::parse_error, "'edges' must be an array");
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const std::string where = "edges[" + std::to_string(i) + "]";
            const json& e = edges[i];
            if (!e.is_object()) throw Error(Errc::parse_error, where + " must be an object");
            require_known_fields(e, {"from", "to", "coef"}, where);
            const json& from = field(e, "from", where);
            const json& to = field(e, "to", where);
            if (!from.is_string() || !to.is_string()) {
                throw Error(Errc::parse_error, where + ": 'from' and 'to' must be strings");
            }
            const NodeRef f = out.dag.resolve(from.get<std::string>());
            const NodeRef t = out.dag.resolve(to.get<std::string>());
            out.dag.add_edge(f, t);
            if (e.contains("coef")) {
                out.coefficients[Edge{f, t}] = number(e["coef"], where + ".coef");
            } else {
                out.all_coefficients = false;
            }
        }
    }

    if (doc.contains("noise")) {
        const json& noise = doc["noise"];
        if (!noise.is_object()) throw Error(Errc::parse_error, "'noise' must be an object");
        out.has_noise = true;
        for (const auto& [name, sd] : noise.items()) out.noise[name] = number(sd, "noise." + name);
    }
    return out;
}

} // namespace

void require_known_fields(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) throw Error(Errc::unknown_field, where + ": unknown field '" + key + "'");
    }
}

LinearSem sem_from_json(const json& doc, const std::set<std::string>& extra_top_level) {
    Parsed p = parse(doc, extra_top_level);
    if (!p.all_coefficients) throw Error(Errc::parse_error, "every edge of a SEM needs a 'coef'");
    if (!p.has_noise) throw Error(Errc::parse_error, "specification: missing field 'noise'");
    return LinearSem(std::move(p.dag), std::move(p.coefficients), std::move(p.noise));
}

TimeIndexedDag dag_from_json(const json& doc, const std::set<std::string>& extra_top_level) {
    return parse(doc, extra_top_level).dag;
}

json to_json(const TimeIndexedDag& dag) {
    json doc;
    doc["nodes"] = json::array();
    for (const auto& n : dag.nodes()) {
        json node{{"name", n.name}, {"offset", n.offset}};
        if (!dag.observed(n.name)) node["observed"] = false;
        doc["nodes"].push_back(node);
    }
    doc["edges"] = json::array();
    for (const auto& e : dag.edges()) doc["edges"].push_back({{"from", e.from.str()}, {"to", e.to.str()}});
    return doc;
}

json to_json(const LinearSem& sem) {
    json doc = to_json(sem.dag());
    for (auto& e : doc["edges"]) {
        e["coef"] = sem.coefficient(NodeRef::parse(e["from"].get<std::string>()),
                                    NodeRef::parse(e["to"].get<std::string>()));
    }
    doc["noise"] = json::object();
    for (const auto& [name, sd] : sem.noise()) doc["noise"][name] = sd;
    return doc;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw Error(Errc::parse_error, path.string() + ": " + e.what());
    }
}

} // namespace capmscm::scm
