#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lgm/common.hpp"
#include "lgm/distance.hpp"
#include "lgm/estone.hpp"
#include "lgm/graph.hpp"
#include "lgm/ising.hpp"
#include "lgm/sample_matrix.hpp"

namespace lgm::io {

using nlohmann::json;

/// Shortest round-trip decimal rendering; used for every CSV number so that
/// reruns are byte-identical.
inline std::string fmt_double(double x) {
    char buf[40];
    auto r = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, r.ptr);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body;
}

inline json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError("invalid JSON in " + what);
    return j;
}

// ---------------------------------------------------------------------------
// Graph / model JSON
// ---------------------------------------------------------------------------

inline json graph_to_json(const LatentGraph& G) {
    json nodes = json::array(), edges = json::array();
    for (int v : G.nodes()) nodes.push_back({{"id", v}, {"observed", G.is_observed(v)}});
    for (const auto& [u, v] : G.edges()) edges.push_back({u, v});
    return json{{"nodes", nodes}, {"edges", edges}};
}

inline LatentGraph graph_from_json(const json& j) {
    try {
        LatentGraph G;
        for (const auto& n : j.at("nodes"))
            G.add_node(n.at("id").get<int>(), n.at("observed").get<bool>());
        for (const auto& e : j.at("edges")) G.add_edge(e.at(0).get<int>(), e.at(1).get<int>());
        return G;
    } catch (const json::exception& ex) {
        throw ParseError(std::string("graph JSON: ") + ex.what());
    }
}

inline json model_to_json(const IsingModel& M) {
    json theta = json::array(), phi = json::array();
    for (const auto& [e, val] : M.theta)
        theta.push_back({{"u", e.first}, {"v", e.second}, {"val", val}});
    for (const auto& [v, val] : M.phi) phi.push_back({{"id", v}, {"val", val}});
    return json{{"graph", graph_to_json(M.graph)}, {"theta", theta}, {"phi", phi}};
}

inline IsingModel model_from_json(const json& j) {
    try {
        IsingModel M;
        M.graph = graph_from_json(j.at("graph"));
        for (const auto& t : j.at("theta")) {
            int u = t.at("u").get<int>(), v = t.at("v").get<int>();
            if (u > v) std::swap(u, v);
            M.theta[{u, v}] = t.at("val").get<double>();
        }
        for (const auto& p : j.at("phi")) M.phi[p.at("id").get<int>()] = p.at("val").get<double>();
        M.validate();
        return M;
    } catch (const json::exception& ex) {
        throw ParseError(std::string("model JSON: ") + ex.what());
    }
}

// ---------------------------------------------------------------------------
// Samples CSV (header = node ids; binary cells written as -1/+1)
// ---------------------------------------------------------------------------

inline std::string samples_to_csv(const SampleMatrix& S) {
    std::ostringstream out;
    for (std::size_t c = 0; c < S.cols(); ++c) out << (c ? "," : "") << S.column_ids[c];
    out << "\n";
    for (std::size_t r = 0; r < S.rows(); ++r) {
        for (std::size_t c = 0; c < S.cols(); ++c) {
            int cell = S.at(r, c);
            if (S.alphabet_size == 2) cell = cell ? 1 : -1;
            out << (c ? "," : "") << cell;
        }
        out << "\n";
    }
    return out.str();
}

inline SampleMatrix samples_from_csv(const std::string& body) {
    SampleMatrix S;
    std::istringstream in(body);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("samples CSV: empty file");
    std::istringstream hs(line);
    std::string tok;
    while (std::getline(hs, tok, ',')) {
        try {
            S.column_ids.push_back(std::stoi(tok));
        } catch (...) {
            throw ParseError("samples CSV: bad header id '" + tok + "'");
        }
    }
    int max_idx = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::size_t c = 0;
        while (std::getline(ls, tok, ',')) {
            int v;
            try {
                v = std::stoi(tok);
            } catch (...) {
                throw ParseError("samples CSV: bad cell '" + tok + "'");
            }
            if (v == -1) v = 0;  // spin encoding
            if (v < 0) throw ParseError("samples CSV: cell below alphabet range");
            max_idx = std::max(max_idx, v);
            S.cells.push_back(static_cast<std::uint8_t>(v));
            ++c;
        }
        if (c != S.cols()) throw ParseError("samples CSV: ragged row");
    }
    S.alphabet_size = max_idx + 1;
    S.validate();
    return S;
}

// ---------------------------------------------------------------------------
// Distance CSV + metadata sidecar
// ---------------------------------------------------------------------------

inline std::string distances_to_csv(const DistanceMatrix& D) {
    std::ostringstream out;
    out << "id";
    for (int id : D.ids) out << "," << id;
    out << "\n";
    for (std::size_t i = 0; i < D.size(); ++i) {
        out << D.ids[i];
        for (std::size_t j = 0; j < D.size(); ++j) out << "," << fmt_double(D.at(i, j));
        out << "\n";
    }
    return out.str();
}

inline json distances_meta(const DistanceMatrix& D, const json& extra = json::object()) {
    json meta = extra;
    meta["variant"] = to_string(D.variant);
    meta["metric"] = to_string(D.metric);
    return meta;
}

inline DistanceMatrix distances_from_csv(const std::string& body,
                                         const json& meta = json::object()) {
    DistanceMatrix D;
    std::istringstream in(body);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("distance CSV: empty file");
    {
        std::istringstream hs(line);
        std::string tok;
        std::getline(hs, tok, ',');
        if (tok != "id") throw ParseError("distance CSV: header must start with 'id'");
        while (std::getline(hs, tok, ',')) D.ids.push_back(std::stoi(tok));
    }
    D.d.assign(D.ids.size() * D.ids.size(), 0.0);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (row >= D.size()) throw ParseError("distance CSV: too many rows");
        std::istringstream ls(line);
        std::string tok;
        std::getline(ls, tok, ',');
        if (std::stoi(tok) != D.ids[row]) throw ParseError("distance CSV: row id mismatch");
        for (std::size_t j = 0; j < D.size(); ++j) {
            if (!std::getline(ls, tok, ',')) throw ParseError("distance CSV: short row");
            D.at(row, j) = std::stod(tok);
        }
        ++row;
    }
    if (row != D.size()) throw ParseError("distance CSV: missing rows");
    if (meta.contains("metric"))
        D.metric = meta["metric"] == "raw_det" ? DistanceMetric::raw_det
                                               : DistanceMetric::normalized_det;
    if (meta.contains("variant")) {
        std::string v = meta["variant"];
        D.variant = v == "exact_global"       ? DistanceVariant::exact_global
                    : v == "exact_tree_limit" ? DistanceVariant::exact_tree_limit
                                              : DistanceVariant::empirical;
    }
    D.validate();
    return D;
}

// ---------------------------------------------------------------------------
// Graph estimate JSON: introduced hidden ids are namespaced "h0", "h1", ...
// in introduction order; observed ids stay numeric.
// ---------------------------------------------------------------------------

inline json estimate_to_json(const GraphEstimate& est, const json& meta = json::object()) {
    auto hidden = est.graph.hidden_nodes();
    std::map<int, std::string> hname;
    for (std::size_t i = 0; i < hidden.size(); ++i)
        hname[hidden[i]] = "h" + std::to_string(i);
    auto encode = [&](int v) -> json {
        auto it = hname.find(v);
        if (it != hname.end()) return it->second;
        return v;
    };
    json nodes = json::array(), edges = json::array(), lengths = json::array();
    for (int v : est.graph.nodes())
        nodes.push_back({{"id", encode(v)}, {"observed", est.graph.is_observed(v)}});
    for (const auto& [u, v] : est.graph.edges()) {
        edges.push_back({encode(u), encode(v)});
        lengths.push_back(est.edge_lengths.count({u, v}) ? est.edge_lengths.at({u, v}) : 0.0);
    }
    json ext_ids = json::array();
    for (int id : est.extended.ids) ext_ids.push_back(encode(id));
    json ext_rows = json::array();
    for (std::size_t i = 0; i < est.extended.size(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < est.extended.size(); ++j) row.push_back(est.extended.at(i, j));
        ext_rows.push_back(row);
    }
    return json{{"nodes", nodes},
                {"edges", edges},
                {"lengths", lengths},
                {"extended", {{"ids", ext_ids}, {"d", ext_rows}}},
                {"first_hidden_id", est.first_hidden_id},
                {"meta", meta}};
}

inline GraphEstimate estimate_from_json(const json& j) {
    try {
        GraphEstimate est;
        est.first_hidden_id = j.at("first_hidden_id").get<int>();
        auto decode = [&](const json& v) -> int {
            if (v.is_string()) {
                const std::string s = v.get<std::string>();
                return est.first_hidden_id + std::stoi(s.substr(1));
            }
            return v.get<int>();
        };
        for (const auto& n : j.at("nodes"))
            est.graph.add_node(decode(n.at("id")), n.at("observed").get<bool>());
        const auto& edges = j.at("edges");
        const auto& lengths = j.at("lengths");
        for (std::size_t i = 0; i < edges.size(); ++i) {
            int u = decode(edges[i].at(0)), v = decode(edges[i].at(1));
            est.graph.add_edge(u, v);
            if (u > v) std::swap(u, v);
            est.edge_lengths[{u, v}] = lengths.at(i).get<double>();
        }
        const auto& ext = j.at("extended");
        for (const auto& id : ext.at("ids")) est.extended.ids.push_back(decode(id));
        const auto& rows = ext.at("d");
        est.extended.d.assign(est.extended.ids.size() * est.extended.ids.size(), 0.0);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t k = 0; k < rows[i].size(); ++k)
                est.extended.at(i, k) = rows[i][k].get<double>();
        return est;
    } catch (const json::exception& ex) {
        throw ParseError(std::string("estimate JSON: ") + ex.what());
    }
}

// ---------------------------------------------------------------------------
// DOT export (hidden nodes dashed) and provenance JSON lines
// ---------------------------------------------------------------------------

inline std::string graph_to_dot(const LatentGraph& G,
                                const std::map<std::pair<int, int>, double>* lengths = nullptr) {
    auto hidden = G.hidden_nodes();
    std::map<int, std::string> name;
    for (std::size_t i = 0; i < hidden.size(); ++i) name[hidden[i]] = "h" + std::to_string(i);
    auto label = [&](int v) {
        auto it = name.find(v);
        return it != name.end() ? it->second : std::to_string(v);
    };
    std::ostringstream out;
    out << "graph estimate {\n";
    for (int v : G.nodes()) {
        out << "  \"" << label(v) << "\"";
        if (!G.is_observed(v)) out << " [style=dashed]";
        out << ";\n";
    }
    for (const auto& [u, v] : G.edges()) {
        out << "  \"" << label(u) << "\" -- \"" << label(v) << "\"";
        if (lengths && lengths->count({u, v}))
            out << " [label=\"" << fmt_double(lengths->at({u, v})) << "\"]";
        out << ";\n";
    }
    out << "}\n";
    return out.str();
}

inline std::string provenance_to_jsonl(const std::vector<ProvenanceEvent>& events) {
    std::ostringstream out;
    for (const auto& ev : events) {
        json j{{"step", ev.step}, {"site", ev.site}};
        json add = json::array(), rem = json::array();
        for (const auto& [u, v] : ev.added_edges) add.push_back({u, v});
        for (const auto& [u, v] : ev.removed_edges) rem.push_back({u, v});
        j["added_edges"] = add;
        j["removed_edges"] = rem;
        j["added_hidden"] = ev.added_hidden;
        j["removed_hidden"] = ev.removed_hidden;
        out << j.dump() << "\n";
    }
    return out.str();
}

}  // namespace lgm::io
