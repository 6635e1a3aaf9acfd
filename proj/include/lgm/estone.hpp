#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lgm/assumptions.hpp"
#include "lgm/distance.hpp"
#include "lgm/graph.hpp"
#include "lgm/latent_tree.hpp"

namespace lgm {

struct EstoneConfig {
    double r = 0.0;       ///< distance radius for the local balls
    double lambda = 0.0;  ///< quartet confidence bound
    double tau = 1e-6;    ///< merge threshold
    DistanceMetric metric = DistanceMetric::normalized_det;  ///< recorded in outputs
    int alphabet_size = 2;
    bool literal_hidden_distance = false;
};

/// One structural mutation of the estimate, for the provenance log.
struct ProvenanceEvent {
    std::string step;  ///< "local-mst" | "rg" | "merge" | "unify"
    int site = -1;     ///< node the step was anchored at, -1 for global passes
    std::vector<std::pair<int, int>> added_edges;
    std::vector<std::pair<int, int>> removed_edges;
    std::vector<int> added_hidden;
    std::vector<int> removed_hidden;
};

struct GraphEstimate {
    LatentGraph graph;
    std::map<std::pair<int, int>, double> edge_lengths;
    /// Distances over observed and introduced hidden nodes; hidden rows are
    /// materialized from the children-averaging placement.
    DistanceMatrix extended;
    std::vector<ProvenanceEvent> provenance;
    int first_hidden_id = 0;  ///< ids >= this are introduced hidden nodes

    int component_count() const {
        std::map<int, int> parent;
        for (int v : graph.nodes()) parent[v] = v;
        std::function<int(int)> find = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto& [u, v] : graph.edges()) parent[find(u)] = find(v);
        std::set<int> roots;
        for (int v : graph.nodes()) roots.insert(find(v));
        return static_cast<int>(roots.size());
    }
};

struct RWindow {
    double r_min = 0.0;
    double r_max = 0.0;
};

/// Radius window read off a distance matrix: r_max is the largest pairwise
/// distance, r_min the largest nearest-neighbor distance. Radii below r_min
/// disconnect some node; radii at or above r_max make every ball global.
inline RWindow r_window(const DistanceMatrix& D) {
    RWindow w;
    const std::size_t p = D.size();
    if (p <= 1) return w;
    double worst_nn = 0.0, overall = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double nn = kDCap;
        for (std::size_t i = 0; i < p; ++i) {
            if (i == j) continue;
            nn = std::min(nn, D.at(i, j));
            overall = std::max(overall, D.at(i, j));
        }
        worst_nn = std::max(worst_nn, nn);
    }
    w.r_min = worst_nn;
    w.r_max = overall;
    return w;
}

struct DefaultParameters {
    double lambda = 0.0;
    double tau = 0.0;
    double r = 0.0;
    bool tau_fell_back = false;  ///< theoretical tau was nonpositive
};

/// Parameter defaults: the theoretical quartet bound and merge threshold when
/// distance bounds are available, otherwise sample-size heuristics
/// (lambda = 2 sqrt(log p / n), tau = half the smallest nearest-neighbor
/// distance) with r at the window midpoint.
inline DefaultParameters default_parameters(const DistanceMatrix& D, std::size_t n,
                                            const AssumptionReport* bounds = nullptr) {
    if (n < 1) throw std::invalid_argument("default_parameters requires n >= 1");
    DefaultParameters out;
    RWindow w = r_window(D);
    const std::size_t p = D.size();
    double min_nn = kDCap;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            if (i != j) min_nn = std::min(min_nn, D.at(i, j));
    double heuristic_lambda =
        2.0 * std::sqrt(std::log(static_cast<double>(std::max<std::size_t>(p, 2))) / n);
    double heuristic_tau = 0.5 * min_nn;
    if (bounds) {
        out.lambda = bounds->lambda_theoretical;
        out.r = bounds->r_used;
        if (bounds->tau_theoretical > 0.0) {
            out.tau = bounds->tau_theoretical;
        } else {
            out.tau = heuristic_tau;
            out.tau_fell_back = true;
        }
    } else {
        out.lambda = heuristic_lambda;
        out.tau = heuristic_tau;
        out.r = 0.5 * (w.r_min + w.r_max);
    }
    return out;
}

namespace detail {

struct EstoneState {
    std::map<std::pair<int, int>, double> dist;
    std::vector<int> ids;  // ascending; hidden ids appended past the observed range

    double d(int u, int v) const {
        if (u == v) return 0.0;
        if (u > v) std::swap(u, v);
        return dist.at({u, v});
    }
    void append(int id, const std::map<int, double>& row) {
        for (const auto& [x, val] : row) dist[{std::min(id, x), std::max(id, x)}] = val;
        ids.push_back(id);
    }
    DistanceMatrix submatrix(const std::vector<int>& subset, DistanceVariant variant,
                             DistanceMetric metric) const {
        DistanceMatrix D;
        D.ids = subset;
        std::sort(D.ids.begin(), D.ids.end());
        D.variant = variant;
        D.metric = metric;
        D.d.assign(D.ids.size() * D.ids.size(), 0.0);
        for (std::size_t i = 0; i < D.ids.size(); ++i)
            for (std::size_t j = i + 1; j < D.ids.size(); ++j) {
                D.at(i, j) = d(D.ids[i], D.ids[j]);
                D.at(j, i) = D.at(i, j);
            }
        return D;
    }
};

inline void add_or_update_edge(GraphEstimate& est, int u, int v, double len,
                               ProvenanceEvent& ev) {
    if (u > v) std::swap(u, v);
    if (!est.graph.has_edge(u, v)) {
        est.graph.add_edge(u, v);
        ev.added_edges.push_back({u, v});
    }
    est.edge_lengths[{u, v}] = len;
}

/// Splice out hidden nodes of degree <= 2 left behind by later subgraph
/// replacements.
inline void suppress_degenerate_hidden(GraphEstimate& est) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (int h : est.graph.hidden_nodes()) {
            int deg = est.graph.degree(h);
            if (deg > 2) continue;
            ProvenanceEvent ev;
            ev.step = "merge";
            ev.removed_hidden.push_back(h);
            auto nbs = est.graph.neighbors(h);
            double total = 0.0;
            for (int nb : nbs) {
                auto key = std::minmax(h, nb);
                total += est.edge_lengths[{key.first, key.second}];
                est.edge_lengths.erase({key.first, key.second});
                ev.removed_edges.push_back({key.first, key.second});
            }
            if (deg == 2 && !est.graph.has_edge(nbs[0], nbs[1])) {
                est.graph.remove_node(h);
                est.graph.add_edge(nbs[0], nbs[1]);
                auto key = std::minmax(nbs[0], nbs[1]);
                est.edge_lengths[{key.first, key.second}] = total;
                ev.added_edges.push_back({key.first, key.second});
            } else {
                est.graph.remove_node(h);
            }
            est.provenance.push_back(std::move(ev));
            changed = true;
            break;
        }
    }
}

inline void finalize_extended(GraphEstimate& est, const EstoneState& st, DistanceVariant variant,
                              DistanceMetric metric) {
    std::vector<int> final_ids = est.graph.nodes();
    est.extended = st.submatrix(final_ids, variant, metric);
}

}  // namespace detail

/// Union of local minimum spanning trees over the distance balls B_r(v):
/// the fully observed learner (no hidden nodes are introduced).
inline GraphEstimate learn_fully_observed(const DistanceMatrix& D, double r) {
    D.validate();
    GraphEstimate est;
    est.first_hidden_id = D.ids.empty() ? 0 : *std::max_element(D.ids.begin(), D.ids.end()) + 1;
    for (int v : D.ids) est.graph.add_node(v, true);
    for (int v : D.ids) {
        std::vector<int> ball;
        for (int u : D.ids)
            if (D.between(u, v) <= r) ball.push_back(u);
        ProvenanceEvent ev;
        ev.step = "local-mst";
        ev.site = v;
        for (const auto& [a, b] : mst(D, ball))
            detail::add_or_update_edge(est, a, b, D.between(a, b), ev);
        if (!ev.added_edges.empty()) est.provenance.push_back(std::move(ev));
    }
    est.extended = D;
    return est;
}

/// Single recursive-grouping pass over all nodes of D (the latent tree /
/// forest learner).
inline GraphEstimate learn_rg(const DistanceMatrix& D, double lambda, double tau,
                              bool literal_hidden_distance = false) {
    D.validate();
    GraphEstimate est;
    est.first_hidden_id = D.ids.empty() ? 0 : *std::max_element(D.ids.begin(), D.ids.end()) + 1;
    detail::EstoneState st;
    st.ids = D.ids;
    for (std::size_t i = 0; i < D.size(); ++i)
        for (std::size_t j = i + 1; j < D.size(); ++j)
            st.dist[{D.ids[i], D.ids[j]}] = D.at(i, j);

    RgOptions opt{lambda, tau, literal_hidden_distance};
    LatentForest F = recursive_grouping(D, opt, est.first_hidden_id);

    for (int v : D.ids) est.graph.add_node(v, true);
    ProvenanceEvent ev;
    ev.step = "rg";
    for (int h : F.hidden_ids) {
        est.graph.add_node(h, false);
        ev.added_hidden.push_back(h);
        std::map<int, double> row;
        for (int x : st.ids) {
            double acc = 0.0;
            for (const auto& [a, pl] : F.children.at(h)) acc += st.d(a, x) - pl;
            row[x] = std::max(0.0, acc / static_cast<double>(F.children.at(h).size()));
        }
        st.append(h, row);
    }
    for (const auto& [e, len] : F.edge_lengths)
        detail::add_or_update_edge(est, e.first, e.second, len, ev);
    est.provenance.push_back(std::move(ev));
    detail::suppress_degenerate_hidden(est);
    detail::finalize_extended(est, st, D.variant, D.metric);
    return est;
}

/// Graph estimation from pairwise distances:
///   1. local MST T_v over each ball B_r(v), initial estimate = union of T_v;
///   2. for every non-leaf v of the initial estimate, in ascending id order,
///      rebuild the closed neighborhood of v with recursive grouping and
///      replace the induced subgraph, carrying distances to the introduced
///      hidden nodes in an extended matrix so later neighborhoods stay
///      well-defined.
/// Hidden nodes introduced close (< tau) to an existing one are unified with
/// it instead of duplicated. Disconnected outputs are legal and reported via
/// component_count().
inline GraphEstimate estone(const DistanceMatrix& D, const EstoneConfig& cfg) {
    D.validate();
    if (cfg.r <= 0.0) throw std::invalid_argument("config requires r > 0");
    if (cfg.tau <= 0.0) throw std::invalid_argument("config requires tau > 0");
    if (cfg.lambda < 0.0) throw std::invalid_argument("config requires lambda >= 0");

    GraphEstimate est;
    est.first_hidden_id = D.ids.empty() ? 0 : *std::max_element(D.ids.begin(), D.ids.end()) + 1;
    int next_hidden = est.first_hidden_id;

    detail::EstoneState st;
    st.ids = D.ids;
    for (std::size_t i = 0; i < D.size(); ++i)
        for (std::size_t j = i + 1; j < D.size(); ++j)
            st.dist[{D.ids[i], D.ids[j]}] = D.at(i, j);

    for (int v : D.ids) est.graph.add_node(v, true);

    // Stage 1: union of local MSTs.
    for (int v : D.ids) {
        std::vector<int> ball;
        for (int u : D.ids)
            if (D.between(u, v) <= cfg.r) ball.push_back(u);
        ProvenanceEvent ev;
        ev.step = "local-mst";
        ev.site = v;
        for (const auto& [a, b] : mst(D, ball))
            detail::add_or_update_edge(est, a, b, D.between(a, b), ev);
        if (!ev.added_edges.empty()) est.provenance.push_back(std::move(ev));
    }

    // Non-leaves of the initial estimate, fixed before any replacement.
    std::vector<int> sites;
    for (int v : D.ids)
        if (est.graph.degree(v) >= 2) sites.push_back(v);

    // Stage 2: neighborhood-wise latent tree reconstruction.
    for (int v : sites) {
        std::vector<int> A = est.graph.neighbors(v);
        A.push_back(v);
        std::sort(A.begin(), A.end());
        if (A.size() < 2) continue;
        std::set<int> aset(A.begin(), A.end());

        DistanceMatrix DA = st.submatrix(A, D.variant, D.metric);
        RgOptions opt{cfg.lambda, cfg.tau, cfg.literal_hidden_distance};
        LatentForest S = recursive_grouping(DA, opt, next_hidden);
        next_hidden = S.next_hidden_id;

        ProvenanceEvent ev;
        ev.step = "rg";
        ev.site = v;

        // Materialize extended rows for the new hidden nodes, then unify any
        // that landed on top of a previously introduced hidden node.
        std::map<int, int> rename;
        for (int h : S.hidden_ids) {
            std::map<int, double> row;
            for (int x : st.ids) {
                double acc = 0.0;
                for (const auto& [a, pl] : S.children.at(h)) acc += st.d(a, x) - pl;
                row[x] = std::max(0.0, acc / static_cast<double>(S.children.at(h).size()));
            }
            int match = -1;
            for (int hold : est.graph.hidden_nodes()) {
                if (aset.count(hold)) continue;
                if (row.at(hold) < cfg.tau) {
                    match = hold;
                    break;
                }
            }
            if (match >= 0) {
                rename[h] = match;
                ProvenanceEvent uev;
                uev.step = "unify";
                uev.site = v;
                uev.removed_hidden.push_back(h);
                uev.added_hidden.push_back(match);
                est.provenance.push_back(std::move(uev));
            } else {
                st.append(h, row);
                est.graph.add_node(h, false);
                ev.added_hidden.push_back(h);
            }
        }

        // Replace the induced subgraph over A with S.
        for (const auto& [a, b] : est.graph.edges())
            if (aset.count(a) && aset.count(b)) ev.removed_edges.push_back({a, b});
        for (const auto& [a, b] : ev.removed_edges) {
            est.graph.remove_edge(a, b);
            est.edge_lengths.erase({a, b});
        }
        for (const auto& [e, len] : S.edge_lengths) {
            int a = e.first, b = e.second;
            if (rename.count(a)) a = rename[a];
            if (rename.count(b)) b = rename[b];
            if (a == b) continue;
            detail::add_or_update_edge(est, a, b, len, ev);
        }
        est.provenance.push_back(std::move(ev));
    }

    detail::suppress_degenerate_hidden(est);
    detail::finalize_extended(est, st, D.variant, D.metric);
    return est;
}

}  // namespace lgm
