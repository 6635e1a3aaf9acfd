#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "lgm/common.hpp"

namespace lgm {

/// Undirected simple graph whose nodes are tagged observed or hidden.
/// Node ids are arbitrary ints; all iteration orders are sorted by id so
/// that every derived artifact is deterministic.
class LatentGraph {
public:
    void add_node(int id, bool observed) {
        auto [it, inserted] = nodes_.emplace(id, observed);
        if (!inserted) throw std::invalid_argument("duplicate node id " + std::to_string(id));
        adj_.emplace(id, std::vector<int>{});
    }

    void add_edge(int u, int v) {
        if (u == v) throw std::invalid_argument("self-loop rejected at node " + std::to_string(u));
        if (!has_node(u) || !has_node(v))
            throw std::invalid_argument("edge endpoint does not exist");
        if (has_edge(u, v)) throw std::invalid_argument("duplicate edge rejected");
        insert_sorted(adj_[u], v);
        insert_sorted(adj_[v], u);
        ++edge_count_;
    }

    void remove_edge(int u, int v) {
        if (!has_edge(u, v)) throw std::invalid_argument("edge not present");
        erase_value(adj_[u], v);
        erase_value(adj_[v], u);
        --edge_count_;
    }

    /// Removes a node and all incident edges.
    void remove_node(int id) {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw std::invalid_argument("node not present");
        for (int nb : adj_[id]) {
            erase_value(adj_[nb], id);
            --edge_count_;
        }
        adj_.erase(id);
        nodes_.erase(it);
    }

    void set_observed(int id, bool observed) { nodes_.at(id) = observed; }

    bool has_node(int id) const { return nodes_.count(id) != 0; }
    bool is_observed(int id) const { return nodes_.at(id); }
    bool has_edge(int u, int v) const {
        auto it = adj_.find(u);
        if (it == adj_.end()) return false;
        return std::binary_search(it->second.begin(), it->second.end(), v);
    }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edge_count_; }
    int degree(int id) const { return static_cast<int>(adj_.at(id).size()); }
    const std::vector<int>& neighbors(int id) const { return adj_.at(id); }

    std::vector<int> nodes() const {
        std::vector<int> out;
        out.reserve(nodes_.size());
        for (const auto& [id, _] : nodes_) out.push_back(id);
        return out;
    }

    std::vector<int> observed_nodes() const {
        std::vector<int> out;
        for (const auto& [id, obs] : nodes_)
            if (obs) out.push_back(id);
        return out;
    }

    std::vector<int> hidden_nodes() const {
        std::vector<int> out;
        for (const auto& [id, obs] : nodes_)
            if (!obs) out.push_back(id);
        return out;
    }

    /// Edges as (u, v) pairs with u < v, sorted lexicographically.
    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        out.reserve(edge_count_);
        for (const auto& [u, nbs] : adj_)
            for (int v : nbs)
                if (u < v) out.emplace_back(u, v);
        return out;
    }

    bool operator==(const LatentGraph& other) const {
        return nodes_ == other.nodes_ && adj_ == other.adj_;
    }

private:
    static void insert_sorted(std::vector<int>& v, int x) {
        v.insert(std::lower_bound(v.begin(), v.end(), x), x);
    }
    static void erase_value(std::vector<int>& v, int x) {
        v.erase(std::lower_bound(v.begin(), v.end(), x));
    }

    std::map<int, bool> nodes_;  // id -> observed flag
    std::map<int, std::vector<int>> adj_;
    std::size_t edge_count_ = 0;
};

/// Structural summary of a LatentGraph.
struct GraphStats {
    int p = 0;                       ///< observed node count
    int m = 0;                       ///< total node count
    std::optional<int> girth;        ///< shortest-cycle length; nullopt on forests
    int degree_min = 0;
    int degree_max = 0;
    int depth = 0;                   ///< max over hidden of distance to nearest observed
    double rho = 0.0;                ///< observed fraction p/m
};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Single latent cycle: `g` hidden nodes in a ring, each carrying
/// `leaves_per_hidden` observed leaves. Hidden ids are 0..g-1, leaf ids
/// follow. Girth of the result is g and its depth is 1.
inline LatentGraph gen_latent_cycle(int g, int leaves_per_hidden, std::uint64_t /*seed*/ = 0) {
    if (g < 3) throw std::invalid_argument("cycle length must be >= 3");
    if (leaves_per_hidden < 1)
        throw std::invalid_argument(
            "leaves_per_hidden must be >= 1: a bare ring gives hidden nodes degree 2, below "
            "the identifiability minimum of 3");
    LatentGraph G;
    for (int i = 0; i < g; ++i) G.add_node(i, false);
    int next = g;
    for (int i = 0; i < g; ++i)
        for (int k = 0; k < leaves_per_hidden; ++k) G.add_node(next++, true);
    for (int i = 0; i < g; ++i) G.add_edge(i, (i + 1) % g);
    for (int i = 0; i < g; ++i)
        for (int k = 0; k < leaves_per_hidden; ++k) G.add_edge(i, g + i * leaves_per_hidden + k);
    return G;
}

/// Plain observed cycle C_m (no hidden nodes).
inline LatentGraph gen_observed_cycle(int m) {
    if (m < 3) throw std::invalid_argument("cycle length must be >= 3");
    LatentGraph G;
    for (int i = 0; i < m; ++i) G.add_node(i, true);
    for (int i = 0; i < m; ++i) G.add_edge(i, (i + 1) % m);
    return G;
}

int girth_or_max(const LatentGraph& G);  // fwd decl

/// Random Delta-regular graph with girth >= g_target, built with the pairing
/// model and rejection on simplicity and girth. All nodes come out observed;
/// callers relabel hidden roles as needed.
inline LatentGraph gen_random_regular_girth(int m, int degree, int g_target, std::uint64_t seed,
                                            int retry_cap = 1000) {
    if (m < 1 || degree < 1) throw std::invalid_argument("need m >= 1 and degree >= 1");
    if ((static_cast<long long>(m) * degree) % 2 != 0)
        throw std::invalid_argument("m * degree must be even");
    if (retry_cap < 1) throw std::invalid_argument("retry_cap must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<int> stubs(static_cast<std::size_t>(m) * degree);
    for (int i = 0; i < m; ++i)
        for (int k = 0; k < degree; ++k) stubs[static_cast<std::size_t>(i) * degree + k] = i;

    for (int attempt = 0; attempt < retry_cap; ++attempt) {
        std::shuffle(stubs.begin(), stubs.end(), rng);
        std::set<std::pair<int, int>> edges;
        bool simple = true;
        for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
            int u = stubs[i], v = stubs[i + 1];
            if (u == v) { simple = false; break; }
            auto e = std::minmax(u, v);
            if (!edges.emplace(e.first, e.second).second) { simple = false; break; }
        }
        if (!simple) continue;
        LatentGraph G;
        for (int i = 0; i < m; ++i) G.add_node(i, true);
        for (const auto& [u, v] : edges) G.add_edge(u, v);
        int g = girth_or_max(G);
        if (g >= g_target) return G;
    }
    throw GenerationError("could not generate a " + std::to_string(degree) + "-regular graph on " +
                          std::to_string(m) + " nodes with girth >= " + std::to_string(g_target) +
                          " within " + std::to_string(retry_cap) + " attempts");
}

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

/// Exact girth via per-root BFS with non-tree-edge detection, O(V*E).
/// Returns nullopt for forests.
inline std::optional<int> girth(const LatentGraph& G) {
    const auto node_ids = G.nodes();
    std::map<int, int> index;
    for (std::size_t i = 0; i < node_ids.size(); ++i) index[node_ids[i]] = static_cast<int>(i);
    const int n = static_cast<int>(node_ids.size());
    int best = std::numeric_limits<int>::max();
    std::vector<int> dist(n), parent(n);
    for (int s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), -1);
        std::fill(parent.begin(), parent.end(), -1);
        std::queue<int> q;
        dist[s] = 0;
        q.push(s);
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int vid : G.neighbors(node_ids[u])) {
                int v = index[vid];
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    q.push(v);
                } else if (parent[u] != v && parent[v] != u) {
                    // Non-tree edge: the two root paths plus (u,v) contain a
                    // cycle no longer than this.
                    best = std::min(best, dist[u] + dist[v] + 1);
                }
            }
        }
    }
    if (best == std::numeric_limits<int>::max()) return std::nullopt;
    return best;
}

/// Girth with forests mapped to INT_MAX; convenience for girth comparisons.
inline int girth_or_max(const LatentGraph& G) {
    auto g = girth(G);
    return g ? *g : std::numeric_limits<int>::max();
}

/// Depth: max over hidden nodes of the graph distance to the nearest observed
/// node. 0 when nothing is hidden. Multi-source BFS from the observed set.
inline int depth(const LatentGraph& G) {
    auto observed = G.observed_nodes();
    if (observed.empty()) throw std::invalid_argument("depth undefined: no observed nodes");
    if (G.hidden_nodes().empty()) return 0;
    std::map<int, int> dist;
    std::queue<int> q;
    for (int v : observed) {
        dist[v] = 0;
        q.push(v);
    }
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int v : G.neighbors(u))
            if (!dist.count(v)) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
    }
    int d = 0;
    for (int h : G.hidden_nodes()) {
        auto it = dist.find(h);
        if (it == dist.end())
            throw std::invalid_argument("hidden node " + std::to_string(h) +
                                        " unreachable from every observed node");
        d = std::max(d, it->second);
    }
    return d;
}

struct Ball {
    std::vector<int> members;    ///< nodes within distance l, sorted
    std::vector<int> boundary;   ///< nodes at exactly distance l, sorted
    LatentGraph induced;         ///< induced subgraph on members
};

/// B_l(i): nodes within l hops of i, their boundary, and the induced subgraph.
inline Ball ball_and_induced(const LatentGraph& G, int center, int l) {
    if (!G.has_node(center)) throw std::invalid_argument("center not in graph");
    std::map<int, int> dist;
    std::queue<int> q;
    dist[center] = 0;
    q.push(center);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        if (dist[u] == l) continue;
        for (int v : G.neighbors(u))
            if (!dist.count(v)) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
    }
    Ball b;
    for (const auto& [v, d] : dist) {
        b.members.push_back(v);
        if (d == l) b.boundary.push_back(v);
    }
    if (l == 0) b.boundary = b.members;
    for (int v : b.members) b.induced.add_node(v, G.is_observed(v));
    for (int v : b.members)
        for (int w : G.neighbors(v))
            if (v < w && dist.count(w)) b.induced.add_edge(v, w);
    return b;
}

/// Induced subgraph on an arbitrary node subset.
inline LatentGraph induced_subgraph(const LatentGraph& G, const std::vector<int>& members) {
    std::set<int> keep(members.begin(), members.end());
    LatentGraph out;
    for (int v : keep) out.add_node(v, G.is_observed(v));
    for (int v : keep)
        for (int w : G.neighbors(v))
            if (v < w && keep.count(w)) out.add_edge(v, w);
    return out;
}

/// Relabels roles: each node independently observed with probability rho.
inline LatentGraph sample_observed_uniform(const LatentGraph& G, double rho, std::uint64_t seed) {
    if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("rho must lie in (0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    LatentGraph out = G;
    for (int v : G.nodes()) out.set_observed(v, unif(rng) < rho);
    return out;
}

inline GraphStats graph_stats(const LatentGraph& G) {
    GraphStats s;
    s.m = static_cast<int>(G.node_count());
    s.p = static_cast<int>(G.observed_nodes().size());
    s.girth = girth(G);
    s.degree_min = std::numeric_limits<int>::max();
    s.degree_max = 0;
    for (int v : G.nodes()) {
        s.degree_min = std::min(s.degree_min, G.degree(v));
        s.degree_max = std::max(s.degree_max, G.degree(v));
    }
    if (s.m == 0) s.degree_min = 0;
    s.depth = depth(G);
    s.rho = s.m > 0 ? static_cast<double>(s.p) / s.m : 0.0;
    return s;
}

// ---------------------------------------------------------------------------
// Depth bound under uniform node sampling
// ---------------------------------------------------------------------------

struct DepthBoundQuery {
    int m = 0;              ///< node count
    double rho = 0.0;       ///< uniform sampling probability
    int degree_min = 0;
    int degree_max = 0;
    int girth = 0;
    double epsilon = 0.0;   ///< tail exponent
    double beta = 1.0;      ///< observed-node exponent, p = m^beta
};

struct DepthBound {
    double bound = 0.0;        ///< high-probability upper bound on the depth
    double probability = 0.0;  ///< 1 - m^{-epsilon}
};

/// Largest admissible tail exponent for depth_bound: the bound holds for any
/// epsilon <= max(0, epsilon0).
inline double depth_bound_epsilon0(const DepthBoundQuery& q) {
    double inner = std::pow(static_cast<double>(q.degree_min) - 1.0, q.girth / 2.0);
    double lg = std::log(4.0 * q.m * q.degree_max) + inner * std::log(1.0 - q.rho);
    return -lg / std::log(static_cast<double>(q.m));
}

/// High-probability depth bound under uniform sampling of observed nodes.
/// rho = 1 is the degenerate fully-observed case with depth 0.
inline DepthBound depth_bound(const DepthBoundQuery& q) {
    if (!(q.rho > 0.0) || q.rho > 1.0) throw std::invalid_argument("rho must lie in (0,1]");
    if (q.m < 2) throw std::invalid_argument("m must be >= 2");
    if (q.degree_min < 2) throw std::invalid_argument("degree_min must be >= 2");
    if (q.epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");
    DepthBound out;
    out.probability = 1.0 - std::pow(static_cast<double>(q.m), -q.epsilon);
    if (q.rho == 1.0) {
        out.bound = 0.0;
        return out;
    }
    double eps0 = depth_bound_epsilon0(q);
    if (q.epsilon > std::max(0.0, eps0))
        throw std::invalid_argument("epsilon exceeds the admissible exponent for this graph family");
    double numer = std::log(4.0 * std::pow(static_cast<double>(q.m), 1.0 + q.epsilon) * q.degree_max);
    double denom = std::abs(std::log(1.0 - q.rho));
    double base = std::log(static_cast<double>(q.degree_min) - 1.0);
    if (base == 0.0) {
        out.bound = std::numeric_limits<double>::infinity();
        return out;
    }
    out.bound = std::log(numer / denom) / base;
    return out;
}

}  // namespace lgm
