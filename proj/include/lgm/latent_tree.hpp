#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "lgm/distance.hpp"

namespace lgm {

// ---------------------------------------------------------------------------
// Quartet test
// ---------------------------------------------------------------------------

/// Resolved topology of a 4-subset. With nodes sorted ascending, pairing p
/// splits {nodes[0], nodes[pairing_partner]} against the other two:
///   0 -> (n0 n1 | n2 n3),  1 -> (n0 n2 | n1 n3),  2 -> (n0 n3 | n1 n2).
struct Quartet {
    static constexpr int kNull = 3;
    std::array<int, 4> nodes;
    int pairing = kNull;

    /// The two sides of the split; valid only when pairing != kNull.
    std::array<std::array<int, 2>, 2> sides() const {
        switch (pairing) {
            case 0: return {{{nodes[0], nodes[1]}, {nodes[2], nodes[3]}}};
            case 1: return {{{nodes[0], nodes[2]}, {nodes[1], nodes[3]}}};
            default: return {{{nodes[0], nodes[3]}, {nodes[1], nodes[2]}}};
        }
    }
};

/// Robust quartet resolution for one 4-subset: pairing P wins when its
/// deflated similarity product (e^-d - lambda)+ * (e^-d' - lambda)+ strictly
/// beats the inflated products (e^-d + lambda)+ of both alternatives.
/// At most one pairing can win; ties and unmet confidence give kNull.
template <typename DistFn>
Quartet resolve_quartet(const DistFn& d, std::array<int, 4> nodes, double lambda) {
    std::sort(nodes.begin(), nodes.end());
    auto pos = [](double x) { return std::max(x, 0.0); };
    // within-pair distance indices per pairing
    static constexpr int pairs[3][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};
    double lo[3], hi[3];
    for (int p = 0; p < 3; ++p) {
        double d1 = d(nodes[pairs[p][0]], nodes[pairs[p][1]]);
        double d2 = d(nodes[pairs[p][2]], nodes[pairs[p][3]]);
        lo[p] = pos(std::exp(-d1) - lambda) * pos(std::exp(-d2) - lambda);
        hi[p] = pos(std::exp(-d1) + lambda) * pos(std::exp(-d2) + lambda);
    }
    Quartet q;
    q.nodes = nodes;
    for (int p = 0; p < 3; ++p)
        if (lo[p] > hi[(p + 1) % 3] && lo[p] > hi[(p + 2) % 3]) {
            q.pairing = p;
            break;
        }
    return q;
}

/// Quartet test over every 4-subset of `nodes`.
template <typename DistFn>
std::vector<Quartet> quartet_test_fn(const DistFn& d, const std::vector<int>& nodes,
                                     double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    std::vector<int> v = nodes;
    std::sort(v.begin(), v.end());
    std::vector<Quartet> out;
    const int n = static_cast<int>(v.size());
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            for (int c = b + 1; c < n; ++c)
                for (int e = c + 1; e < n; ++e)
                    out.push_back(resolve_quartet(d, {v[a], v[b], v[c], v[e]}, lambda));
    return out;
}

inline std::vector<Quartet> quartet_test(const DistanceMatrix& D, const std::vector<int>& nodes,
                                         double lambda) {
    return quartet_test_fn([&](int u, int v) { return D.between(u, v); }, nodes, lambda);
}

// ---------------------------------------------------------------------------
// Minimum spanning tree
// ---------------------------------------------------------------------------

/// Kruskal MST with the deterministic tie-break (weight, u, v) on sorted
/// endpoint pairs. Disconnection cannot arise (the metric is total), but a
/// forest would simply come back with fewer edges.
template <typename DistFn>
std::vector<std::pair<int, int>> mst_fn(const DistFn& d, const std::vector<int>& nodes) {
    std::vector<int> v = nodes;
    std::sort(v.begin(), v.end());
    struct E {
        double w;
        int u, v;
    };
    std::vector<E> edges;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
            edges.push_back({d(v[i], v[j]), v[i], v[j]});
    std::sort(edges.begin(), edges.end(), [](const E& a, const E& b) {
        if (a.w != b.w) return a.w < b.w;
        if (a.u != b.u) return a.u < b.u;
        return a.v < b.v;
    });
    std::map<int, int> parent;
    for (int x : v) parent[x] = x;
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<std::pair<int, int>> out;
    for (const auto& e : edges) {
        int ru = find(e.u), rv = find(e.v);
        if (ru == rv) continue;
        parent[ru] = rv;
        out.emplace_back(e.u, e.v);
        if (out.size() + 1 == v.size()) break;
    }
    return out;
}

inline std::vector<std::pair<int, int>> mst(const DistanceMatrix& D,
                                            const std::vector<int>& nodes) {
    return mst_fn([&](int u, int v) { return D.between(u, v); }, nodes);
}

// ---------------------------------------------------------------------------
// Recursive grouping
// ---------------------------------------------------------------------------

struct RgOptions {
    double lambda = 0.0;
    double tau = 1e-6;
    /// Hidden-to-hidden distances per the literal children average, ignoring
    /// pendant corrections. Off by default: the corrected form keeps the
    /// extended metric additive.
    bool literal_hidden_distance = false;
};

/// Forest over (input nodes + introduced hidden nodes) with edge lengths.
/// For each surviving hidden node, `children` lists the input-node
/// descendants together with their path length in the forest, which is what
/// downstream code needs to place the hidden node in the original metric.
struct LatentForest {
    std::vector<int> input_ids;
    std::vector<int> hidden_ids;
    std::map<std::pair<int, int>, double> edge_lengths;
    std::map<int, std::vector<std::pair<int, double>>> children;
    int next_hidden_id = 0;

    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        for (const auto& [e, _] : edge_lengths) out.push_back(e);
        return out;
    }
    int degree(int v) const {
        int d = 0;
        for (const auto& [e, _] : edge_lengths)
            if (e.first == v || e.second == v) ++d;
        return d;
    }
};

namespace detail {

struct RgState {
    std::map<std::pair<int, int>, double> dist;
    double d(int u, int v) const {
        if (u == v) return 0.0;
        if (u > v) std::swap(u, v);
        return dist.at({u, v});
    }
    void set(int u, int v, double val) {
        if (u > v) std::swap(u, v);
        dist[{u, v}] = val;
    }
};

inline void forest_add_edge(LatentForest& F, int u, int v, double len) {
    if (u > v) std::swap(u, v);
    F.edge_lengths[{u, v}] = len;
}

inline void forest_remove_edge(LatentForest& F, int u, int v) {
    if (u > v) std::swap(u, v);
    F.edge_lengths.erase({u, v});
}

/// Contract v into u: v's edges reattach to u, v disappears.
inline void forest_contract(LatentForest& F, int survivor, int gone) {
    std::vector<std::pair<std::pair<int, int>, double>> moved;
    for (auto it = F.edge_lengths.begin(); it != F.edge_lengths.end();) {
        if (it->first.first == gone || it->first.second == gone) {
            int other = it->first.first == gone ? it->first.second : it->first.first;
            if (other != survivor) moved.push_back({{survivor, other}, it->second});
            it = F.edge_lengths.erase(it);
        } else {
            ++it;
        }
    }
    for (auto& [e, len] : moved) {
        if (e.first > e.second) std::swap(e.first, e.second);
        auto it = F.edge_lengths.find(e);
        if (it == F.edge_lengths.end() || it->second > len) F.edge_lengths[e] = len;
    }
}

/// Contract short edges touching hidden nodes, then suppress hidden nodes of
/// degree <= 2, until stable.
inline void merge_and_suppress(LatentForest& F, double tau) {
    std::set<int> hidden(F.hidden_ids.begin(), F.hidden_ids.end());
    bool changed = true;
    while (changed) {
        changed = false;
        // shortest contractible edge first, ties by ids
        std::pair<int, int> pick{0, 0};
        double best = tau;
        bool found = false;
        for (const auto& [e, len] : F.edge_lengths) {
            if (!hidden.count(e.first) && !hidden.count(e.second)) continue;
            if (len < best || (found && len == best && e < pick)) {
                best = len;
                pick = e;
                found = true;
            }
        }
        if (found) {
            int u = pick.first, v = pick.second;
            int survivor, gone;
            bool uh = hidden.count(u), vh = hidden.count(v);
            if (uh && vh) {
                survivor = std::min(u, v);
                gone = std::max(u, v);
            } else if (uh) {
                survivor = v;
                gone = u;
            } else {
                survivor = u;
                gone = v;
            }
            forest_remove_edge(F, u, v);
            forest_contract(F, survivor, gone);
            if (hidden.count(survivor) && hidden.count(gone)) {
                // absorb the merged node's descendants, shifted by the
                // contracted length
                auto& cs = F.children[survivor];
                for (auto& [leaf, pl] : F.children[gone]) cs.emplace_back(leaf, pl + best);
            }
            hidden.erase(gone);
            F.children.erase(gone);
            changed = true;
            continue;
        }
        // degree-2 hidden nodes are splice points, degree <= 1 are noise
        for (int h : std::vector<int>(hidden.begin(), hidden.end())) {
            std::vector<std::pair<int, double>> inc;
            for (const auto& [e, len] : F.edge_lengths)
                if (e.first == h || e.second == h)
                    inc.emplace_back(e.first == h ? e.second : e.first, len);
            if (inc.size() > 2) continue;
            if (inc.size() == 2) {
                forest_remove_edge(F, h, inc[0].first);
                forest_remove_edge(F, h, inc[1].first);
                forest_add_edge(F, inc[0].first, inc[1].first, inc[0].second + inc[1].second);
            } else if (inc.size() == 1) {
                forest_remove_edge(F, h, inc[0].first);
            }
            hidden.erase(h);
            F.children.erase(h);
            changed = true;
            break;
        }
    }
    F.hidden_ids.assign(hidden.begin(), hidden.end());
}

}  // namespace detail

/// Recursive grouping over the nodes of D: quartet-driven sibling detection,
/// hidden-parent introduction with pendant-length estimation, and tau-merging
/// of short edges. Hidden ids are allocated from first_hidden_id upward.
///
/// Degenerate inputs: one node comes back isolated, two nodes as a single
/// edge, three nodes as their MST (no quartets exist to work with).
inline LatentForest recursive_grouping(const DistanceMatrix& D, const RgOptions& opt,
                                       int first_hidden_id) {
    if (opt.tau <= 0.0) throw std::invalid_argument("tau must be > 0");
    if (opt.lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    LatentForest F;
    F.input_ids = D.ids;
    F.next_hidden_id = first_hidden_id;
    const std::size_t p = D.ids.size();
    if (p <= 1) return F;
    if (p <= 3) {
        for (const auto& [u, v] : mst(D, D.ids)) detail::forest_add_edge(F, u, v, D.between(u, v));
        return F;
    }

    detail::RgState st;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i + 1; j < p; ++j)
            st.set(D.ids[i], D.ids[j], D.at(i, j));

    // Quartets are resolved once, over the original input nodes.
    std::vector<Quartet> quartets =
        quartet_test_fn([&](int u, int v) { return st.d(u, v); }, D.ids, opt.lambda);
    quartets.erase(std::remove_if(quartets.begin(), quartets.end(),
                                  [](const Quartet& q) { return q.pairing == Quartet::kNull; }),
                   quartets.end());

    std::set<int> active(D.ids.begin(), D.ids.end());
    std::map<int, std::vector<std::pair<int, double>>> desc;  // node -> (input leaf, path length)
    for (int v : D.ids) desc[v] = {{v, 0.0}};

    auto materialize_row = [&](int h, const std::set<int>& others) {
        // children-averaging placement of h against every other current node
        for (int x : others) {
            double acc = 0.0;
            int cnt = 0;
            for (const auto& [a, pla] : desc[h])
                for (const auto& [b, plb] : desc[x]) {
                    double base = st.d(a, b) - pla - plb;
                    if (opt.literal_hidden_distance && desc[x].size() > 1 && desc[h].size() > 1)
                        base = st.d(a, b);
                    acc += base;
                    ++cnt;
                }
            st.set(h, x, std::max(0.0, acc / cnt));
        }
    };

    while (active.size() >= 4) {
        // leaf -> owning active node
        std::map<int, int> owner;
        for (int a : active)
            for (const auto& [leaf, _] : desc[a]) owner[leaf] = a;
        // pairs of active nodes separated by some declared quartet
        std::set<std::pair<int, int>> separated;
        for (const auto& q : quartets) {
            auto s = q.sides();
            for (int x : {0, 1})
                for (int y : {0, 1}) {
                    int a = s[0][x], b = s[1][y];
                    int oa = owner[a], ob = owner[b];
                    if (oa == ob) continue;
                    int oc = owner[s[0][1 - x]], od = owner[s[1][1 - y]];
                    if (oc == oa || oc == ob || od == oa || od == ob) continue;
                    separated.insert({std::min(oa, ob), std::max(oa, ob)});
                }
        }
        // connected components of the never-separated relation
        std::map<int, int> comp;
        std::function<int(int)> find = [&](int x) {
            while (comp[x] != x) x = comp[x] = comp[comp[x]];
            return x;
        };
        for (int a : active) comp[a] = a;
        for (int a : active)
            for (int b : active)
                if (a < b && !separated.count({a, b})) comp[find(a)] = find(b);
        std::map<int, std::vector<int>> families;
        for (int a : active) families[find(a)].push_back(a);

        bool progress = false;
        // deterministic order: by smallest member id
        std::vector<std::vector<int>> fams;
        for (auto& [root, members] : families) {
            std::sort(members.begin(), members.end());
            if (members.size() >= 2) fams.push_back(members);
        }
        std::sort(fams.begin(), fams.end());
        for (const auto& fam : fams) {
            progress = true;
            int h = F.next_hidden_id++;
            F.hidden_ids.push_back(h);
            std::set<int> fset(fam.begin(), fam.end());
            std::vector<int> outside;
            for (int a : active)
                if (!fset.count(a)) outside.push_back(a);
            // pendant length of each family member toward the new parent
            std::map<int, double> leg;
            for (int i : fam) {
                double acc = 0.0;
                int cnt = 0;
                for (int j : fam) {
                    if (j == i) continue;
                    const std::vector<int>& wit = !outside.empty() ? outside : fam;
                    double wacc = 0.0;
                    int wcnt = 0;
                    for (int k : wit) {
                        if (k == i || k == j) continue;
                        wacc += st.d(i, k) - st.d(j, k);
                        ++wcnt;
                    }
                    acc += 0.5 * (st.d(i, j) + (wcnt ? wacc / wcnt : 0.0));
                    ++cnt;
                }
                leg[i] = std::max(0.0, acc / cnt);
            }
            auto& dh = desc[h];
            for (int i : fam) {
                detail::forest_add_edge(F, i, h, leg[i]);
                for (const auto& [a, pl] : desc[i]) dh.emplace_back(a, pl + leg[i]);
            }
            for (int i : fam) active.erase(i);
            std::set<int> others(active.begin(), active.end());
            materialize_row(h, others);
            active.insert(h);
        }
        if (!progress) break;  // sibling relationships cannot be inferred further
    }

    if (active.size() == 3) {
        // terminal join: the three remaining subtrees meet at one point
        std::vector<int> t(active.begin(), active.end());
        int h = F.next_hidden_id++;
        F.hidden_ids.push_back(h);
        auto& dh = desc[h];
        for (int i = 0; i < 3; ++i) {
            int x = t[i], y = t[(i + 1) % 3], z = t[(i + 2) % 3];
            double leg = std::max(0.0, 0.5 * (st.d(x, y) + st.d(x, z) - st.d(y, z)));
            detail::forest_add_edge(F, x, h, leg);
            for (const auto& [a, pl] : desc[x]) dh.emplace_back(a, pl + leg);
        }
    } else if (active.size() == 2) {
        auto it = active.begin();
        int a = *it++, b = *it;
        detail::forest_add_edge(F, a, b, st.d(a, b));
    }

    for (int h : F.hidden_ids) F.children[h] = desc[h];
    detail::merge_and_suppress(F, opt.tau);
    return F;
}

}  // namespace lgm
