#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lgm/common.hpp"
#include "lgm/graph.hpp"
#include "lgm/ising.hpp"
#include "lgm/sample_matrix.hpp"

namespace lgm {

inline constexpr int kDefaultWidthCap = 12;

// ---------------------------------------------------------------------------
// Factors over binary variables
// ---------------------------------------------------------------------------

/// Table over a sorted list of binary variables; bit k of the value index is
/// the state of vars[k] (0 <-> -1, 1 <-> +1).
struct Factor {
    std::vector<int> vars;
    std::vector<double> vals;

    static Factor unary(int v, double phi) {
        return Factor{{v}, {std::exp(-phi), std::exp(phi)}};
    }
    static Factor pairwise(int u, int v, double theta) {
        if (u > v) std::swap(u, v);
        double a = std::exp(theta), b = std::exp(-theta);
        // index = bit0 -> u, bit1 -> v; agree -> e^theta
        return Factor{{u, v}, {a, b, b, a}};
    }
    int position(int v) const {
        auto it = std::lower_bound(vars.begin(), vars.end(), v);
        return static_cast<int>(it - vars.begin());
    }
};

inline Factor multiply(const Factor& a, const Factor& b) {
    Factor out;
    std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(),
                   std::back_inserter(out.vars));
    const std::size_t n = out.vars.size();
    std::vector<int> apos(n, -1), bpos(n, -1);
    for (std::size_t k = 0; k < n; ++k) {
        auto ia = std::lower_bound(a.vars.begin(), a.vars.end(), out.vars[k]);
        if (ia != a.vars.end() && *ia == out.vars[k]) apos[k] = static_cast<int>(ia - a.vars.begin());
        auto ib = std::lower_bound(b.vars.begin(), b.vars.end(), out.vars[k]);
        if (ib != b.vars.end() && *ib == out.vars[k]) bpos[k] = static_cast<int>(ib - b.vars.begin());
    }
    out.vals.resize(std::size_t{1} << n);
    for (std::size_t idx = 0; idx < out.vals.size(); ++idx) {
        std::size_t ai = 0, bi = 0;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t bit = (idx >> k) & 1u;
            if (apos[k] >= 0) ai |= bit << apos[k];
            if (bpos[k] >= 0) bi |= bit << bpos[k];
        }
        out.vals[idx] = a.vals[ai] * b.vals[bi];
    }
    return out;
}

inline Factor marginalize_out(const Factor& f, int var, bool use_max = false) {
    int pos = f.position(var);
    Factor out;
    out.vars = f.vars;
    out.vars.erase(out.vars.begin() + pos);
    out.vals.resize(std::size_t{1} << out.vars.size());
    const std::size_t lowmask = (std::size_t{1} << pos) - 1;
    for (std::size_t idx = 0; idx < out.vals.size(); ++idx) {
        std::size_t base = (idx & lowmask) | ((idx & ~lowmask) << 1);
        double v0 = f.vals[base];
        double v1 = f.vals[base | (std::size_t{1} << pos)];
        out.vals[idx] = use_max ? std::max(v0, v1) : v0 + v1;
    }
    return out;
}

/// Keeps only `keep` (sorted subset of f.vars), summing out the rest.
inline Factor marginalize_onto(const Factor& f, const std::vector<int>& keep) {
    Factor out = f;
    for (int v : f.vars)
        if (!std::binary_search(keep.begin(), keep.end(), v)) out = marginalize_out(out, v);
    return out;
}

// ---------------------------------------------------------------------------
// Model preparation
// ---------------------------------------------------------------------------

/// Folds evidence (node -> state 0/1) into the model: clamped-edge terms move
/// into neighbor fields or the returned log-constant. The result is a model
/// over the unclamped nodes only.
struct ClampedModel {
    IsingModel model;
    double log_const = 0.0;
};

inline ClampedModel clamp_model(const IsingModel& M, const std::map<int, int>& evidence) {
    auto spin = [](int s) { return s ? 1.0 : -1.0; };
    ClampedModel out;
    for (int v : M.graph.nodes())
        if (!evidence.count(v)) out.model.graph.add_node(v, M.graph.is_observed(v));
    for (int v : M.graph.nodes()) {
        auto it = evidence.find(v);
        if (it != evidence.end())
            out.log_const += M.phi_at(v) * spin(it->second);
        else
            out.model.phi[v] = M.phi_at(v);
    }
    for (const auto& [e, th] : M.theta) {
        auto iu = evidence.find(e.first), iv = evidence.find(e.second);
        if (iu != evidence.end() && iv != evidence.end()) {
            out.log_const += th * spin(iu->second) * spin(iv->second);
        } else if (iu != evidence.end()) {
            out.model.phi[e.second] += th * spin(iu->second);
        } else if (iv != evidence.end()) {
            out.model.phi[e.first] += th * spin(iv->second);
        } else {
            out.model.graph.add_edge(e.first, e.second);
            out.model.theta[e] = th;
        }
    }
    return out;
}

/// Same node set, edge set restricted to `allowed`: the removed potentials
/// are set to zero, realizing the induced-subgraph marginal construction.
inline IsingModel filter_edges(const IsingModel& M, const std::set<std::pair<int, int>>& allowed) {
    IsingModel out;
    for (int v : M.graph.nodes()) out.graph.add_node(v, M.graph.is_observed(v));
    out.phi = M.phi;
    for (const auto& [e, th] : M.theta)
        if (allowed.count(e)) {
            out.graph.add_edge(e.first, e.second);
            out.theta[e] = th;
        }
    return out;
}

/// Unnormalized log-score of a full assignment (node -> state 0/1).
inline double assignment_score(const IsingModel& M, const std::map<int, int>& assignment) {
    auto spin = [&](int v) { return assignment.at(v) ? 1.0 : -1.0; };
    double s = 0.0;
    for (const auto& [e, th] : M.theta) s += th * spin(e.first) * spin(e.second);
    for (const auto& [v, ph] : M.phi) s += ph * spin(v);
    return s;
}

// ---------------------------------------------------------------------------
// Elimination machinery
// ---------------------------------------------------------------------------

/// Min-fill elimination order over `to_eliminate` given factor scopes.
/// Ties broken toward the smaller node id. Returns the order and the induced
/// width (largest eliminated-variable neighborhood encountered).
inline std::pair<std::vector<int>, int> min_fill_order(const std::vector<std::vector<int>>& scopes,
                                                       const std::set<int>& to_eliminate) {
    std::map<int, std::set<int>> adj;
    for (const auto& sc : scopes)
        for (int u : sc)
            for (int v : sc)
                if (u != v) adj[u].insert(v);
    for (int v : to_eliminate) adj[v];  // isolated vars still need a slot

    std::set<int> remaining = to_eliminate;
    std::vector<int> order;
    int width = 0;
    while (!remaining.empty()) {
        int best = -1;
        long best_fill = -1;
        for (int v : remaining) {
            std::vector<int> nbs;
            for (int u : adj[v]) nbs.push_back(u);
            long fill = 0;
            for (std::size_t i = 0; i < nbs.size(); ++i)
                for (std::size_t j = i + 1; j < nbs.size(); ++j)
                    if (!adj[nbs[i]].count(nbs[j])) ++fill;
            if (best < 0 || fill < best_fill || (fill == best_fill && v < best)) {
                best = v;
                best_fill = fill;
            }
        }
        std::vector<int> nbs(adj[best].begin(), adj[best].end());
        width = std::max(width, static_cast<int>(nbs.size()));
        for (std::size_t i = 0; i < nbs.size(); ++i)
            for (std::size_t j = i + 1; j < nbs.size(); ++j) {
                adj[nbs[i]].insert(nbs[j]);
                adj[nbs[j]].insert(nbs[i]);
            }
        for (int u : nbs) adj[u].erase(best);
        adj.erase(best);
        order.push_back(best);
        remaining.erase(best);
    }
    return {order, width};
}

inline std::vector<Factor> model_factors(const IsingModel& M) {
    std::vector<Factor> fs;
    for (int v : M.graph.nodes()) fs.push_back(Factor::unary(v, M.phi_at(v)));
    for (const auto& [e, th] : M.theta) fs.push_back(Factor::pairwise(e.first, e.second, th));
    return fs;
}

/// Sum-eliminates everything except `keep`; returns the unnormalized table
/// over keep (sorted) with a separate log-scale so that
/// log(sum(table)) + log_scale = log of the total sum.
struct EliminatedJoint {
    Factor joint;       ///< normalized to sum 1 over the kept variables
    double log_partition = 0.0;
};

inline EliminatedJoint eliminate_to(const std::vector<Factor>& factors, std::vector<int> keep,
                                    int width_cap, const std::string& what) {
    std::sort(keep.begin(), keep.end());
    std::set<int> all_vars;
    std::vector<std::vector<int>> scopes;
    for (const auto& f : factors) {
        scopes.push_back(f.vars);
        all_vars.insert(f.vars.begin(), f.vars.end());
    }
    std::set<int> to_elim;
    for (int v : all_vars)
        if (!std::binary_search(keep.begin(), keep.end(), v)) to_elim.insert(v);
    auto [order, width] = min_fill_order(scopes, to_elim);
    if (width > width_cap)
        throw WidthCapError(what + ": induced width " + std::to_string(width) + " exceeds cap " +
                            std::to_string(width_cap));

    std::vector<Factor> pool = factors;
    double log_scale = 0.0;
    for (int v : order) {
        Factor combined{{}, {1.0}};
        std::vector<Factor> next;
        for (auto& f : pool) {
            if (std::binary_search(f.vars.begin(), f.vars.end(), v))
                combined = multiply(combined, f);
            else
                next.push_back(std::move(f));
        }
        Factor summed = marginalize_out(combined, v);
        double mx = *std::max_element(summed.vals.begin(), summed.vals.end());
        if (mx > 0) {
            for (auto& x : summed.vals) x /= mx;
            log_scale += std::log(mx);
        }
        next.push_back(std::move(summed));
        pool = std::move(next);
    }
    Factor joint{{}, {1.0}};
    for (const auto& f : pool) joint = multiply(joint, f);
    double total = 0.0;
    for (double x : joint.vals) total += x;
    EliminatedJoint out;
    out.log_partition = log_scale + std::log(total);
    for (auto& x : joint.vals) x /= total;
    out.joint = std::move(joint);
    return out;
}

// ---------------------------------------------------------------------------
// Bucket-tree calibration: all node marginals, edge marginals and logZ in
// two elimination passes.
// ---------------------------------------------------------------------------

struct Calibration {
    std::map<int, std::array<double, 2>> node;                      ///< P(x_v)
    std::map<std::pair<int, int>, std::array<double, 4>> edge;      ///< P(x_u, x_v), idx = xu + 2*xv
    double log_partition = 0.0;
};

inline Calibration calibrate(const IsingModel& M, int width_cap = kDefaultWidthCap) {
    Calibration out;
    auto node_ids = M.graph.nodes();
    if (node_ids.empty()) return out;
    std::vector<Factor> factors = model_factors(M);
    std::vector<std::vector<int>> scopes;
    for (const auto& f : factors) scopes.push_back(f.vars);
    std::set<int> all(node_ids.begin(), node_ids.end());
    auto [order, width] = min_fill_order(scopes, all);
    if (width > width_cap)
        throw WidthCapError("calibrate: induced width " + std::to_string(width) +
                            " exceeds cap " + std::to_string(width_cap));

    const int T = static_cast<int>(order.size());
    std::map<int, int> bucket_of;  // var -> bucket index
    for (int t = 0; t < T; ++t) bucket_of[order[t]] = t;

    // Assign each factor to the bucket of its earliest-eliminated variable.
    std::vector<Factor> bucket_belief(T, Factor{{}, {1.0}});
    for (auto& f : factors) {
        int t = T;
        for (int v : f.vars) t = std::min(t, bucket_of[v]);
        bucket_belief[t] = multiply(bucket_belief[t], f);
    }

    // Upward pass: messages toward later buckets, each normalized with the
    // scale folded into logZ.
    std::vector<int> parent(T, -1);
    std::vector<Factor> up_msg(T);
    double logZ = 0.0;
    for (int t = 0; t < T; ++t) {
        Factor msg = marginalize_out(bucket_belief[t], order[t]);
        double s = 0.0;
        for (double x : msg.vals) s += x;
        logZ += std::log(s);
        for (auto& x : msg.vals) x /= s;
        if (!msg.vars.empty()) {
            int dest = T;
            for (int v : msg.vars) dest = std::min(dest, bucket_of[v]);
            parent[t] = dest;
            bucket_belief[dest] = multiply(bucket_belief[dest], msg);
        }
        up_msg[t] = std::move(msg);
    }
    out.log_partition = logZ;

    // Downward pass, parents first (parents always sit later in the order).
    for (int t = T - 1; t >= 0; --t) {
        if (parent[t] < 0) continue;
        Factor down = marginalize_onto(bucket_belief[parent[t]], up_msg[t].vars);
        double s = 0.0;
        for (double x : down.vals) s += x;
        for (auto& x : down.vals) x /= s;
        for (std::size_t i = 0; i < down.vals.size(); ++i) down.vals[i] /= up_msg[t].vals[i];
        bucket_belief[t] = multiply(bucket_belief[t], down);
    }

    for (int t = 0; t < T; ++t) {
        Factor nm = marginalize_onto(bucket_belief[t], {order[t]});
        double s = nm.vals[0] + nm.vals[1];
        out.node[order[t]] = {nm.vals[0] / s, nm.vals[1] / s};
    }
    for (const auto& [u, v] : M.graph.edges()) {
        int t = std::min(bucket_of[u], bucket_of[v]);
        Factor em = marginalize_onto(bucket_belief[t], {std::min(u, v), std::max(u, v)});
        double s = em.vals[0] + em.vals[1] + em.vals[2] + em.vals[3];
        out.edge[{std::min(u, v), std::max(u, v)}] = {em.vals[0] / s, em.vals[1] / s,
                                                      em.vals[2] / s, em.vals[3] / s};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Public inference entry points
// ---------------------------------------------------------------------------

struct InferenceResult {
    std::map<int, std::array<double, 2>> node_marginals;
    std::map<std::pair<int, int>, std::array<double, 4>> pair_marginals;
    double log_partition = 0.0;
    bool converged = true;
    int iterations = 0;
};

/// Exact marginals and log-partition by variable elimination (min-fill
/// order). Pair queries need not be edges.
inline InferenceResult exact_inference(const IsingModel& M,
                                       const std::vector<std::pair<int, int>>& pair_queries = {},
                                       int width_cap = kDefaultWidthCap) {
    M.validate();
    InferenceResult out;
    if (M.graph.node_count() == 0) return out;
    Calibration cal = calibrate(M, width_cap);
    out.node_marginals = cal.node;
    out.log_partition = cal.log_partition;
    auto factors = model_factors(M);
    for (auto [u, v] : pair_queries) {
        if (u > v) std::swap(u, v);
        auto it = cal.edge.find({u, v});
        if (it != cal.edge.end()) {
            out.pair_marginals[{u, v}] = it->second;
        } else {
            auto ej = eliminate_to(factors, {u, v}, width_cap, "pair query");
            out.pair_marginals[{u, v}] = {ej.joint.vals[0], ej.joint.vals[1], ej.joint.vals[2],
                                          ej.joint.vals[3]};
        }
    }
    return out;
}

/// Brute-force oracle over all 2^m states; m <= 20.
inline InferenceResult enumerate_oracle(const IsingModel& M,
                                        const std::vector<std::pair<int, int>>& pair_queries = {}) {
    M.validate();
    auto node_ids = M.graph.nodes();
    const int m = static_cast<int>(node_ids.size());
    if (m > 20) throw std::invalid_argument("enumerate_oracle limited to 20 nodes");
    InferenceResult out;
    if (m == 0) return out;
    std::map<int, int> pos;
    for (int i = 0; i < m; ++i) pos[node_ids[i]] = i;
    auto edges = M.graph.edges();

    const std::size_t nstates = std::size_t{1} << m;
    std::vector<double> score(nstates);
    double mx = -1e300;
    for (std::size_t s = 0; s < nstates; ++s) {
        double sc = 0.0;
        for (const auto& [u, v] : edges) {
            double xu = (s >> pos[u]) & 1u ? 1.0 : -1.0;
            double xv = (s >> pos[v]) & 1u ? 1.0 : -1.0;
            sc += M.theta_at(u, v) * xu * xv;
        }
        for (int v : node_ids) sc += M.phi_at(v) * (((s >> pos[v]) & 1u) ? 1.0 : -1.0);
        score[s] = sc;
        mx = std::max(mx, sc);
    }
    double z = 0.0;
    for (double sc : score) z += std::exp(sc - mx);
    out.log_partition = mx + std::log(z);

    for (int v : node_ids) out.node_marginals[v] = {0.0, 0.0};
    std::vector<std::pair<int, int>> queries = pair_queries;
    for (auto& [u, v] : queries)
        if (u > v) std::swap(u, v);
    for (auto [u, v] : queries) out.pair_marginals[{u, v}] = {0, 0, 0, 0};
    for (std::size_t s = 0; s < nstates; ++s) {
        double p = std::exp(score[s] - out.log_partition);
        for (int v : node_ids) out.node_marginals[v][(s >> pos[v]) & 1u] += p;
        for (auto [u, v] : queries) {
            std::size_t iu = (s >> pos[u]) & 1u, iv = (s >> pos[v]) & 1u;
            out.pair_marginals[{u, v}][iu + 2 * iv] += p;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loopy belief propagation
// ---------------------------------------------------------------------------

struct LbpOptions {
    double damping = 0.5;
    double tol = 1e-8;
    int max_iters = 1000;
    bool use_max = false;  ///< max-product variant (for MAP decoding)
};

namespace detail {
struct LbpState {
    std::vector<int> node_ids;
    std::map<int, int> pos;
    std::vector<std::pair<int, int>> edges;
    // messages indexed by directed edge
    std::map<std::pair<int, int>, std::array<double, 2>> msg;
    bool converged = false;
    int iterations = 0;
};

inline LbpState lbp_run(const IsingModel& M, const LbpOptions& opt) {
    LbpState st;
    st.node_ids = M.graph.nodes();
    for (std::size_t i = 0; i < st.node_ids.size(); ++i) st.pos[st.node_ids[i]] = static_cast<int>(i);
    st.edges = M.graph.edges();
    for (const auto& [u, v] : st.edges) {
        st.msg[{u, v}] = {0.5, 0.5};
        st.msg[{v, u}] = {0.5, 0.5};
    }
    auto psi_node = [&](int v, int x) { return std::exp(M.phi_at(v) * (x ? 1.0 : -1.0)); };
    auto psi_edge = [&](int u, int v, int xu, int xv) {
        return std::exp(M.theta_at(u, v) * (xu ? 1.0 : -1.0) * (xv ? 1.0 : -1.0));
    };
    for (int it = 0; it < opt.max_iters; ++it) {
        std::map<std::pair<int, int>, std::array<double, 2>> next = st.msg;
        double delta = 0.0;
        for (const auto& [key, old] : st.msg) {
            int i = key.first, j = key.second;
            std::array<double, 2> upd{0.0, 0.0};
            for (int xj = 0; xj < 2; ++xj) {
                double best = 0.0, sum = 0.0;
                for (int xi = 0; xi < 2; ++xi) {
                    double t = psi_node(i, xi) * psi_edge(i, j, xi, xj);
                    for (int k : M.graph.neighbors(i))
                        if (k != j) t *= st.msg.at({k, i})[xi];
                    sum += t;
                    best = std::max(best, t);
                }
                upd[xj] = opt.use_max ? best : sum;
            }
            double s = upd[0] + upd[1];
            upd[0] /= s;
            upd[1] /= s;
            std::array<double, 2> damped{opt.damping * old[0] + (1 - opt.damping) * upd[0],
                                         opt.damping * old[1] + (1 - opt.damping) * upd[1]};
            delta = std::max(delta, std::abs(damped[0] - old[0]));
            delta = std::max(delta, std::abs(damped[1] - old[1]));
            next[key] = damped;
        }
        st.msg = std::move(next);
        st.iterations = it + 1;
        if (delta < opt.tol) {
            st.converged = true;
            break;
        }
    }
    return st;
}
}  // namespace detail

/// Sum-product LBP with a synchronous flooding schedule and damping.
/// Non-convergence is reported in the result, never thrown. The reported
/// log-partition is the Bethe approximation (exact on trees).
inline InferenceResult lbp(const IsingModel& M, const LbpOptions& opt = {}) {
    M.validate();
    InferenceResult out;
    if (M.graph.node_count() == 0) return out;
    detail::LbpState st = detail::lbp_run(M, opt);
    out.converged = st.converged;
    out.iterations = st.iterations;

    auto psi_node = [&](int v, int x) { return std::exp(M.phi_at(v) * (x ? 1.0 : -1.0)); };
    auto psi_edge = [&](int u, int v, int xu, int xv) {
        return std::exp(M.theta_at(u, v) * (xu ? 1.0 : -1.0) * (xv ? 1.0 : -1.0));
    };

    std::map<int, std::array<double, 2>> belief;
    for (int v : st.node_ids) {
        std::array<double, 2> b;
        for (int x = 0; x < 2; ++x) {
            double t = psi_node(v, x);
            for (int k : M.graph.neighbors(v)) t *= st.msg.at({k, v})[x];
            b[x] = t;
        }
        double s = b[0] + b[1];
        belief[v] = {b[0] / s, b[1] / s};
    }
    out.node_marginals = belief;

    std::map<std::pair<int, int>, std::array<double, 4>> ebelief;
    for (const auto& [u, v] : st.edges) {
        std::array<double, 4> b;
        for (int xu = 0; xu < 2; ++xu)
            for (int xv = 0; xv < 2; ++xv) {
                double t = psi_node(u, xu) * psi_node(v, xv) * psi_edge(u, v, xu, xv);
                for (int k : M.graph.neighbors(u))
                    if (k != v) t *= st.msg.at({k, u})[xu];
                for (int k : M.graph.neighbors(v))
                    if (k != u) t *= st.msg.at({k, v})[xv];
                b[xu + 2 * xv] = t;
            }
        double s = b[0] + b[1] + b[2] + b[3];
        for (auto& x : b) x /= s;
        ebelief[{u, v}] = b;
    }
    out.pair_marginals = ebelief;

    // Bethe free energy -> approximate log-partition.
    double energy = 0.0, entropy = 0.0;
    auto xlogx = [](double x) { return x > 0 ? x * std::log(x) : 0.0; };
    for (const auto& [e, b] : ebelief) {
        for (int xu = 0; xu < 2; ++xu)
            for (int xv = 0; xv < 2; ++xv) {
                double p = b[xu + 2 * xv];
                if (p > 0)
                    energy += p * std::log(psi_edge(e.first, e.second, xu, xv));
                entropy -= xlogx(p);
            }
    }
    for (int v : st.node_ids) {
        int deg = M.graph.degree(v);
        for (int x = 0; x < 2; ++x) {
            double p = belief[v][x];
            energy += p * std::log(psi_node(v, x));
            entropy += (deg - 1) * xlogx(p);
        }
    }
    out.log_partition = energy + entropy;
    return out;
}

// ---------------------------------------------------------------------------
// MAP assignments
// ---------------------------------------------------------------------------

/// Exact MAP by max-product elimination with backtracking. Ties broken
/// toward +1.
inline std::map<int, int> map_assignment_exact(const IsingModel& M,
                                               int width_cap = kDefaultWidthCap) {
    auto node_ids = M.graph.nodes();
    std::map<int, int> assignment;
    if (node_ids.empty()) return assignment;
    std::vector<Factor> pool = model_factors(M);
    std::vector<std::vector<int>> scopes;
    for (const auto& f : pool) scopes.push_back(f.vars);
    std::set<int> all(node_ids.begin(), node_ids.end());
    auto [order, width] = min_fill_order(scopes, all);
    if (width > width_cap)
        throw WidthCapError("map_assignment: induced width " + std::to_string(width) +
                            " exceeds cap " + std::to_string(width_cap));
    std::vector<Factor> step_belief;
    for (int v : order) {
        Factor combined{{}, {1.0}};
        std::vector<Factor> next;
        for (auto& f : pool) {
            if (std::binary_search(f.vars.begin(), f.vars.end(), v))
                combined = multiply(combined, f);
            else
                next.push_back(std::move(f));
        }
        step_belief.push_back(combined);
        Factor maxed = marginalize_out(combined, v, /*use_max=*/true);
        double mx = *std::max_element(maxed.vals.begin(), maxed.vals.end());
        if (mx > 0)
            for (auto& x : maxed.vals) x /= mx;
        next.push_back(std::move(maxed));
        pool = std::move(next);
    }
    for (int t = static_cast<int>(order.size()) - 1; t >= 0; --t) {
        const Factor& f = step_belief[t];
        int pos = f.position(order[t]);
        std::size_t fixed = 0;
        for (std::size_t k = 0; k < f.vars.size(); ++k)
            if (static_cast<int>(k) != pos && assignment.count(f.vars[k]))
                fixed |= std::size_t{assignment[f.vars[k]]} << k;
        double v0 = f.vals[fixed];
        double v1 = f.vals[fixed | (std::size_t{1} << pos)];
        assignment[order[t]] = v1 >= v0 ? 1 : 0;
    }
    return assignment;
}

/// Approximate MAP via max-product LBP; per-node argmax with ties toward +1.
inline std::map<int, int> map_assignment_lbp(const IsingModel& M, const LbpOptions& base = {}) {
    LbpOptions opt = base;
    opt.use_max = true;
    std::map<int, int> assignment;
    if (M.graph.node_count() == 0) return assignment;
    detail::LbpState st = detail::lbp_run(M, opt);
    for (int v : st.node_ids) {
        double b0 = std::exp(-M.phi_at(v)), b1 = std::exp(M.phi_at(v));
        for (int k : M.graph.neighbors(v)) {
            b0 *= st.msg.at({k, v})[0];
            b1 *= st.msg.at({k, v})[1];
        }
        assignment[v] = b1 >= b0 ? 1 : 0;
    }
    return assignment;
}

// ---------------------------------------------------------------------------
// Observed-data log-likelihood
// ---------------------------------------------------------------------------

enum class Engine { exact, lbp };

/// Log-partition of a model under the chosen engine (Bethe under lbp).
inline double log_partition(const IsingModel& M, Engine engine,
                            int width_cap = kDefaultWidthCap, const LbpOptions& opt = {}) {
    if (M.graph.node_count() == 0) return 0.0;
    if (engine == Engine::exact) return calibrate(M, width_cap).log_partition;
    return lbp(M, opt).log_partition;
}

/// log P(x_V) for a full observed configuration (node -> state 0/1 over the
/// observed set), computed as log Z(model | x_V clamped) - log Z(model).
/// Under the exact engine this is the true log-likelihood; under lbp both
/// partition functions are Bethe approximations. The value coincides with
/// evaluating P(x_{V,H}) / P(x_H | x_V) at any hidden completion, so no
/// hidden configuration needs to be chosen.
inline double loglik_observed(const IsingModel& M, const std::map<int, int>& observed_config,
                              Engine engine = Engine::exact, int width_cap = kDefaultWidthCap,
                              const LbpOptions& opt = {}) {
    ClampedModel cm = clamp_model(M, observed_config);
    double logz_cond = cm.log_const + log_partition(cm.model, engine, width_cap, opt);
    double logz = log_partition(M, engine, width_cap, opt);
    return logz_cond - logz;
}

/// MAP completion of the hidden variables given an observed configuration.
inline std::map<int, int> map_hidden(const IsingModel& M, const std::map<int, int>& observed_config,
                                     Engine engine = Engine::exact,
                                     int width_cap = kDefaultWidthCap) {
    ClampedModel cm = clamp_model(M, observed_config);
    if (engine == Engine::exact) return map_assignment_exact(cm.model, width_cap);
    return map_assignment_lbp(cm.model);
}

// ---------------------------------------------------------------------------
// Generalized EM parameter fitting
// ---------------------------------------------------------------------------

struct EmOptions {
    int iterations = 50;
    double step = 0.1;
    int inner_steps = 50;
    int width_cap = kDefaultWidthCap;
};

struct EmResult {
    IsingModel model;
    /// Observed-data log-likelihood after 0, 1, ..., iterations EM rounds.
    std::vector<double> loglik_history;
};

namespace detail {
struct SuffStats {
    std::map<std::pair<int, int>, double> edge;  // E[x_u x_v]
    std::map<int, double> node;                  // E[x_v]
};

inline SuffStats model_moments(const IsingModel& M, int width_cap, double* logz_out) {
    Calibration cal = calibrate(M, width_cap);
    SuffStats s;
    for (const auto& [v, b] : cal.node) s.node[v] = b[1] - b[0];
    for (const auto& [e, b] : cal.edge) s.edge[e] = b[0] + b[3] - b[1] - b[2];
    if (logz_out) *logz_out = cal.log_partition;
    return s;
}
}  // namespace detail

/// Generalized EM: exact E-step expectations, M-step by gradient ascent on
/// the expected complete log-likelihood (concave in the parameters). The
/// step is halved whenever a move would lower the ascent objective, which
/// preserves the monotone-likelihood property of EM.
inline EmResult em_fit(const LatentGraph& structure, const SampleMatrix& S,
                       const EmOptions& opt = {}, const IsingModel* warm_start = nullptr) {
    IsingModel M;
    if (warm_start) {
        M = *warm_start;
    } else {
        M.graph = structure;
        for (const auto& e : structure.edges()) M.theta[e] = 0.0;
        for (int v : structure.nodes()) M.phi[v] = 0.0;
    }
    M.validate();
    const auto edges = M.graph.edges();
    const auto nodes = M.graph.nodes();
    const std::size_t n = S.rows();
    if (n == 0) throw std::invalid_argument("em_fit requires at least one sample");

    // Column lookup for observed nodes present in the sample matrix.
    std::map<int, int> col;
    for (std::size_t c = 0; c < S.column_ids.size(); ++c) col[S.column_ids[c]] = static_cast<int>(c);
    std::vector<int> hidden;
    for (int v : nodes)
        if (!col.count(v)) hidden.push_back(v);

    // Deduplicate rows; expectations and likelihoods depend only on the
    // observed configuration.
    std::map<std::vector<std::uint8_t>, int> row_mult;
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<std::uint8_t> key(S.cells.begin() + r * S.cols(),
                                      S.cells.begin() + (r + 1) * S.cols());
        ++row_mult[key];
    }

    auto observed_config = [&](const std::vector<std::uint8_t>& key) {
        std::map<int, int> cfg;
        for (const auto& [v, c] : col) cfg[v] = key[c];
        return cfg;
    };

    auto total_loglik = [&]() {
        double ll = 0.0;
        for (const auto& [key, mult] : row_mult)
            ll += mult * loglik_observed(M, observed_config(key), Engine::exact, opt.width_cap);
        return ll;
    };

    EmResult out;
    out.loglik_history.push_back(total_loglik());

    for (int iter = 0; iter < opt.iterations; ++iter) {
        // E-step: expected sufficient statistics under the current model.
        detail::SuffStats data;
        for (const auto& e : edges) data.edge[e] = 0.0;
        for (int v : nodes) data.node[v] = 0.0;
        for (const auto& [key, mult] : row_mult) {
            auto cfg = observed_config(key);
            ClampedModel cm = clamp_model(M, cfg);
            Calibration cal;
            if (cm.model.graph.node_count() > 0) cal = calibrate(cm.model, opt.width_cap);
            auto spin = [&](int v) { return cfg.at(v) ? 1.0 : -1.0; };
            auto mean = [&](int v) {
                auto it = cal.node.find(v);
                return it->second[1] - it->second[0];
            };
            for (int v : nodes)
                data.node[v] += mult * (cfg.count(v) ? spin(v) : mean(v));
            for (const auto& e : edges) {
                bool ou = cfg.count(e.first), ov = cfg.count(e.second);
                double val;
                if (ou && ov)
                    val = spin(e.first) * spin(e.second);
                else if (ou)
                    val = spin(e.first) * mean(e.second);
                else if (ov)
                    val = mean(e.first) * spin(e.second);
                else {
                    auto b = cal.edge.at(e);
                    val = b[0] + b[3] - b[1] - b[2];
                }
                data.edge[e] += mult * val;
            }
        }
        for (auto& [e, v] : data.edge) v /= static_cast<double>(n);
        for (auto& [v, x] : data.node) x /= static_cast<double>(n);

        // M-step: ascend Q(theta) = <stats, theta> - A(theta).
        auto q_value = [&](double logz) {
            double q = -logz;
            for (const auto& e : edges) q += data.edge[e] * M.theta[e];
            for (int v : nodes) q += data.node[v] * M.phi[v];
            return q;
        };
        double logz = 0.0;
        detail::SuffStats moments = detail::model_moments(M, opt.width_cap, &logz);
        double q_cur = q_value(logz);
        for (int s = 0; s < opt.inner_steps; ++s) {
            std::map<std::pair<int, int>, double> theta_save = M.theta;
            std::map<int, double> phi_save = M.phi;
            double stepsize = opt.step;
            bool accepted = false;
            for (int half = 0; half < 30 && !accepted; ++half) {
                for (const auto& e : edges)
                    M.theta[e] = theta_save[e] + stepsize * (data.edge[e] - moments.edge[e]);
                for (int v : nodes)
                    M.phi[v] = phi_save[v] + stepsize * (data.node[v] - moments.node[v]);
                double logz_trial = 0.0;
                detail::SuffStats trial = detail::model_moments(M, opt.width_cap, &logz_trial);
                double q_trial = q_value(logz_trial);
                if (q_trial >= q_cur - 1e-12) {
                    q_cur = q_trial;
                    moments = std::move(trial);
                    accepted = true;
                } else {
                    stepsize *= 0.5;
                }
            }
            if (!accepted) {
                M.theta = theta_save;
                M.phi = phi_save;
                break;
            }
        }
        out.loglik_history.push_back(total_loglik());
    }
    out.model = M;
    return out;
}

// ---------------------------------------------------------------------------
// Correlation-decay profile
// ---------------------------------------------------------------------------

struct DecayProfile {
    int center = 0;
    std::vector<int> targets;
    /// (l, zeta_hat(l)) pairs: L1 gap between the marginal of the targets
    /// under the full model and under the ball-induced submodel.
    std::vector<std::pair<int, double>> values;
};

inline DecayProfile decay_profile(const IsingModel& M, int center, std::vector<int> targets,
                                  int l_lo, int l_hi, int width_cap = kDefaultWidthCap) {
    M.validate();
    std::sort(targets.begin(), targets.end());
    DecayProfile out;
    out.center = center;
    out.targets = targets;
    auto full = eliminate_to(model_factors(M), targets, width_cap, "decay_profile");
    for (int l = l_lo; l <= l_hi; ++l) {
        Ball b = ball_and_induced(M.graph, center, l);
        for (int t : targets)
            if (!std::binary_search(b.members.begin(), b.members.end(), t))
                throw std::invalid_argument("target set must lie inside the ball at every radius");
        std::set<std::pair<int, int>> allowed;
        for (const auto& e : b.induced.edges()) allowed.insert(e);
        IsingModel sub = filter_edges(M, allowed);
        auto local = eliminate_to(model_factors(sub), targets, width_cap, "decay_profile");
        double l1 = 0.0;
        for (std::size_t i = 0; i < full.joint.vals.size(); ++i)
            l1 += std::abs(full.joint.vals[i] - local.joint.vals[i]);
        out.values.emplace_back(l, l1);
    }
    return out;
}

}  // namespace lgm
