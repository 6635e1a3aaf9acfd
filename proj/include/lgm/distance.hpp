#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgm/common.hpp"
#include "lgm/inference.hpp"
#include "lgm/sample_matrix.hpp"

namespace lgm {

enum class DistanceVariant { empirical, exact_global, exact_tree_limit };
enum class DistanceMetric { raw_det, normalized_det };

inline std::string to_string(DistanceVariant v) {
    switch (v) {
        case DistanceVariant::empirical: return "empirical";
        case DistanceVariant::exact_global: return "exact_global";
        default: return "exact_tree_limit";
    }
}
inline std::string to_string(DistanceMetric m) {
    return m == DistanceMetric::raw_det ? "raw_det" : "normalized_det";
}

/// Symmetric information-distance table over a fixed id list. Values are
/// nonnegative, capped at kDCap, with a zero diagonal by convention.
struct DistanceMatrix {
    std::vector<int> ids;  ///< sorted
    std::vector<double> d; ///< dense ids.size()^2, row-major
    DistanceVariant variant = DistanceVariant::empirical;
    DistanceMetric metric = DistanceMetric::normalized_det;

    std::size_t size() const { return ids.size(); }
    double& at(std::size_t i, std::size_t j) { return d[i * ids.size() + j]; }
    double at(std::size_t i, std::size_t j) const { return d[i * ids.size() + j]; }

    int index_of(int id) const {
        auto it = std::lower_bound(ids.begin(), ids.end(), id);
        if (it == ids.end() || *it != id)
            throw std::invalid_argument("id " + std::to_string(id) + " not in distance matrix");
        return static_cast<int>(it - ids.begin());
    }
    double between(int id_u, int id_v) const { return at(index_of(id_u), index_of(id_v)); }

    void validate() const {
        for (std::size_t i = 0; i < size(); ++i) {
            if (at(i, i) != 0.0) throw std::invalid_argument("nonzero diagonal");
            for (std::size_t j = 0; j < size(); ++j) {
                if (at(i, j) != at(j, i)) throw std::invalid_argument("asymmetric distance matrix");
                if (!(at(i, j) >= 0.0) || at(i, j) > kDCap)
                    throw std::invalid_argument("distance outside [0, cap]");
            }
        }
    }
};

/// Determinant of a k x k matrix via partial-pivot elimination; k is tiny
/// (the alphabet size).
inline double det_small(std::vector<double> a, int k) {
    double det = 1.0;
    for (int c = 0; c < k; ++c) {
        int piv = c;
        for (int r = c + 1; r < k; ++r)
            if (std::abs(a[r * k + c]) > std::abs(a[piv * k + c])) piv = r;
        if (a[piv * k + c] == 0.0) return 0.0;
        if (piv != c) {
            for (int j = 0; j < k; ++j) std::swap(a[c * k + j], a[piv * k + j]);
            det = -det;
        }
        det *= a[c * k + c];
        for (int r = c + 1; r < k; ++r) {
            double f = a[r * k + c] / a[c * k + c];
            for (int j = c; j < k; ++j) a[r * k + j] -= f * a[c * k + j];
        }
    }
    return det;
}

/// Empirical joint table of two sample columns with optional additive
/// smoothing: (count + pseudocount) / (n + pseudocount * |X|^2).
/// Row index = state of node i, column index = state of node j.
inline std::vector<double> empirical_joint(const SampleMatrix& S, int node_i, int node_j,
                                           double pseudocount = 0.0) {
    if (S.rows() == 0) throw std::invalid_argument("empirical_joint requires n >= 1");
    if (pseudocount < 0.0) throw std::invalid_argument("pseudocount must be >= 0");
    const int k = S.alphabet_size;
    const int ci = S.column_of(node_i), cj = S.column_of(node_j);
    std::vector<double> counts(static_cast<std::size_t>(k) * k, pseudocount);
    const std::size_t n = S.rows(), p = S.cols();
    for (std::size_t r = 0; r < n; ++r)
        counts[S.cells[r * p + ci] * k + S.cells[r * p + cj]] += 1.0;
    double total = static_cast<double>(n) + pseudocount * k * k;
    for (auto& c : counts) c /= total;
    return counts;
}

/// Information distance of a joint probability table.
///   raw_det:        -log|det J|
///   normalized_det: -log(|det J| / sqrt(det Pi_i * det Pi_j)) with Pi the
///                   diagonal marginal tables (additive along tree paths).
/// Values are floored at 0 and capped at kDCap; near-singular tables map to
/// the cap rather than throwing.
inline double info_distance(const std::vector<double>& joint, int alphabet_size,
                            DistanceMetric metric) {
    const int k = alphabet_size;
    double det = std::abs(det_small(joint, k));
    if (det < kDetEps) return kDCap;
    double value;
    if (metric == DistanceMetric::raw_det) {
        value = -std::log(det);
    } else {
        double prod_i = 1.0, prod_j = 1.0;
        for (int a = 0; a < k; ++a) {
            double ri = 0.0, cj = 0.0;
            for (int b = 0; b < k; ++b) {
                ri += joint[a * k + b];
                cj += joint[b * k + a];
            }
            prod_i *= ri;
            prod_j *= cj;
        }
        if (prod_i <= 0.0 || prod_j <= 0.0) return kDCap;
        value = -std::log(det / std::sqrt(prod_i * prod_j));
    }
    return std::min(kDCap, std::max(0.0, value));
}

/// Pairwise empirical information distances over every sample column.
inline DistanceMatrix empirical_distances(const SampleMatrix& S,
                                          DistanceMetric metric = DistanceMetric::normalized_det,
                                          double pseudocount = 0.0) {
    S.validate();
    if (S.rows() == 0) throw std::invalid_argument("empirical_distances requires n >= 1");
    DistanceMatrix D;
    D.ids = S.column_ids;
    std::vector<int> perm(D.ids.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    std::sort(perm.begin(), perm.end(), [&](int a, int b) { return D.ids[a] < D.ids[b]; });
    std::sort(D.ids.begin(), D.ids.end());
    D.variant = DistanceVariant::empirical;
    D.metric = metric;
    const std::size_t p = D.ids.size();
    D.d.assign(p * p, 0.0);

    const int k = S.alphabet_size;
    const std::size_t n = S.rows(), cols = S.cols();
    std::vector<double> joint(static_cast<std::size_t>(k) * k);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i + 1; j < p; ++j) {
            const int ci = perm[i], cj = perm[j];
            std::fill(joint.begin(), joint.end(), pseudocount);
            for (std::size_t r = 0; r < n; ++r)
                joint[S.cells[r * cols + ci] * k + S.cells[r * cols + cj]] += 1.0;
            double total = static_cast<double>(n) + pseudocount * k * k;
            for (auto& c : joint) c /= total;
            double dist = info_distance(joint, k, metric);
            D.at(i, j) = dist;
            D.at(j, i) = dist;
        }
    }
    return D;
}

/// Exact pairwise joint of two observed nodes, either under the full model
/// (exact_global) or under the induced subgraph on B_l(i) union B_l(j) with
/// l = floor(g/2) - 1 (exact_tree_limit).
inline DistanceMatrix oracle_distances(const IsingModel& M, DistanceVariant variant,
                                       DistanceMetric metric = DistanceMetric::normalized_det,
                                       int width_cap = kDefaultWidthCap) {
    if (variant == DistanceVariant::empirical)
        throw std::invalid_argument("oracle_distances computes exact variants only");
    M.validate();
    DistanceMatrix D;
    D.ids = M.graph.observed_nodes();
    D.variant = variant;
    D.metric = metric;
    const std::size_t p = D.ids.size();
    D.d.assign(p * p, 0.0);

    int l = -1;
    if (variant == DistanceVariant::exact_tree_limit) {
        auto g = girth(M.graph);
        // Forests have no cycle to avoid; the ball union is the whole graph.
        l = g ? *g / 2 - 1 : static_cast<int>(M.graph.node_count());
    }

    auto full_factors = model_factors(M);
    std::map<int, std::set<int>> ball_cache;
    auto ball_members = [&](int v) -> const std::set<int>& {
        auto it = ball_cache.find(v);
        if (it == ball_cache.end()) {
            Ball b = ball_and_induced(M.graph, v, l);
            it = ball_cache.emplace(v, std::set<int>(b.members.begin(), b.members.end())).first;
        }
        return it->second;
    };

    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i + 1; j < p; ++j) {
            int u = D.ids[i], v = D.ids[j];
            std::vector<double> joint;
            if (variant == DistanceVariant::exact_global) {
                auto ej = eliminate_to(full_factors, {u, v}, width_cap, "oracle_distances");
                // eliminate_to orders the pair ascending with bit0 = smaller id;
                // reshape to row = state of u, which is already the smaller id.
                joint = {ej.joint.vals[0], ej.joint.vals[2], ej.joint.vals[1], ej.joint.vals[3]};
            } else {
                std::set<int> members = ball_members(u);
                const auto& mv = ball_members(v);
                members.insert(mv.begin(), mv.end());
                std::set<std::pair<int, int>> allowed;
                for (const auto& [a, b] : M.graph.edges())
                    if (members.count(a) && members.count(b)) allowed.insert({a, b});
                IsingModel sub = filter_edges(M, allowed);
                auto ej = eliminate_to(model_factors(sub), {u, v}, width_cap, "oracle_distances");
                joint = {ej.joint.vals[0], ej.joint.vals[2], ej.joint.vals[1], ej.joint.vals[3]};
            }
            double dist = info_distance(joint, 2, metric);
            D.at(i, j) = dist;
            D.at(j, i) = dist;
        }
    }
    return D;
}

}  // namespace lgm
