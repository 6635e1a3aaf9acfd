#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "lgm/common.hpp"
#include "lgm/estone.hpp"
#include "lgm/inference.hpp"
#include "lgm/sample_matrix.hpp"

namespace lgm {

// ---------------------------------------------------------------------------
// Latent-permutation graph edit distance
// ---------------------------------------------------------------------------

struct EditDistanceResult {
    long long value = 0;          ///< L1 gap of symmetric adjacencies; always even
    std::map<int, int> matching;  ///< estimate-hidden id -> truth-hidden id
    bool exact = true;            ///< true when the value is the proven minimum
};

namespace detail {

struct EditInstance {
    std::vector<int> observed;        // shared labeled nodes, sorted
    std::vector<int> ha, hb;          // hidden of estimate / truth, padded to equal size
    std::set<std::pair<int, int>> ea, eb;
    long long fixed_cost = 0;                 // observed-observed block
    std::vector<std::vector<long long>> vh;   // vh[i][j]: cost of ha[i] -> hb[j] over observed rows
    int k = 0;

    bool adj_a(int u, int v) const { return ea.count(std::minmax(u, v)) != 0; }
    bool adj_b(int u, int v) const { return eb.count(std::minmax(u, v)) != 0; }

    long long cost(const std::vector<int>& perm) const {
        long long c = fixed_cost;
        for (int i = 0; i < k; ++i) c += vh[i][perm[i]];
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j)
                if (adj_a(ha[i], ha[j]) != adj_b(hb[perm[i]], hb[perm[j]])) c += 2;
        return c;
    }
};

inline EditInstance build_edit_instance(const LatentGraph& truth, const LatentGraph& estimate) {
    EditInstance inst;
    inst.observed = truth.observed_nodes();
    if (inst.observed != estimate.observed_nodes())
        throw std::invalid_argument("edit_distance requires identical observed node sets");
    inst.hb = truth.hidden_nodes();
    inst.ha = estimate.hidden_nodes();
    // Pad the smaller hidden set with isolated nodes (fresh negative ids).
    inst.k = static_cast<int>(std::max(inst.ha.size(), inst.hb.size()));
    int pad = -1;
    while (static_cast<int>(inst.ha.size()) < inst.k) inst.ha.push_back(pad--);
    while (static_cast<int>(inst.hb.size()) < inst.k) inst.hb.push_back(pad--);
    for (const auto& e : estimate.edges()) inst.ea.insert(e);
    for (const auto& e : truth.edges()) inst.eb.insert(e);

    for (std::size_t i = 0; i < inst.observed.size(); ++i)
        for (std::size_t j = i + 1; j < inst.observed.size(); ++j)
            if (inst.adj_a(inst.observed[i], inst.observed[j]) !=
                inst.adj_b(inst.observed[i], inst.observed[j]))
                inst.fixed_cost += 2;

    inst.vh.assign(inst.k, std::vector<long long>(inst.k, 0));
    for (int i = 0; i < inst.k; ++i)
        for (int j = 0; j < inst.k; ++j) {
            long long c = 0;
            for (int v : inst.observed) {
                bool a = inst.ha[i] >= 0 && inst.adj_a(v, inst.ha[i]);
                bool b = inst.hb[j] >= 0 && inst.adj_b(v, inst.hb[j]);
                if (a != b) c += 2;
            }
            inst.vh[i][j] = c;
        }
    return inst;
}

/// Greedy matching by observed-adjacency signature plus 2-swap refinement.
inline std::vector<int> greedy_matching(const EditInstance& inst) {
    const int k = inst.k;
    auto signature = [&](const std::vector<int>& hs, int i, bool side_a) {
        std::vector<int> sig;
        for (int v : inst.observed) {
            bool adj = hs[i] >= 0 && (side_a ? inst.adj_a(v, hs[i]) : inst.adj_b(v, hs[i]));
            if (adj) sig.push_back(v);
        }
        return sig;
    };
    std::vector<int> ia(k), ib(k);
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    std::vector<std::vector<int>> sa(k), sb(k);
    for (int i = 0; i < k; ++i) {
        sa[i] = signature(inst.ha, i, true);
        sb[i] = signature(inst.hb, i, false);
    }
    auto by_sig = [](const std::vector<std::vector<int>>& sigs) {
        return [&sigs](int x, int y) { return sigs[x] < sigs[y] || (sigs[x] == sigs[y] && x < y); };
    };
    std::sort(ia.begin(), ia.end(), by_sig(sa));
    std::sort(ib.begin(), ib.end(), by_sig(sb));
    std::vector<int> perm(k);
    for (int t = 0; t < k; ++t) perm[ia[t]] = ib[t];

    bool improved = true;
    long long cur = inst.cost(perm);
    while (improved) {
        improved = false;
        for (int i = 0; i < k && !improved; ++i)
            for (int j = i + 1; j < k && !improved; ++j) {
                std::swap(perm[i], perm[j]);
                long long c = inst.cost(perm);
                if (c < cur) {
                    cur = c;
                    improved = true;
                } else {
                    std::swap(perm[i], perm[j]);
                }
            }
    }
    return perm;
}

}  // namespace detail

/// Minimum L1 difference between the two symmetric adjacency matrices over
/// permutations of the hidden (unlabeled) ids, the observed ids held fixed
/// and the smaller hidden set padded with isolated nodes. Exhaustive search
/// up to exact_limit hidden nodes; greedy signature matching with 2-swap
/// refinement beyond that, reported as an upper bound unless it reaches 0.
inline EditDistanceResult edit_distance(const LatentGraph& truth, const LatentGraph& estimate,
                                        int exact_limit = 8) {
    detail::EditInstance inst = detail::build_edit_instance(truth, estimate);
    const int k = inst.k;
    EditDistanceResult out;
    std::vector<int> best(k);
    std::iota(best.begin(), best.end(), 0);
    if (k == 0) {
        out.value = inst.fixed_cost;
        out.exact = true;
        return out;
    }
    if (k <= exact_limit) {
        std::vector<int> perm = best;
        long long best_cost = inst.cost(perm);
        while (std::next_permutation(perm.begin(), perm.end())) {
            long long c = inst.cost(perm);
            if (c < best_cost) {
                best_cost = c;
                best = perm;
            }
        }
        out.value = best_cost;
        out.exact = true;
    } else {
        best = detail::greedy_matching(inst);
        out.value = inst.cost(best);
        out.exact = out.value == 0;  // a zero upper bound is already optimal
    }
    for (int i = 0; i < k; ++i)
        if (inst.ha[i] >= 0 && inst.hb[best[i]] >= 0) out.matching[inst.ha[i]] = inst.hb[best[i]];
    return out;
}

// ---------------------------------------------------------------------------
// Perplexity / BIC family
// ---------------------------------------------------------------------------

struct EvalMetrics {
    double loglik_sum = 0.0;
    long long df = 0;  ///< m + |E|
    double bic = 0.0;
    double normalized_bic = 0.0;  ///< bic / (n * p)
    double perplexity = 0.0;
    double perp_bic = 0.0;
};

namespace detail {
inline std::map<std::vector<std::uint8_t>, int> dedupe_rows(const SampleMatrix& S) {
    std::map<std::vector<std::uint8_t>, int> rows;
    for (std::size_t r = 0; r < S.rows(); ++r) {
        std::vector<std::uint8_t> key(S.cells.begin() + r * S.cols(),
                                      S.cells.begin() + (r + 1) * S.cols());
        ++rows[key];
    }
    return rows;
}
}  // namespace detail

/// Test log-likelihood, BIC and the perplexity family. df counts one degree
/// of freedom per variable and per edge.
inline EvalMetrics model_scores(const IsingModel& M, const SampleMatrix& S_test,
                                Engine engine = Engine::exact, int width_cap = kDefaultWidthCap,
                                const LbpOptions& lbp_opt = {}) {
    M.validate();
    if (S_test.rows() == 0) throw std::invalid_argument("model_scores requires test samples");
    const double n = static_cast<double>(S_test.rows());
    const double p = static_cast<double>(S_test.cols());

    EvalMetrics out;
    for (const auto& [key, mult] : detail::dedupe_rows(S_test)) {
        std::map<int, int> cfg;
        for (std::size_t c = 0; c < S_test.cols(); ++c) cfg[S_test.column_ids[c]] = key[c];
        out.loglik_sum += mult * loglik_observed(M, cfg, engine, width_cap, lbp_opt);
    }
    out.df = static_cast<long long>(M.graph.node_count()) +
             static_cast<long long>(M.graph.edge_count());
    out.bic = out.loglik_sum - 0.5 * out.df * std::log(n);
    out.normalized_bic = out.bic / (n * p);
    out.perplexity = std::exp(-out.loglik_sum / (n * p));
    out.perp_bic = std::exp(-out.bic / (n * p));
    return out;
}

struct PredictiveScores {
    double pred_perplexity = 0.0;
    double pred_perp_bic = 0.0;
};

/// Predictive perplexity: per test sample a seed-deterministic split hides
/// hold_fraction of the columns, and the conditional likelihood of the held
/// part given the rest is scored.
inline PredictiveScores predictive_scores(const IsingModel& M, const SampleMatrix& S_test,
                                          double hold_fraction, std::uint64_t seed,
                                          Engine engine = Engine::exact,
                                          int width_cap = kDefaultWidthCap,
                                          const LbpOptions& lbp_opt = {}) {
    M.validate();
    if (!(hold_fraction > 0.0) || !(hold_fraction < 1.0))
        throw std::invalid_argument("hold_fraction must lie strictly between 0 and 1");
    if (S_test.rows() == 0) throw std::invalid_argument("predictive_scores requires test samples");
    const std::size_t n = S_test.rows(), p = S_test.cols();
    int hold = static_cast<int>(std::llround(hold_fraction * static_cast<double>(p)));
    hold = std::clamp(hold, 1, static_cast<int>(p) - 1);

    double cond_sum = 0.0;
    std::vector<int> cols(p);
    for (std::size_t r = 0; r < n; ++r) {
        std::iota(cols.begin(), cols.end(), 0);
        std::mt19937_64 rng(derive_seed(seed, r));
        std::shuffle(cols.begin(), cols.end(), rng);
        std::map<int, int> full_cfg, obs_cfg;
        for (std::size_t c = 0; c < p; ++c) full_cfg[S_test.column_ids[c]] = S_test.at(r, c);
        for (std::size_t t = hold; t < p; ++t) {
            int c = cols[t];
            obs_cfg[S_test.column_ids[c]] = S_test.at(r, c);
        }
        double lf = loglik_observed(M, full_cfg, engine, width_cap, lbp_opt);
        double lo = loglik_observed(M, obs_cfg, engine, width_cap, lbp_opt);
        cond_sum += lf - lo;
    }
    long long df = static_cast<long long>(M.graph.node_count()) +
                   static_cast<long long>(M.graph.edge_count());
    double np = static_cast<double>(n) * static_cast<double>(p);
    PredictiveScores out;
    out.pred_perplexity = std::exp(-cond_sum / np);
    out.pred_perp_bic = std::exp(-(cond_sum - 0.5 * df * std::log(static_cast<double>(n))) / np);
    return out;
}

// ---------------------------------------------------------------------------
// Topic coherence
// ---------------------------------------------------------------------------

/// Average pointwise mutual information over the 45 pairs of each topic's
/// ten words: log P(X_i=1, X_j=1) / (P(X_i=1) P(X_j=1)), probabilities from
/// smoothed corpus frequencies. "Appears" maps to the +1 state.
inline double pmi_score(const SampleMatrix& corpus,
                        const std::map<int, std::vector<int>>& topic_words,
                        double pseudocount = 0.5) {
    corpus.validate();
    if (corpus.alphabet_size != 2) throw std::invalid_argument("pmi_score expects binary data");
    if (topic_words.empty()) throw std::invalid_argument("pmi_score requires at least one topic");
    const double n = static_cast<double>(corpus.rows());
    double total = 0.0;
    std::size_t pairs = 0;
    for (const auto& [topic, words] : topic_words) {
        if (words.size() != 10)
            throw std::invalid_argument("each topic must list exactly 10 word ids");
        std::vector<int> cols;
        for (int w : words) cols.push_back(corpus.column_of(w));
        for (std::size_t a = 0; a < cols.size(); ++a)
            for (std::size_t b = a + 1; b < cols.size(); ++b) {
                double c11 = 0, ci = 0, cj = 0;
                for (std::size_t r = 0; r < corpus.rows(); ++r) {
                    bool xi = corpus.at(r, cols[a]) == 1, xj = corpus.at(r, cols[b]) == 1;
                    c11 += xi && xj;
                    ci += xi;
                    cj += xj;
                }
                double denom = n + 4.0 * pseudocount;
                double p11 = (c11 + pseudocount) / denom;
                double pi = (ci + 2.0 * pseudocount) / denom;
                double pj = (cj + 2.0 * pseudocount) / denom;
                if (p11 <= 0.0)
                    throw std::invalid_argument(
                        "zero smoothed joint; rerun with a nonzero pseudocount");
                total += std::log(p11 / (pi * pj));
                ++pairs;
            }
    }
    return total / static_cast<double>(pairs);
}

/// The k observed nodes nearest to a hidden node in the extended metric,
/// ties broken by id.
inline std::vector<int> top_words(const GraphEstimate& est, int hidden_id, int k = 10) {
    if (!est.graph.has_node(hidden_id) || est.graph.is_observed(hidden_id))
        throw std::invalid_argument("top_words requires a hidden node of the estimate");
    auto observed = est.graph.observed_nodes();
    if (k > static_cast<int>(observed.size()))
        throw std::invalid_argument("k exceeds the number of observed nodes");
    std::vector<std::pair<double, int>> ranked;
    for (int v : observed) ranked.push_back({est.extended.between(hidden_id, v), v});
    std::sort(ranked.begin(), ranked.end());
    std::vector<int> out;
    for (int i = 0; i < k; ++i) out.push_back(ranked[i].second);
    return out;
}

}  // namespace lgm
