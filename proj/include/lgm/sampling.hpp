#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lgm/inference.hpp"
#include "lgm/sample_matrix.hpp"

namespace lgm {

namespace detail {
/// Elimination pass retained for backward sampling: step t holds the product
/// of all factors and incoming messages whose earliest variable is order[t].
struct SamplingTree {
    std::vector<int> order;
    std::vector<Factor> step_belief;
};

inline SamplingTree build_sampling_tree(const IsingModel& M, int width_cap) {
    SamplingTree st;
    std::vector<Factor> pool = model_factors(M);
    std::vector<std::vector<int>> scopes;
    for (const auto& f : pool) scopes.push_back(f.vars);
    auto ids = M.graph.nodes();
    std::set<int> all(ids.begin(), ids.end());
    auto [order, width] = min_fill_order(scopes, all);
    if (width > width_cap)
        throw WidthCapError("sample_exact: induced width " + std::to_string(width) +
                            " exceeds cap " + std::to_string(width_cap) +
                            "; use the Gibbs sampler for wide models");
    st.order = order;
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
        if (mx > 0)
            for (auto& x : summed.vals) x /= mx;
        st.step_belief.push_back(std::move(combined));
        next.push_back(std::move(summed));
        pool = std::move(next);
    }
    return st;
}
}  // namespace detail

/// n i.i.d. exact samples by elimination-tree backward sampling. Hidden
/// columns are projected away unless include_hidden is set.
inline SampleMatrix sample_exact(const IsingModel& M, std::size_t n, std::uint64_t seed,
                                 bool include_hidden = false, int width_cap = kDefaultWidthCap) {
    M.validate();
    detail::SamplingTree st = detail::build_sampling_tree(M, width_cap);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<int> columns = include_hidden ? M.graph.nodes() : M.graph.observed_nodes();
    std::map<int, int> colpos;
    for (std::size_t c = 0; c < columns.size(); ++c) colpos[columns[c]] = static_cast<int>(c);

    SampleMatrix S;
    S.column_ids = columns;
    S.cells.resize(n * columns.size());
    std::map<int, int> state;
    for (std::size_t r = 0; r < n; ++r) {
        state.clear();
        for (int t = static_cast<int>(st.order.size()) - 1; t >= 0; --t) {
            const Factor& f = st.step_belief[t];
            int pos = f.position(st.order[t]);
            std::size_t fixed = 0;
            for (std::size_t k = 0; k < f.vars.size(); ++k)
                if (static_cast<int>(k) != pos)
                    fixed |= std::size_t{static_cast<std::size_t>(state[f.vars[k]])} << k;
            double v0 = f.vals[fixed];
            double v1 = f.vals[fixed | (std::size_t{1} << pos)];
            state[st.order[t]] = unif(rng) * (v0 + v1) < v1 ? 1 : 0;
        }
        for (const auto& [v, c] : colpos)
            S.cells[r * columns.size() + c] = static_cast<std::uint8_t>(state[v]);
    }
    return S;
}

/// Single-chain single-site Gibbs sampler: full sweeps in ascending node
/// order, recording one sample every thin_sweeps sweeps after burn_in_sweeps.
inline SampleMatrix sample_gibbs(const IsingModel& M, std::size_t n, std::uint64_t seed,
                                 int burn_in_sweeps = 100, int thin_sweeps = 10,
                                 bool include_hidden = false) {
    M.validate();
    if (thin_sweeps < 1) throw std::invalid_argument("thin_sweeps must be >= 1");
    auto ids = M.graph.nodes();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::map<int, int> state;
    for (int v : ids) state[v] = unif(rng) < 0.5 ? 0 : 1;

    auto sweep = [&]() {
        for (int v : ids) {
            double field = M.phi_at(v);
            for (int u : M.graph.neighbors(v))
                field += M.theta_at(u, v) * (state[u] ? 1.0 : -1.0);
            double p1 = 1.0 / (1.0 + std::exp(-2.0 * field));
            state[v] = unif(rng) < p1 ? 1 : 0;
        }
    };

    std::vector<int> columns = include_hidden ? ids : M.graph.observed_nodes();
    std::map<int, int> colpos;
    for (std::size_t c = 0; c < columns.size(); ++c) colpos[columns[c]] = static_cast<int>(c);

    SampleMatrix S;
    S.column_ids = columns;
    S.cells.resize(n * columns.size());
    for (int b = 0; b < burn_in_sweeps; ++b) sweep();
    for (std::size_t r = 0; r < n; ++r) {
        for (int t = 0; t < thin_sweeps; ++t) sweep();
        for (const auto& [v, c] : colpos)
            S.cells[r * columns.size() + c] = static_cast<std::uint8_t>(state[v]);
    }
    return S;
}

}  // namespace lgm
