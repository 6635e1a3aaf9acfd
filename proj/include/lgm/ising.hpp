#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <utility>

#include "lgm/common.hpp"
#include "lgm/graph.hpp"

namespace lgm {

/// Pairwise binary model over {-1,+1}: edge potentials theta, node
/// potentials phi, both defined on exactly the graph's edge/node sets.
struct IsingModel {
    LatentGraph graph;
    std::map<std::pair<int, int>, double> theta;  // keys normalized u < v
    std::map<int, double> phi;

    double theta_at(int u, int v) const {
        if (u > v) std::swap(u, v);
        return theta.at({u, v});
    }
    double phi_at(int v) const { return phi.at(v); }

    void validate() const {
        if (theta.size() != graph.edge_count())
            throw std::invalid_argument("theta must cover exactly the edge set");
        if (phi.size() != graph.node_count())
            throw std::invalid_argument("phi must cover exactly the node set");
        for (const auto& [e, val] : theta) {
            if (!graph.has_edge(e.first, e.second))
                throw std::invalid_argument("theta on a non-edge");
            if (!std::isfinite(val)) throw std::invalid_argument("theta must be finite");
        }
        for (const auto& [v, val] : phi) {
            if (!graph.has_node(v)) throw std::invalid_argument("phi on a non-node");
            if (!std::isfinite(val)) throw std::invalid_argument("phi must be finite");
        }
    }
};

enum class PotentialSign { positive, random };

/// Draws each |theta_e| uniformly from [lo, hi] (sign flipped with
/// probability 1/2 under PotentialSign::random) and sets every phi to
/// phi_value. Deterministic per seed.
inline IsingModel gen_potentials(const LatentGraph& G, double lo, double hi, PotentialSign sign,
                                 double phi_value, std::uint64_t seed) {
    if (!(lo > 0.0) || lo > hi)
        throw std::invalid_argument("potential range requires 0 < lo <= hi");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(lo, hi);
    std::bernoulli_distribution flip(0.5);
    IsingModel M;
    M.graph = G;
    for (const auto& [u, v] : G.edges()) {
        double t = unif(rng);
        if (sign == PotentialSign::random && flip(rng)) t = -t;
        M.theta[{u, v}] = t;
    }
    for (int v : G.nodes()) M.phi[v] = phi_value;
    return M;
}

struct TwoNodeDet {
    double abs_det = 0.0;   ///< |det| of the 2x2 joint probability table
    double distance = 0.0;  ///< -log|det|, capped at kDCap
};

/// Determinant of the joint table of a two-node model with edge potential
/// theta and fields phi1, phi2. Closed form 2*sinh(2*theta)/Z^2 with
/// Z = 2(e^theta cosh(phi1+phi2) + e^-theta cosh(phi1-phi2)).
inline TwoNodeDet two_node_det(double theta, double phi1, double phi2) {
    if (!std::isfinite(theta) || !std::isfinite(phi1) || !std::isfinite(phi2))
        throw std::invalid_argument("two_node_det requires finite inputs");
    double z = 2.0 * (std::exp(theta) * std::cosh(phi1 + phi2) +
                      std::exp(-theta) * std::cosh(phi1 - phi2));
    TwoNodeDet out;
    out.abs_det = std::abs(2.0 * std::sinh(2.0 * theta)) / (z * z);
    out.distance = out.abs_det < kDetEps ? kDCap : -std::log(out.abs_det);
    return out;
}

// ---------------------------------------------------------------------------
// Sample-size calculators
// ---------------------------------------------------------------------------

/// Ising-model sample-size order for structural consistency:
/// theta_min^{-(delta*eta*(eta+1)+2)} * log p. The leading constant is fixed
/// at 1; the guarantee is stated only up to order.
inline double sample_size_ising(double theta_min, double delta, double eta, int p) {
    if (!(theta_min > 0.0)) throw std::invalid_argument("theta_min must be positive");
    if (p < 2) throw std::invalid_argument("p must be >= 2");
    double expnt = delta * eta * (eta + 1.0) + 2.0;
    return std::pow(theta_min, -expnt) * std::log(static_cast<double>(p));
}

struct PacSampleSizeParams {
    int alphabet_size = 2;  ///< |X|
    int p = 0;              ///< observed node count
    double kappa = 0.05;    ///< failure probability target
    double upsilon = 0.0;   ///< slack parameter of the distance-window conditions
    double zeta = 0.0;      ///< decay-rate value at (g/2 - r/d_min - 1)
};

/// Exact PAC sample-size threshold: the method is structurally consistent
/// w.p. >= 1-kappa once n exceeds
///   2|X|^2 / (upsilon - |X|^2 zeta)^2 * (4 log p + |X| log 2 - log(kappa/7)).
inline double sample_size_pac(const PacSampleSizeParams& q) {
    if (q.p < 2) throw std::invalid_argument("p must be >= 2");
    if (!(q.kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
    double x2 = static_cast<double>(q.alphabet_size) * q.alphabet_size;
    double denom = q.upsilon - x2 * q.zeta;
    if (!(denom > 0.0))
        throw std::invalid_argument(
            "denominator nonpositive - assumptions violated (upsilon <= |X|^2 * zeta)");
    double lead = 2.0 * x2 / (denom * denom);
    double tail = 4.0 * std::log(static_cast<double>(q.p)) +
                  q.alphabet_size * std::log(2.0) - std::log(q.kappa / 7.0);
    return lead * tail;
}

struct CountingBoundParams {
    int alphabet_size = 2;
    int m = 0;             ///< total node count
    double beta = 1.0;     ///< p = m^beta observed nodes
    double n = 0.0;        ///< sample count
    double epsilon = 0.0;  ///< edit-distance slack: failure means dist > epsilon*m
    int degree_min = 0;
    int degree_max = 0;
    int girth = 0;
};

/// Counting lower bound on the failure probability of ANY deterministic
/// estimator: returns P[dist > epsilon*m] >= 1 - exp(L) with L evaluated in
/// the log domain. A negative return value means the bound is vacuous.
inline double failure_probability_lower_bound(const CountingBoundParams& q) {
    if (q.m < 2) throw std::invalid_argument("m must be >= 2");
    double gd = q.m - q.girth * std::pow(static_cast<double>(q.degree_max), q.girth);
    if (!(gd > 0.0))
        throw std::invalid_argument("m - g*degree_max^g must be positive for the bound to apply");
    double logm = std::log(static_cast<double>(q.m));
    double L = q.n * std::pow(static_cast<double>(q.m), q.beta) * std::log(q.alphabet_size) +
               (2.0 * q.epsilon + 1.0) * q.m * logm + q.epsilon * q.m * std::log(3.0) -
               0.5 * q.degree_min * q.m * logm - 0.5 * q.degree_min * q.m * std::log(gd);
    return -std::expm1(L);
}

/// Necessary sample size for structural consistency under any algorithm:
/// degree_min / rho * log p (order, constant 1).
inline double sample_size_necessary(int degree_min, double rho, int p) {
    if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("rho must lie in (0,1]");
    if (p < 2) throw std::invalid_argument("p must be >= 2");
    return degree_min / rho * std::log(static_cast<double>(p));
}

}  // namespace lgm
