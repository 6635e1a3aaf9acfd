#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lgm/distance.hpp"
#include "lgm/inference.hpp"
#include "lgm/ising.hpp"

namespace lgm {

/// Attractive counterpart: every potential replaced by its absolute value.
/// Returns the counterpart together with phi'_max = max_i atanh(E[X_i])
/// under it. Zero-field models short-circuit to 0 exactly: global spin-flip
/// symmetry forces every mean to vanish.
struct AttractiveCounterpart {
    IsingModel model;
    double phi_prime_max = 0.0;
};

inline AttractiveCounterpart attractive_counterpart(const IsingModel& M,
                                                    int width_cap = kDefaultWidthCap) {
    M.validate();
    AttractiveCounterpart out;
    out.model.graph = M.graph;
    bool zero_field = true;
    for (const auto& [e, th] : M.theta) out.model.theta[e] = std::abs(th);
    for (const auto& [v, ph] : M.phi) {
        out.model.phi[v] = std::abs(ph);
        if (ph != 0.0) zero_field = false;
    }
    if (zero_field || M.graph.node_count() == 0) {
        out.phi_prime_max = 0.0;
        return out;
    }
    Calibration cal = calibrate(out.model, width_cap);
    double mx = 0.0;
    for (const auto& [v, b] : cal.node) mx = std::max(mx, std::atanh(b[1] - b[0]));
    out.phi_prime_max = mx;
    return out;
}

struct AssumptionParams {
    double delta = 1.0;  ///< depth, measured or supplied
    int girth = 0;
    std::optional<double> r;  ///< radius; defaults to the window midpoint
    DistanceMetric metric = DistanceMetric::normalized_det;
    double kappa = 0.05;         ///< confidence parameter (recorded, used by calculators)
    double epsilon_slack = 0.0;  ///< slack in the lower r constraint (recorded)
    /// Decay-rate values; measured via decay_profile or supplied. When left
    /// unset the checks run at zeta = 0 (the exact-distance limit) and the
    /// provenance records that.
    std::optional<double> zeta_window;      ///< zeta(g/2 - r/d_min - 1)
    std::optional<double> zeta_half_girth;  ///< zeta(g/2 - 1)
    std::string zeta_provenance;
    int width_cap = kDefaultWidthCap;
};

struct AssumptionReport {
    double theta_min = 0.0, theta_max = 0.0;
    double alpha = 0.0;           ///< degree_max * tanh(theta_max)
    double theta_critical = 0.0;  ///< atanh(1/degree_max)
    double phi_prime_max = 0.0;
    double d_min = 0.0, d_max = 0.0, eta = 0.0;
    double upsilon = 0.0;
    double r_used = 0.0;
    double r_lo = 0.0, r_hi = 0.0;  ///< admissible window (delta*(eta+1)*d_max, (g/8)*d_min]
    double kappa = 0.0, epsilon_slack = 0.0;
    double zeta_window = 0.0, zeta_half_girth = 0.0;
    std::string zeta_provenance;
    double lambda_theoretical = 0.0;  ///< quartet confidence bound
    double tau_theoretical = 0.0;     ///< merge threshold d_min/2 - |X|^2 zeta(g/2-1)
    DistanceMetric metric = DistanceMetric::normalized_det;

    bool hidden_degree_ok = false;  ///< every hidden node has degree >= 3
    bool alpha_ok = false;          ///< alpha < 1
    bool d_bounds_ok = false;       ///< 0 < d_min and d_max below the cap
    bool window_nonempty = false;   ///< r_lo < r_hi
    bool r_in_window = false;
    bool upsilon_positive = false;
    bool zeta_ok = false;          ///< zeta(window arg) < upsilon/|X|^2
    bool tau_positive = false;

    bool all_ok() const {
        return hidden_degree_ok && alpha_ok && d_bounds_ok && window_nonempty && r_in_window &&
               upsilon_positive && zeta_ok && tau_positive;
    }
};

/// Two-node joint table for edge potential theta and fields (phi1, phi2);
/// used to derive the distance bounds from the potential bounds.
inline std::vector<double> two_node_joint(double theta, double phi1, double phi2) {
    std::vector<double> j(4);
    double z = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            double xa = a ? 1.0 : -1.0, xb = b ? 1.0 : -1.0;
            j[a * 2 + b] = std::exp(theta * xa * xb + phi1 * xa + phi2 * xb);
            z += j[a * 2 + b];
        }
    for (auto& x : j) x /= z;
    return j;
}

/// Evaluates the recovery conditions for a model: potential bounds, the
/// correlation-decay margin alpha, distance bounds under the chosen metric,
/// the admissible radius window and the derived quartet/merge parameters.
/// Failures are reported as flags, never thrown.
inline AssumptionReport assumption_report(const IsingModel& M, const AssumptionParams& q) {
    M.validate();
    AssumptionReport rep;
    rep.metric = q.metric;
    rep.kappa = q.kappa;
    rep.epsilon_slack = q.epsilon_slack;
    rep.zeta_window = q.zeta_window.value_or(0.0);
    rep.zeta_half_girth = q.zeta_half_girth.value_or(0.0);
    rep.zeta_provenance = !q.zeta_provenance.empty() ? q.zeta_provenance
                          : (q.zeta_window || q.zeta_half_girth) ? "supplied"
                                                                 : "assumed-zero";

    rep.hidden_degree_ok = true;
    for (int h : M.graph.hidden_nodes())
        if (M.graph.degree(h) < 3) rep.hidden_degree_ok = false;

    double tmin = 1e300, tmax = 0.0;
    for (const auto& [e, th] : M.theta) {
        tmin = std::min(tmin, std::abs(th));
        tmax = std::max(tmax, std::abs(th));
    }
    if (M.theta.empty()) tmin = 0.0;
    rep.theta_min = tmin;
    rep.theta_max = tmax;

    int deg_max = 0;
    for (int v : M.graph.nodes()) deg_max = std::max(deg_max, M.graph.degree(v));
    rep.alpha = deg_max * std::tanh(tmax);
    rep.alpha_ok = rep.alpha < 1.0;
    rep.theta_critical = deg_max > 1 ? std::atanh(1.0 / deg_max) : 0.0;

    rep.phi_prime_max = attractive_counterpart(M, q.width_cap).phi_prime_max;

    // Distance bounds from the potential bounds: the tightest edge is the
    // strongest potential with maximal fields, the loosest the weakest
    // potential with no field.
    rep.d_min = info_distance(two_node_joint(tmax, rep.phi_prime_max, rep.phi_prime_max), 2, q.metric);
    rep.d_max = info_distance(two_node_joint(tmin, 0.0, 0.0), 2, q.metric);
    rep.d_bounds_ok = rep.d_min > 0.0 && rep.d_max < kDCap;
    rep.eta = rep.d_min > 0.0 ? rep.d_max / rep.d_min
                              : std::numeric_limits<double>::infinity();

    rep.r_lo = q.delta * (rep.eta + 1.0) * rep.d_max;
    rep.r_hi = q.girth / 8.0 * rep.d_min;
    rep.window_nonempty = rep.r_lo < rep.r_hi;
    rep.r_used = q.r ? *q.r : 0.5 * (rep.r_lo + rep.r_hi);
    rep.r_in_window = rep.r_used > rep.r_lo && rep.r_used <= rep.r_hi;

    if (rep.d_bounds_ok) {
        double r = rep.r_used;
        rep.upsilon = std::min({rep.d_min, 0.5 * std::exp(-r) * (std::exp(rep.d_min) - 1.0),
                                std::exp(-0.5 * rep.d_max * (r / rep.d_min + 2.0)),
                                q.girth / 4.0 * rep.d_min - r,
                                r - rep.d_max * q.delta * (rep.eta + 1.0)});
        rep.lambda_theoretical = std::exp(-0.5 * rep.d_max * (r / rep.d_min + 2.0));
        rep.tau_theoretical = 0.5 * rep.d_min - 4.0 * rep.zeta_half_girth;
    }
    rep.upsilon_positive = rep.upsilon > 0.0;
    rep.zeta_ok = rep.upsilon_positive && rep.zeta_window < rep.upsilon / 4.0;
    rep.tau_positive = rep.tau_theoretical > 0.0;
    return rep;
}

}  // namespace lgm
