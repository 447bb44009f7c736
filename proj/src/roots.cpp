#include "ofdmload/roots.hpp"

#include <cmath>

namespace ofdmload {

namespace {
constexpr double kLn2 = 0.6931471805599453;

// Residual of the decoupled bit equation at fixed multipliers. The power row
// gives E = (2^b - 1)/(s b) with s = 0.32 lambda1 C / power_weight; E must be
// below 1 for a nonnegative power, which bounds b by the root of 2^b - 1 = s b.
double bit_equation(double b, double s, double kap2) {
    double A = std::exp2(b);
    double D = A - 1.0;
    double E = D / (s * std::max(b, 1e-300));
    if (E >= 1.0) return std::numeric_limits<double>::infinity();
    double z = -std::log(std::max(E, 1e-300));
    return E * (1.0 + kLn2 * z * b * A / D) - kap2;
}
}  // namespace

void stationary_roots(const Eigen::VectorXd& cnr, double lambda1, double power_weight,
                      double rate_weight, double ber_threshold,
                      Eigen::VectorXd& bits_out, Eigen::VectorXd& powers_out) {
    long n = cnr.size();
    bits_out = Eigen::VectorXd::Zero(n);
    powers_out = Eigen::VectorXd::Zero(n);
    double kap2 = (ber_threshold + rate_weight / lambda1) / 0.2;
    if (kap2 >= 1.0) return;  // bit row cannot balance: every subcarrier idle
    for (long i = 0; i < n; ++i) {
        double s = 0.32 * lambda1 * cnr[i] / power_weight;
        if (!(s > kLn2 * (1.0 + 1e-9))) continue;
        // window edge: unique positive root of 2^b - 1 = s b
        double eh = std::max(2.0 * std::log2(std::max(s, 2.0)), 2.0);
        for (int g = 0; g < 8 && std::exp2(eh) - 1.0 <= s * eh; ++g) eh *= 2.0;
        double el = 1e-12;
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (el + eh);
            if (std::exp2(mid) - 1.0 < s * mid)
                el = mid;
            else
                eh = mid;
        }
        double lo = 1e-9, hi = el * (1.0 - 1e-9);
        if (!(bit_equation(lo, s, kap2) < 0.0) || !(bit_equation(hi, s, kap2) > 0.0)) continue;
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            if (bit_equation(mid, s, kap2) < 0.0)
                lo = mid;
            else
                hi = mid;
        }
        double b = 0.5 * (lo + hi);
        double D = std::exp2(b) - 1.0;
        double E = std::min(D / (s * b), 1.0 - 1e-12);
        bits_out[i] = b;
        powers_out[i] = -std::log(E) * D / (1.6 * cnr[i]);
    }
}

namespace {
// Bit-weighted BER surplus of the stationary roots; NaN when nothing is alive.
double ber_surplus(const Eigen::VectorXd& cnr, double lambda1, double power_weight,
                   double rate_weight, double ber_threshold) {
    Eigen::VectorXd b, P;
    stationary_roots(cnr, lambda1, power_weight, rate_weight, ber_threshold, b, P);
    double acc = 0.0;
    bool any = false;
    for (long i = 0; i < cnr.size(); ++i) {
        if (b[i] <= 0.0) continue;
        any = true;
        double E = std::exp(-1.6 * cnr[i] * P[i] / (std::exp2(b[i]) - 1.0));
        acc += (0.2 * E - ber_threshold) * b[i];
    }
    return any ? acc : std::numeric_limits<double>::quiet_NaN();
}
}  // namespace

std::optional<double> ber_equality_multiplier(const Eigen::VectorXd& cnr, double power_weight,
                                              double rate_weight, double ber_threshold,
                                              double lambda_guess) {
    auto T = [&](double lam) {
        return ber_surplus(cnr, lam, power_weight, rate_weight, ber_threshold);
    };
    // aliveness is monotone nondecreasing in lambda1, so search upward for a
    // defined value first
    double lam = lambda_guess;
    double t = T(lam);
    for (int it = 0; it < 80 && std::isnan(t); ++it) {
        lam *= 2.0;
        t = T(lam);
    }
    if (std::isnan(t)) return std::nullopt;
    double lo;
    if (t > 0.0) {
        lo = lam;
    } else {
        lo = -1.0;
        double x = lam;
        for (int it = 0; it < 60; ++it) {
            x /= 2.0;
            double tx = T(x);
            if (std::isnan(tx)) break;
            if (tx > 0.0) {
                lo = x;
                break;
            }
        }
        if (lo < 0.0) return std::nullopt;
    }
    double hi = lo;
    bool bracketed = false;
    for (int it = 0; it < 60; ++it) {
        hi *= 2.0;
        double th = T(hi);
        if (!std::isnan(th) && th < 0.0) {
            bracketed = true;
            break;
        }
    }
    if (!bracketed) return std::nullopt;
    for (int it = 0; it < 50; ++it) {
        double mid = std::sqrt(lo * hi);
        if (T(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

std::optional<BudgetMultipliers> budget_multipliers(const Eigen::VectorXd& cnr, double alpha,
                                                    double ber_threshold, double power_budget,
                                                    double lambda_guess) {
    double rw = 1.0 - alpha;
    // total predicted power falls monotonically as lambda2 raises the
    // effective power weight
    auto total = [&](double lam2, double& lambda1_out) {
        double aw = alpha + lam2;
        auto l1 = ber_equality_multiplier(cnr, aw, rw, ber_threshold,
                                          lambda_guess * aw / alpha);
        if (!l1) {
            lambda1_out = -1.0;
            return -power_budget;
        }
        lambda1_out = *l1;
        Eigen::VectorXd b, P;
        stationary_roots(cnr, *l1, aw, rw, ber_threshold, b, P);
        return P.sum() - power_budget;
    };

    double l1 = -1.0;
    double slo = total(0.0, l1);
    if (slo <= 0.0) {
        auto free = ber_equality_multiplier(cnr, alpha, rw, ber_threshold, lambda_guess);
        if (!free) return std::nullopt;
        return BudgetMultipliers{*free, 0.0};
    }
    double lo = 0.0;
    double hi = 0.25 * alpha;
    double dummy;
    for (int it = 0; it < 40; ++it) {
        if (total(hi, dummy) < 0.0) break;
        hi *= 2.0;
    }
    for (int it = 0; it < 50; ++it) {
        double mid = 0.5 * (lo + hi);
        if (total(mid, dummy) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    double lam2 = 0.5 * (lo + hi);
    total(lam2, l1);
    if (l1 < 0.0) return std::nullopt;
    return BudgetMultipliers{l1, lam2};
}

}  // namespace ofdmload
