#include "ofdmload/selftest.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "ofdmload/kkt.hpp"
#include "ofdmload/linkmodel.hpp"
#include "ofdmload/loader.hpp"

namespace ofdmload::selftest {

namespace {
double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    double u = ((rng() >> 11) + 1) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

double log_uniform(std::mt19937_64& rng, double lo_exp, double hi_exp) {
    return std::pow(10.0, uniform(rng, lo_exp, hi_exp));
}
}  // namespace

AuditResult ber_round_trip(int n_samples, std::uint64_t seed) {
    AuditResult out;
    out.name = "ber-round-trip";
    out.bound = 1e-10;
    double t0 = now_seconds();
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        double b = uniform(rng, 1.0, 10.0);
        double c = log_uniform(rng, -2.0, 4.0);
        double t = log_uniform(rng, -6.0, -3.0);
        double p = power_for_target_ber(b, c, t);
        double err = std::abs(ber_subcarrier(p, b, c) - t) / t;
        worst = std::max(worst, err);
    }
    out.measured = worst;
    out.checked = n_samples;
    out.pass = worst < out.bound;
    out.seconds = now_seconds() - t0;
    return out;
}

AuditResult jacobian_audit(int n_states, std::uint64_t seed) {
    AuditResult out;
    out.name = "jacobian-vs-finite-diff";
    out.bound = 1e-5;
    double t0 = now_seconds();
    std::mt19937_64 rng(seed);
    const long n = 8;
    double worst = 0.0;
    for (int s = 0; s < n_states; ++s) {
        Eigen::VectorXd cnr(n), x(2 * n + 2);
        for (long i = 0; i < n; ++i) cnr[i] = log_uniform(rng, -1.0, 3.0);
        for (long i = 0; i < n; ++i) x[i] = log_uniform(rng, -1.0, 2.0);  // powers
        for (long i = 0; i < n; ++i) x[n + i] = uniform(rng, 0.5, 10.0);  // bits
        x[2 * n] = log_uniform(rng, 0.0, 2.0);
        x[2 * n + 1] = uniform(rng, -0.2, 0.5);
        LinkParams params;
        params.power_threshold = uniform(rng, 1.0, 500.0);
        ConstraintCase cse =
            (s % 2 == 0) ? ConstraintCase::PowerInactive : ConstraintCase::PowerActive;
        Eigen::MatrixXd JA = jacobian(x, cnr, params, cse);
        Eigen::MatrixXd JF = finite_diff_jacobian(x, cnr, params, cse);
        double scale = std::max(1.0, JA.cwiseAbs().maxCoeff());
        worst = std::max(worst, (JA - JF).cwiseAbs().maxCoeff() / scale);
    }
    out.measured = worst;
    out.checked = n_states;
    out.pass = worst < out.bound;
    out.seconds = now_seconds() - t0;
    return out;
}

namespace {
// Best feasible grid objective for an N=2 channel, optimizer units. The grid
// power axis is log-spaced; for each (b1, b2, P1) the cheapest feasible P2 is
// found by bisection over the sorted axis, which preserves the exact minimum
// because the objective is increasing in P2.
double grid_best(double c0, double c1, double alpha, double ber_th, double pth) {
    constexpr int kNb = 20;    // 0.5 .. 10 step 0.5
    constexpr int kNp = 400;
    double hi = std::log10(std::min(pth, 1e4));
    std::vector<double> pg(kNp);
    for (int i = 0; i < kNp; ++i)
        pg[i] = std::pow(10.0, -3.0 + (hi + 3.0) * i / (kNp - 1.0));

    std::vector<double> e0(kNb * kNp), e1(kNb * kNp);
    for (int bi = 0; bi < kNb; ++bi) {
        double b = 0.5 * (bi + 1);
        double d = std::exp2(b) - 1.0;
        for (int i = 0; i < kNp; ++i) {
            e0[bi * kNp + i] = 0.2 * std::exp(-1.6 * c0 * pg[i] / d);
            e1[bi * kNp + i] = 0.2 * std::exp(-1.6 * c1 * pg[i] / d);
        }
    }

    double best = std::numeric_limits<double>::infinity();
    for (int bi = 0; bi < kNb; ++bi) {
        double b1 = 0.5 * (bi + 1);
        for (int bj = 0; bj < kNb; ++bj) {
            double b2 = 0.5 * (bj + 1);
            double bsum = b1 + b2;
            const double* r1 = &e0[bi * kNp];
            const double* r2 = &e1[bj * kNp];
            for (int i = 0; i < kNp; ++i) {
                if (std::isfinite(pth) && pg[i] >= pth) break;
                double rhs = (ber_th * bsum - b1 * r1[i]) / b2;
                if (rhs <= 0.0) continue;  // no P2 can rescue this P1
                // smallest j with r2[j] <= rhs (r2 is strictly decreasing)
                int lo = 0, hi_j = kNp;
                while (lo < hi_j) {
                    int mid = (lo + hi_j) / 2;
                    if (r2[mid] <= rhs)
                        hi_j = mid;
                    else
                        lo = mid + 1;
                }
                if (lo == kNp) continue;
                double psum = pg[i] + pg[lo];
                if (std::isfinite(pth) && psum > pth) continue;
                double f = alpha * psum - (1.0 - alpha) * bsum;
                best = std::min(best, f);
            }
        }
    }
    return best;
}
}  // namespace

AuditResult grid_oracle(int n_instances, std::uint64_t seed) {
    AuditResult out;
    out.name = "n2-grid-oracle";
    out.bound = 0.90;
    double t0 = now_seconds();
    std::mt19937_64 rng(seed);
    double alpha = 0.5, ber_th = 1e-4;
    int agreed = 0, nonconverged = 0;
    double worst_excess = 0.0;
    std::ostringstream fails;
    for (int k = 0; k < n_instances; ++k) {
        double cu0 = log_uniform(rng, -1.0, 3.0);
        double cu1 = log_uniform(rng, -1.0, 3.0);
        double pth_u = (k % 2 == 0) ? std::numeric_limits<double>::infinity()
                                    : log_uniform(rng, 0.5, 2.5);

        ChannelRealization ch;
        ch.cnr = {cu0 / kPowerUnit, cu1 / kPowerUnit};
        ch.gains = {{1.0, 0.0}, {1.0, 0.0}};
        ch.taps = {{1.0, 0.0}};
        LinkParams params;
        params.alpha = alpha;
        params.ber_threshold = ber_th;
        params.power_threshold = pth_u * kPowerUnit;
        LoadingResult r = optimize(ch, params, LmConfig{});
        if (!r.converged) {
            ++nonconverged;
            if (fails.tellp() < 400) fails << " noconv@" << k;
            continue;
        }
        double fop = alpha * r.continuous.powers.sum() - (1.0 - alpha) * r.continuous.bits.sum();
        double fg = grid_best(cu0, cu1, alpha, ber_th, pth_u);
        if (fop <= fg + 1e-6) {
            ++agreed;
        } else {
            worst_excess = std::max(worst_excess, fop - fg);
            if (fails.tellp() < 400) fails << " worse@" << k;
        }
    }
    out.measured = static_cast<double>(agreed) / n_instances;
    out.checked = n_instances;
    out.pass = out.measured >= out.bound;
    out.seconds = now_seconds() - t0;
    if (fails.tellp() > 0)
        out.detail = "exceptions:" + fails.str() +
                     (worst_excess > 0.0 ? " worst_excess=" + std::to_string(worst_excess) : "");
    return out;
}

std::vector<AuditResult> run_all(bool quick) {
    std::vector<AuditResult> out;
    out.push_back(ber_round_trip(quick ? 1000 : 10000));
    out.push_back(jacobian_audit(quick ? 20 : 100));
    out.push_back(grid_oracle(quick ? 20 : 200));
    return out;
}

}  // namespace ofdmload::selftest
