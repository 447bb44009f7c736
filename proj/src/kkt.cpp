#include "ofdmload/kkt.hpp"

#include <cmath>
#include <stdexcept>

namespace ofdmload {

namespace {
constexpr double kLn2 = 0.6931471805599453;

struct Terms {
    Eigen::ArrayXd A, D, E, G;
    Eigen::Array<bool, Eigen::Dynamic, 1> clipped;
};

Terms ber_terms(const Eigen::ArrayXd& P, const Eigen::ArrayXd& b, const Eigen::ArrayXd& C) {
    Terms t;
    t.A = b.unaryExpr([](double v) { return std::exp2(v); });
    t.D = t.A - 1.0;
    Eigen::ArrayXd expo = -1.6 * C * P / t.D;
    t.clipped = expo.abs() >= kExpClip;
    t.E = expo.min(kExpClip).max(-kExpClip).exp();
    t.G = 1.6 * kLn2 * C * P * b * t.A / t.D.square();
    return t;
}

void check_input(const Eigen::VectorXd& x, const Eigen::VectorXd& cnr) {
    long n = cnr.size();
    if (x.size() != 2 * n + 2) throw std::invalid_argument("kkt: state length != 2N+2");
    if (!x.allFinite() || !cnr.allFinite())
        throw std::invalid_argument("kkt: non-finite input");
    for (long i = n; i < 2 * n; ++i)
        if (x[i] < kBitFloor * (1.0 - 1e-9))
            throw std::invalid_argument("kkt: bits below iteration floor");
}
}  // namespace

Eigen::VectorXd KktState::pack() const {
    long n = powers.size();
    Eigen::VectorXd x(2 * n + 2);
    x.head(n) = powers;
    x.segment(n, n) = bits;
    x[2 * n] = lambda1;
    x[2 * n + 1] = aux;
    return x;
}

KktState KktState::unpack(const Eigen::VectorXd& x) {
    long n = (x.size() - 2) / 2;
    KktState s;
    s.powers = x.head(n);
    s.bits = x.segment(n, n);
    s.lambda1 = x[2 * n];
    s.aux = x[2 * n + 1];
    return s;
}

Eigen::VectorXd residuals(const Eigen::VectorXd& x, const Eigen::VectorXd& cnr,
                          const LinkParams& params, ConstraintCase cse) {
    check_input(x, cnr);
    long n = cnr.size();
    Eigen::ArrayXd P = x.head(n).array();
    Eigen::ArrayXd b = x.segment(n, n).array();
    Eigen::ArrayXd C = cnr.array();
    double lam1 = x[2 * n];
    double aux = x[2 * n + 1];
    double lam2 = (cse == ConstraintCase::PowerActive) ? aux : 0.0;
    Terms t = ber_terms(P, b, C);

    Eigen::VectorXd S(2 * n + 2);
    S.head(n) = params.alpha - 0.32 * lam1 * b * C * t.E / t.D + lam2;
    S.segment(n, n) =
        -(1.0 - params.alpha) + lam1 * (0.2 * t.E * (1.0 + t.G) - params.ber_threshold);
    S[2 * n] = 0.2 * (b * t.E).sum() - params.ber_threshold * b.sum();
    if (params.rescale_ber_row) S[2 * n] /= params.ber_threshold;
    double pth = params.power_threshold;
    if (cse == ConstraintCase::PowerActive) {
        S[2 * n + 1] = P.sum() - pth;
    } else if (std::isinf(pth)) {
        S[2 * n + 1] = aux;  // no budget: the slack's own equation pins it at 0
    } else {
        S[2 * n + 1] = P.sum() - pth + aux * aux;
    }
    return S;
}

Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& cnr,
                         const LinkParams& params, ConstraintCase cse) {
    check_input(x, cnr);
    long n = cnr.size();
    Eigen::ArrayXd P = x.head(n).array();
    Eigen::ArrayXd b = x.segment(n, n).array();
    Eigen::ArrayXd C = cnr.array();
    double lam1 = x[2 * n];
    double aux = x[2 * n + 1];
    Terms t = ber_terms(P, b, C);

    // where the exponent was clipped the BER term is constant, so its
    // derivatives vanish; leaving them live would point the solver uphill
    Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(n);
    Eigen::ArrayXd dE_dP = t.clipped.select(zero, t.E * (-1.6 * C / t.D));
    Eigen::ArrayXd dE_db = t.clipped.select(zero, t.E * (1.6 * C * P * t.A * kLn2 / t.D.square()));
    Eigen::ArrayXd dG_dP = 1.6 * kLn2 * C * b * t.A / t.D.square();
    Eigen::ArrayXd dG_db = 1.6 * kLn2 * C * P *
                           (t.A * (1.0 + b * kLn2) / t.D.square() -
                            2.0 * b * t.A.square() * kLn2 / t.D.cube());

    long m = 2 * n + 2;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
    for (long i = 0; i < n; ++i) {
        // power rows
        J(i, i) = -0.32 * lam1 * b[i] * C[i] * dE_dP[i] / t.D[i];
        J(i, n + i) = -0.32 * lam1 * C[i] *
                      (t.E[i] / t.D[i] + b[i] * dE_db[i] / t.D[i] -
                       b[i] * t.E[i] * t.A[i] * kLn2 / (t.D[i] * t.D[i]));
        J(i, 2 * n) = -0.32 * b[i] * C[i] * t.E[i] / t.D[i];
        if (cse == ConstraintCase::PowerActive) J(i, 2 * n + 1) = 1.0;
        // bit rows
        J(n + i, i) = lam1 * 0.2 * (dE_dP[i] * (1.0 + t.G[i]) + t.E[i] * dG_dP[i]);
        J(n + i, n + i) = lam1 * 0.2 * (dE_db[i] * (1.0 + t.G[i]) + t.E[i] * dG_db[i]);
        J(n + i, 2 * n) = 0.2 * t.E[i] * (1.0 + t.G[i]) - params.ber_threshold;
        // BER equality row
        J(2 * n, i) = 0.2 * b[i] * dE_dP[i];
        J(2 * n, n + i) = 0.2 * (t.E[i] + b[i] * dE_db[i]) - params.ber_threshold;
    }
    if (params.rescale_ber_row) J.row(2 * n) /= params.ber_threshold;
    double pth = params.power_threshold;
    if (cse == ConstraintCase::PowerActive) {
        J.row(2 * n + 1).head(n).setOnes();
    } else if (std::isinf(pth)) {
        J(2 * n + 1, 2 * n + 1) = 1.0;
    } else {
        J.row(2 * n + 1).head(n).setOnes();
        J(2 * n + 1, 2 * n + 1) = 2.0 * aux;
    }
    return J;
}

Eigen::MatrixXd finite_diff_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& cnr,
                                     const LinkParams& params, ConstraintCase cse,
                                     double step) {
    long m = x.size();
    Eigen::MatrixXd J(m, m);
    Eigen::VectorXd xp = x, xm = x;
    for (long j = 0; j < m; ++j) {
        double h = step * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        J.col(j) = (residuals(xp, cnr, params, cse) - residuals(xm, cnr, params, cse)) /
                   (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return J;
}

}  // namespace ofdmload
