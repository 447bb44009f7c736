#include "ofdmload/lmsolver.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ofdmload {

const char* to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "Converged";
        case Termination::MaxIterations: return "MaxIterations";
        case Termination::InitialBelowTolerance: return "InitialBelowTolerance";
        case Termination::Stalled: return "Stalled";
    }
    return "Unknown";
}

Eigen::VectorXd solve_linear_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs) {
    if (!A.allFinite() || !rhs.allFinite())
        throw std::invalid_argument("solve_linear_spd: non-finite entries");
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
        std::ostringstream msg;
        msg << "solve_linear_spd: factorization failed (not positive definite); "
            << "eigenvalue range [" << es.eigenvalues().minCoeff() << ", "
            << es.eigenvalues().maxCoeff() << "]";
        throw std::runtime_error(msg.str());
    }
    return llt.solve(rhs);
}

Eigen::VectorXd lm_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& S, double mu) {
    if (!J.allFinite() || !S.allFinite())
        throw std::invalid_argument("lm_step: non-finite entries");
    if (!(mu > 0.0)) throw std::invalid_argument("lm_step: mu must be positive");
    long m = J.cols();
    Eigen::MatrixXd M = J.transpose() * J;
    M.diagonal().array() += mu;
    return solve_linear_spd(M, -(J.transpose() * S));
}

namespace {

// Undamped Newton iterations with step halving; shared by the stall recovery
// and the post-convergence sharpening. Returns the reached infinity norm.
double newton_polish(const ResidualFn& res, const JacobianFn& jac, const ClampFn& clamp,
                     Eigen::VectorXd& x, Eigen::VectorXd& S, double rn, double stop_at,
                     int rounds, double* step_out) {
    for (int r = 0; r < rounds && rn > stop_at; ++r) {
        Eigen::VectorXd d = jac(x).partialPivLu().solve(-S);
        if (!d.allFinite()) break;
        double t = 1.0;
        bool took = false;
        Eigen::VectorXd cand, Sc;
        for (int h = 0; h < 30; ++h) {
            cand = x + t * d;
            if (clamp) clamp(cand);
            Sc = res(cand);
            if (Sc.allFinite() && Sc.lpNorm<Eigen::Infinity>() < rn) {
                took = true;
                break;
            }
            t *= 0.5;
        }
        if (!took) break;
        x = cand;
        S = Sc;
        rn = S.lpNorm<Eigen::Infinity>();
        if (step_out) *step_out = t * d.lpNorm<Eigen::Infinity>();
    }
    return rn;
}

}  // namespace

LmResult solve(const ResidualFn& res, const JacobianFn& jac, Eigen::VectorXd x0,
               const LmConfig& cfg, const ClampFn& clamp) {
    LmResult out;
    Eigen::VectorXd x = std::move(x0);
    if (clamp) out.clamp_events += clamp(x);
    Eigen::VectorXd S = res(x);
    if (!S.allFinite()) {
        out.x_final = x;
        out.hit_non_finite = true;
        out.termination = Termination::Stalled;
        return out;
    }
    double rn = S.lpNorm<Eigen::Infinity>();
    double dn = std::numeric_limits<double>::infinity();

    // cache of factorization inputs for the current iterate; rejected steps
    // change only mu, so J^T J and J^T S can be reused
    Eigen::MatrixXd JtJ;
    Eigen::VectorXd JtS;
    bool have_jac = false;
    auto refresh_jac = [&]() {
        Eigen::MatrixXd J = jac(x);
        JtJ.setZero(J.cols(), J.cols());
        JtJ.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
        JtS = J.transpose() * S;
        have_jac = true;
    };
    auto damped_step = [&](double mu, Eigen::VectorXd& d) -> bool {
        if (!have_jac) refresh_jac();
        if (!JtJ.allFinite() || !JtS.allFinite()) return false;
        Eigen::MatrixXd M = JtJ;
        M.diagonal().array() += mu;
        Eigen::LLT<Eigen::MatrixXd> llt(M);
        if (llt.info() != Eigen::Success) return false;
        d = llt.solve(-JtS);
        return d.allFinite();
    };

    double mu = cfg.mu0;
    if (rn < cfg.tol_residual) {
        out.x_final = x;
        out.residual_norm = rn;
        out.termination = Termination::InitialBelowTolerance;
        return out;
    }
    if (mu <= cfg.mu_th) {
        // at small initial damping the first step is meaningful; a first
        // step already below tolerance stops the run without converging
        Eigen::VectorXd d0;
        if (damped_step(mu, d0)) dn = d0.lpNorm<Eigen::Infinity>();
        if (dn < cfg.tol_step) {
            out.x_final = x;
            out.residual_norm = rn;
            out.step_norm = dn;
            out.termination = Termination::InitialBelowTolerance;
            return out;
        }
    }

    double s2 = S.norm();
    double s2_best = s2;
    int k_best = 0;
    int k = 0;
    Termination term = Termination::MaxIterations;
    while (k < cfg.k_max) {
        ++k;
        Eigen::VectorXd d;
        if (!damped_step(mu, d)) {
            mu *= cfg.nu2;
            if (mu > cfg.mu_max) {
                term = Termination::Stalled;
                break;
            }
            continue;
        }
        dn = d.lpNorm<Eigen::Infinity>();
        Eigen::VectorXd cand = x + d;
        int moved = clamp ? clamp(cand) : 0;
        Eigen::VectorXd Sc = res(cand);
        bool ok = Sc.allFinite();
        if (!ok) out.hit_non_finite = true;
        bool accept;
        double mu_used = mu;
        if (mu > cfg.mu_th) {
            accept = ok;
        } else if (cfg.strict_schedule) {
            accept = false;  // literal schedule: no acceptance at small damping
        } else {
            accept = ok && Sc.norm() < s2;
        }
        if (accept) {
            x = std::move(cand);
            S = std::move(Sc);
            rn = S.lpNorm<Eigen::Infinity>();
            s2 = S.norm();
            mu *= cfg.nu1;
            out.clamp_events += moved;
            have_jac = false;
        } else {
            mu *= cfg.nu2;
        }
        if (cfg.keep_trace) out.trace.push_back({k, mu_used, rn, dn, accept});
        if (rn <= cfg.tol_residual) {
            term = Termination::Converged;
            break;
        }
        if (s2 < s2_best * (1.0 - 1e-6)) {
            s2_best = s2;
            k_best = k;
        } else if (k - k_best > cfg.plateau_window && mu > cfg.mu_th) {
            term = Termination::Stalled;
            break;
        }
        if (dn <= cfg.tol_step && mu <= cfg.mu_th) {
            term = Termination::Stalled;
            break;
        }
        if (mu > cfg.mu_max) {
            term = Termination::Stalled;
            break;
        }
    }

    if (term == Termination::Stalled && rn < 1e-2) {
        // near an ill-conditioned root the damped iteration crawls while
        // halved Newton steps still make progress
        rn = newton_polish(res, jac, clamp, x, S, rn, cfg.tol_residual, 12, &dn);
        if (rn <= cfg.tol_residual) term = Termination::Converged;
    }
    if (term == Termination::Converged && cfg.polish_to > 0.0 && rn > cfg.polish_to) {
        // sharpen so downstream audits of the equality rows see near machine
        // precision rather than the solve tolerance
        rn = newton_polish(res, jac, clamp, x, S, rn, cfg.polish_to, 4, &dn);
    }

    out.x_final = std::move(x);
    out.converged = (term == Termination::Converged);
    out.iterations = k;
    out.residual_norm = rn;
    out.step_norm = dn;
    out.termination = term;
    return out;
}

}  // namespace ofdmload
