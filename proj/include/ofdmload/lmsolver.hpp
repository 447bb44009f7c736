#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <vector>

namespace ofdmload {

struct LmConfig {
    double mu0 = 1e5;
    double nu1 = 0.5;
    double nu2 = 2.0;
    double mu_th = 1.0;
    double tol_residual = 1e-6;  // epsilon on ||S||_inf
    double tol_step = 1e-6;      // epsilon on ||d||_inf
    int k_max = 10000;

    // Accept candidates below mu_th only on strict residual decrease; with the
    // flag set the literal schedule (never accept below mu_th) is used instead.
    bool strict_schedule = false;

    // After convergence, sharpen the root with a few undamped Newton steps down
    // to this residual so equality rows audit near machine precision. <= 0 off.
    double polish_to = 1e-11;

    double mu_max = 1e16;     // damping blow-up guard
    int plateau_window = 80;  // iterations without 2-norm progress before giving up
    bool keep_trace = false;
};

enum class Termination { Converged, MaxIterations, InitialBelowTolerance, Stalled };

const char* to_string(Termination t);

struct TraceRow {
    int k;
    double mu;
    double res_norm;
    double step_norm;
    bool accepted;
};

struct LmResult {
    Eigen::VectorXd x_final;
    bool converged = false;
    int iterations = 0;
    double residual_norm = std::numeric_limits<double>::infinity();
    double step_norm = std::numeric_limits<double>::infinity();
    Termination termination = Termination::MaxIterations;
    int clamp_events = 0;
    bool hit_non_finite = false;
    std::vector<TraceRow> trace;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
// In-place projection of an iterate back into its feasible box; returns the
// number of components moved.
using ClampFn = std::function<int(Eigen::VectorXd&)>;

// Dense Cholesky solve; A must be symmetric positive definite. Throws
// std::runtime_error with a condition diagnostic on factorization failure.
Eigen::VectorXd solve_linear_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs);

// d = -(J^T J + mu I)^{-1} J^T S
Eigen::VectorXd lm_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& S, double mu);

LmResult solve(const ResidualFn& res, const JacobianFn& jac, Eigen::VectorXd x0,
               const LmConfig& cfg, const ClampFn& clamp = nullptr);

}  // namespace ofdmload
