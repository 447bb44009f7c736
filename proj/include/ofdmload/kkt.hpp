#pragma once

#include <Eigen/Dense>

#include "ofdmload/linkmodel.hpp"

namespace ofdmload {

// The two solvable stationarity cases: the total-power constraint is either
// slack (its multiplier is zero and a slack variable absorbs the budget) or
// tight (the slack is zero and the multiplier is an unknown).
enum class ConstraintCase { PowerInactive, PowerActive };

// Unknowns of the stationarity system, stacked as [powers, bits, lambda1, aux]
// (length 2N+2). `aux` is the power slack when PowerInactive and the power
// multiplier lambda2 when PowerActive. Power units are whatever the caller's
// power_threshold/cnr pair is expressed in; the loader feeds microwatts.
struct KktState {
    Eigen::VectorXd powers;
    Eigen::VectorXd bits;
    double lambda1 = 0.0;
    double aux = 0.0;

    Eigen::VectorXd pack() const;
    static KktState unpack(const Eigen::VectorXd& x);
};

inline constexpr double kBitFloor = 0.05;  // iteration-time lower clamp on bits
inline constexpr double kBitCap = 15.0;
inline constexpr double kExpClip = 60.0;   // |exponent| clip inside the BER terms

// Residual vector S(x), zero exactly at a stationary point of the chosen case.
// Rows 0..N-1: d/dP_i, rows N..2N-1: d/db_i, row 2N: average-BER equality,
// row 2N+1: power budget (with slack^2 when PowerInactive) or, when
// power_threshold is infinite, the bare slack variable.
// Throws std::invalid_argument on non-finite input or bits below the floor.
Eigen::VectorXd residuals(const Eigen::VectorXd& x, const Eigen::VectorXd& cnr,
                          const LinkParams& params, ConstraintCase cse);

Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& cnr,
                         const LinkParams& params, ConstraintCase cse);

// Central-difference oracle for tests and debugging.
Eigen::MatrixXd finite_diff_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& cnr,
                                     const LinkParams& params, ConstraintCase cse,
                                     double step = 1e-6);

}  // namespace ofdmload
