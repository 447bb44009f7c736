#pragma once

#include <vector>

#include "ofdmload/channel.hpp"
#include "ofdmload/kkt.hpp"
#include "ofdmload/linkmodel.hpp"
#include "ofdmload/lmsolver.hpp"

namespace ofdmload {

// The stationarity system is solved in microwatts: with powers in watts the
// unknowns span ~1e-6 against multipliers ~1e2 and the normal equations lose
// the small singular values. Public results are converted back to watts.
inline constexpr double kPowerUnit = 1e-6;  // watts per optimizer power unit

struct LoadingResult {
    KktState continuous;      // x_op over the active set, optimizer units
    std::vector<int> active;  // subcarrier indices of the continuous state
    Allocation final_alloc;   // full length-N finalized allocation, watts
    double throughput = 0.0;  // sum of finalized bits
    double total_power = 0.0; // sum of finalized powers, watts
    double achieved_avg_ber = 0.0;  // continuous solution, 0 when nothing loaded
    ConstraintCase case_used = ConstraintCase::PowerInactive;
    LmResult solver;
    bool converged = false;

    // dispatch diagnostics
    int prenulled = 0;
    int resolves = 0;
    int restarts = 0;
};

// Start point: 4 bits everywhere, powers hitting the BER threshold at
// (floored) cnr, lambda1 zeroing the power row of the median-CNR subcarrier,
// aux = 0. The BER-equality row vanishes at this point by construction.
// Throws std::invalid_argument on an all-zero cnr vector.
KktState initial_point(const Eigen::VectorXd& cnr, const LinkParams& params,
                       ConstraintCase cse);

// Full dispatch: solve with the power constraint ignored, adopt with the slack
// completed when the budget holds, otherwise solve the budget-tight case.
// Never throws on non-convergence; the result carries converged = false.
LoadingResult optimize(const ChannelRealization& channel, const LinkParams& params,
                       const LmConfig& lm);

struct KktReport {
    double residual_inf = 0.0;
    double power_slack_watts = 0.0;  // power_threshold - sum(continuous powers)
    double lambda1 = 0.0;
    double aux = 0.0;
    bool lambda2_nonnegative = true;
    double final_avg_ber = 0.0;      // recomputed on the finalized allocation
    bool final_ber_within_threshold = true;
    bool empty = false;
};

// Post-hoc audit: recompute the residual at x_op and the finalized average BER.
KktReport verify_kkt(const LoadingResult& result, const ChannelRealization& channel,
                     const LinkParams& params);

}  // namespace ofdmload
