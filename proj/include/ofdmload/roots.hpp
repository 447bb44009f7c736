#pragma once

#include <Eigen/Dense>

#include <optional>

namespace ofdmload {

// Decoupled view of the stationarity system: at fixed multipliers the two rows
// of each subcarrier close over (P_i, b_i) alone and reduce to a scalar root
// problem in b_i. Used for pre-nulling, solver starts, and as an independent
// oracle in tests. power_weight = alpha + lambda2, rate_weight = 1 - alpha.

// Per-subcarrier stationary (b, P); zeros where no root with P >= 0 exists.
void stationary_roots(const Eigen::VectorXd& cnr, double lambda1, double power_weight,
                      double rate_weight, double ber_threshold,
                      Eigen::VectorXd& bits_out, Eigen::VectorXd& powers_out);

// lambda1 at which the bit-weighted BER surplus of the stationary roots
// crosses zero. nullopt when no such multiplier exists (nothing worth loading).
std::optional<double> ber_equality_multiplier(const Eigen::VectorXd& cnr, double power_weight,
                                              double rate_weight, double ber_threshold,
                                              double lambda_guess);

struct BudgetMultipliers {
    double lambda1;
    double lambda2;
};

// (lambda1, lambda2) meeting both the BER equality and the total-power
// equality sum(P) = power_budget. lambda2 = 0 when the budget is already slack.
std::optional<BudgetMultipliers> budget_multipliers(const Eigen::VectorXd& cnr, double alpha,
                                                    double ber_threshold, double power_budget,
                                                    double lambda_guess);

}  // namespace ofdmload
