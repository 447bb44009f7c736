#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ofdmload::selftest {

// Built-in numerical audits, runnable from the CLI and reused by the test
// suite. Each returns pass/fail plus the measured figure of merit.

struct AuditResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;   // worst-case metric over the audit
    double bound = 0.0;      // what `measured` is compared against
    int checked = 0;
    double seconds = 0.0;
    std::string detail;
};

// Closed-form inverse consistency: |ber(power_for_target(...)) - t| / t over
// random (bits, cnr, target) triples.
AuditResult ber_round_trip(int n_samples, std::uint64_t seed = 42);

// Analytic Jacobian vs central finite differences at random feasible states
// (N=8, both constraint cases); metric is max entry error relative to the
// largest analytic entry (floored at 1).
AuditResult jacobian_audit(int n_states, std::uint64_t seed = 7);

// Desk-scale optimality: N=2 random channels, continuous objective against an
// exhaustive feasibility-filtered grid (b in {0.5,...,10}^2, 400-point log
// power grid). Passes when >= 90% of instances beat the grid within 1e-6.
AuditResult grid_oracle(int n_instances, std::uint64_t seed = 99);

std::vector<AuditResult> run_all(bool quick);

}  // namespace ofdmload::selftest
