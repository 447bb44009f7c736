#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ofdmload/channel.hpp"
#include "ofdmload/linkmodel.hpp"
#include "ofdmload/lmsolver.hpp"

namespace ofdmload {

enum class SweepKind { Snr, Alpha, PowerThreshold, BaselineCompare };

const char* to_string(SweepKind k);

struct SweepConfig {
    SweepKind kind = SweepKind::Snr;
    std::vector<double> grid;  // strictly increasing swept values
    int n_trials = 1000;
    LinkParams link;
    ChannelParams channel;
    LmConfig lm;
    int jobs = 1;
    // Also write the pre-allocation column (power budget spread uniformly):
    // nan on unbounded-budget curves.
    bool emit_prealloc_snr = false;

    void validate() const;  // throws std::invalid_argument
};

struct TrialRecord {
    std::string curve;   // which plotted line this row belongs to
    double swept_value = 0.0;
    int trial = 0;
    bool converged = false;
    int case_used = 0;   // 0 PowerInactive, 1 PowerActive
    int iterations = 0;
    double throughput = 0.0;
    double total_power = 0.0;     // watts
    double avg_ber_final = 0.0;   // finalized allocation, 0 when empty
    double res_norm = 0.0;
    double mean_inst_snr = 0.0;   // (1/N) sum_i P_i C_i on the finalized allocation
    double prealloc_snr = 0.0;    // (pth/N) * (1/N) sum_i C_i, nan when pth unbounded
    double baseline_throughput = -1.0;  // < 0 when not a comparison row
};

struct SweepResult {
    SweepConfig config;
    std::vector<TrialRecord> records;
};

// Post-allocation average SNR in dB over the given records (converged only):
// mean over trials of mean_inst_snr, nulled subcarriers already counted as 0.
double average_snr_db(const std::vector<TrialRecord>& records);

// Monte-Carlo sweep. Channel realizations are shared across grid points via
// counter seeding (trial i sees the same channel at every grid point, scaled
// by that point's noise variance where applicable).
SweepResult run_sweep(const SweepConfig& config);

// aggregate.csv (7 columns: curve, swept value, mean throughput, mean power,
// mean finalized BER, convergence rate, average SNR dB), trials.csv, and one
// two-column plot file per (curve, metric).
void emit(const SweepResult& result, const std::filesystem::path& dir);

}  // namespace ofdmload
