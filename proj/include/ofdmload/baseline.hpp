#pragma once

#include <vector>

#include "ofdmload/channel.hpp"
#include "ofdmload/linkmodel.hpp"
#include "ofdmload/loader.hpp"

namespace ofdmload {

struct BaselineConfig {
    double total_power = 0.0;  // watts, spread uniformly over all subcarriers
    double ber_threshold = 1e-4;
    std::vector<int> bit_set = {0, 2, 3, 4, 5, 6, 7, 8};
};

// Uniform-power greedy bit loader: every subcarrier gets total_power/N;
// repeatedly promote the subcarrier whose next bit_set level yields the
// smallest resulting bit-weighted average BER, committing only while that
// average stays within the threshold. Ties break to the lowest index.
Allocation greedy_load(const std::vector<double>& cnr, const BaselineConfig& config);

struct ComparisonRow {
    bool skipped = false;  // proposed run did not converge
    double matched_power = 0.0;  // watts handed to the greedy loader
    double proposed_throughput = 0.0;
    double baseline_throughput = 0.0;
};

// Fig-style comparison: greedy gets exactly the power the proposed allocation
// spent on this channel.
ComparisonRow compare(const ChannelRealization& channel, const LinkParams& params,
                      const LoadingResult& proposed);

}  // namespace ofdmload
