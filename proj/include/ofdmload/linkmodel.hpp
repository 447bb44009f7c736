#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace ofdmload {

// Bit and power vectors for one OFDM symbol. Real-valued bits before
// finalization, integers (stored as double) after.
struct Allocation {
    std::vector<double> bits;
    std::vector<double> powers;  // watts
};

struct LinkParams {
    double ber_threshold = 1e-4;
    double power_threshold = std::numeric_limits<double>::infinity();  // watts
    double alpha = 0.5;  // weight of total power against throughput in the objective
    // Conditioning aid: divide the average-BER equality row of the stationarity
    // system by ber_threshold. Off by default; the root set is unchanged.
    bool rescale_ber_row = false;
};

// 0.2 * exp(-1.6 * power * cnr / (2^bits - 1)). Throws std::invalid_argument on
// bits <= 0 (an inactive subcarrier must not be queried).
double ber_subcarrier(double power, double bits, double cnr);

// Closed-form inverse: the power at which ber_subcarrier hits `target`.
// Throws std::invalid_argument on cnr <= 0.
double power_for_target_ber(double bits, double cnr, double target);

// Bit-weighted mean BER over active (bits > 0) subcarriers. Throws
// std::invalid_argument when no subcarrier is active.
double average_ber(const Allocation& alloc, const std::vector<double>& cnr);

// alpha * sum(powers) - (1 - alpha) * sum(bits)
double objective(const Allocation& alloc, double alpha);

// The BER expression is a tight approximation only up to ~1e-3; calls that
// produce a larger value bump this counter instead of failing.
std::uint64_t validity_warning_count();
void reset_validity_warnings();

}  // namespace ofdmload
