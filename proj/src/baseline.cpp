#include "ofdmload/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ofdmload {

Allocation greedy_load(const std::vector<double>& cnr, const BaselineConfig& config) {
    size_t n = cnr.size();
    const std::vector<int>& levels = config.bit_set;
    if (levels.empty() || levels.front() != 0 || !std::is_sorted(levels.begin(), levels.end()))
        throw std::invalid_argument("greedy_load: bit_set must be ascending and start at 0");
    for (size_t l = 1; l < levels.size(); ++l)
        if (levels[l] < 2) throw std::invalid_argument("greedy_load: nonzero bits must be >= 2");

    double p = n ? config.total_power / static_cast<double>(n) : 0.0;
    size_t nlev = levels.size();
    // bit-weighted BER contribution of each (subcarrier, level)
    std::vector<double> wber(n * nlev, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t l = 1; l < nlev; ++l) {
            double b = levels[l];
            wber[i * nlev + l] = b * 0.2 * std::exp(-1.6 * p * cnr[i] / (std::exp2(b) - 1.0));
        }

    std::vector<size_t> lvl(n, 0);
    double num = 0.0, den = 0.0;
    while (true) {
        double best = std::numeric_limits<double>::infinity();
        size_t best_i = n;
        for (size_t i = 0; i < n; ++i) {
            if (lvl[i] + 1 >= nlev) continue;
            double dnum = wber[i * nlev + lvl[i] + 1] - wber[i * nlev + lvl[i]];
            double dden = levels[lvl[i] + 1] - levels[lvl[i]];
            double avg = (num + dnum) / (den + dden);
            if (avg < best) {
                best = avg;
                best_i = i;
            }
        }
        if (best_i == n || best > config.ber_threshold) break;
        num += wber[best_i * nlev + lvl[best_i] + 1] - wber[best_i * nlev + lvl[best_i]];
        den += levels[lvl[best_i] + 1] - levels[lvl[best_i]];
        ++lvl[best_i];
    }

    Allocation out;
    out.bits.resize(n);
    out.powers.assign(n, p);
    for (size_t i = 0; i < n; ++i) out.bits[i] = levels[lvl[i]];
    return out;
}

ComparisonRow compare(const ChannelRealization& channel, const LinkParams& params,
                      const LoadingResult& proposed) {
    ComparisonRow row;
    if (!proposed.converged) {
        row.skipped = true;
        return row;
    }
    row.matched_power = proposed.total_power;
    row.proposed_throughput = proposed.throughput;
    BaselineConfig cfg;
    cfg.total_power = proposed.total_power;
    cfg.ber_threshold = params.ber_threshold;
    Allocation base = greedy_load(channel.cnr, cfg);
    for (double b : base.bits) row.baseline_throughput += b;
    return row;
}

}  // namespace ofdmload
