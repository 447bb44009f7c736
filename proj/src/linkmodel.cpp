#include "ofdmload/linkmodel.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace ofdmload {

namespace {
std::atomic<std::uint64_t> g_validity_warnings{0};
}

double ber_subcarrier(double power, double bits, double cnr) {
    if (!(bits > 0.0)) throw std::invalid_argument("ber_subcarrier: bits must be > 0");
    if (power < 0.0 || cnr < 0.0) throw std::invalid_argument("ber_subcarrier: negative input");
    double ber = 0.2 * std::exp(-1.6 * power * cnr / (std::exp2(bits) - 1.0));
    if (ber > 1e-3) g_validity_warnings.fetch_add(1, std::memory_order_relaxed);
    return ber;
}

double power_for_target_ber(double bits, double cnr, double target) {
    if (!(bits > 0.0)) throw std::invalid_argument("power_for_target_ber: bits must be > 0");
    if (!(cnr > 0.0)) throw std::invalid_argument("power_for_target_ber: cnr must be > 0");
    if (!(target > 0.0 && target < 0.2))
        throw std::invalid_argument("power_for_target_ber: target outside (0, 0.2)");
    return (std::exp2(bits) - 1.0) * std::log(0.2 / target) / (1.6 * cnr);
}

double average_ber(const Allocation& alloc, const std::vector<double>& cnr) {
    if (alloc.bits.size() != alloc.powers.size() || alloc.bits.size() != cnr.size())
        throw std::invalid_argument("average_ber: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < alloc.bits.size(); ++i) {
        double b = alloc.bits[i];
        if (b <= 0.0) continue;
        num += b * ber_subcarrier(alloc.powers[i], b, cnr[i]);
        den += b;
    }
    if (den == 0.0) throw std::invalid_argument("average_ber: no active subcarrier");
    return num / den;
}

double objective(const Allocation& alloc, double alpha) {
    double p = 0.0, b = 0.0;
    for (double v : alloc.powers) p += v;
    for (double v : alloc.bits) b += v;
    return alpha * p - (1.0 - alpha) * b;
}

std::uint64_t validity_warning_count() {
    return g_validity_warnings.load(std::memory_order_relaxed);
}

void reset_validity_warnings() { g_validity_warnings.store(0, std::memory_order_relaxed); }

}  // namespace ofdmload
