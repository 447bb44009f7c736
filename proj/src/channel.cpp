#include "ofdmload/channel.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ofdmload {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Box-Muller on top of the (bit-exact, standardized) mt19937_64 stream; the
// standard library's normal_distribution is not reproducible across
// implementations, so the transform is spelled out here.
class NormalStream {
  public:
    explicit NormalStream(std::uint64_t seed) : eng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform_open();
        double u2 = uniform_open();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

  private:
    double uniform_open() {
        // in (0, 1]: avoids log(0)
        return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    }

    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};
}  // namespace

double normalization_constant(int n_taps, double decay) {
    if (n_taps < 1) throw std::invalid_argument("normalization_constant: n_taps < 1");
    if (decay == 0.0) return 1.0 / n_taps;
    return (1.0 - std::exp(-decay)) / (1.0 - std::exp(-decay * n_taps));
}

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<std::complex<double>> generate_taps(const ChannelParams& params,
                                                std::uint64_t trial_index) {
    if (params.n_taps < 1 || params.n_taps > params.n_subcarriers)
        throw std::invalid_argument("generate_taps: bad tap count");
    double sig2 = normalization_constant(params.n_taps, params.decay);
    NormalStream rng(splitmix64((params.seed << 1) ^ trial_index));
    std::vector<std::complex<double>> taps(params.n_taps);
    for (int n = 0; n < params.n_taps; ++n) {
        double var = sig2 * std::exp(-params.decay * n);
        double s = std::sqrt(var / 2.0);
        double re = s * rng.next();
        double im = s * rng.next();
        taps[n] = {re, im};
    }
    return taps;
}

std::vector<std::complex<double>> frequency_response(
    const std::vector<std::complex<double>>& taps, int n_subcarriers) {
    if (static_cast<int>(taps.size()) > n_subcarriers)
        throw std::invalid_argument("frequency_response: more taps than subcarriers");
    std::vector<std::complex<double>> gains(n_subcarriers);
    for (int i = 0; i < n_subcarriers; ++i) {
        std::complex<double> acc = 0.0;
        for (std::size_t n = 0; n < taps.size(); ++n) {
            double phase = -2.0 * kPi * static_cast<double>(n) * i / n_subcarriers;
            acc += taps[n] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        gains[i] = acc;
    }
    return gains;
}

std::vector<double> cnr_from_gains(const std::vector<std::complex<double>>& gains,
                                   double noise_variance) {
    if (noise_variance <= 0.0)
        throw std::invalid_argument("cnr_from_gains: noise_variance <= 0");
    std::vector<double> out(gains.size());
    for (std::size_t i = 0; i < gains.size(); ++i) out[i] = std::norm(gains[i]) / noise_variance;
    return out;
}

ChannelRealization generate_channel(const ChannelParams& params, std::uint64_t trial_index) {
    ChannelRealization ch;
    ch.taps = generate_taps(params, trial_index);
    ch.gains = frequency_response(ch.taps, params.n_subcarriers);
    ch.cnr = cnr_from_gains(ch.gains, params.noise_variance);
    return ch;
}

}  // namespace ofdmload
