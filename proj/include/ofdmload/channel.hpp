#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace ofdmload {

struct ChannelParams {
    int n_subcarriers = 128;
    int n_taps = 5;
    double decay = 0.2;            // exponential power-delay-profile decay per tap
    double noise_variance = 1e-9;  // watts
    std::uint64_t seed = 0;
};

struct ChannelRealization {
    std::vector<std::complex<double>> taps;
    std::vector<std::complex<double>> gains;  // per-subcarrier frequency response
    std::vector<double> cnr;                  // |gains[i]|^2 / noise_variance, per watt
};

// sigma_h^2 such that the tap variances sigma_h^2 * e^{-n*decay} sum to 1.
double normalization_constant(int n_taps, double decay);

std::uint64_t splitmix64(std::uint64_t z);

// Taps for one Monte-Carlo trial. Deterministic in (params.seed, trial_index):
// trial i is reproducible without generating trials 0..i-1.
std::vector<std::complex<double>> generate_taps(const ChannelParams& params,
                                                std::uint64_t trial_index);

// H_i = sum_n taps[n] * exp(-j*2*pi*n*i/N), i = 0..N-1 (direct summation).
std::vector<std::complex<double>> frequency_response(
    const std::vector<std::complex<double>>& taps, int n_subcarriers);

std::vector<double> cnr_from_gains(const std::vector<std::complex<double>>& gains,
                                   double noise_variance);

ChannelRealization generate_channel(const ChannelParams& params, std::uint64_t trial_index);

}  // namespace ofdmload
