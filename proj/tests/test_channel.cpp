#include "doctest.h"

#include <ofdmload/channel.hpp>

#include <cmath>
#include <complex>
#include <numbers>

using namespace ofdmload;

TEST_CASE("tap variance normalization") {
    CHECK(normalization_constant(5, 0.0) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(normalization_constant(1, 0.7) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(normalization_constant(5, 0.2) == doctest::Approx(0.286763).epsilon(1e-6));

    // closed form against the brute geometric sum
    for (int taps : {1, 2, 5, 16}) {
        for (double decay : {0.0, 0.05, 0.2, 1.3}) {
            double sum = 0.0;
            for (int n = 0; n < taps; ++n) sum += std::exp(-decay * n);
            CHECK(normalization_constant(taps, decay) ==
                  doctest::Approx(1.0 / sum).epsilon(1e-14));
        }
    }
}

TEST_CASE("tap generation is deterministic and profile-shaped") {
    ChannelParams p;
    p.n_taps = 5;
    p.decay = 0.2;
    p.seed = 99;

    auto a = generate_taps(p, 17);
    auto b = generate_taps(p, 17);
    REQUIRE(a.size() == 5);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    auto c = generate_taps(p, 18);
    bool all_equal = true;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != c[i]) all_equal = false;
    CHECK_FALSE(all_equal);

    // empirical per-tap energy against the exponential profile
    const int draws = 20000;
    double e0 = 0.0, e1 = 0.0;
    for (int t = 0; t < draws; ++t) {
        auto h = generate_taps(p, static_cast<std::uint64_t>(t));
        e0 += std::norm(h[0]);
        e1 += std::norm(h[1]);
    }
    e0 /= draws;
    e1 /= draws;
    double sigma0 = normalization_constant(5, 0.2);
    // |h|^2 is exponential with std == mean; allow a 4-sigma sampling band
    double band = 4.0 * sigma0 / std::sqrt(static_cast<double>(draws));
    CHECK(std::abs(e0 - sigma0) < band);
    CHECK(std::abs(e1 / e0 - std::exp(-0.2)) < 4.0 * std::exp(-0.2) * std::sqrt(2.0 / draws));
}

TEST_CASE("frequency response of elementary taps") {
    auto flat = frequency_response({{1.0, 0.0}}, 4);
    REQUIRE(flat.size() == 4);
    for (auto& g : flat) {
        CHECK(g.real() == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(g.imag() == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    }

    auto delayed = frequency_response({{0.0, 0.0}, {1.0, 0.0}}, 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(delayed[i]) == doctest::Approx(1.0).epsilon(1e-14));
        double want = -2.0 * std::numbers::pi * i / 4.0;
        double got = std::arg(delayed[i]);
        CHECK(std::abs(std::remainder(got - want, 2.0 * std::numbers::pi)) < 1e-12);
    }
}

TEST_CASE("frequency response matches a naive summation oracle") {
    ChannelParams p;
    p.seed = 5;
    auto taps = generate_taps(p, 3);
    auto got = frequency_response(taps, 128);
    REQUIRE(got.size() == 128);
    for (int i = 0; i < 128; ++i) {
        std::complex<double> acc = 0.0;
        for (size_t n = 0; n < taps.size(); ++n)
            acc += taps[n] * std::polar(1.0, -2.0 * std::numbers::pi *
                                                 static_cast<double>(n) * i / 128.0);
        CHECK(std::abs(got[i] - acc) < 1e-12);
    }

    // energy conservation between delay and frequency domains
    double et = 0.0, ef = 0.0;
    for (auto& h : taps) et += std::norm(h);
    for (auto& g : got) ef += std::norm(g);
    CHECK(ef == doctest::Approx(128.0 * et).epsilon(1e-10));
}

TEST_CASE("cnr from gains") {
    auto one = cnr_from_gains({{1.0, 0.0}}, 1.0);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == doctest::Approx(1.0).epsilon(1e-15));

    auto big = cnr_from_gains({{3.0, 4.0}}, 1e-3);
    CHECK(big[0] == doctest::Approx(25000.0).epsilon(1e-12));
}

TEST_CASE("mean subcarrier energy approaches unity over realizations") {
    ChannelParams p;
    p.seed = 1234;
    const int reps = 400;
    double acc = 0.0;
    for (int t = 0; t < reps; ++t) {
        auto ch = generate_channel(p, static_cast<std::uint64_t>(t));
        REQUIRE(static_cast<int>(ch.gains.size()) == p.n_subcarriers);
        double e = 0.0;
        for (auto& g : ch.gains) e += std::norm(g);
        acc += e / p.n_subcarriers;
    }
    acc /= reps;
    CHECK(std::abs(acc - 1.0) < 4.0 / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("shared channels across noise levels") {
    // the same (seed, trial) pair yields the same taps regardless of the
    // noise setting; only the cnr scale changes
    ChannelParams lo;
    lo.seed = 7;
    lo.noise_variance = 1e-7;
    ChannelParams hi = lo;
    hi.noise_variance = 1e-9;

    auto a = generate_channel(lo, 4);
    auto b = generate_channel(hi, 4);
    REQUIRE(a.gains.size() == b.gains.size());
    for (size_t i = 0; i < a.gains.size(); ++i) {
        CHECK(a.gains[i] == b.gains[i]);
        CHECK(a.cnr[i] * 1e-7 == doctest::Approx(b.cnr[i] * 1e-9).epsilon(1e-12));
    }
}
