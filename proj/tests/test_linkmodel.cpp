#include "doctest.h"

#include <ofdmload/linkmodel.hpp>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace ofdmload;

TEST_CASE("subcarrier ber closed form") {
    CHECK(ber_subcarrier(0.0, 2.0, 5.0) == doctest::Approx(0.2).epsilon(1e-15));

    // powers hitting a 1e-4 target on 4-qam and 16-qam at unit cnr
    double p2 = power_for_target_ber(2.0, 1.0, 1e-4);
    double p4 = power_for_target_ber(4.0, 1.0, 1e-4);
    CHECK(p2 == doctest::Approx(14.25169).epsilon(1e-6));
    CHECK(p4 == doctest::Approx(71.25846).epsilon(1e-6));
    CHECK(ber_subcarrier(p2, 2.0, 1.0) == doctest::Approx(1e-4).epsilon(1e-9));
    CHECK(ber_subcarrier(p4, 4.0, 1.0) == doctest::Approx(1e-4).epsilon(1e-9));

    CHECK_THROWS_AS(ber_subcarrier(1.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ber_subcarrier(1.0, -2.0, 1.0), std::invalid_argument);
}

TEST_CASE("power inverse") {
    CHECK(power_for_target_ber(1.0, 10.0, 0.2 * std::exp(-1.6)) ==
          doctest::Approx(0.1).epsilon(1e-14));

    // inverse proportionality in cnr
    double p = power_for_target_ber(3.0, 50.0, 1e-5);
    CHECK(power_for_target_ber(3.0, 100.0, 1e-5) == doctest::Approx(p / 2.0).epsilon(1e-14));

    CHECK_THROWS_AS(power_for_target_ber(2.0, 0.0, 1e-4), std::invalid_argument);
}

TEST_CASE("round trip and monotonicity over random triples") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ub(1.0, 10.0);
    std::uniform_real_distribution<double> uc(-2.0, 4.0);
    std::uniform_real_distribution<double> ut(-6.0, -3.0);
    for (int i = 0; i < 1000; ++i) {
        double b = ub(rng);
        double c = std::pow(10.0, uc(rng));
        double t = std::pow(10.0, ut(rng));
        double p = power_for_target_ber(b, c, t);
        CHECK(std::abs(ber_subcarrier(p, b, c) - t) / t < 1e-10);
        // strictly decreasing in power, strictly increasing in bits
        CHECK(ber_subcarrier(p * 1.01, b, c) < ber_subcarrier(p, b, c));
        CHECK(ber_subcarrier(p, b + 0.1, c) > ber_subcarrier(p, b, c));
    }
}

TEST_CASE("bit-weighted average ber") {
    std::vector<double> cnr{1.0, 1.0};

    Allocation one;
    one.bits = {3.0, 0.0};
    one.powers = {power_for_target_ber(3.0, 1.0, 2e-4), 0.0};
    CHECK(average_ber(one, cnr) == doctest::Approx(2e-4).epsilon(1e-12));

    Allocation eq;
    eq.bits = {2.0, 2.0};
    eq.powers = {power_for_target_ber(2.0, 1.0, 1e-4), power_for_target_ber(2.0, 1.0, 3e-4)};
    CHECK(average_ber(eq, cnr) == doctest::Approx(2e-4).epsilon(1e-12));

    Allocation mix;
    mix.bits = {2.0, 4.0};
    mix.powers = {power_for_target_ber(2.0, 1.0, 1e-4), power_for_target_ber(4.0, 1.0, 4e-4)};
    CHECK(average_ber(mix, cnr) == doctest::Approx(3e-4).epsilon(1e-12));

    // average sits between the active extremes
    double lo = ber_subcarrier(mix.powers[0], 2.0, 1.0);
    double hi = ber_subcarrier(mix.powers[1], 4.0, 1.0);
    double avg = average_ber(mix, cnr);
    CHECK(avg >= lo);
    CHECK(avg <= hi);

    Allocation dead;
    dead.bits = {0.0, 0.0};
    dead.powers = {1.0, 1.0};
    CHECK_THROWS_AS(average_ber(dead, cnr), std::invalid_argument);
}

TEST_CASE("weighted objective") {
    Allocation empty;
    CHECK(objective(empty, 0.5) == 0.0);

    Allocation a;
    a.bits = {4.0, 6.0};
    a.powers = {0.5, 1.5};
    CHECK(objective(a, 0.5) == doctest::Approx(-4.0).epsilon(1e-15));

    // d(objective)/d(alpha) = sum powers + sum bits
    double h = 1e-6;
    double fd = (objective(a, 0.5 + h) - objective(a, 0.5 - h)) / (2.0 * h);
    CHECK(fd == doctest::Approx(2.0 + 10.0).epsilon(1e-9));
}

TEST_CASE("validity warning counter") {
    reset_validity_warnings();
    auto before = validity_warning_count();
    (void)ber_subcarrier(0.0, 2.0, 1.0);  // 0.2, far outside the trusted region
    CHECK(validity_warning_count() > before);

    reset_validity_warnings();
    (void)ber_subcarrier(power_for_target_ber(2.0, 1.0, 1e-4), 2.0, 1.0);
    CHECK(validity_warning_count() == 0);
}
