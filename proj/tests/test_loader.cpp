#include "doctest.h"

#include <ofdmload/channel.hpp>
#include <ofdmload/loader.hpp>

#include <cmath>
#include <random>

using namespace ofdmload;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ChannelRealization channel_for(int n, int taps, double noise, std::uint64_t seed,
                               std::uint64_t trial) {
    ChannelParams cp;
    cp.n_subcarriers = n;
    cp.n_taps = taps;
    cp.noise_variance = noise;
    cp.seed = seed;
    return generate_channel(cp, trial);
}

LinkParams link(double pth) {
    LinkParams lp;
    lp.power_threshold = pth;
    return lp;
}

double objective_units(const Eigen::VectorXd& p, const Eigen::VectorXd& b, double alpha) {
    return alpha * p.sum() - (1.0 - alpha) * b.sum();
}

}  // namespace

TEST_CASE("initial point on a flat channel") {
    int n = 8;
    Eigen::VectorXd cnr = Eigen::VectorXd::Constant(n, 400.0);
    LinkParams lp = link(kInf);
    KktState s = initial_point(cnr, lp, ConstraintCase::PowerInactive);

    CHECK((s.bits.array() == 4.0).all());
    double p_ref = power_for_target_ber(4.0, 400.0, lp.ber_threshold);
    for (int i = 0; i < n; ++i) CHECK(s.powers[i] == doctest::Approx(p_ref).epsilon(1e-15));
    CHECK(s.aux == 0.0);
    CHECK(s.lambda1 > 0.0);

    Eigen::VectorXd r = residuals(s.pack(), cnr, lp, ConstraintCase::PowerInactive);
    CHECK(std::abs(r[2 * n]) < 1e-12);          // threshold surface by construction
    for (int i = 0; i < n; ++i) CHECK(std::abs(r[i]) < 1e-12);  // flat: all power rows balance
}

TEST_CASE("initial point balances the median power row") {
    int n = 7;
    Eigen::VectorXd cnr(n);
    cnr << 12.0, 700.0, 95.0, 260.0, 33.0, 1500.0, 410.0;
    LinkParams lp = link(kInf);
    KktState s = initial_point(cnr, lp, ConstraintCase::PowerInactive);

    Eigen::VectorXd r = residuals(s.pack(), cnr, lp, ConstraintCase::PowerInactive);
    CHECK(std::abs(r[2 * n]) < 1e-12);
    int med = 3;  // 260 is the middle cnr value
    CHECK(std::abs(r[med]) < 1e-12);
}

TEST_CASE("initial point rejects a dead channel") {
    Eigen::VectorXd cnr = Eigen::VectorXd::Zero(4);
    CHECK_THROWS_AS(initial_point(cnr, link(kInf), ConstraintCase::PowerInactive),
                    std::invalid_argument);
}

TEST_CASE("unbounded budget solve lands on the threshold surface") {
    ChannelRealization ch = channel_for(8, 3, 1e-9, 42, 0);
    LinkParams lp = link(kInf);
    LmConfig lm;
    LoadingResult r = optimize(ch, lp, lm);

    REQUIRE(r.converged);
    CHECK(r.case_used == ConstraintCase::PowerInactive);
    CHECK(!r.active.empty());
    CHECK(r.continuous.aux == 0.0);
    CHECK(r.achieved_avg_ber == doctest::Approx(lp.ber_threshold).epsilon(1e-6));

    KktReport rep = verify_kkt(r, ch, lp);
    CHECK(rep.residual_inf < 1e-6);
    CHECK(std::isinf(rep.power_slack_watts));
    CHECK(rep.lambda1 > 0.0);
    CHECK(rep.final_ber_within_threshold);
}

TEST_CASE("tight budget switches to the equality case") {
    ChannelRealization ch = channel_for(8, 3, 1e-9, 42, 1);
    LmConfig lm;
    LoadingResult free_run = optimize(ch, link(kInf), lm);
    REQUIRE(free_run.converged);
    double free_watts = free_run.continuous.powers.sum() * kPowerUnit;

    LinkParams lp = link(0.5 * free_watts);
    LoadingResult r = optimize(ch, lp, lm);
    REQUIRE(r.converged);
    CHECK(r.case_used == ConstraintCase::PowerActive);
    CHECK(r.continuous.aux >= 0.0);  // budget multiplier

    double sum_watts = r.continuous.powers.sum() * kPowerUnit;
    CHECK(std::abs(sum_watts - lp.power_threshold) / lp.power_threshold < 1e-9);
    CHECK(r.achieved_avg_ber == doctest::Approx(lp.ber_threshold).epsilon(1e-6));

    KktReport rep = verify_kkt(r, ch, lp);
    CHECK(rep.residual_inf < 1e-6);
    CHECK(rep.lambda2_nonnegative);
    CHECK(std::abs(rep.power_slack_watts) / lp.power_threshold < 1e-9);

    // the cap must actually bite: fewer bits than the free solution
    CHECK(r.throughput < free_run.throughput);
}

TEST_CASE("a roomy budget is absorbed by the slack variable") {
    ChannelRealization ch = channel_for(8, 3, 1e-9, 42, 2);
    LmConfig lm;
    LoadingResult free_run = optimize(ch, link(kInf), lm);
    REQUIRE(free_run.converged);
    double free_watts = free_run.continuous.powers.sum() * kPowerUnit;

    LinkParams lp = link(1.02 * free_watts);
    LoadingResult r = optimize(ch, lp, lm);
    REQUIRE(r.converged);
    CHECK(r.case_used == ConstraintCase::PowerInactive);
    CHECK(r.continuous.aux > 0.0);  // completed slack

    KktReport rep = verify_kkt(r, ch, lp);
    CHECK(rep.residual_inf < 1e-6);
    CHECK(rep.power_slack_watts ==
          doctest::Approx(0.02 * free_watts).epsilon(1e-4));
}

TEST_CASE("finalization floors bits and nulls weak subcarriers") {
    LmConfig lm;
    bool saw_nulled_active = false;
    for (std::uint64_t trial = 0; trial < 12; ++trial) {
        ChannelRealization ch = channel_for(16, 4, 0.02, 9, trial);
        LinkParams lp = link(kInf);
        LoadingResult r = optimize(ch, lp, lm);
        if (!r.converged) continue;

        double thr = 0.0, tot = 0.0;
        std::vector<char> in_active(16, 0);
        for (size_t k = 0; k < r.active.size(); ++k) {
            int i = r.active[k];
            in_active[static_cast<size_t>(i)] = 1;
            double bc = r.continuous.bits[static_cast<long>(k)];
            double pc = r.continuous.powers[static_cast<long>(k)];
            if (bc >= 2.0) {
                CHECK(r.final_alloc.bits[i] == std::floor(bc));
                CHECK(r.final_alloc.powers[i] == pc * kPowerUnit);
            } else {
                CHECK(r.final_alloc.bits[i] == 0.0);
                CHECK(r.final_alloc.powers[i] == 0.0);
                saw_nulled_active = true;
            }
        }
        for (int i = 0; i < 16; ++i) {
            if (!in_active[static_cast<size_t>(i)]) {
                CHECK(r.final_alloc.bits[i] == 0.0);
                CHECK(r.final_alloc.powers[i] == 0.0);
            }
            double b = r.final_alloc.bits[i];
            CHECK(b == std::floor(b));
            CHECK((b == 0.0 || b >= 2.0));
            thr += b;
            tot += r.final_alloc.powers[i];
        }
        CHECK(r.throughput == thr);
        CHECK(r.total_power == tot);

        KktReport rep = verify_kkt(r, ch, lp);
        CHECK(rep.final_ber_within_threshold);
    }
    CHECK(saw_nulled_active);  // the low-snr setting exercises the sub-4qam branch
}

TEST_CASE("hopeless channel returns the empty allocation as converged") {
    ChannelRealization ch;
    ch.gains.assign(6, {0.0, 0.0});
    ch.cnr.assign(6, 0.0);
    LinkParams lp = link(1e-4);
    LmConfig lm;
    LoadingResult r = optimize(ch, lp, lm);

    CHECK(r.converged);
    CHECK(r.active.empty());
    CHECK(r.throughput == 0.0);
    CHECK(r.total_power == 0.0);
    CHECK(r.achieved_avg_ber == 0.0);
    CHECK(r.prenulled == 6);

    KktReport rep = verify_kkt(r, ch, lp);
    CHECK(rep.empty);
    CHECK(rep.residual_inf < 1e-6);
    CHECK(rep.final_ber_within_threshold);
}

TEST_CASE("deep fades are pre-nulled, not ground through the solver") {
    ChannelRealization ch;
    ch.gains.assign(6, {1.0, 0.0});
    ch.cnr = {4000.0, 3000.0, 5000.0, 1e-7, 2000.0, 1e-8};
    LinkParams lp = link(kInf);
    LmConfig lm;
    LoadingResult r = optimize(ch, lp, lm);

    REQUIRE(r.converged);
    CHECK(r.prenulled >= 2);
    for (int i : r.active) {
        CHECK(i != 3);
        CHECK(i != 5);
    }
    CHECK(r.final_alloc.bits[3] == 0.0);
    CHECK(r.final_alloc.bits[5] == 0.0);
}

TEST_CASE("converged allocations are local optima on the threshold surface") {
    ChannelRealization ch = channel_for(4, 2, 1e-9, 5, 3);
    LinkParams lp = link(kInf);
    LmConfig lm;
    LoadingResult r = optimize(ch, lp, lm);
    REQUIRE(r.converged);
    REQUIRE(r.active.size() >= 2);

    long m = static_cast<long>(r.active.size());
    Eigen::VectorXd cnr_u(m);
    for (long k = 0; k < m; ++k) cnr_u[k] = ch.cnr[r.active[static_cast<size_t>(k)]] * kPowerUnit;
    const Eigen::VectorXd& p0 = r.continuous.powers;
    const Eigen::VectorXd& b0 = r.continuous.bits;
    double f0 = objective_units(p0, b0, lp.alpha);
    double th = lp.ber_threshold;

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1e-3, 1e-3);
    int evaluated = 0;
    for (int it = 0; it < 1000; ++it) {
        Eigen::VectorXd b = b0, p = p0;
        for (long k = 0; k < m; ++k) b[k] *= 1.0 + u(rng);
        for (long k = 1; k < m; ++k) p[k] *= 1.0 + u(rng);

        // restore the average-BER equality through subcarrier 0's power
        double need = th * b.sum();
        for (long k = 1; k < m; ++k) need -= b[k] * ber_subcarrier(p[k], b[k], cnr_u[k]);
        double t0 = need / b[0];
        if (!(t0 > 0.0 && t0 < 0.2)) continue;
        p[0] = power_for_target_ber(b[0], cnr_u[0], t0);

        ++evaluated;
        double f = objective_units(p, b, lp.alpha);
        CHECK(f >= f0 - 1e-8 * std::max(1.0, std::abs(f0)));
    }
    CHECK(evaluated >= 900);
}

TEST_CASE("report flags a negative budget multiplier") {
    ChannelRealization ch = channel_for(8, 3, 1e-9, 42, 1);
    LmConfig lm;
    LoadingResult free_run = optimize(ch, link(kInf), lm);
    REQUIRE(free_run.converged);
    double free_watts = free_run.continuous.powers.sum() * kPowerUnit;
    LinkParams lp = link(0.5 * free_watts);
    LoadingResult r = optimize(ch, lp, lm);
    REQUIRE(r.converged);
    REQUIRE(r.case_used == ConstraintCase::PowerActive);

    LoadingResult tampered = r;
    tampered.continuous.aux = -0.1;
    KktReport rep = verify_kkt(tampered, ch, lp);
    CHECK(!rep.lambda2_nonnegative);
}
