#include "ofdmload/loader.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ofdmload/roots.hpp"

namespace ofdmload {

namespace {
constexpr double kBitKeep = 0.25;  // pre-null threshold on the predicted bits
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<long>(idx.size()));
    for (size_t k = 0; k < idx.size(); ++k) out[static_cast<long>(k)] = v[idx[k]];
    return out;
}

double lower_median(Eigen::VectorXd v) {
    std::sort(v.data(), v.data() + v.size());
    return v[(v.size() - 1) / 2];
}

// Bit-weighted average BER of the continuous active-set state.
double continuous_avg_ber(const Eigen::VectorXd& P, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& cnr) {
    double num = 0.0, den = 0.0;
    for (long i = 0; i < b.size(); ++i) {
        if (b[i] <= 0.0) continue;
        num += b[i] * 0.2 * std::exp(-1.6 * P[i] * cnr[i] / (std::exp2(b[i]) - 1.0));
        den += b[i];
    }
    return den > 0.0 ? num / den : 0.0;
}

struct CaseSolve {
    LmResult lm;
    std::vector<int> act;
    Eigen::VectorXd P, b;
    double lambda1 = 0.0;
    double aux = 0.0;
};

// One LM solve of the given constraint case, re-solving on a shrunken active
// set while bits pin to the iteration floor (at most 8 rounds).
CaseSolve solve_case(const Eigen::VectorXd& cnr_all, const LinkParams& link_units,
                     ConstraintCase cse, std::vector<int> act, Eigen::VectorXd x0,
                     LmConfig cfg, int& resolves) {
    CaseSolve out;
    for (int round = 0;; ++round) {
        Eigen::VectorXd cnr = gather(cnr_all, act);
        double pth = link_units.power_threshold;
        auto res = [cnr, link_units, cse](const Eigen::VectorXd& x) {
            return residuals(x, cnr, link_units, cse);
        };
        auto jac = [cnr, link_units, cse](const Eigen::VectorXd& x) {
            return jacobian(x, cnr, link_units, cse);
        };
        long n = cnr.size();
        double p_hi = std::isfinite(pth) ? 10.0 * pth : kInf;
        auto clamp = [n, p_hi](Eigen::VectorXd& x) {
            int moved = 0;
            for (long i = 0; i < n; ++i) {
                double p = std::clamp(x[i], 0.0, p_hi);
                if (p != x[i]) {
                    x[i] = p;
                    ++moved;
                }
                double b = std::clamp(x[n + i], kBitFloor, kBitCap);
                if (b != x[n + i]) {
                    x[n + i] = b;
                    ++moved;
                }
            }
            return moved;
        };
        LmResult r;
        try {
            r = solve(res, jac, x0, cfg, clamp);
        } catch (const std::exception&) {
            r.x_final = x0;
            r.converged = false;
            r.termination = Termination::Stalled;
            r.hit_non_finite = true;
        }
        KktState s = KktState::unpack(r.x_final);
        std::vector<int> keep_idx;
        for (long i = 0; i < n; ++i)
            if (s.bits[i] > kBitFloor * (1.0 + 1e-6)) keep_idx.push_back(static_cast<int>(i));
        if (keep_idx.size() == act.size() || round == 7) {
            out.lm = std::move(r);
            out.act = std::move(act);
            out.P = s.powers;
            out.b = s.bits;
            out.lambda1 = s.lambda1;
            out.aux = s.aux;
            return out;
        }
        ++resolves;
        std::vector<int> next;
        for (int k : keep_idx) next.push_back(act[k]);
        if (next.empty()) {
            out.lm = std::move(r);
            out.act.clear();
            out.P.resize(0);
            out.b.resize(0);
            out.lambda1 = s.lambda1;
            out.aux = s.aux;
            return out;
        }
        long m = static_cast<long>(next.size());
        Eigen::VectorXd nx(2 * m + 2);
        for (long k = 0; k < m; ++k) {
            nx[k] = s.powers[keep_idx[k]];
            nx[m + k] = s.bits[keep_idx[k]];
        }
        nx[2 * m] = s.lambda1;
        nx[2 * m + 1] = s.aux;
        act = std::move(next);
        x0 = std::move(nx);
        cfg.mu0 = 2.0;  // warm restart: the surviving coordinates are near a root
    }
}

bool usable_root(const LmResult& r, double tol) {
    // a start already at tolerance reports InitialBelowTolerance with
    // converged=false; the state is still a usable root
    return r.converged ||
           (r.termination == Termination::InitialBelowTolerance && r.residual_norm < tol);
}

// Halving-Newton refinement of an adopted root so the equality rows audit near
// machine precision (covers roots adopted without the in-solver polish).
void sharpen(CaseSolve& cs, const Eigen::VectorXd& cnr_all, const LinkParams& link_units,
             ConstraintCase cse, double target) {
    if (cs.act.empty() || target <= 0.0) return;
    Eigen::VectorXd cnr = gather(cnr_all, cs.act);
    long n = cnr.size();
    Eigen::VectorXd x = cs.lm.x_final;
    Eigen::VectorXd S = residuals(x, cnr, link_units, cse);
    double rn = S.lpNorm<Eigen::Infinity>();
    for (int round = 0; round < 4 && rn > target; ++round) {
        Eigen::VectorXd d = jacobian(x, cnr, link_units, cse).partialPivLu().solve(-S);
        if (!d.allFinite()) break;
        double t = 1.0;
        bool took = false;
        Eigen::VectorXd cand, Sc;
        for (int h = 0; h < 30; ++h) {
            cand = x + t * d;
            for (long i = 0; i < n; ++i) {
                cand[i] = std::max(cand[i], 0.0);
                cand[n + i] = std::clamp(cand[n + i], kBitFloor, kBitCap);
            }
            Sc = residuals(cand, cnr, link_units, cse);
            if (Sc.allFinite() && Sc.lpNorm<Eigen::Infinity>() < rn) {
                took = true;
                break;
            }
            t *= 0.5;
        }
        if (!took) break;
        x = cand;
        S = Sc;
        rn = S.lpNorm<Eigen::Infinity>();
    }
    if (rn <= cs.lm.residual_norm) {
        cs.lm.x_final = x;
        cs.lm.residual_norm = rn;
        KktState s = KktState::unpack(x);
        cs.P = s.powers;
        cs.b = s.bits;
        cs.lambda1 = s.lambda1;
        cs.aux = s.aux;
    }
}

}  // namespace

KktState initial_point(const Eigen::VectorXd& cnr, const LinkParams& params,
                       ConstraintCase cse) {
    (void)cse;
    long n = cnr.size();
    if (n == 0 || cnr.maxCoeff() <= 0.0)
        throw std::invalid_argument("initial_point: dead channel (all-zero cnr)");
    double cf = 1e-6 * cnr.maxCoeff();
    KktState s;
    s.bits = Eigen::VectorXd::Constant(n, 4.0);
    s.powers.resize(n);
    for (long i = 0; i < n; ++i)
        s.powers[i] = power_for_target_ber(4.0, std::max(cnr[i], cf), params.ber_threshold);
    double cmed = lower_median(cnr);
    double e0 = params.ber_threshold / 0.2;
    s.lambda1 = params.alpha * 15.0 / (0.32 * 4.0 * cmed * e0);
    s.aux = 0.0;
    return s;
}

LoadingResult optimize(const ChannelRealization& channel, const LinkParams& params,
                       const LmConfig& lm) {
    long n = static_cast<long>(channel.cnr.size());
    Eigen::VectorXd cnr_u(n);
    for (long i = 0; i < n; ++i) cnr_u[i] = channel.cnr[i] * kPowerUnit;
    double pth_u = params.power_threshold / kPowerUnit;  // inf stays inf
    double alpha = params.alpha;
    double ber_th = params.ber_threshold;
    double rw = 1.0 - alpha;
    double tol = lm.tol_residual;

    LoadingResult out;
    out.final_alloc.bits.assign(n, 0.0);
    out.final_alloc.powers.assign(n, 0.0);

    // pre-null: drop subcarriers whose decoupled stationary bits fall below
    // the keep threshold; deep fades otherwise pin to the floor and stall
    std::vector<int> usable;
    double cmax = 0.0;
    for (long i = 0; i < n; ++i) cmax = std::max(cmax, cnr_u[i]);
    for (long i = 0; i < n; ++i)
        if (cnr_u[i] > 1e-9 * cmax) usable.push_back(static_cast<int>(i));

    double cmed = n ? lower_median(cnr_u) : 0.0;
    double lam_hat =
        cmed > 0.0 ? alpha * 15.0 / (0.32 * 4.0 * cmed * (ber_th / 0.2)) : 1.0;
    Eigen::VectorXd cnr_usable = gather(cnr_u, usable);
    std::optional<double> lam_star;
    if (!usable.empty())
        lam_star = ber_equality_multiplier(cnr_usable, alpha, rw, ber_th, lam_hat);
    Eigen::VectorXd rb = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd rp = Eigen::VectorXd::Zero(n);
    if (lam_star) {
        Eigen::VectorXd bu, pu;
        stationary_roots(cnr_usable, *lam_star, alpha, rw, ber_th, bu, pu);
        for (size_t k = 0; k < usable.size(); ++k) {
            rb[usable[k]] = bu[static_cast<long>(k)];
            rp[usable[k]] = pu[static_cast<long>(k)];
        }
    }
    std::vector<int> active;
    for (long i = 0; i < n; ++i)
        if (rb[i] >= kBitKeep) active.push_back(static_cast<int>(i));
    out.prenulled = static_cast<int>(n - static_cast<long>(active.size()));

    auto empty_result = [&]() {
        // nothing worth loading: the zero allocation is the optimum; the
        // active system is 0-dimensional so its residual is vacuously zero
        double auxv = std::isfinite(pth_u) ? std::sqrt(pth_u) : 0.0;
        out.continuous.powers.resize(0);
        out.continuous.bits.resize(0);
        out.continuous.lambda1 = 0.0;
        out.continuous.aux = auxv;
        out.active.clear();
        out.solver.x_final = out.continuous.pack();
        out.solver.converged = false;
        out.solver.iterations = 0;
        out.solver.residual_norm = 0.0;
        out.solver.step_norm = 0.0;
        out.solver.termination = Termination::InitialBelowTolerance;
        out.case_used = ConstraintCase::PowerInactive;
        out.converged = true;
        out.achieved_avg_ber = 0.0;
        return out;
    };
    if (active.empty()) return empty_result();

    auto consistent_start = [&](const std::vector<int>& act) {
        long m = static_cast<long>(act.size());
        Eigen::VectorXd x(2 * m + 2);
        for (long k = 0; k < m; ++k) {
            x[k] = rp[act[k]];
            x[m + k] = rb[act[k]];
        }
        x[2 * m] = *lam_star;
        x[2 * m + 1] = 0.0;
        return x;
    };

    LinkParams link_pi{ber_th, kInf, alpha, params.rescale_ber_row};
    LinkParams link_pa{ber_th, pth_u, alpha, params.rescale_ber_row};

    // stage 1: power constraint ignored (the sentinel row keeps the slack at 0)
    Eigen::VectorXd x0 = initial_point(gather(cnr_u, active), link_pi,
                                       ConstraintCase::PowerInactive)
                             .pack();
    CaseSolve cs = solve_case(cnr_u, link_pi, ConstraintCase::PowerInactive, active, x0, lm,
                              out.resolves);
    if (!usable_root(cs.lm, tol) && !cs.act.empty()) {
        ++out.restarts;
        CaseSolve cs2 = solve_case(cnr_u, link_pi, ConstraintCase::PowerInactive, cs.act,
                                   consistent_start(cs.act), lm, out.resolves);
        if (usable_root(cs2.lm, tol)) cs = std::move(cs2);
    }
    if (cs.act.empty()) return empty_result();

    ConstraintCase case_used = ConstraintCase::PowerInactive;
    LinkParams link_adopted = link_pi;
    if (std::isfinite(pth_u)) {
        if (usable_root(cs.lm, tol) && cs.P.sum() <= pth_u) {
            // budget not binding: complete the slack variable analytically
            cs.aux = std::sqrt(pth_u - cs.P.sum());
            cs.lm.x_final[cs.lm.x_final.size() - 1] = cs.aux;
            link_adopted = link_pa;
        } else {
            // budget binding (or the unconstrained solve failed): equality
            // case, warm started from wherever stage 1 ended
            long m = static_cast<long>(cs.act.size());
            Eigen::VectorXd xw(2 * m + 2);
            xw.head(m) = cs.P;
            xw.segment(m, m) = cs.b;
            xw[2 * m] = cs.lambda1;
            xw[2 * m + 1] = 0.0;
            CaseSolve pa = solve_case(cnr_u, link_pa, ConstraintCase::PowerActive, cs.act,
                                      xw, lm, out.resolves);
            if (!usable_root(pa.lm, tol)) {
                // recovery: start from the decoupled two-multiplier prediction
                ++out.restarts;
                auto mult = budget_multipliers(cnr_usable, alpha, ber_th, pth_u, lam_hat);
                if (mult) {
                    Eigen::VectorXd hb, hp;
                    stationary_roots(cnr_usable, mult->lambda1, alpha + mult->lambda2, rw,
                                     ber_th, hb, hp);
                    std::vector<int> act3;
                    std::vector<double> p3, b3;
                    for (size_t k = 0; k < usable.size(); ++k) {
                        if (hb[static_cast<long>(k)] < kBitKeep) continue;
                        act3.push_back(usable[k]);
                        p3.push_back(hp[static_cast<long>(k)]);
                        b3.push_back(hb[static_cast<long>(k)]);
                    }
                    if (!act3.empty()) {
                        long m3 = static_cast<long>(act3.size());
                        Eigen::VectorXd x3(2 * m3 + 2);
                        for (long k = 0; k < m3; ++k) {
                            x3[k] = p3[k];
                            x3[m3 + k] = b3[k];
                        }
                        x3[2 * m3] = mult->lambda1;
                        x3[2 * m3 + 1] = mult->lambda2;
                        pa = solve_case(cnr_u, link_pa, ConstraintCase::PowerActive, act3,
                                        x3, lm, out.resolves);
                    }
                }
            }
            if (usable_root(pa.lm, tol) && pa.aux >= 0.0) {
                cs = std::move(pa);
                case_used = ConstraintCase::PowerActive;
                link_adopted = link_pa;
            } else if (usable_root(pa.lm, tol) && !usable_root(cs.lm, tol)) {
                // equality root has a negative multiplier: the budget is
                // actually slack, retry the inactive case warm from it
                long mp = static_cast<long>(pa.act.size());
                Eigen::VectorXd xr(2 * mp + 2);
                xr.head(mp) = pa.P;
                xr.segment(mp, mp) = pa.b;
                xr[2 * mp] = pa.lambda1;
                xr[2 * mp + 1] = 0.0;
                CaseSolve rerun = solve_case(cnr_u, link_pi, ConstraintCase::PowerInactive,
                                             pa.act, xr, lm, out.resolves);
                if (usable_root(rerun.lm, tol) && rerun.P.sum() <= pth_u) {
                    rerun.aux = std::sqrt(pth_u - rerun.P.sum());
                    rerun.lm.x_final[rerun.lm.x_final.size() - 1] = rerun.aux;
                    cs = std::move(rerun);
                    link_adopted = link_pa;
                }
            }
        }
    }

    bool ok = usable_root(cs.lm, tol);
    if (ok && std::isfinite(pth_u)) {
        double ptol = 10.0 * tol + pth_u * 1e-12;
        if (cs.P.sum() > pth_u + ptol) ok = false;
    }
    if (ok && !cs.act.empty()) sharpen(cs, cnr_u, link_adopted, case_used, lm.polish_to);

    out.continuous.powers = cs.P;
    out.continuous.bits = cs.b;
    out.continuous.lambda1 = cs.lambda1;
    out.continuous.aux = cs.aux;
    out.active = cs.act;
    out.solver = cs.lm;
    out.case_used = case_used;
    out.converged = ok;
    out.achieved_avg_ber = continuous_avg_ber(cs.P, cs.b, gather(cnr_u, cs.act));

    // finalization: floor to an integer constellation, null anything below
    // 4-QAM; powers ride along unchanged except on nulled subcarriers
    for (size_t k = 0; k < cs.act.size(); ++k) {
        double bi = cs.b[static_cast<long>(k)];
        if (bi >= 2.0) {
            out.final_alloc.bits[cs.act[k]] = std::floor(bi);
            out.final_alloc.powers[cs.act[k]] = cs.P[static_cast<long>(k)] * kPowerUnit;
        }
    }
    for (long i = 0; i < n; ++i) {
        out.throughput += out.final_alloc.bits[i];
        out.total_power += out.final_alloc.powers[i];
    }
    return out;
}

KktReport verify_kkt(const LoadingResult& result, const ChannelRealization& channel,
                     const LinkParams& params) {
    KktReport rep;
    rep.empty = result.active.empty();
    rep.lambda1 = result.continuous.lambda1;
    rep.aux = result.continuous.aux;
    rep.lambda2_nonnegative =
        result.case_used != ConstraintCase::PowerActive || result.continuous.aux >= 0.0;

    long na = static_cast<long>(result.active.size());
    Eigen::VectorXd cnr_act(na);
    for (long k = 0; k < na; ++k)
        cnr_act[k] = channel.cnr[result.active[static_cast<size_t>(k)]] * kPowerUnit;
    LinkParams units{params.ber_threshold, params.power_threshold / kPowerUnit, params.alpha,
                     params.rescale_ber_row};
    Eigen::VectorXd S = residuals(result.continuous.pack(), cnr_act, units, result.case_used);
    rep.residual_inf = S.size() ? S.lpNorm<Eigen::Infinity>() : 0.0;

    double sum_p_watts = result.continuous.powers.sum() * kPowerUnit;
    rep.power_slack_watts = params.power_threshold - sum_p_watts;

    bool any_final = false;
    for (double b : result.final_alloc.bits)
        if (b > 0.0) any_final = true;
    if (any_final) {
        rep.final_avg_ber = average_ber(result.final_alloc, channel.cnr);
        rep.final_ber_within_threshold =
            rep.final_avg_ber <= params.ber_threshold * (1.0 + 1e-9);
    } else {
        rep.final_avg_ber = std::numeric_limits<double>::quiet_NaN();
        rep.final_ber_within_threshold = true;
    }
    return rep;
}

}  // namespace ofdmload
