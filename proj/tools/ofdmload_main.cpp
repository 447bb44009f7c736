// Command-line front end: single-shot loading, figure sweeps, self-test audits.
// Exit codes: 0 = ran to completion (non-convergence is data, not failure),
// 1 = usage/config error, 2 = internal numerical fault or failed self-test.

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ofdmload/baseline.hpp"
#include "ofdmload/experiments.hpp"
#include "ofdmload/loader.hpp"
#include "ofdmload/selftest.hpp"

namespace {

using namespace ofdmload;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// "--pth 1e-4", "--pth 0.1mW", "--pth 100uW", "--pth inf"
double parse_power(std::string s) {
    double scale = 1.0;
    auto ends_with = [&](const char* suf) {
        size_t l = std::strlen(suf);
        if (s.size() < l) return false;
        for (size_t i = 0; i < l; ++i)
            if (std::tolower(s[s.size() - l + i]) != std::tolower(suf[i])) return false;
        return true;
    };
    if (ends_with("uw")) {
        scale = 1e-6;
        s.resize(s.size() - 2);
    } else if (ends_with("mw")) {
        scale = 1e-3;
        s.resize(s.size() - 2);
    } else if (ends_with("w")) {
        s.resize(s.size() - 1);
    }
    if (s == "inf" || s == "none")
        return std::numeric_limits<double>::infinity();
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters in power value");
    if (!(v > 0.0) && !std::isinf(v)) throw std::invalid_argument("power must be positive");
    return v * scale;
}

double nominal_snr_to_noise(double snr_db) { return 1e-6 * std::pow(10.0, -snr_db / 10.0); }

struct CommonOpts {
    int n = 128;
    int taps = 5;
    double decay = 0.2;
    std::uint64_t seed = 1234;
    double snr_db = 20.0;
    std::string noise_var;  // explicit sigma_n^2, overrides --snr-db when given
    double alpha = 0.5;
    double ber_th = 1e-4;
    std::string pth = "inf";
    bool rescale_ber_row = false;
    double mu0 = 1e5, nu1 = 0.5, nu2 = 2.0, mu_th = 1.0;
    double tol_res = 1e-6, tol_step = 1e-6, polish_to = 1e-11;
    int kmax = 10000;
    bool strict = false;
};

void add_common(CLI::App* sub, CommonOpts& o) {
    sub->set_config("--config", "", "key=value config file; flags override it");
    sub->add_option("--n", o.n, "subcarriers")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--taps", o.taps, "channel taps")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--decay", o.decay, "power-delay-profile decay per tap")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", o.seed, "channel RNG seed")->capture_default_str();
    sub->add_option("--snr-db", o.snr_db,
                    "nominal SNR in dB mapped to sigma_n^2 = 1e-6*10^(-snr/10) W")
        ->capture_default_str();
    sub->add_option("--noise-var", o.noise_var,
                    "sigma_n^2 in watts, suffixes mW/uW allowed; overrides --snr-db");
    sub->add_option("--alpha", o.alpha, "objective weight in (0,1)")
        ->capture_default_str()
        ->check(CLI::Range(1e-9, 1.0 - 1e-9).description("FLOAT in (0,1)"));
    sub->add_option("--ber-th", o.ber_th, "average-BER threshold")
        ->capture_default_str()
        ->check(CLI::Range(1e-300, 0.2 - 1e-12).description("FLOAT in (0,0.2)"));
    sub->add_option("--pth", o.pth,
                    "total power budget in watts, suffixes mW/uW, 'inf' = unconstrained")
        ->capture_default_str();
    sub->add_flag("--rescale-ber-row", o.rescale_ber_row,
                  "divide the BER-equality residual row by the threshold (conditioning aid)");
    sub->add_option("--mu0", o.mu0, "initial damping")->capture_default_str();
    sub->add_option("--nu1", o.nu1, "damping decrease factor")
        ->capture_default_str();
    sub->add_option("--nu2", o.nu2, "damping increase factor")
        ->capture_default_str();
    sub->add_option("--mu-th", o.mu_th, "damping acceptance threshold")
        ->capture_default_str();
    sub->add_option("--tol-res", o.tol_res, "residual tolerance on ||S||_inf")
        ->capture_default_str();
    sub->add_option("--tol-step", o.tol_step, "step tolerance on ||d||_inf")
        ->capture_default_str();
    sub->add_option("--kmax", o.kmax, "iteration cap")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_flag("--strict-schedule", o.strict,
                  "literal damping schedule: never accept steps at mu <= mu-th");
    sub->add_option("--polish-to", o.polish_to,
                    "post-convergence Newton sharpening target, <= 0 disables")
        ->capture_default_str();
}

ChannelParams channel_params(const CommonOpts& o) {
    ChannelParams cp;
    cp.n_subcarriers = o.n;
    cp.n_taps = o.taps;
    cp.decay = o.decay;
    cp.seed = o.seed;
    cp.noise_variance =
        o.noise_var.empty() ? nominal_snr_to_noise(o.snr_db) : parse_power(o.noise_var);
    return cp;
}

LinkParams link_params(const CommonOpts& o) {
    LinkParams lp;
    lp.alpha = o.alpha;
    lp.ber_threshold = o.ber_th;
    lp.power_threshold = parse_power(o.pth);
    lp.rescale_ber_row = o.rescale_ber_row;
    return lp;
}

LmConfig lm_config(const CommonOpts& o) {
    LmConfig lm;
    lm.mu0 = o.mu0;
    lm.nu1 = o.nu1;
    lm.nu2 = o.nu2;
    lm.mu_th = o.mu_th;
    lm.tol_residual = o.tol_res;
    lm.tol_step = o.tol_step;
    lm.k_max = o.kmax;
    lm.strict_schedule = o.strict;
    lm.polish_to = o.polish_to;
    return lm;
}

double final_alloc_ber(const LoadingResult& r, const std::vector<double>& cnr) {
    for (double b : r.final_alloc.bits)
        if (b > 0.0) return average_ber(r.final_alloc, cnr);
    return 0.0;
}

int cmd_load(const CommonOpts& o, std::uint64_t trial, const std::string& trace_path) {
    ChannelParams cp = channel_params(o);
    LinkParams lp = link_params(o);
    LmConfig lm = lm_config(o);
    if (!trace_path.empty()) lm.keep_trace = true;

    ChannelRealization ch = generate_channel(cp, trial);
    LoadingResult r = optimize(ch, lp, lm);

    std::cout << "trial,case,converged,iters,throughput_bits,total_power_W,avg_ber_final,"
                 "res_norm\n";
    std::cout << trial << ','
              << (r.case_used == ConstraintCase::PowerActive ? "PowerActive" : "PowerInactive")
              << ',' << (r.converged ? 1 : 0) << ',' << r.solver.iterations << ','
              << fmt(r.throughput) << ',' << fmt(r.total_power) << ','
              << fmt(final_alloc_ber(r, ch.cnr)) << ',' << fmt(r.solver.residual_norm) << '\n';

    KktReport rep = verify_kkt(r, ch, lp);
    std::cout << "verify: residual_inf=" << fmt(rep.residual_inf)
              << " power_slack_W=" << fmt(rep.power_slack_watts)
              << " lambda1=" << fmt(rep.lambda1) << " aux=" << fmt(rep.aux)
              << " lambda2_nonnegative=" << (rep.lambda2_nonnegative ? 1 : 0)
              << " final_avg_ber=" << fmt(rep.final_avg_ber)
              << " within_threshold=" << (rep.final_ber_within_threshold ? 1 : 0)
              << " empty=" << (rep.empty ? 1 : 0) << " termination="
              << to_string(r.solver.termination) << " prenulled=" << r.prenulled
              << " restarts=" << r.restarts << '\n';

    if (!trace_path.empty()) {
        std::ofstream tf(trace_path);
        tf << "k, mu, res_norm, step_norm, accepted\n";
        for (const TraceRow& row : r.solver.trace)
            tf << row.k << ", " << fmt(row.mu) << ", " << fmt(row.res_norm) << ", "
               << fmt(row.step_norm) << ", " << (row.accepted ? 1 : 0) << '\n';
        if (!tf) {
            std::cerr << "failed writing trace file " << trace_path << '\n';
            return 2;
        }
    }
    return 0;
}

std::string timestamp() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tmv{};
    localtime_r(&t, &tmv);
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tmv);
    return buf;
}

void write_run_config(const std::filesystem::path& dir, const SweepConfig& cfg, int figure,
                      const CommonOpts& o) {
    std::ofstream f(dir / "run-config.txt");
    f << "kind = " << to_string(cfg.kind) << '\n';
    if (figure) f << "figure = " << figure << '\n';
    f << "grid =";
    for (double g : cfg.grid) f << ' ' << fmt(g);
    f << '\n';
    f << "trials = " << cfg.n_trials << '\n';
    f << "jobs = " << cfg.jobs << '\n';
    f << "seed = " << cfg.channel.seed << '\n';
    f << "n_subcarriers = " << cfg.channel.n_subcarriers << '\n';
    f << "n_taps = " << cfg.channel.n_taps << '\n';
    f << "decay = " << fmt(cfg.channel.decay) << '\n';
    f << "noise_variance_W = " << fmt(cfg.channel.noise_variance) << '\n';
    f << "alpha = " << fmt(cfg.link.alpha) << '\n';
    f << "ber_threshold = " << fmt(cfg.link.ber_threshold) << '\n';
    f << "power_threshold_W = " << fmt(cfg.link.power_threshold) << '\n';
    f << "rescale_ber_row = " << (cfg.link.rescale_ber_row ? 1 : 0) << '\n';
    f << "mu0 = " << fmt(cfg.lm.mu0) << '\n';
    f << "nu1 = " << fmt(cfg.lm.nu1) << '\n';
    f << "nu2 = " << fmt(cfg.lm.nu2) << '\n';
    f << "mu_th = " << fmt(cfg.lm.mu_th) << '\n';
    f << "tol_residual = " << fmt(cfg.lm.tol_residual) << '\n';
    f << "tol_step = " << fmt(cfg.lm.tol_step) << '\n';
    f << "k_max = " << cfg.lm.k_max << '\n';
    f << "strict_schedule = " << (cfg.lm.strict_schedule ? 1 : 0) << '\n';
    f << "polish_to = " << fmt(cfg.lm.polish_to) << '\n';
    f << "prealloc_snr = " << (cfg.emit_prealloc_snr ? 1 : 0) << '\n';
    (void)o;
}

int cmd_sweep(const CommonOpts& o, int figure, const std::string& kind_name,
              std::vector<double> grid, int trials, int jobs, std::string out_dir,
              bool user_noise, bool prealloc_snr) {
    SweepConfig cfg;
    cfg.channel = channel_params(o);
    cfg.link = link_params(o);
    cfg.lm = lm_config(o);
    cfg.n_trials = trials;
    cfg.jobs = jobs;
    cfg.emit_prealloc_snr = prealloc_snr;

    switch (figure) {
        case 0:
            break;  // no preset: --kind and --grid drive everything
        case 1:
            cfg.kind = SweepKind::Snr;
            cfg.grid = {10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30};
            break;
        case 2:
            cfg.kind = SweepKind::Alpha;
            cfg.grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
            if (!user_noise) cfg.channel.noise_variance = 1e-9;
            break;
        case 3:
            cfg.kind = SweepKind::PowerThreshold;
            cfg.grid = {2e-5, 5e-5, 1e-4, 1.5e-4, 2e-4, 3e-4, 5e-4, 7.5e-4, 1e-3};
            if (!user_noise) cfg.channel.noise_variance = 1e-9;
            break;
        case 4:
            cfg.kind = SweepKind::BaselineCompare;
            cfg.grid = {10, 12, 14, 16};
            break;
        default:
            std::cerr << "unknown figure id " << figure << " (valid: 1-4)\n";
            return 1;
    }
    if (!kind_name.empty()) {
        if (kind_name == "Snr")
            cfg.kind = SweepKind::Snr;
        else if (kind_name == "Alpha")
            cfg.kind = SweepKind::Alpha;
        else if (kind_name == "PowerThreshold")
            cfg.kind = SweepKind::PowerThreshold;
        else if (kind_name == "BaselineCompare")
            cfg.kind = SweepKind::BaselineCompare;
        else {
            std::cerr << "unknown sweep kind '" << kind_name
                      << "' (Snr|Alpha|PowerThreshold|BaselineCompare)\n";
            return 1;
        }
    }
    if (!grid.empty()) cfg.grid = std::move(grid);
    if (figure == 0 && kind_name.empty()) {
        std::cerr << "sweep needs --figure or --kind\n";
        return 1;
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }

    std::filesystem::path dir;
    if (!out_dir.empty()) {
        dir = out_dir;
    } else {
        const char* base = std::getenv("OFDMLOAD_OUT");
        dir = std::filesystem::path(base ? base : "runs") /
              (std::string(to_string(cfg.kind)) + "-" + timestamp());
    }
    std::filesystem::create_directories(dir);
    write_run_config(dir, cfg, figure, o);

    SweepResult result = run_sweep(cfg);
    emit(result, dir);

    std::cout << "wrote " << (dir / "aggregate.csv").string() << '\n';
    std::ifstream agg(dir / "aggregate.csv");
    std::string line;
    while (std::getline(agg, line)) std::cout << line << '\n';
    return 0;
}

int cmd_selftest(bool quick) {
    std::vector<selftest::AuditResult> audits = selftest::run_all(quick);
    bool all = true;
    std::printf("%-24s %-6s %-14s %-12s %8s %9s\n", "audit", "result", "measured", "bound",
                "checked", "seconds");
    for (const auto& a : audits) {
        all = all && a.pass;
        std::printf("%-24s %-6s %-14.6g %-12.6g %8d %9.2f\n", a.name.c_str(),
                    a.pass ? "pass" : "FAIL", a.measured, a.bound, a.checked, a.seconds);
        if (!a.pass && !a.detail.empty()) std::printf("  %s\n", a.detail.c_str());
    }
    return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "joint bit- and power-loading for OFDM: slack-variable KKT system solved by "
        "Levenberg-Marquardt, with figure sweeps and a uniform-power greedy baseline"};
    app.require_subcommand(1);

    CommonOpts lo;
    std::uint64_t trial = 0;
    std::string trace_path;
    CLI::App* load = app.add_subcommand("load", "solve one channel realization");
    add_common(load, lo);
    load->add_option("--trial", trial, "Monte-Carlo trial index")->capture_default_str();
    load->add_option("--trace", trace_path, "write the solver iteration trace CSV here");

    CommonOpts so;
    int figure = 0;
    std::string kind_name;
    std::vector<double> grid;
    int trials = 1000;
    int jobs = 1;
    std::string out_dir;
    CLI::App* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep with CSV output");
    add_common(sweep, so);
    CLI::Option* fig_opt =
        sweep->add_option("--figure", figure, "canned sweep preset: 1 snr, 2 alpha, 3 power budget, 4 greedy comparison");
    sweep->add_option("--kind", kind_name, "Snr|Alpha|PowerThreshold|BaselineCompare")
        ->excludes(fig_opt);
    sweep->add_option("--grid", grid, "swept values, overrides the preset grid")
        ->delimiter(',');
    sweep->add_option("--trials", trials, "Monte-Carlo trials per grid point")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sweep->add_option("--jobs", jobs, "worker threads")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sweep->add_option("--out", out_dir,
                      "output directory (default: $OFDMLOAD_OUT or ./runs, timestamped)");
    bool prealloc_snr = false;
    sweep->add_flag("--prealloc-snr", prealloc_snr,
                    "add a trials.csv column with the uniform-budget SNR (pth/N * mean cnr)");

    bool quick = false;
    CLI::App* selftest_cmd =
        app.add_subcommand("selftest", "run the built-in numerical audits");
    selftest_cmd->add_flag("--quick", quick, "reduced trial counts, a few seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (load->parsed()) return cmd_load(lo, trial, trace_path);
        if (sweep->parsed()) {
            bool user_noise = sweep->count("--noise-var") > 0;
            return cmd_sweep(so, figure, kind_name, grid, trials, jobs, out_dir, user_noise,
                             prealloc_snr);
        }
        if (selftest_cmd->parsed()) return cmd_selftest(quick);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical fault: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
