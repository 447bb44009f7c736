#include "ofdmload/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>

#include "ofdmload/baseline.hpp"
#include "ofdmload/loader.hpp"

namespace ofdmload {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDefaultCap = 1e-4;  // watts, cap used by the constrained curves

double nominal_snr_to_noise(double snr_db) {
    // nominal SNR is referenced to 1 uW per subcarrier into a unit-energy channel
    return 1e-6 * std::pow(10.0, -snr_db / 10.0);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double final_alloc_ber(const LoadingResult& r, const std::vector<double>& cnr) {
    for (double b : r.final_alloc.bits)
        if (b > 0.0) return average_ber(r.final_alloc, cnr);
    return 0.0;
}

double mean_inst_snr_of(const Allocation& alloc, const std::vector<double>& cnr) {
    double acc = 0.0;
    for (size_t i = 0; i < cnr.size(); ++i) acc += alloc.powers[i] * cnr[i];
    return cnr.empty() ? 0.0 : acc / static_cast<double>(cnr.size());
}

struct CurveDef {
    std::string name;
    bool is_baseline = false;
};

std::vector<CurveDef> curves_for(const SweepConfig& cfg) {
    switch (cfg.kind) {
        case SweepKind::Snr:
        case SweepKind::Alpha:
            return {{"uncapped"}, {"capped"}};
        case SweepKind::PowerThreshold:
            return {{"proposed"}};
        case SweepKind::BaselineCompare:
            return {{"proposed"}, {"baseline", true}};
    }
    return {};
}
}  // namespace

const char* to_string(SweepKind k) {
    switch (k) {
        case SweepKind::Snr: return "Snr";
        case SweepKind::Alpha: return "Alpha";
        case SweepKind::PowerThreshold: return "PowerThreshold";
        case SweepKind::BaselineCompare: return "BaselineCompare";
    }
    return "Unknown";
}

void SweepConfig::validate() const {
    if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
    for (size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("sweep: grid must be strictly increasing");
    if (n_trials < 1) throw std::invalid_argument("sweep: n_trials must be >= 1");
    if (jobs < 1) throw std::invalid_argument("sweep: jobs must be >= 1");
    if (channel.n_subcarriers < 1 || channel.n_taps < 1)
        throw std::invalid_argument("sweep: channel dimensions must be positive");
    if (!(link.ber_threshold > 0.0) || link.ber_threshold >= 0.2)
        throw std::invalid_argument("sweep: ber_threshold must lie in (0, 0.2)");
    if (!(link.alpha > 0.0) || !(link.alpha < 1.0))
        throw std::invalid_argument("sweep: alpha must lie in (0, 1)");
    if (kind == SweepKind::Alpha)
        for (double a : grid)
            if (!(a > 0.0) || !(a < 1.0))
                throw std::invalid_argument("sweep: alpha grid must lie in (0, 1)");
    if (kind == SweepKind::PowerThreshold)
        for (double p : grid)
            if (!(p > 0.0))
                throw std::invalid_argument("sweep: power thresholds must be positive");
}

double average_snr_db(const std::vector<TrialRecord>& records) {
    double acc = 0.0;
    long cnt = 0;
    for (const TrialRecord& r : records) {
        if (!r.converged) continue;
        acc += r.mean_inst_snr;
        ++cnt;
    }
    if (cnt == 0 || !(acc > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return 10.0 * std::log10(acc / static_cast<double>(cnt));
}

SweepResult run_sweep(const SweepConfig& config) {
    config.validate();
    std::vector<CurveDef> curves = curves_for(config);
    size_t n_grid = config.grid.size();
    size_t n_trials = static_cast<size_t>(config.n_trials);
    size_t n_curves = curves.size();

    double cap = std::isfinite(config.link.power_threshold) ? config.link.power_threshold
                                                            : kDefaultCap;

    // slot layout: (grid, trial) pairs each produce one record per curve;
    // records land at fixed indices so threading cannot reorder output
    std::vector<TrialRecord> slots(n_grid * n_trials * n_curves);
    std::atomic<size_t> next{0};
    size_t n_tasks = n_grid * n_trials;

    auto run_task = [&](size_t task) {
        size_t g = task / n_trials;
        size_t t = task % n_trials;
        ChannelParams cp = config.channel;
        if (config.kind == SweepKind::Snr || config.kind == SweepKind::BaselineCompare)
            cp.noise_variance = nominal_snr_to_noise(config.grid[g]);
        ChannelRealization ch = generate_channel(cp, t);

        for (size_t c = 0; c < n_curves; ++c) {
            TrialRecord& rec = slots[(g * n_trials + t) * n_curves + c];
            rec.curve = curves[c].name;
            rec.swept_value = config.grid[g];
            rec.trial = static_cast<int>(t);
            if (curves[c].is_baseline) {
                rec.case_used = -1;  // data filled from the proposed run below
                continue;
            }

            LinkParams lp = config.link;
            switch (config.kind) {
                case SweepKind::Snr:
                    lp.power_threshold = (c == 0) ? kInf : cap;
                    break;
                case SweepKind::Alpha:
                    lp.alpha = config.grid[g];
                    lp.power_threshold = (c == 0) ? kInf : cap;
                    break;
                case SweepKind::PowerThreshold:
                    lp.power_threshold = config.grid[g];
                    break;
                case SweepKind::BaselineCompare:
                    lp.power_threshold = cap;
                    break;
            }
            if (std::isfinite(lp.power_threshold)) {
                double csum = 0.0;
                for (double c : ch.cnr) csum += c;
                double n = static_cast<double>(ch.cnr.size());
                rec.prealloc_snr = lp.power_threshold / n * (csum / n);
            } else {
                rec.prealloc_snr = std::numeric_limits<double>::quiet_NaN();
            }
            LoadingResult r = optimize(ch, lp, config.lm);
            rec.converged = r.converged;
            rec.case_used = r.case_used == ConstraintCase::PowerActive ? 1 : 0;
            rec.iterations = r.solver.iterations;
            rec.throughput = r.throughput;
            rec.total_power = r.total_power;
            rec.avg_ber_final = final_alloc_ber(r, ch.cnr);
            rec.res_norm = r.solver.residual_norm;
            rec.mean_inst_snr = mean_inst_snr_of(r.final_alloc, ch.cnr);

            if (config.kind == SweepKind::BaselineCompare) {
                ComparisonRow cmp = compare(ch, lp, r);
                TrialRecord& brec = slots[(g * n_trials + t) * n_curves + c + 1];
                if (!cmp.skipped) {
                    rec.baseline_throughput = cmp.baseline_throughput;
                    brec.converged = true;
                    brec.case_used = -1;
                    brec.throughput = cmp.baseline_throughput;
                    brec.total_power = cmp.matched_power;
                    BaselineConfig bc;
                    bc.total_power = cmp.matched_power;
                    bc.ber_threshold = lp.ber_threshold;
                    Allocation ba = greedy_load(ch.cnr, bc);
                    double any = 0.0;
                    for (double b : ba.bits) any += b;
                    brec.avg_ber_final = any > 0.0 ? average_ber(ba, ch.cnr) : 0.0;
                    // both comparison curves are plotted against the SNR the
                    // proposed allocation actually realized
                    brec.mean_inst_snr = rec.mean_inst_snr;
                    brec.prealloc_snr = rec.prealloc_snr;
                    brec.baseline_throughput = cmp.baseline_throughput;
                }
            }
        }
    };

    int jobs = static_cast<int>(std::min<size_t>(static_cast<size_t>(config.jobs), n_tasks));
    if (jobs <= 1) {
        for (size_t task = 0; task < n_tasks; ++task) run_task(task);
    } else {
        auto worker = [&]() {
            for (;;) {
                size_t task = next.fetch_add(1);
                if (task >= n_tasks) return;
                run_task(task);
            }
        };
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }

    SweepResult out;
    out.config = config;
    out.records.reserve(slots.size());
    // curve-major, then grid, then trial: aggregate and plot files read in order
    for (size_t c = 0; c < n_curves; ++c)
        for (size_t g = 0; g < n_grid; ++g)
            for (size_t t = 0; t < n_trials; ++t)
                out.records.push_back(slots[(g * n_trials + t) * n_curves + c]);
    return out;
}

namespace {
struct Aggregate {
    std::string curve;
    double swept = 0.0;
    double mean_throughput = std::numeric_limits<double>::quiet_NaN();
    double mean_power = std::numeric_limits<double>::quiet_NaN();
    double mean_ber = std::numeric_limits<double>::quiet_NaN();
    double convergence_rate = 0.0;
    double avg_snr_db = std::numeric_limits<double>::quiet_NaN();
};

std::vector<Aggregate> aggregate_rows(const SweepResult& result) {
    // records are curve-major and grid-ordered; walk contiguous groups
    std::vector<Aggregate> rows;
    size_t i = 0;
    while (i < result.records.size()) {
        size_t j = i;
        const TrialRecord& head = result.records[i];
        std::vector<TrialRecord> group;
        while (j < result.records.size() && result.records[j].curve == head.curve &&
               result.records[j].swept_value == head.swept_value)
            group.push_back(result.records[j++]);
        Aggregate a;
        a.curve = head.curve;
        a.swept = head.swept_value;
        double thr = 0.0, pw = 0.0, ber = 0.0;
        long conv = 0, loaded = 0;
        for (const TrialRecord& r : group) {
            if (!r.converged) continue;
            ++conv;
            thr += r.throughput;
            pw += r.total_power;
            if (r.throughput > 0.0) {
                ber += r.avg_ber_final;
                ++loaded;
            }
        }
        a.convergence_rate = static_cast<double>(conv) / static_cast<double>(group.size());
        if (conv) {
            a.mean_throughput = thr / static_cast<double>(conv);
            a.mean_power = pw / static_cast<double>(conv);
        }
        if (loaded) a.mean_ber = ber / static_cast<double>(loaded);
        a.avg_snr_db = average_snr_db(group);
        rows.push_back(std::move(a));
        i = j;
    }
    return rows;
}
}  // namespace

void emit(const SweepResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    bool with_pre = result.config.emit_prealloc_snr;
    std::ofstream tf(dir / "trials.csv");
    tf << "curve,swept_value,trial,case,converged,iterations,throughput_bits,"
          "total_power_W,avg_ber_final,res_norm,mean_inst_snr,baseline_throughput";
    if (with_pre) tf << ",prealloc_snr";
    tf << '\n';
    for (const TrialRecord& r : result.records) {
        const char* cse = r.case_used == 1 ? "PowerActive"
                          : r.case_used == 0 ? "PowerInactive"
                                             : "-";
        tf << r.curve << ',' << fmt(r.swept_value) << ',' << r.trial << ',' << cse << ','
           << (r.converged ? 1 : 0) << ',' << r.iterations << ',' << fmt(r.throughput)
           << ',' << fmt(r.total_power) << ',' << fmt(r.avg_ber_final) << ','
           << fmt(r.res_norm) << ',' << fmt(r.mean_inst_snr) << ','
           << (r.baseline_throughput < 0.0 ? std::string("nan")
                                           : fmt(r.baseline_throughput));
        if (with_pre) tf << ',' << fmt(r.prealloc_snr);
        tf << '\n';
    }
    if (!tf) throw std::runtime_error("emit: failed writing trials.csv");
    tf.close();

    std::vector<Aggregate> rows = aggregate_rows(result);
    std::ofstream af(dir / "aggregate.csv");
    af << "curve,swept_value,mean_throughput,mean_power_W,mean_final_ber,"
          "convergence_rate,avg_snr_db\n";
    for (const Aggregate& a : rows)
        af << a.curve << ',' << fmt(a.swept) << ',' << fmt(a.mean_throughput) << ','
           << fmt(a.mean_power) << ',' << fmt(a.mean_ber) << ','
           << fmt(a.convergence_rate) << ',' << fmt(a.avg_snr_db) << '\n';
    if (!af) throw std::runtime_error("emit: failed writing aggregate.csv");
    af.close();

    bool x_is_snr = result.config.kind == SweepKind::Snr ||
                    result.config.kind == SweepKind::BaselineCompare;
    std::map<std::string, std::ofstream> plots;
    for (const Aggregate& a : rows) {
        for (const char* metric : {"throughput", "power"}) {
            std::string key = "plot_" + a.curve + "_" + metric + ".dat";
            auto it = plots.find(key);
            if (it == plots.end()) {
                it = plots.emplace(key, std::ofstream(dir / key)).first;
                it->second << "# x " << metric << '\n';
            }
            double x = x_is_snr ? a.avg_snr_db : a.swept;
            double y = metric[0] == 't' ? a.mean_throughput : a.mean_power;
            it->second << fmt(x) << ' ' << fmt(y) << '\n';
        }
    }
    for (auto& [key, fs] : plots)
        if (!fs) throw std::runtime_error("emit: failed writing " + key);
}

}  // namespace ofdmload
