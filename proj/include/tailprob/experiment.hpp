#ifndef TAILPROB_EXPERIMENT_HPP
#define TAILPROB_EXPERIMENT_HPP

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailprob/baselines.hpp"
#include "tailprob/ce.hpp"

namespace tailprob {

// Inputs for the brute-force two-sided ratio baseline.
struct RatioSpec {
    double q = 1.0;
    std::size_t n1 = 1, n2 = 1;
    double mu = 0.0, sigma = 1.0;
};

// One experiment row: a problem (possibly split into orthants whose
// estimates are summed), a method, and the replicate schedule.
struct ExperimentTask {
    std::string label;
    std::vector<TailProblem> problems;
    std::optional<RatioSpec> brute_ratio;  // used by brute_mc instead of problems if set
    std::optional<double> truth_log10_p;
    EstimateMethod method = EstimateMethod::mcmc_ce;
    std::size_t n = 10000;
    std::size_t m = 10000;
    std::size_t replicates = 100;
    std::size_t burn_in = 1000;
    std::uint64_t seed = 12345;
    std::optional<SamplerKind> sampler;
    double rho = 0.1;
    // Skip the CE machinery when a plain-MC pilot already resolves the
    // probability (pilot p-hat > 1e-3 with at least 30 hits).
    bool pilot_gate = true;
};

struct MetricsRow {
    std::string label;
    std::optional<double> target_log10_p;
    double mean_log10_p = kNegInf;
    std::optional<double> are;
    std::optional<double> smse_literal;
    std::optional<double> rel_rmse;
    std::optional<double> sd;
    double seconds = 0.0;
    std::size_t replicates = 0;
};

namespace detail {

// Natural-log estimate for one replicate; orthant estimates are summed.
inline double replicate_log_p(const ExperimentTask& task, std::size_t rep) {
    const std::uint64_t rep_seed = Rng::derived(task.seed, rep).next_u64();

    if (task.method == EstimateMethod::imhof) {
        double p = 0.0;
        for (const auto& problem : task.problems) {
            if (!problem.constraint.is_quad())
                throw std::invalid_argument("imhof requires a quadratic-form problem");
            const auto& qe = problem.constraint.quad();
            p += imhof(qe.lambdas, qe.q);
        }
        return p > 0.0 ? std::log(p) : kNegInf;
    }

    if (task.method == EstimateMethod::brute_mc) {
        if (task.brute_ratio) {
            Rng rng = Rng::derived(rep_seed, 7);
            const auto& rs = *task.brute_ratio;
            const TailEstimate est =
                brute_force_two_sided_ratio(rs.q, rs.n1, rs.n2, rs.mu, rs.sigma, task.m, rng);
            return est.n_proposal_hits > 0 ? est.log10_p * 2.302585092994045684 : kNegInf;
        }
        std::vector<double> logs;
        for (std::size_t i = 0; i < task.problems.size(); ++i) {
            Rng rng = Rng::derived(rep_seed, 7 + i);
            const TailEstimate est = pilot_mc(task.problems[i], task.n, rng);
            logs.push_back(est.n_proposal_hits > 0 ? std::log(est.p) : kNegInf);
        }
        return log_sum_exp(logs);
    }

    // CE methods, optionally short-circuited by the pilot screen.
    if (task.pilot_gate) {
        double p_total = 0.0;
        std::size_t hits_total = 0;
        for (std::size_t i = 0; i < task.problems.size(); ++i) {
            Rng rng = Rng::derived(rep_seed, 101 + i);
            const TailEstimate pilot = pilot_mc(task.problems[i], task.n, rng);
            p_total += pilot.hit_fraction;
            hits_total += pilot.n_proposal_hits;
        }
        if (p_total > 1e-3 && hits_total >= 30)
            return std::log(p_total);
    }

    std::vector<double> logs;
    for (std::size_t i = 0; i < task.problems.size(); ++i) {
        const auto& problem = task.problems[i];
        if (task.method == EstimateMethod::multilevel_ce) {
            Rng rng = Rng::derived(rep_seed, 51 + i);
            const TailEstimate est = multilevel_ce(problem, task.rho, task.n, task.m, rng);
            logs.push_back(est.n_proposal_hits > 0 ? est.log10_p * 2.302585092994045684
                                                   : kNegInf);
        } else {
            ChainConfig cfg;
            cfg.burn_in = task.burn_in;
            cfg.n_samples = task.n;
            cfg.sampler = task.sampler;
            cfg.seed = Rng::derived(rep_seed, 11 + i).next_u64();
            Rng is_rng = Rng::derived(rep_seed, 31 + i);
            const TailEstimate est = mcmc_ce(problem, cfg, task.m, is_rng);
            logs.push_back(est.n_proposal_hits > 0 ? est.log10_p * 2.302585092994045684
                                                   : kNegInf);
        }
    }
    return log_sum_exp(logs);
}

}  // namespace detail

// Runs the task's replicates concurrently (deterministic per-replicate
// seeds) and aggregates: the final estimate is the linear-space mean of the
// replicate estimates, computed through log-sum-exp.
inline MetricsRow run_task(const ExperimentTask& task, bool include_timing = true) {
    if (task.replicates < 1) throw std::invalid_argument("run_task: replicates must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<double> log_p(task.replicates, kNegInf);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const unsigned n_threads =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(task.replicates)));
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (unsigned w = 0; w < n_threads; ++w) {
        workers.emplace_back([&]() {
            for (;;) {
                const std::size_t rep = next.fetch_add(1);
                if (rep >= task.replicates) return;
                try {
                    log_p[rep] = detail::replicate_log_p(task, rep);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);

    const double log_r = std::log(static_cast<double>(task.replicates));
    const double log_mean = log_sum_exp(log_p) - log_r;

    MetricsRow row;
    row.label = task.label;
    row.replicates = task.replicates;
    row.mean_log10_p = log_mean / 2.302585092994045684;
    row.target_log10_p = task.truth_log10_p;

    if (task.truth_log10_p) {
        const double log_truth = *task.truth_log10_p * 2.302585092994045684;
        row.are = std::abs(std::expm1(log_mean - log_truth));
        double sum_sq_rel = 0.0;
        std::vector<double> log_sq_err;
        for (double lp : log_p) {
            const double rel_err = std::expm1(lp - log_truth);  // -1 when lp = -inf
            sum_sq_rel += rel_err * rel_err;
            log_sq_err.push_back(rel_err == 0.0 ? kNegInf : 2.0 * std::log(std::abs(rel_err)));
        }
        row.rel_rmse = std::sqrt(sum_sq_rel / static_cast<double>(task.replicates));
        // The literal supplement formula sum (p_i - p)^2 / (R p), in units of p.
        row.smse_literal = std::exp(log_truth + log_sum_exp(log_sq_err) - log_r);
    }
    if (task.replicates > 1) {
        // Sample SD of the replicate estimates, carried in units of the mean.
        double acc = 0.0;
        for (double lp : log_p) {
            const double x = std::exp(lp - log_mean) - 1.0;
            acc += x * x;
        }
        row.sd = std::exp(log_mean) *
                 std::sqrt(acc / static_cast<double>(task.replicates - 1));
    }
    if (include_timing) {
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return row;
}

inline std::vector<MetricsRow> run_experiment(const std::vector<ExperimentTask>& tasks,
                                              bool include_timing = true) {
    std::vector<MetricsRow> rows;
    rows.reserve(tasks.size());
    for (const auto& task : tasks) rows.push_back(run_task(task, include_timing));
    return rows;
}

// ---------------------------------------------------------------------------
// Report emission: bit-stable CSV and JSON with log10 values at 12
// significant digits and "-inf" spelled out.
// ---------------------------------------------------------------------------
enum class ReportFormat { csv, json };

namespace detail {

inline std::string fmt_sig(double v, int digits) {
    if (v == kNegInf) return "-inf";
    if (v == kInf) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

}  // namespace detail

inline void write_report_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
    out << "target_log10_p,mean_log10_p,ARE,SMSE_literal,rel_RMSE,sd,seconds\n";
    for (const auto& r : rows) {
        out << (r.target_log10_p ? detail::fmt_sig(*r.target_log10_p, 12) : "") << ','
            << detail::fmt_sig(r.mean_log10_p, 12) << ','
            << (r.are ? detail::fmt_sig(*r.are, 6) : "") << ','
            << (r.smse_literal ? detail::fmt_sig(*r.smse_literal, 6) : "") << ','
            << (r.rel_rmse ? detail::fmt_sig(*r.rel_rmse, 6) : "") << ','
            << (r.sd ? detail::fmt_sig(*r.sd, 6) : "") << ','
            << detail::fmt_sig(r.seconds, 6) << '\n';
    }
}

inline nlohmann::json report_json(const std::vector<MetricsRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json obj;
        obj["label"] = r.label;
        if (r.target_log10_p)
            obj["target_log10_p"] = nlohmann::json::parse(detail::fmt_sig(*r.target_log10_p, 12),
                                                          nullptr, false)
                                            .is_discarded()
                                        ? nlohmann::json(detail::fmt_sig(*r.target_log10_p, 12))
                                        : nlohmann::json::parse(
                                              detail::fmt_sig(*r.target_log10_p, 12));
        else
            obj["target_log10_p"] = nullptr;
        obj["mean_log10_p"] = (r.mean_log10_p == kNegInf)
                                  ? nlohmann::json("-inf")
                                  : nlohmann::json(r.mean_log10_p);
        obj["ARE"] = r.are ? nlohmann::json(*r.are) : nlohmann::json(nullptr);
        obj["SMSE_literal"] = r.smse_literal ? nlohmann::json(*r.smse_literal) : nlohmann::json(nullptr);
        obj["rel_RMSE"] = r.rel_rmse ? nlohmann::json(*r.rel_rmse) : nlohmann::json(nullptr);
        obj["sd"] = r.sd ? nlohmann::json(*r.sd) : nlohmann::json(nullptr);
        obj["seconds"] = r.seconds;
        obj["replicates"] = r.replicates;
        arr.push_back(std::move(obj));
    }
    return arr;
}

inline void write_report_json(const std::vector<MetricsRow>& rows, std::ostream& out) {
    out << report_json(rows).dump(2) << '\n';
}

inline void emit_report(const std::vector<MetricsRow>& rows, ReportFormat format,
                        const std::string& path) {
    if (rows.empty()) throw std::invalid_argument("emit_report: no rows");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_report: cannot write " + path);
    if (format == ReportFormat::csv) write_report_csv(rows, out);
    else write_report_json(rows, out);
}

}  // namespace tailprob

#endif
