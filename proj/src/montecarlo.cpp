#include "sparsepm/montecarlo.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "sparsepm/rng.hpp"

namespace sparsepm {

namespace {

constexpr int kTauSafetyCap = 200000;

}  // namespace

TrialRecord run_trial(const SimPointConfig& cfg, std::uint64_t trial_index) {
    TrialRng rng(cfg.master_seed, trial_index);
    const ChannelParams ch = make_channel(cfg.p);

    Message theta(cfg.k);
    for (auto& b : theta) b = rng.next_bit() ? 1 : 0;

    SessionConfig scfg;
    scfg.k = cfg.k;
    scfg.epsilon = cfg.epsilon;
    scfg.d_max = cfg.d_max;
    scfg.rule = cfg.rule;
    scfg.feedback = cfg.feedback;

    EncoderSession enc(scfg, ch, theta);
    DecoderSession dec(scfg, ch);

    TrialRecord rec;
    using Clock = std::chrono::steady_clock;

    while (!dec.stopped()) {
        const bool comm_start =
            !dec.started() || phase_of(dec.posterior()) == Phase::communication;

        auto t0 = Clock::now();
        const ForwardBlock blk = enc.next_block();
        rec.wall_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0)
                           .count();

        std::vector<int> y(blk.bits.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = blk.bits[i] ^ (rng.next_bernoulli(cfg.p) ? 1 : 0);
        }

        t0 = Clock::now();
        const FeedbackPacket pkt = dec.absorb(blk.start_time, y);
        enc.absorb_feedback(pkt);
        rec.wall_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0)
                           .count();

        rec.d_list.push_back(static_cast<int>(pkt.bits.size()));
        rec.comm_start.push_back(comm_start ? 1 : 0);
        if (dec.time() > kTauSafetyCap) {
            throw std::logic_error("run_trial: session exceeded the safety cap");
        }
    }

    rec.tau = dec.time();
    rec.eta = static_cast<int>(rec.d_list.size());
    rec.comm_time = dec.communication_symbols();
    rec.conf_time = rec.tau - rec.comm_time;
    rec.error = dec.estimate() != enc.theta();
    return rec;
}

SummaryStats aggregate(const std::vector<TrialRecord>& records, int k) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    SummaryStats s;
    s.trials = static_cast<std::int64_t>(records.size());

    double sum_tau = 0.0, sum_tau2 = 0.0, sum_eta = 0.0, sum_eta2 = 0.0;
    double errors = 0.0;
    double d_all = 0.0, d_exsys = 0.0, d_comm = 0.0;
    std::int64_t n_all = 0, n_exsys = 0, n_comm = 0;
    double wall = 0.0;

    for (const auto& r : records) {
        sum_tau += r.tau;
        sum_tau2 += static_cast<double>(r.tau) * r.tau;
        sum_eta += r.eta;
        sum_eta2 += static_cast<double>(r.eta) * r.eta;
        errors += r.error ? 1.0 : 0.0;
        wall += static_cast<double>(r.wall_ns);
        for (std::size_t i = 0; i < r.d_list.size(); ++i) {
            d_all += r.d_list[i];
            ++n_all;
            if (i == 0) continue;
            d_exsys += r.d_list[i];
            ++n_exsys;
            if (r.comm_start[i]) {
                d_comm += r.d_list[i];
                ++n_comm;
            }
        }
    }

    const double n = static_cast<double>(s.trials);
    s.mean_tau = sum_tau / n;
    s.mean_eta = sum_eta / n;
    s.rate = k / s.mean_tau;
    s.fer = errors / n;
    s.mean_d_all = d_all / static_cast<double>(n_all);
    s.mean_d_exsys = n_exsys > 0 ? d_exsys / static_cast<double>(n_exsys)
                                 : std::numeric_limits<double>::quiet_NaN();
    s.mean_d_comm = n_comm > 0 ? d_comm / static_cast<double>(n_comm)
                               : std::numeric_limits<double>::quiet_NaN();
    s.ns_per_1000_symbols = wall / sum_tau * 1000.0;

    if (s.trials > 1) {
        const double var_tau = std::max(0.0, (sum_tau2 - n * s.mean_tau * s.mean_tau) / (n - 1));
        const double var_eta = std::max(0.0, (sum_eta2 - n * s.mean_eta * s.mean_eta) / (n - 1));
        s.tau_ci95 = 1.96 * std::sqrt(var_tau / n);
        s.eta_ci95 = 1.96 * std::sqrt(var_eta / n);
        s.rate_ci95 = k * s.tau_ci95 / (s.mean_tau * s.mean_tau);
    } else {
        s.tau_ci95 = s.eta_ci95 = s.rate_ci95 = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
}

std::vector<TrialRecord> run_point(const SimPointConfig& cfg) {
    if (cfg.trials < 1) throw std::invalid_argument("run_point: trials must be >= 1");
    std::vector<TrialRecord> records(static_cast<std::size_t>(cfg.trials));

    const int workers = std::max(1, cfg.threads);
    if (workers == 1) {
        for (std::int64_t i = 0; i < cfg.trials; ++i) {
            records[static_cast<std::size_t>(i)] = run_trial(cfg, static_cast<std::uint64_t>(i));
        }
        return records;
    }

    std::atomic<std::int64_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::int64_t i = next.fetch_add(1);
                if (i >= cfg.trials || failed.load()) return;
                try {
                    records[static_cast<std::size_t>(i)] =
                        run_trial(cfg, static_cast<std::uint64_t>(i));
                } catch (...) {
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) throw std::logic_error("run_point: a trial aborted as a defect");
    return records;
}

}  // namespace sparsepm
