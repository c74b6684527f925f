#include "sparsepm/cli.hpp"

#include <cstdio>
#include <exception>
#include <sstream>

#include "sparsepm/montecarlo.hpp"
#include "sparsepm/verify.hpp"

namespace sparsepm {

namespace {

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    for (const char c : text) {
        if (c == ',') {
            if (!cur.empty()) parts.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const auto& part : split_commas(text)) {
        const auto dots = part.find("..");
        if (dots != std::string::npos) {
            const int a = std::stoi(part.substr(0, dots));
            const int b = std::stoi(part.substr(dots + 2));
            if (b < a) throw std::invalid_argument("bad range: " + part);
            for (int v = a; v <= b; ++v) out.push_back(v);
        } else {
            out.push_back(std::stoi(part));
        }
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& part : split_commas(text)) out.push_back(std::stod(part));
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void RunConfig::validate_common() const {
    if (k_list.empty()) throw std::invalid_argument("config error: K list is empty");
    for (const int k : k_list) {
        if (k < 1 || k > 127) throw std::invalid_argument("config error: K out of [1, 127]");
    }
    if (p_list.empty() == c_list.empty()) {
        throw std::invalid_argument("config error: give exactly one of p / capacity");
    }
    for (const double p : p_list) {
        if (!(p > 0.0 && p < 0.5)) throw std::invalid_argument("config error: p out of (0, 0.5)");
    }
    for (const double c : c_list) {
        if (!(c > 0.0 && c < 1.0)) {
            throw std::invalid_argument("config error: capacity out of (0, 1)");
        }
    }
    if (!(epsilon > 0.0 && epsilon < 0.5)) {
        throw std::invalid_argument("config error: epsilon out of (0, 0.5)");
    }
    if (trials < 1) throw std::invalid_argument("config error: trials must be >= 1");
    if (d_max < 1 || d_max > 24) {
        throw std::invalid_argument("config error: dmax out of [1, 24]");
    }
    if (threads < 1) throw std::invalid_argument("config error: threads must be >= 1");
    rule_from_string(rule);          // throws on bad values
    feedback_from_string(feedback);
}

std::string simulate_csv_header() {
    return "K,p,C,epsilon,rule,feedback_mode,trials,rate,mean_tau,mean_eta,meanD_all,"
           "meanD_exsys,meanD_comm,fer,rate_ci95,ns_per_1000_symbols,tau_B,"
           "rate_bound_systematic,rate_bound_uniform";
}

int run_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.validate_common();
        out << simulate_csv_header() << "\n";
        for (const int k : cfg.k_list) {
            const std::size_t channels = cfg.p_list.empty() ? cfg.c_list.size()
                                                            : cfg.p_list.size();
            for (std::size_t ci = 0; ci < channels; ++ci) {
                const double p = cfg.p_list.empty() ? solve_p_for_capacity(cfg.c_list[ci])
                                                    : cfg.p_list[ci];
                const ChannelParams ch = make_channel(p);

                SimPointConfig pt;
                pt.k = k;
                pt.p = p;
                pt.epsilon = cfg.epsilon;
                pt.trials = cfg.trials;
                pt.master_seed = cfg.master_seed;
                pt.d_max = cfg.d_max;
                pt.rule = rule_from_string(cfg.rule);
                pt.feedback = feedback_from_string(cfg.feedback);
                pt.threads = cfg.threads;

                const SummaryStats s = aggregate(run_point(pt), k);
                const BoundsReport b = bounds_report(k, ch, cfg.epsilon);

                out << k << ',' << format_double(p) << ',' << format_double(ch.C) << ','
                    << format_double(cfg.epsilon) << ',' << cfg.rule << ',' << cfg.feedback << ','
                    << cfg.trials << ',' << format_double(s.rate) << ','
                    << format_double(s.mean_tau) << ',' << format_double(s.mean_eta) << ','
                    << format_double(s.mean_d_all) << ',' << format_double(s.mean_d_exsys) << ','
                    << format_double(s.mean_d_comm) << ',' << format_double(s.fer) << ','
                    << format_double(s.rate_ci95) << ','
                    << format_double(s.ns_per_1000_symbols) << ',' << format_double(b.tau_b)
                    << ',' << format_double(b.rate_lower_systematic) << ','
                    << format_double(b.rate_lower_uniform) << "\n";
            }
        }
        return 0;
    } catch (const std::exception& e) {
        err << "simulate: " << e.what() << "\n";
        return 1;
    }
}

std::string bounds_csv_header() {
    return "K,p,C,epsilon,tau_com,tau_conf,tau_prime_com,tau_binomial_com,tau_B,"
           "rate_bound_systematic,rate_bound_uniform";
}

int run_bounds(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.validate_common();
        out << bounds_csv_header() << "\n";
        for (const int k : cfg.k_list) {
            const std::size_t channels = cfg.p_list.empty() ? cfg.c_list.size()
                                                            : cfg.p_list.size();
            for (std::size_t ci = 0; ci < channels; ++ci) {
                const double p = cfg.p_list.empty() ? solve_p_for_capacity(cfg.c_list[ci])
                                                    : cfg.p_list[ci];
                const ChannelParams ch = make_channel(p);
                const BoundsReport b = bounds_report(k, ch, cfg.epsilon);
                out << k << ',' << format_double(p) << ',' << format_double(ch.C) << ','
                    << format_double(cfg.epsilon) << ',' << format_double(b.tau_com) << ','
                    << format_double(b.tau_conf) << ',' << format_double(b.tau_prime_com) << ','
                    << format_double(b.tau_binomial_com) << ',' << format_double(b.tau_b) << ','
                    << format_double(b.rate_lower_systematic) << ','
                    << format_double(b.rate_lower_uniform) << "\n";
            }
        }
        return 0;
    } catch (const std::exception& e) {
        err << "bounds: " << e.what() << "\n";
        return 1;
    }
}

int run_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.trials < 1) throw std::invalid_argument("config error: trials must be >= 1");
        const auto results = run_all_checks(cfg.trials, cfg.master_seed);
        bool all_pass = true;
        char line[160];
        std::snprintf(line, sizeof(line), "%-28s %12s %14s %12s %6s", "check", "instances",
                      "worst", "tolerance", "status");
        out << line << "\n";
        for (const auto& r : results) {
            std::snprintf(line, sizeof(line), "%-28s %12lld %14.6g %12.3g %6s", r.name.c_str(),
                          static_cast<long long>(r.instances), r.worst, r.tolerance,
                          r.pass ? "PASS" : "FAIL");
            out << line << "\n";
            all_pass = all_pass && r.pass;
        }
        const double probe = adversarial_slack_probe(std::max<std::int64_t>(cfg.trials / 100, 50),
                                                     cfg.master_seed);
        out << "(informational) drift slack just past the WMAD tolerance: "
            << format_double(probe) << "\n";
        return all_pass ? 0 : 1;
    } catch (const std::exception& e) {
        err << "verify: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace sparsepm
