#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sparsepm/codec.hpp"

namespace sparsepm {

/**
 * Resolved run configuration shared by the three subcommands. Exactly one of
 * p_list / c_list may be non-empty; capacity-specified channels are resolved
 * through solve_p_for_capacity and the resolved p is echoed in the output.
 */
struct RunConfig {
    std::vector<int> k_list;
    std::vector<double> p_list;
    std::vector<double> c_list;
    double epsilon = 1e-3;
    std::int64_t trials = 10000;
    std::uint64_t master_seed = 1;
    int d_max = 12;
    std::string rule = "wmad-lookahead";
    std::string feedback = "sparse";
    std::string output;  // empty or "-" means stdout
    int threads = 1;

    void validate_common() const;  // throws std::invalid_argument naming the field
};

// List syntax: comma-separated values, each either a number or a..b range.
std::vector<int> parse_int_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

// Stable %.10g formatting, locale-independent.
std::string format_double(double v);

std::string simulate_csv_header();

// Cartesian sweep over (K, channel); one CSV row per point, bounds included.
// Returns a process exit code.
int run_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err);

std::string bounds_csv_header();
int run_bounds(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Numerical verification table; exit code 0 iff every check passes.
int run_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace sparsepm
