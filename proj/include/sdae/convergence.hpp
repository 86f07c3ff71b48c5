#pragma once

// Coupled-path Monte Carlo estimate of the strong error
//   ( E max_n |X_ref(t_n) - X_n^N|^p )^{1/p}
// against a self-reference at N_ref steps, and log-log slope fitting.

#include "sdae/scheme.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdae {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ConvergenceConfig {
    std::string model = "paper-example";
    SchemeKind scheme = SchemeKind::DirectTamed;
    long N_ref = 1L << 14;
    std::vector<long> N_list = {1L << 6, 1L << 7, 1L << 8, 1L << 9, 1L << 10, 1L << 11};
    int M_paths = 128;
    double p = 2.0;
    std::uint64_t seed = 42;
    /// 0 means one worker per hardware thread. Results do not depend on it.
    int workers = 0;
};

/// Throws ConfigError naming the first violated constraint.
void validate(const ConvergenceConfig& cfg);

struct ConvergenceRow {
    long N = 0;
    double h = 0.0;
    double error_p = 0.0;
    /// Delta-method standard error of error_p; NaN when fewer than two usable paths.
    double stderr_ = 0.0;
    double diverged_fraction = 0.0;
    /// False when every path diverged at this N.
    bool usable = true;
};

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    /// Root-mean-square residual of log2(error) about the fitted line.
    double residual = 0.0;
};

struct ConvergenceReport {
    ConvergenceConfig config;
    std::vector<ConvergenceRow> rows;
    /// NaN fields when fewer than two usable rows have positive error.
    SlopeFit fit;
};

/**
 * Per-N grid-sup error of one coupled path: the coarse runs use the blocks
 * summed from w_ref, and errors are measured at the coarse nodes. NaN when the
 * reference or the coarse run diverged.
 */
std::vector<double> coupled_path_errors(const SdaeProblem& p, SchemeKind kind, const WienerGrid& w_ref,
                                        std::span<const long> N_list);

ConvergenceReport strong_error(const SdaeProblem& p, const ConvergenceConfig& cfg);
ConvergenceReport strong_error(const ConvergenceConfig& cfg);

/// Ordinary least squares of log2(error) on log2(h). Throws std::invalid_argument
/// listing the indices of non-positive errors, or when fewer than two points.
SlopeFit fit_slope(std::span<const std::pair<double, double>> h_error);

/// Columns N,h,error_p,stderr,diverged_fraction; footer "# slope=<s> intercept=<i> residual=<r>".
void write_csv(std::ostream& out, const ConvergenceReport& report);

/// Self-contained log-log plot: measured points, fitted line and a slope-1/2 guide.
void write_svg(std::ostream& out, const ConvergenceReport& report);

}  // namespace sdae
