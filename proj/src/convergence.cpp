#include "sdae/convergence.hpp"

#include "sdae/format.hpp"

#include <algorithm>
#include <exception>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace sdae {

void validate(const ConvergenceConfig& cfg)
{
    if (!is_power_of_two(cfg.N_ref)) throw ConfigError("N_ref must be a power of two");
    if (cfg.N_list.empty()) throw ConfigError("N_list must not be empty");
    for (const long N : cfg.N_list) {
        if (!is_power_of_two(N)) throw ConfigError("N_list entry " + std::to_string(N) + " is not a power of two");
        if (N > cfg.N_ref || cfg.N_ref % N != 0)
            throw ConfigError("N_list entry " + std::to_string(N) + " does not divide N_ref");
    }
    const long finest = *std::max_element(cfg.N_list.begin(), cfg.N_list.end());
    if (cfg.N_ref / finest < 4) throw ConfigError("N_ref / max(N_list) must be >= 4");
    if (cfg.M_paths < 1) throw ConfigError("M_paths must be >= 1");
    if (!(cfg.p >= 1.0) || !std::isfinite(cfg.p)) throw ConfigError("p must be finite and >= 1");
    if (cfg.workers < 0) throw ConfigError("workers must be >= 0");
}

std::vector<double> coupled_path_errors(const SdaeProblem& p, SchemeKind kind, const WienerGrid& w_ref,
                                        std::span<const long> N_list)
{
    constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> errors(N_list.size(), kNaN);
    const Trajectory reference = simulate(p, kind, w_ref);
    if (reference.diverged) return errors;

    for (std::size_t i = 0; i < N_list.size(); ++i) {
        const long N = N_list[i];
        const long ratio = w_ref.N / N;
        const Trajectory coarse = simulate(p, kind, coarsen(w_ref, ratio));
        if (coarse.diverged) continue;
        double worst = 0.0;
        for (long n = 0; n <= N; ++n)
            worst = std::max(worst, (reference.states.row(n * ratio) - coarse.states.row(n)).norm());
        errors[i] = worst;
    }
    return errors;
}

ConvergenceReport strong_error(const SdaeProblem& p, const ConvergenceConfig& cfg)
{
    validate(cfg);
    p.check();

    const std::size_t levels = cfg.N_list.size();
    const std::size_t paths = static_cast<std::size_t>(cfg.M_paths);
    // Slot k * levels + i belongs to path k, level i; workers never share slots.
    std::vector<double> errors(paths * levels);

    auto run_path = [&](std::size_t k) {
        const WienerGrid w = generate(cfg.seed, k, p.m, cfg.N_ref, p.T);
        const auto e = coupled_path_errors(p, cfg.scheme, w, cfg.N_list);
        std::copy(e.begin(), e.end(), errors.begin() + static_cast<std::ptrdiff_t>(k * levels));
    };

    unsigned workers = cfg.workers > 0 ? static_cast<unsigned>(cfg.workers) : std::thread::hardware_concurrency();
    workers = std::clamp(workers, 1u, static_cast<unsigned>(paths));
    if (workers == 1) {
        for (std::size_t k = 0; k < paths; ++k) run_path(k);
    } else {
        std::vector<std::exception_ptr> failures(workers);
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t k = w; k < paths; k += workers) run_path(k);
                } catch (...) {
                    failures[w] = std::current_exception();
                }
            });
        }
        pool.clear();
        for (const auto& failure : failures)
            if (failure) std::rethrow_exception(failure);
    }

    ConvergenceReport report;
    report.config = cfg;
    std::vector<std::pair<double, double>> fit_points;
    for (std::size_t i = 0; i < levels; ++i) {
        ConvergenceRow row;
        row.N = cfg.N_list[i];
        row.h = p.T / static_cast<double>(row.N);

        double sum = 0.0, sum_sq = 0.0;
        std::size_t used = 0;
        for (std::size_t k = 0; k < paths; ++k) {
            const double e = errors[k * levels + i];
            if (std::isnan(e)) continue;
            const double ep = std::pow(e, cfg.p);
            sum += ep;
            sum_sq += ep * ep;
            ++used;
        }
        row.diverged_fraction = static_cast<double>(paths - used) / static_cast<double>(paths);
        row.usable = used > 0;
        if (!row.usable) {
            row.error_p = row.stderr_ = std::numeric_limits<double>::quiet_NaN();
        } else {
            const double n = static_cast<double>(used);
            const double mean = sum / n;
            row.error_p = std::pow(mean, 1.0 / cfg.p);
            if (used < 2) {
                row.stderr_ = std::numeric_limits<double>::quiet_NaN();
            } else {
                const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
                const double se_mean = std::sqrt(var / n);
                // d/dm m^{1/p} = m^{1/p - 1} / p
                row.stderr_ = mean > 0 ? std::pow(mean, 1.0 / cfg.p - 1.0) / cfg.p * se_mean : 0.0;
            }
            if (row.error_p > 0) fit_points.emplace_back(row.h, row.error_p);
        }
        report.rows.push_back(row);
    }

    if (fit_points.size() >= 2) {
        report.fit = fit_slope(fit_points);
    } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        report.fit = {nan, nan, nan};
    }
    return report;
}

ConvergenceReport strong_error(const ConvergenceConfig& cfg)
{
    return strong_error(make_model(cfg.model), cfg);
}

SlopeFit fit_slope(std::span<const std::pair<double, double>> h_error)
{
    if (h_error.size() < 2) throw std::invalid_argument("fit_slope: need at least two rows");
    std::string bad;
    for (std::size_t i = 0; i < h_error.size(); ++i) {
        if (!(h_error[i].second > 0) || !(h_error[i].first > 0))
            bad += (bad.empty() ? "" : ",") + std::to_string(i);
    }
    if (!bad.empty()) throw std::invalid_argument("fit_slope: non-positive h or error at rows " + bad);

    const double n = static_cast<double>(h_error.size());
    double sx = 0, sy = 0;
    for (const auto& [h, e] : h_error) {
        sx += std::log2(h);
        sy += std::log2(e);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (const auto& [h, e] : h_error) {
        const double dx = std::log2(h) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log2(e) - my);
    }
    if (sxx == 0) throw std::invalid_argument("fit_slope: all step sizes are equal");

    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0;
    for (const auto& [h, e] : h_error) {
        const double r = std::log2(e) - (fit.intercept + fit.slope * std::log2(h));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

namespace {

std::string or_na(double value)
{
    return std::isnan(value) ? "NA" : format_double(value);
}

}  // namespace

void write_csv(std::ostream& out, const ConvergenceReport& report)
{
    out << "N,h,error_p,stderr,diverged_fraction\n";
    for (const auto& row : report.rows) {
        out << row.N << ',' << format_double(row.h) << ',' << or_na(row.error_p) << ',' << or_na(row.stderr_) << ','
            << format_double(row.diverged_fraction) << '\n';
    }
    out << "# slope=" << or_na(report.fit.slope) << " intercept=" << or_na(report.fit.intercept)
        << " residual=" << or_na(report.fit.residual) << '\n';
}

void write_svg(std::ostream& out, const ConvergenceReport& report)
{
    constexpr double kWidth = 640, kHeight = 480, kMargin = 60;

    std::vector<std::pair<double, double>> pts;
    for (const auto& row : report.rows)
        if (row.usable && row.error_p > 0) pts.emplace_back(std::log2(row.h), std::log2(row.error_p));

    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!pts.empty()) {
        x0 = x1 = pts.front().first;
        y0 = y1 = pts.front().second;
        for (const auto& [x, y] : pts) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
        x0 -= 0.5, x1 += 0.5, y0 -= 1.0, y1 += 1.0;
    }
    auto sx = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); };
    auto sy = [&](double y) { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); };

    std::ostringstream body;
    body << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin
         << "\" height=\"" << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"black\"/>\n";

    const bool have_fit = std::isfinite(report.fit.slope);
    if (have_fit) {
        auto fy = [&](double x) { return report.fit.intercept + report.fit.slope * x; };
        body << "<line x1=\"" << sx(x0) << "\" y1=\"" << sy(fy(x0)) << "\" x2=\"" << sx(x1) << "\" y2=\""
             << sy(fy(x1)) << "\" stroke=\"steelblue\" stroke-width=\"2\"/>\n";
        // Guide of slope 1/2 through the first measured point.
        if (!pts.empty()) {
            const auto [px, py] = pts.front();
            auto gy = [&](double x) { return py + 0.5 * (x - px) - 0.5; };
            body << "<line x1=\"" << sx(x0) << "\" y1=\"" << sy(gy(x0)) << "\" x2=\"" << sx(x1) << "\" y2=\""
                 << sy(gy(x1)) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
        }
    }
    for (const auto& [x, y] : pts)
        body << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"4\" fill=\"crimson\"/>\n";

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body.str()
        << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">log2(h)</text>\n"
        << "<text x=\"15\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 15 " << kHeight / 2
        << ")\" text-anchor=\"middle\">log2(strong error)</text>\n"
        << "<text x=\"" << kMargin << "\" y=\"35\">fitted slope " << or_na(report.fit.slope)
        << " (dashed: reference slope 1/2)</text>\n"
        << "</svg>\n";
}

}  // namespace sdae
