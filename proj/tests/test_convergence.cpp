#include "sdae/convergence.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using sdae::ConvergenceConfig;
using sdae::SchemeKind;

namespace {

ConvergenceConfig small_config()
{
    ConvergenceConfig cfg;
    cfg.N_ref = 256;
    cfg.N_list = {8, 16, 32, 64};
    cfg.M_paths = 16;
    cfg.seed = 5;
    cfg.workers = 1;
    return cfg;
}

}  // namespace

TEST(CoupledPathErrors, ReferenceLevelIsExact)
{
    const auto p = sdae::builtin_paper_example();
    const auto w = sdae::generate(3, 0, 3, 256, 1.0);
    const std::vector<long> levels = {256, 64};
    const auto errors = sdae::coupled_path_errors(p, SchemeKind::DirectTamed, w, levels);
    EXPECT_EQ(errors[0], 0.0);
    EXPECT_GT(errors[1], 0.0);
}

TEST(FitSlope, ExactPowerLaws)
{
    std::vector<std::pair<double, double>> linear, root, scaled;
    for (int k = 2; k <= 8; ++k) {
        const double h = std::ldexp(1.0, -k);
        linear.emplace_back(h, h);
        root.emplace_back(h, std::sqrt(h));
        scaled.emplace_back(h, 3.0 * std::sqrt(h));
    }
    EXPECT_NEAR(sdae::fit_slope(linear).slope, 1.0, 1e-14);
    EXPECT_NEAR(sdae::fit_slope(root).slope, 0.5, 1e-14);
    const auto fit = sdae::fit_slope(scaled);
    EXPECT_NEAR(fit.slope, 0.5, 1e-14);
    EXPECT_NEAR(fit.intercept, std::log2(3.0), 1e-14);
    EXPECT_NEAR(fit.residual, 0.0, 1e-14);
}

TEST(FitSlope, NoisyRootLaw)
{
    std::mt19937_64 gen(2718);
    std::uniform_real_distribution<double> noise(-0.05, 0.05);
    std::vector<std::pair<double, double>> rows;
    for (int k = 6; k <= 11; ++k) {
        const double h = std::ldexp(1.0, -k);
        rows.emplace_back(h, std::sqrt(h) * (1.0 + noise(gen)));
    }
    // Hand formula: slope = cov(x, y) / var(x) on the log2 scale.
    double mx = 0, my = 0;
    for (const auto& [h, e] : rows) mx += std::log2(h) / 6, my += std::log2(e) / 6;
    double cov = 0, var = 0;
    for (const auto& [h, e] : rows) {
        cov += (std::log2(h) - mx) * (std::log2(e) - my);
        var += (std::log2(h) - mx) * (std::log2(h) - mx);
    }
    const auto fit = sdae::fit_slope(rows);
    EXPECT_NEAR(fit.slope, cov / var, 1e-12);
    EXPECT_NEAR(fit.slope, 0.5, 0.1);
}

TEST(FitSlope, RejectsNonPositiveRows)
{
    std::vector<std::pair<double, double>> rows = {{0.5, 1.0}, {0.25, 0.0}, {0.125, -1.0}};
    try {
        sdae::fit_slope(rows);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("1,2"), std::string::npos);
    }
    EXPECT_THROW(sdae::fit_slope(std::vector<std::pair<double, double>>{{0.5, 1.0}}), std::invalid_argument);
}

TEST(Config, Validation)
{
    EXPECT_NO_THROW(sdae::validate(ConvergenceConfig{}));
    auto cfg = small_config();
    cfg.N_list = {8, 24};
    EXPECT_THROW(sdae::validate(cfg), sdae::ConfigError);
    cfg = small_config();
    cfg.N_list = {128};
    EXPECT_THROW(sdae::validate(cfg), sdae::ConfigError);  // ratio 2 < 4
    cfg = small_config();
    cfg.N_ref = 300;
    EXPECT_THROW(sdae::validate(cfg), sdae::ConfigError);
    cfg = small_config();
    cfg.p = 0.5;
    EXPECT_THROW(sdae::validate(cfg), sdae::ConfigError);
    cfg = small_config();
    cfg.M_paths = 0;
    EXPECT_THROW(sdae::validate(cfg), sdae::ConfigError);
}

TEST(StrongError, ReportShape)
{
    const auto report = sdae::strong_error(small_config());
    ASSERT_EQ(report.rows.size(), 4u);
    for (const auto& row : report.rows) {
        EXPECT_TRUE(row.usable);
        EXPECT_GT(row.error_p, 0.0);
        EXPECT_GT(row.stderr_, 0.0);
        EXPECT_EQ(row.diverged_fraction, 0.0);
        EXPECT_DOUBLE_EQ(row.h, 1.0 / row.N);
    }
    EXPECT_TRUE(std::isfinite(report.fit.slope));
}

TEST(StrongError, MatchesPerPathAggregation)
{
    auto cfg = small_config();
    cfg.p = 3.0;
    const auto p = sdae::builtin_paper_example();
    const auto report = sdae::strong_error(p, cfg);
    std::vector<double> sums(cfg.N_list.size(), 0.0);
    for (int k = 0; k < cfg.M_paths; ++k) {
        const auto errors = sdae::coupled_path_errors(p, cfg.scheme, sdae::generate(cfg.seed, k, 3, cfg.N_ref, 1.0),
                                                      cfg.N_list);
        for (std::size_t i = 0; i < errors.size(); ++i) sums[i] += std::pow(errors[i], 3.0);
    }
    for (std::size_t i = 0; i < sums.size(); ++i)
        EXPECT_NEAR(report.rows[i].error_p, std::cbrt(sums[i] / cfg.M_paths), 1e-15);
}

TEST(StrongError, WorkerCountDoesNotChangeResults)
{
    auto cfg = small_config();
    const auto one = sdae::strong_error(cfg);
    cfg.workers = 3;
    const auto three = sdae::strong_error(cfg);
    for (std::size_t i = 0; i < one.rows.size(); ++i) {
        EXPECT_EQ(one.rows[i].error_p, three.rows[i].error_p);
        EXPECT_EQ(one.rows[i].stderr_, three.rows[i].stderr_);
    }
    EXPECT_EQ(one.fit.slope, three.fit.slope);
}

TEST(StrongError, SinglePathHasNoStandardError)
{
    auto cfg = small_config();
    cfg.M_paths = 1;
    const auto report = sdae::strong_error(cfg);
    std::ostringstream csv;
    sdae::write_csv(csv, report);
    EXPECT_TRUE(std::isnan(report.rows[0].stderr_));
    EXPECT_NE(csv.str().find(",NA,"), std::string::npos);
}

TEST(StrongError, DivergedPathsAreCounted)
{
    sdae::SdaeProblem p;
    p.name = "blowup";
    p.d = 1;
    p.m = 1;
    p.A = [](double) { return sdae::Matrix(sdae::Matrix::Identity(1, 1)); };
    p.B = [](double) { return sdae::Matrix(sdae::Matrix::Zero(1, 1)); };
    p.f = [](double, const sdae::Vector& x) { return sdae::Vector(x.array().pow(5)); };
    p.g = [](double, const sdae::Vector& x) { return sdae::Matrix(x); };
    p.X0 = sdae::Vector::Constant(1, 10.0);
    p.constant_coefficients = true;
    auto cfg = small_config();
    cfg.scheme = SchemeKind::DirectUntamed;
    cfg.M_paths = 4;
    const auto report = sdae::strong_error(p, cfg);
    for (const auto& row : report.rows) {
        EXPECT_EQ(row.diverged_fraction, 1.0);
        EXPECT_FALSE(row.usable);
    }
    EXPECT_TRUE(std::isnan(report.fit.slope));
}

TEST(Report, CsvAndSvg)
{
    const auto report = sdae::strong_error(small_config());
    std::ostringstream csv, svg;
    sdae::write_csv(csv, report);
    sdae::write_svg(svg, report);
    const std::string text = csv.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "N,h,error_p,stderr,diverged_fraction");
    EXPECT_NE(text.find("# slope="), std::string::npos);
    EXPECT_NE(text.find(" intercept="), std::string::npos);
    EXPECT_NE(text.find(" residual="), std::string::npos);
    const std::string plot = svg.str();
    EXPECT_EQ(plot.rfind("<svg", 0), 0u);
    EXPECT_EQ(std::count(plot.begin(), plot.end(), '<'), std::count(plot.begin(), plot.end(), '>'));
    EXPECT_EQ(plot.find("href"), std::string::npos);
}

TEST(StrongError, ErrorShrinksWithStepUpToNoise)
{
    const auto report = sdae::strong_error(ConvergenceConfig{});
    for (std::size_t i = 1; i < report.rows.size(); ++i)
        EXPECT_LE(report.rows[i].error_p, 1.25 * report.rows[i - 1].error_p) << "N = " << report.rows[i].N;
}
