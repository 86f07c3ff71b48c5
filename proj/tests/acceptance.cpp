// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "sdae/convergence.hpp"
#include "sdae/format.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;
using sdae::Matrix;
using sdae::SchemeKind;
using sdae::SdaeProblem;
using sdae::Vector;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void criterion(const std::string& id, const std::string& title, const std::function<Outcome()>& body)
{
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
        outcome = body();
    } catch (const std::exception& e) {
        outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!outcome.pass) ++g_failures;
    std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << id << " " << title << ": " << outcome.detail << " ("
              << std::fixed;
    std::cout.precision(2);
    std::cout << seconds << " s)" << std::endl;
    std::cout.unsetf(std::ios::fixed);
}

std::string num(double x)
{
    std::ostringstream s;
    s.precision(4);
    s << x;
    return s.str();
}

Matrix paper_A()
{
    Matrix a(3, 3);
    a << 1, 0, 1,
         0, 0, 0,
         1, 0, 0;
    return a;
}

Matrix random_matrix(std::mt19937_64& gen, int rows, int cols)
{
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = normal(gen);
    return m;
}

double penrose_residual(const Matrix& m, const Matrix& pinv)
{
    const double sm = std::max(1.0, m.norm());
    const double sp = std::max(1.0, pinv.norm());
    const Matrix mp = m * pinv;
    const Matrix pm = pinv * m;
    double r = (m * pinv * m - m).norm() / (sm * sm * sp);
    r = std::max(r, (pinv * m * pinv - pinv).norm() / (sp * sp * sm));
    r = std::max(r, (mp.transpose() - mp).norm() / (sm * sp));
    r = std::max(r, (pm.transpose() - pm).norm() / (sm * sp));
    return r;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(SDAE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// --------------------------------------------------------------------------

Outcome strong_order()
{
    const sdae::ConvergenceConfig cfg;  // demo-paper configuration
    const auto start = std::chrono::steady_clock::now();
    const auto report = sdae::strong_error(cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double slope = report.fit.slope;
    const bool pass = slope >= 0.4 && slope <= 0.6 && seconds < 300.0;
    return {pass, "seed " + std::to_string(cfg.seed) + ", slope " + num(slope) + " in [0.4, 0.6], runtime "
                      + num(seconds) + " s < 300 s"};
}

Outcome strong_order_across_seeds()
{
    constexpr int kSeeds = 20;
    double sum = 0, lo = INFINITY, hi = -INFINITY;
    int inside = 0;
    for (int s = 1; s <= kSeeds; ++s) {
        sdae::ConvergenceConfig cfg;
        cfg.seed = 1000 + s;
        const double slope = sdae::strong_error(cfg).fit.slope;
        sum += slope;
        lo = std::min(lo, slope);
        hi = std::max(hi, slope);
        inside += slope >= 0.4 && slope <= 0.6;
    }
    const double mean = sum / kSeeds;
    return {mean >= 0.4 && mean <= 0.6, "mean slope over seeds 1001..1020 = " + num(mean) + " (range " + num(lo)
                                           + ".." + num(hi) + ", " + std::to_string(inside) + "/"
                                           + std::to_string(kSeeds) + " single seeds in [0.4, 0.6])"};
}

Outcome scheme_equivalence()
{
    std::vector<SdaeProblem> problems = {sdae::builtin_paper_example(), sdae::random_index1_problem(101, 3, 2),
                                         sdae::random_index1_problem(202, 4, 2),
                                         sdae::random_index1_problem(303, 5, 3)};
    double worst = 0;
    int runs = 0;
    for (const auto& p : problems) {
        for (long N : {16L, 256L}) {
            for (std::uint64_t seed = 1; seed <= 10; ++seed) {
                const auto w = sdae::generate(seed, 0, p.m, N, p.T);
                const auto direct = sdae::simulate(p, SchemeKind::DirectTamed, w);
                const auto dual = sdae::simulate(p, SchemeKind::DualTamed, w);
                if (direct.diverged || dual.diverged) return {false, "diverged run"};
                double gap = 0, scale = 0;
                for (long n = 0; n <= N; ++n) {
                    gap = std::max(gap, (direct.states.row(n) - dual.states.row(n)).norm());
                    scale = std::max(scale, 1.0 + direct.states.row(n).norm());
                }
                worst = std::max(worst, gap / scale);
                ++runs;
            }
        }
    }
    return {worst <= 1e-7, std::to_string(runs) + " runs, max relative gap " + num(worst) + " <= 1e-7"};
}

Outcome linear_algebra()
{
    std::mt19937_64 gen(31337);
    std::uniform_int_distribution<int> size(2, 8);
    double penrose = 0, projector = 0;
    for (int k = 0; k < 100; ++k) {
        const int rows = size(gen), cols = size(gen);
        const int rank = std::uniform_int_distribution<int>(0, std::min(rows, cols))(gen);
        const Matrix m = rank == 0 ? Matrix(Matrix::Zero(rows, cols))
                                   : Matrix(random_matrix(gen, rows, rank) * random_matrix(gen, rank, cols));
        penrose = std::max(penrose, penrose_residual(m, sdae::linalg::pseudo_inverse(m)));

        const int n = rows;
        const Matrix a = rank == 0 ? Matrix(Matrix::Zero(n, n))
                                   : Matrix(random_matrix(gen, n, std::min(rank, n)) * random_matrix(gen, std::min(rank, n), n));
        const auto proj = sdae::linalg::projectors(a, sdae::linalg::pseudo_inverse(a));
        const Matrix I = Matrix::Identity(n, n);
        projector = std::max({projector, (proj.R * a).norm() / std::max(1.0, a.norm()),
                              (proj.P + proj.Q - I).norm(), (proj.P * proj.P - proj.P).norm(),
                              (proj.Q * proj.Q - proj.Q).norm(), (proj.R * proj.R - proj.R).norm()});
    }
    Matrix known(3, 3);
    known << 0, 0, 1,
               0, 0, 0,
               1, 0, -1;
    const Matrix pinv = sdae::linalg::pseudo_inverse(paper_A());
    const double example_gap = (pinv - known).cwiseAbs().maxCoeff();
    penrose = std::max(penrose, penrose_residual(paper_A(), pinv));
    const auto proj = sdae::linalg::projectors(paper_A(), pinv);
    projector = std::max({projector, (proj.R * paper_A()).norm(), (proj.P * proj.P - proj.P).norm()});

    const bool pass = penrose <= 1e-10 && example_gap <= 1e-12 && projector <= 1e-12;
    return {pass, "Penrose residual " + num(penrose) + " <= 1e-10, example A^- entrywise gap " + num(example_gap)
                      + " <= 1e-12, projector residual " + num(projector) + " <= 1e-12"};
}

Outcome paper_constants()
{
    const SdaeProblem p = sdae::builtin_paper_example();
    double gap = 0, norm_gap = 0;
    for (double h : {1e-3, 1e-1, 1.0}) {
        Matrix expected(3, 3);
        expected << 1, 0, -h,
                    0, 1, 0,
                    0, 0, 1 + h;
        const Matrix I_hM1 = Matrix::Identity(3, 3) + h * sdae::assemble_M1(p, 0.0);
        gap = std::max(gap, (I_hM1 - expected).cwiseAbs().maxCoeff());
        const auto report = sdae::check_stability(p, h, {0.0, 0.5, 1.0});
        for (const auto& node : report.nodes) norm_gap = std::max(norm_gap, std::abs(node.inverse_norm_1 - 1.0));
    }
    return {gap <= 1e-12 && norm_gap <= 1e-12,
            "I + h M1 entrywise gap " + num(gap) + ", | |(I + h M1)^{-1}|_1 - 1 | = " + num(norm_gap) + " <= 1e-12"};
}

Outcome constraint_residual()
{
    const SdaeProblem p = sdae::builtin_paper_example();
    const Matrix R = sdae::projector_bundle_at(p, 0.0).R;
    const Matrix B = p.B(0.0);
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto w = sdae::generate(seed, 0, 3, 256, 1.0);
        const auto traj = sdae::simulate(p, SchemeKind::DirectTamed, w);
        if (traj.diverged) return {false, "diverged"};
        for (long n = 0; n < traj.N; ++n) {
            const Vector X_next = traj.state(n + 1);
            const Vector f = p.f(n * traj.h, traj.state(n));
            const double r = (R * B * X_next + R * f / (1.0 + traj.h * f.norm())).norm();
            worst = std::max(worst, r / (1.0 + X_next.norm()));
        }
    }
    return {worst <= 1e-9, "20 seeds x 256 steps, max |R B X_{n+1} + R f/(1+h|f|)| / (1+|X_{n+1}|) = " + num(worst)
                               + " <= 1e-9"};
}

Outcome moment_boundedness()
{
    const SdaeProblem p = sdae::builtin_paper_example();
    const std::vector<long> levels = {1L << 6, 1L << 8, 1L << 10, 1L << 12};
    std::vector<double> second_moment(levels.size(), 0.0);
    constexpr int kPaths = 64;
    for (int k = 0; k < kPaths; ++k) {
        const auto fine = sdae::generate(777, k, 3, levels.back(), 1.0);
        for (std::size_t i = 0; i < levels.size(); ++i) {
            const auto traj = sdae::simulate(p, SchemeKind::DirectTamed, sdae::coarsen(fine, levels.back() / levels[i]));
            if (traj.diverged || !traj.states.allFinite()) return {false, "non-finite path"};
            second_moment[i] += traj.state(traj.N).squaredNorm() / kPaths;
        }
    }
    const double lo = *std::min_element(second_moment.begin(), second_moment.end());
    const double hi = *std::max_element(second_moment.begin(), second_moment.end());
    std::string values;
    for (double m : second_moment) values += (values.empty() ? "" : ", ") + num(m);
    return {hi < 2.0 * lo, "E|X_N|^2 = {" + values + "}, max/min = " + num(hi / lo) + " < 2, all paths finite"};
}

Outcome taming_bound()
{
    std::mt19937_64 gen(4242);
    std::uniform_real_distribution<double> exponent(-6, 6);
    std::normal_distribution<double> normal;
    double worst = -INFINITY;
    for (int k = 0; k < 10000; ++k) {
        const int d = 1 + k % 6;
        Vector f(d);
        const double scale = std::pow(10.0, exponent(gen));
        for (int i = 0; i < d; ++i) f(i) = scale * normal(gen);
        const double h = std::pow(10.0, exponent(gen) / 2);
        const double bound = std::min(1.0, h * f.norm());
        worst = std::max(worst, sdae::tame(f, h).norm() - bound * (1.0 + 1e-15));
    }
    return {worst <= 0.0, "10^4 pairs, max(|tame| - min(1, h|f|)(1 + 1e-15)) = " + num(worst) + " <= 0"};
}

Outcome wiener_coupling()
{
    std::mt19937_64 gen(99);
    int mismatches = 0;
    for (int k = 0; k < 100; ++k) {
        const int m = 1 + static_cast<int>(gen() % 4);
        const long N = 1L << (2 + gen() % 9);
        const auto w = sdae::generate(gen(), gen() % 1000, m, N, 0.5 + static_cast<double>(gen() % 4));
        if (sdae::coarsen(sdae::coarsen(w, 2), 2).increments != sdae::coarsen(w, 4).increments) ++mismatches;
        for (long factor = 1; factor <= N; factor *= 2)
            if (sdae::coarsen(w, factor).total() != w.total()) ++mismatches;
    }
    return {mismatches == 0, "100 grids, bit mismatches: " + std::to_string(mismatches)};
}

Outcome determinism()
{
    const fs::path dir = fs::temp_directory_path() / ("sdae_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::vector<std::string> invocations = {
        "simulate --model paper-example --scheme direct-tamed --steps 256 --seed 42 --out ",
        "simulate --model paper-example --scheme dual-tamed --steps 256 --seed 7 --out ",
        "converge --model paper-example --nref 1024 --nlist 16,32,64,128 --paths 32 --seed 3 --workers 2 --out ",
    };
    bool pass = true;
    std::string detail;
    for (std::size_t i = 0; i < invocations.size(); ++i) {
        const fs::path a = dir / ("a" + std::to_string(i) + ".csv");
        const fs::path b = dir / ("b" + std::to_string(i) + ".csv");
        const int ra = run_cli(invocations[i] + a.string());
        const int rb = run_cli(invocations[i] + b.string());
        const std::string ta = slurp(a), tb = slurp(b);
        const bool same = ra == 0 && rb == 0 && !ta.empty() && ta == tb;
        pass = pass && same;
        detail += (detail.empty() ? "" : ", ") + std::string(same ? "identical" : "DIFFERENT") + " ("
                  + std::to_string(ta.size()) + " bytes)";
    }
    fs::remove_all(dir);
    return {pass, "3 CLI invocations run twice: " + detail};
}

}  // namespace

int main()
{
    criterion("AC1", "strong order 1/2 (demo-paper)", strong_order);
    criterion("AC1b", "strong order robustness across 20 seeds", strong_order_across_seeds);
    criterion("AC2", "direct/dual scheme equivalence", scheme_equivalence);
    criterion("AC3", "linear-algebra invariants", linear_algebra);
    criterion("AC4", "example M1 and |(I + h M1)^{-1}|_1", paper_constants);
    criterion("AC5", "discrete constraint residual", constraint_residual);
    criterion("AC6", "moment boundedness", moment_boundedness);
    criterion("AC7", "taming bound", taming_bound);
    criterion("AC8", "Wiener coarsening coupling", wiener_coupling);
    criterion("AC9", "CLI determinism", determinism);
    std::cout << (g_failures == 0 ? "all acceptance criteria passed" : std::to_string(g_failures) + " criteria failed")
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
