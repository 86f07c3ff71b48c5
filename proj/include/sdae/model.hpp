#pragma once

// Problem data for  A(t) dX = [B(t) X + f(t, X)] dt + g(t, X) dW,  X(0) = X0,
// index-1 validation and sampling probes for the structural assumptions.

#include "sdae/linalg.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sdae {

using MatrixFn = std::function<Matrix(double)>;
using DriftFn = std::function<Vector(double, const Vector&)>;
using DiffusionFn = std::function<Matrix(double, const Vector&)>;

/**
 * A stochastic differential-algebraic equation with possibly singular A(t).
 *
 * Callbacks must be pure and safe to call concurrently. When a_prime or
 * p_prime are absent, derivatives are taken by central differences with
 * step 1e-6 * max(1, T).
 */
struct SdaeProblem {
    std::string name;
    int d = 0;
    int m = 0;
    double T = 1.0;
    MatrixFn A;
    MatrixFn B;
    DriftFn f;
    DiffusionFn g;
    Vector X0;
    std::optional<MatrixFn> A_prime;
    std::optional<MatrixFn> P_prime;
    double rank_tol = linalg::kDefaultRankTol;
    /// A and B do not depend on t; per-step operators may then be built once.
    bool constant_coefficients = false;

    /// Throws std::invalid_argument when dimensions, horizon or X0 are inconsistent.
    void check() const;
};

struct ProjectorBundle {
    double t = 0.0;
    Matrix A;
    Matrix A_pinv;
    Matrix P;
    Matrix Q;
    Matrix R;
};

ProjectorBundle projector_bundle_at(const SdaeProblem& p, double t);

/// dP/dt at t, analytic when p.P_prime is set.
Matrix projector_derivative(const SdaeProblem& p, double t);

struct ValidationReport {
    bool index1_noise_ok = true;
    bool constraint_solvable_ok = true;
    double probed_one_sided_constant = 0.0;
    double probed_monotone_constant = 0.0;
    int samples_used = 0;
    double worst_violation = 0.0;
    double worst_t = 0.0;
    Vector worst_x;
    std::string worst_kind;

    bool index1_ok() const { return index1_noise_ok && constraint_solvable_ok; }
};

/// Relative tolerance on |R g|_F / (1 + |g|_F) for the noise range check.
inline constexpr double kNoiseRangeTol = 1e-10;

/**
 * Sampled index-1 check: R(t) g(t, x) = 0 (noise stays out of the
 * constraints) and A(t) + R(t) B(t) nonsingular. Failures are reported,
 * never thrown. Also fills in both probe constants from the same seed.
 */
ValidationReport validate_index1(const SdaeProblem& p, int sample_count, std::uint64_t seed);

/// <X - Y, f(t,X) - f(t,Y)> / |X - Y|^2.
double one_sided_ratio(const SdaeProblem& p, double t, const Vector& x, const Vector& y);

/// Max of one_sided_ratio over sampled pairs. Large values falsify a claimed constant.
double probe_one_sided_lipschitz(const SdaeProblem& p, int sample_count, std::uint64_t seed);

/// [<P X, A^-(B X + f)> + |A^- g|_1^2 / 2] / (1 + |X|^2) at a single point.
double monotone_ratio(const SdaeProblem& p, double t, const Vector& x);

double probe_monotone_condition(const SdaeProblem& p, int sample_count, std::uint64_t seed);

/**
 * Reproducible probe points: t uniform on [0, T], x standard normal scaled by
 * a radius cycling through {1, 10, 100}.
 */
class ProbeSampler {
public:
    ProbeSampler(std::uint64_t seed, int d, double T);
    double next_time();
    Vector next_state();

private:
    std::uint64_t state_;
    int d_;
    double T_;
    int radius_index_ = 0;
    std::uint64_t next_bits();
    double next_normal();
};

SdaeProblem builtin_paper_example();

/// paper-example with the second row of g set to (1, 0, 0); violates the noise range condition.
SdaeProblem paper_example_broken_g();

/**
 * Random constant-coefficient index-1 problem: A of rank `rank`, generic B,
 * drift f = A (c x - x^3) + L x with a small L in Im R, and g = A * G(x) so
 * that the noise lies in Im A.
 * Draws are repeated until A + R B has smallest singular value >= 0.1.
 */
SdaeProblem random_index1_problem(std::uint64_t seed, int d, int rank);

std::vector<std::string> registered_models();

/// Throws std::out_of_range for unknown names.
SdaeProblem make_model(const std::string& name);

}  // namespace sdae
