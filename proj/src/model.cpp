#include "sdae/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

namespace sdae {

void SdaeProblem::check() const
{
    if (d < 1 || m < 1) throw std::invalid_argument("SdaeProblem: d and m must be >= 1");
    if (!(T > 0) || !std::isfinite(T)) throw std::invalid_argument("SdaeProblem: T must be positive and finite");
    if (!A || !B || !f || !g) throw std::invalid_argument("SdaeProblem: A, B, f, g are required");
    if (X0.size() != d) throw std::invalid_argument("SdaeProblem: X0 has wrong dimension");
    if (!X0.allFinite()) throw std::invalid_argument("SdaeProblem: X0 is not finite");
    if (!(rank_tol > 0)) throw std::invalid_argument("SdaeProblem: rank_tol must be positive");
}

ProjectorBundle projector_bundle_at(const SdaeProblem& p, double t)
{
    ProjectorBundle bundle;
    bundle.t = t;
    bundle.A = p.A(t);
    if (bundle.A.rows() != p.d || bundle.A.cols() != p.d)
        throw DimensionMismatch("projector_bundle_at: A(t) is not d x d");
    bundle.A_pinv = linalg::pseudo_inverse(bundle.A, p.rank_tol);
    auto proj = linalg::projectors(bundle.A, bundle.A_pinv);
    bundle.P = std::move(proj.P);
    bundle.Q = std::move(proj.Q);
    bundle.R = std::move(proj.R);
    return bundle;
}

Matrix projector_derivative(const SdaeProblem& p, double t)
{
    if (p.P_prime) return (*p.P_prime)(t);
    if (p.constant_coefficients) return Matrix::Zero(p.d, p.d);
    const double step = 1e-6 * std::max(1.0, p.T);
    // One-sided at the ends so A is never evaluated outside [0, T].
    const double lo = std::max(0.0, t - step);
    const double hi = std::min(p.T, t + step);
    return (projector_bundle_at(p, hi).P - projector_bundle_at(p, lo).P) / (hi - lo);
}

// ---------------------------------------------------------------------------
// Probe sampler: splitmix64 bits, Marsaglia polar normals.

ProbeSampler::ProbeSampler(std::uint64_t seed, int d, double T)
    : state_(seed ^ 0x5bd1e995a3c1f2e7ULL), d_(d), T_(T)
{
}

std::uint64_t ProbeSampler::next_bits()
{
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double ProbeSampler::next_time()
{
    return T_ * static_cast<double>(next_bits() >> 11) * 0x1.0p-53;
}

double ProbeSampler::next_normal()
{
    for (;;) {
        const double u = 2.0 * static_cast<double>(next_bits() >> 11) * 0x1.0p-53 - 1.0;
        const double v = 2.0 * static_cast<double>(next_bits() >> 11) * 0x1.0p-53 - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

Vector ProbeSampler::next_state()
{
    static constexpr double kRadii[] = {1.0, 10.0, 100.0};
    const double radius = kRadii[radius_index_];
    radius_index_ = (radius_index_ + 1) % 3;
    Vector x(d_);
    for (int i = 0; i < d_; ++i) x(i) = radius * next_normal();
    return x;
}

// ---------------------------------------------------------------------------

double one_sided_ratio(const SdaeProblem& p, double t, const Vector& x, const Vector& y)
{
    const Vector diff = x - y;
    const double denom = diff.squaredNorm();
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return diff.dot(p.f(t, x) - p.f(t, y)) / denom;
}

double probe_one_sided_lipschitz(const SdaeProblem& p, int sample_count, std::uint64_t seed)
{
    if (sample_count < 2) throw std::invalid_argument("probe_one_sided_lipschitz: need >= 2 samples");
    ProbeSampler sampler(seed, p.d, p.T);
    constexpr double kDegenerate = 1e-8;
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < sample_count; ++k) {
        const double t = sampler.next_time();
        const Vector x = sampler.next_state();
        const Vector y = sampler.next_state();
        // Also probe a nearby pair so the local slope is seen, not just the chord.
        const Vector y_near = x + 1e-3 * (y - x) / std::max(1.0, (y - x).norm());
        for (const Vector* other : {&y, &y_near}) {
            if ((x - *other).norm() < kDegenerate) continue;
            const double r = one_sided_ratio(p, t, x, *other);
            if (std::isfinite(r)) worst = std::max(worst, r);
        }
    }
    return worst;
}

double monotone_ratio(const SdaeProblem& p, double t, const Vector& x)
{
    const ProjectorBundle bundle = projector_bundle_at(p, t);
    const Vector px = bundle.P * x;
    const Vector drift = bundle.A_pinv * (p.B(t) * x + p.f(t, x));
    const double noise = linalg::mat_norm_1(bundle.A_pinv * p.g(t, x));
    return (px.dot(drift) + 0.5 * noise * noise) / (1.0 + x.squaredNorm());
}

double probe_monotone_condition(const SdaeProblem& p, int sample_count, std::uint64_t seed)
{
    if (sample_count < 1) throw std::invalid_argument("probe_monotone_condition: need >= 1 sample");
    ProbeSampler sampler(seed, p.d, p.T);
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < sample_count; ++k) {
        const double t = sampler.next_time();
        const Vector x = sampler.next_state();
        worst = std::max(worst, monotone_ratio(p, t, x));
    }
    return worst;
}

ValidationReport validate_index1(const SdaeProblem& p, int sample_count, std::uint64_t seed)
{
    if (sample_count < 1) throw std::invalid_argument("validate_index1: need >= 1 sample");
    ValidationReport report;
    ProbeSampler sampler(seed, p.d, p.T);
    report.worst_x = Vector::Zero(p.d);

    auto record = [&](double violation, double t, const Vector& x, const char* kind) {
        if (violation > report.worst_violation) {
            report.worst_violation = violation;
            report.worst_t = t;
            report.worst_x = x;
            report.worst_kind = kind;
        }
    };

    for (int k = 0; k < sample_count; ++k) {
        const double t = sampler.next_time();
        const Vector x = sampler.next_state();
        const ProjectorBundle bundle = projector_bundle_at(p, t);

        const Matrix gx = p.g(t, x);
        const double leak = linalg::frobenius_norm(bundle.R * gx) / (1.0 + linalg::frobenius_norm(gx));
        if (!(leak <= kNoiseRangeTol)) {
            report.index1_noise_ok = false;
            record(leak, t, x, "noise enters constraints (|R g|_F)");
        }

        try {
            linalg::LinearSolver(bundle.A + bundle.R * p.B(t));
        } catch (const SingularSystem&) {
            report.constraint_solvable_ok = false;
            record(1.0, t, x, "A + R B singular");
        }
        ++report.samples_used;
    }

    report.probed_one_sided_constant = probe_one_sided_lipschitz(p, std::max(2, sample_count), seed);
    report.probed_monotone_constant = probe_monotone_condition(p, sample_count, seed);
    return report;
}

// ---------------------------------------------------------------------------
// Registry

namespace {

Matrix paper_A()
{
    Matrix a(3, 3);
    a << 1, 0, 1,
         0, 0, 0,
         1, 0, 0;
    return a;
}

}  // namespace

SdaeProblem builtin_paper_example()
{
    SdaeProblem p;
    p.name = "paper-example";
    p.d = 3;
    p.m = 3;
    p.T = 1.0;
    p.A = [](double) { return paper_A(); };
    p.B = [](double) { return Matrix(Eigen::Vector3d(0.0, -1.0, 1.0).asDiagonal()); };
    p.f = [](double, const Vector& x) {
        Vector out(3);
        out << x(0), x(1) - std::pow(x(1), 5), x(2) - x(2) * x(2) * x(2);
        return out;
    };
    p.g = [](double, const Vector& x) {
        Matrix out(3, 3);
        out << x(0) - x(2), x(1), x(2),
               0.0, 0.0, 0.0,
               x(1) - x(2), x(0), x(1) - x(0);
        return out;
    };
    p.X0 = Eigen::Vector3d(1e-2, 0.0, 1e-2);
    p.A_prime = [](double) { return Matrix(Matrix::Zero(3, 3)); };
    p.P_prime = [](double) { return Matrix(Matrix::Zero(3, 3)); };
    p.constant_coefficients = true;
    return p;
}

SdaeProblem paper_example_broken_g()
{
    SdaeProblem p = builtin_paper_example();
    p.name = "paper-example-broken-g";
    auto base = p.g;
    p.g = [base](double t, const Vector& x) {
        Matrix out = base(t, x);
        out.row(1) << 1.0, 0.0, 0.0;
        return out;
    };
    return p;
}

SdaeProblem random_index1_problem(std::uint64_t seed, int d, int rank)
{
    if (d < 2 || rank < 1 || rank >= d)
        throw std::invalid_argument("random_index1_problem: need 1 <= rank < d");

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    auto gaussian = [&](int r, int c) {
        Matrix out(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) out(i, j) = normal(gen);
        return out;
    };

    const int m = 2;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const Matrix U = Eigen::HouseholderQR<Matrix>(gaussian(d, d)).householderQ();
        const Matrix V = Eigen::HouseholderQR<Matrix>(gaussian(d, d)).householderQ();
        Vector sigma = Vector::Zero(d);
        for (int i = 0; i < rank; ++i) sigma(i) = 1.0 + uniform(gen);
        const Matrix A = U * sigma.asDiagonal() * V.transpose();
        const Matrix B = 0.5 * gaussian(d, d) - Matrix::Identity(d, d);
        Vector c(d);
        for (int i = 0; i < d; ++i) c(i) = uniform(gen);
        const Matrix G1 = 0.3 * gaussian(d, m);
        const Matrix G0 = 0.1 * gaussian(d, m);
        Vector x0(d);
        for (int i = 0; i < d; ++i) x0(i) = 0.5 * normal(gen);

        const Matrix pinv = linalg::pseudo_inverse(A);
        const Matrix R = Matrix::Identity(d, d) - A * pinv;
        Eigen::JacobiSVD<Matrix> svd(A + R * B);
        if (svd.singularValues().minCoeff() < 0.1) continue;

        SdaeProblem p;
        p.name = "random-index1";
        p.d = d;
        p.m = m;
        p.T = 1.0;
        p.A = [A](double) { return A; };
        p.B = [B](double) { return B; };
        // Superlinear part enters through Im A; the constraint only sees a weak
        // linear term, so the explicit algebraic update stays contractive.
        const Matrix L = 0.02 * R * gaussian(d, d) / std::sqrt(static_cast<double>(d));
        p.f = [A, L, c](double, const Vector& x) {
            return Vector(A * (c.cwiseProduct(x) - x.cwiseProduct(x).cwiseProduct(x)) + L * x);
        };
        p.g = [A, G0, G1](double, const Vector& x) {
            Matrix G(G1.rows(), G1.cols());
            for (Eigen::Index i = 0; i < G.rows(); ++i)
                for (Eigen::Index j = 0; j < G.cols(); ++j)
                    G(i, j) = G0(i, j) + G1(i, j) * x((i + j) % x.size());
            return Matrix(A * G);
        };
        p.X0 = x0;
        p.P_prime = [d](double) { return Matrix(Matrix::Zero(d, d)); };
        p.constant_coefficients = true;
        return p;
    }
    throw std::runtime_error("random_index1_problem: no admissible draw");
}

namespace {

const std::map<std::string, std::function<SdaeProblem()>>& registry()
{
    static const std::map<std::string, std::function<SdaeProblem()>> models = {
        {"paper-example", builtin_paper_example},
        {"paper-example-broken-g", paper_example_broken_g},
        {"random-index1", [] { return random_index1_problem(1, 4, 2); }},
    };
    return models;
}

}  // namespace

std::vector<std::string> registered_models()
{
    std::vector<std::string> names;
    for (const auto& [name, _] : registry()) names.push_back(name);
    return names;
}

SdaeProblem make_model(const std::string& name)
{
    const auto& models = registry();
    const auto it = models.find(name);
    if (it == models.end()) throw std::out_of_range("unknown model '" + name + "'");
    return it->second();
}

}  // namespace sdae
