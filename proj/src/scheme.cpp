#include "sdae/scheme.hpp"

#include "sdae/format.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace sdae {

std::string_view to_string(SchemeKind kind)
{
    switch (kind) {
    case SchemeKind::DirectTamed: return "direct-tamed";
    case SchemeKind::DualTamed: return "dual-tamed";
    case SchemeKind::DirectUntamed: return "direct-untamed";
    }
    return "unknown";
}

SchemeKind parse_scheme(std::string_view name)
{
    if (name == "direct-tamed") return SchemeKind::DirectTamed;
    if (name == "dual-tamed") return SchemeKind::DualTamed;
    if (name == "direct-untamed") return SchemeKind::DirectUntamed;
    throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

Vector tame(const Vector& f_val, double h)
{
    return f_val * (h / (1.0 + h * f_val.norm()));
}

namespace {

std::string at_time(const char* what, double t)
{
    return std::string(what) + " at t=" + format_double(t);
}

/// Drift contribution of one step: tamed f h, or raw f h for the comparison stepper.
Vector drift_increment(const Vector& f_val, double h, bool tamed)
{
    return tamed ? tame(f_val, h) : Vector(f_val * h);
}

StepResult step_direct_impl(const DirectOperators& ops, const SdaeProblem& p, const Vector& X_n,
                            const Vector& dW, bool tamed)
{
    const Vector f_val = p.f(ops.t, X_n);
    const Matrix g_val = p.g(ops.t, X_n);
    const Vector drift = drift_increment(f_val, ops.h, tamed);
    const Vector noise = g_val * dW;
    const Vector rhs = ops.A * X_n + drift + noise;

    StepResult out;
    out.X = ops.S_solver.solve(rhs);
    out.solve_residual = (ops.S * out.X - rhs).norm();
    // Left-multiplying the step by R (R A = 0) leaves R B X_{n+1} + R drift/h + R g dW/h = 0.
    out.constraint_residual = (ops.R * (ops.B * out.X + (drift + noise) / ops.h)).norm();
    return out;
}

}  // namespace

DirectOperators make_direct_operators(const SdaeProblem& p, double t, double h)
{
    if (!(h > 0)) throw std::invalid_argument("step size must be positive");
    DirectOperators ops;
    ops.t = t;
    ops.h = h;
    const ProjectorBundle bundle = projector_bundle_at(p, t);
    ops.A = bundle.A;
    ops.R = bundle.R;
    ops.B = p.B(t);
    ops.S = ops.A - h * ops.B;
    ops.S_solver = linalg::LinearSolver(ops.S, at_time("A - h B singular", t));
    return ops;
}

StepResult step_direct(const DirectOperators& ops, const SdaeProblem& p, const Vector& X_n, const Vector& dW)
{
    return step_direct_impl(ops, p, X_n, dW, true);
}

Vector step_direct(const SdaeProblem& p, double t_n, const Vector& X_n, double h, const Vector& dW)
{
    return step_direct(make_direct_operators(p, t_n, h), p, X_n, dW).X;
}

StepResult step_untamed(const DirectOperators& ops, const SdaeProblem& p, const Vector& X_n, const Vector& dW)
{
    return step_direct_impl(ops, p, X_n, dW, false);
}

Vector step_untamed(const SdaeProblem& p, double t_n, const Vector& X_n, double h, const Vector& dW)
{
    return step_untamed(make_direct_operators(p, t_n, h), p, X_n, dW).X;
}

// ---------------------------------------------------------------------------

namespace {

struct DualPieces {
    ProjectorBundle bundle;
    Matrix B;
    Matrix RB;
    Matrix constraint;
    linalg::LinearSolver constraint_solver;
    Matrix M1;
    Matrix M2;
};

DualPieces dual_pieces(const SdaeProblem& p, double t)
{
    DualPieces pieces;
    pieces.bundle = projector_bundle_at(p, t);
    pieces.B = p.B(t);
    const Matrix& R = pieces.bundle.R;
    const Matrix& A_pinv = pieces.bundle.A_pinv;
    pieces.RB = R * pieces.B;
    pieces.constraint = pieces.bundle.A + pieces.RB;
    pieces.constraint_solver = linalg::LinearSolver(pieces.constraint, at_time("A + R B singular", t));

    const Matrix P_prime = projector_derivative(p, t);
    const Matrix A_pinv_B = A_pinv * pieces.B;
    const Matrix lift_RB = pieces.constraint_solver.solve(pieces.RB);  // (A + R B)^{-1} R B
    const Matrix lift_R = pieces.constraint_solver.solve(R);           // (A + R B)^{-1} R

    pieces.M1 = -P_prime + P_prime * lift_RB - A_pinv_B + A_pinv_B * lift_RB;
    pieces.M2 = A_pinv - P_prime * lift_R - A_pinv_B * lift_R;
    return pieces;
}

}  // namespace

Matrix assemble_M1(const SdaeProblem& p, double t)
{
    return dual_pieces(p, t).M1;
}

Matrix assemble_M2(const SdaeProblem& p, double t)
{
    return dual_pieces(p, t).M2;
}

DualOperators make_dual_operators(const SdaeProblem& p, double t, double h)
{
    if (!(h > 0)) throw std::invalid_argument("step size must be positive");
    DualPieces pieces = dual_pieces(p, t);
    DualOperators ops;
    ops.t = t;
    ops.h = h;
    ops.bundle = std::move(pieces.bundle);
    ops.B = std::move(pieces.B);
    ops.RB = std::move(pieces.RB);
    ops.constraint = std::move(pieces.constraint);
    ops.constraint_solver = std::move(pieces.constraint_solver);
    ops.M1 = std::move(pieces.M1);
    ops.M2 = std::move(pieces.M2);
    ops.I_plus_hM1 = Matrix::Identity(p.d, p.d) + h * ops.M1;
    ops.u_solver = linalg::LinearSolver(ops.I_plus_hM1, at_time("I + h M1 singular", t));
    return ops;
}

DualStepResult step_dual(const DualOperators& ops, const SdaeProblem& p, const Vector& u_n, const Vector& v_n,
                         const Vector& dW)
{
    const double h = ops.h;
    const Vector X_n = u_n + v_n;
    const Vector f_val = p.f(ops.t, X_n);
    const double damping = 1.0 / (1.0 + h * f_val.norm());

    const Vector rhs = u_n + ops.M2 * (f_val * (h * damping)) + ops.bundle.A_pinv * (p.g(ops.t, X_n) * dW);

    DualStepResult out;
    out.u = ops.u_solver.solve(rhs);
    out.solve_residual = (ops.I_plus_hM1 * out.u - rhs).norm();

    const Vector constraint_rhs = ops.RB * out.u + ops.bundle.R * (f_val * damping);
    out.v = -ops.constraint_solver.solve(constraint_rhs);
    out.constraint_residual = (ops.constraint * out.v + constraint_rhs).norm();
    out.X = out.u + out.v;
    return out;
}

DualStepResult step_dual(const SdaeProblem& p, double t_n, const Vector& u_n, const Vector& v_n, double h,
                         const Vector& dW)
{
    return step_dual(make_dual_operators(p, t_n, h), p, u_n, v_n, dW);
}

// ---------------------------------------------------------------------------

bool StabilityReport::all_nonsingular() const
{
    for (const auto& node : nodes)
        if (!node.step_matrix_ok || !node.constraint_ok || !node.dual_matrix_ok) return false;
    return true;
}

StabilityReport check_stability(const SdaeProblem& p, double h, const std::vector<double>& grid)
{
    if (!(h >= 0)) throw std::invalid_argument("check_stability: h must be >= 0");
    StabilityReport report;
    report.h = h;
    for (const double t : grid) {
        if (t < 0.0 || t > p.T) throw std::invalid_argument("check_stability: grid point outside [0, T]");
        StabilityNode node;
        node.t = t;
        node.inverse_norm_1 = std::numeric_limits<double>::quiet_NaN();
        const Matrix A = p.A(t);
        const Matrix B = p.B(t);
        try {
            linalg::LinearSolver(A - h * B);
            node.step_matrix_ok = true;
        } catch (const SingularSystem&) {
        }
        try {
            const Matrix M1 = assemble_M1(p, t);
            node.constraint_ok = true;
            const linalg::LinearSolver solver(Matrix::Identity(p.d, p.d) + h * M1);
            node.dual_matrix_ok = true;
            node.inverse_norm_1 = linalg::mat_norm_1(solver.inverse());
        } catch (const SingularSystem&) {
        }
        if (node.dual_matrix_ok && h > 0 && node.inverse_norm_1 > 1.0)
            report.observed_K = std::max(report.observed_K, std::log(node.inverse_norm_1) / h);
        report.nodes.push_back(node);
    }
    return report;
}

// ---------------------------------------------------------------------------

StepFailure::StepFailure(long step_, double t_, const std::string& what)
    : SingularSystem("step " + std::to_string(step_) + ": " + what), step(step_), t(t_)
{
}

Trajectory simulate(const SdaeProblem& p, SchemeKind kind, const WienerGrid& w)
{
    p.check();
    if (w.m != p.m) throw std::invalid_argument("simulate: Wiener grid noise dimension != problem m");
    if (w.T != p.T) throw std::invalid_argument("simulate: Wiener grid horizon != problem T");

    const long N = w.N;
    const double h = w.h();
    Trajectory traj;
    traj.problem = p.name;
    traj.scheme = kind;
    traj.N = N;
    traj.h = h;
    traj.states.resize(N + 1, p.d);
    traj.states.row(0) = p.X0.transpose();
    traj.solve_residuals.reserve(N);
    traj.constraint_residuals.reserve(N);

    const bool dual = kind == SchemeKind::DualTamed;
    std::optional<DirectOperators> direct_ops;
    std::optional<DualOperators> dual_ops;
    Vector u, v;
    if (dual) {
        const ProjectorBundle bundle0 = projector_bundle_at(p, 0.0);
        u = bundle0.P * p.X0;
        v = bundle0.Q * p.X0;
        traj.u = Matrix(N + 1, p.d);
        traj.v = Matrix(N + 1, p.d);
        traj.u->row(0) = u.transpose();
        traj.v->row(0) = v.transpose();
    }

    Vector X = p.X0;
    for (long n = 0; n < N; ++n) {
        const double t_n = static_cast<double>(n) * h;
        const Vector dW = w.increment(n);
        double solve_residual = 0.0;
        double constraint_residual = 0.0;
        try {
            if (dual) {
                if (!dual_ops || !p.constant_coefficients) dual_ops = make_dual_operators(p, t_n, h);
                DualStepResult r = step_dual(*dual_ops, p, u, v, dW);
                u = std::move(r.u);
                v = std::move(r.v);
                X = std::move(r.X);
                solve_residual = r.solve_residual;
                constraint_residual = r.constraint_residual;
            } else {
                if (!direct_ops || !p.constant_coefficients) direct_ops = make_direct_operators(p, t_n, h);
                StepResult r = kind == SchemeKind::DirectTamed ? step_direct(*direct_ops, p, X, dW)
                                                               : step_untamed(*direct_ops, p, X, dW);
                X = std::move(r.X);
                solve_residual = r.solve_residual;
                constraint_residual = r.constraint_residual;
            }
        } catch (const SingularSystem& e) {
            throw StepFailure(n, t_n, e.what());
        }

        if (!X.allFinite()) {
            traj.diverged = true;
            traj.diverged_step = n + 1;
            traj.states.conservativeResize(n + 1, Eigen::NoChange);
            if (dual) {
                traj.u->conservativeResize(n + 1, Eigen::NoChange);
                traj.v->conservativeResize(n + 1, Eigen::NoChange);
            }
            break;
        }
        traj.states.row(n + 1) = X.transpose();
        if (dual) {
            traj.u->row(n + 1) = u.transpose();
            traj.v->row(n + 1) = v.transpose();
        }
        traj.solve_residuals.push_back(solve_residual);
        traj.constraint_residuals.push_back(constraint_residual);
    }
    return traj;
}

void write_csv(std::ostream& out, const Trajectory& traj)
{
    const long d = traj.states.cols();
    const bool dual = traj.u.has_value();
    out << "n,t";
    for (long i = 1; i <= d; ++i) out << ",X_" << i;
    if (dual) {
        for (long i = 1; i <= d; ++i) out << ",u_" << i;
        for (long i = 1; i <= d; ++i) out << ",v_" << i;
    }
    out << ",solve_residual,constraint_residual\n";

    for (long n = 0; n < traj.states.rows(); ++n) {
        out << n << ',' << format_double(static_cast<double>(n) * traj.h);
        for (long i = 0; i < d; ++i) out << ',' << format_double(traj.states(n, i));
        if (dual) {
            for (long i = 0; i < d; ++i) out << ',' << format_double((*traj.u)(n, i));
            for (long i = 0; i < d; ++i) out << ',' << format_double((*traj.v)(n, i));
        }
        // Residuals belong to the step that produced row n; row 0 has none.
        if (n == 0) {
            out << ",0,0\n";
        } else {
            out << ',' << format_double(traj.solve_residuals[n - 1]) << ','
                << format_double(traj.constraint_residuals[n - 1]) << '\n';
        }
    }
}

Vector interpolate(const Trajectory& traj, const SdaeProblem& p, const WienerGrid& w_fine, double t,
                   IntervalSide side)
{
    if (t < 0.0 || t > p.T) throw std::out_of_range("interpolate: t outside [0, T]");
    if (w_fine.N % traj.N != 0 || w_fine.T != p.T)
        throw std::invalid_argument("interpolate: Wiener grid does not refine the trajectory grid");

    const double fine_h = w_fine.h();
    const double k_real = t / fine_h;
    const long k = std::lround(k_real);
    if (std::abs(k_real - static_cast<double>(k)) > 1e-9)
        throw std::out_of_range("interpolate: t is not a node of the fine Wiener grid");

    const long ratio = w_fine.N / traj.N;
    long n = k / ratio;
    if (side == IntervalSide::LeftLimit && k % ratio == 0 && n > 0) --n;
    if (n >= traj.N) n = traj.N - 1;  // t = T closes the last interval
    if (n >= traj.states.rows())
        throw std::out_of_range("interpolate: trajectory does not cover t");

    const double t_n = static_cast<double>(n) * traj.h;
    const Vector X_n = traj.state(n);
    const DirectOperators ops = make_direct_operators(p, t_n, traj.h);
    const Vector f_val = p.f(t_n, X_n);
    const double elapsed = static_cast<double>(k - n * ratio) * fine_h;
    const double damping = traj.scheme == SchemeKind::DirectUntamed ? 1.0 : 1.0 / (1.0 + traj.h * f_val.norm());
    const Vector dW_partial = w_fine.partial_sum(n * ratio, k);

    const Vector rhs = ops.A * X_n + f_val * (elapsed * damping) + p.g(t_n, X_n) * dW_partial;
    return ops.S_solver.solve(rhs);
}

}  // namespace sdae
