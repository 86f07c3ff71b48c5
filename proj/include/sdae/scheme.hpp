#pragma once

// Time steppers for index-1 SDAEs: the semi-implicit tamed scheme
//   (A - h B) X_{n+1} = A X_n + h f(X_n) / (1 + h |f(X_n)|) + g(X_n) dW_n,
// its equivalent form on the inherent SDE (u = P X, v = Q X), an untamed
// comparison stepper and the continuous-time interpolant.

#include "sdae/model.hpp"
#include "sdae/wiener.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdae {

enum class SchemeKind { DirectTamed, DualTamed, DirectUntamed };

std::string_view to_string(SchemeKind kind);
/// Accepts "direct-tamed", "dual-tamed", "direct-untamed"; throws std::invalid_argument otherwise.
SchemeKind parse_scheme(std::string_view name);

/// f h / (1 + h |f|). Its norm never exceeds min(1, h |f|).
Vector tame(const Vector& f_val, double h);

/// Operators of the direct scheme frozen at (t_n, h).
struct DirectOperators {
    double t = 0.0;
    double h = 0.0;
    Matrix A;
    Matrix B;
    Matrix R;
    Matrix S;  ///< A - h B
    linalg::LinearSolver S_solver;
};

DirectOperators make_direct_operators(const SdaeProblem& p, double t, double h);

/// Operators of the dual scheme frozen at (t_n, h).
struct DualOperators {
    double t = 0.0;
    double h = 0.0;
    ProjectorBundle bundle;
    Matrix B;
    Matrix RB;
    Matrix constraint;  ///< A + R B
    linalg::LinearSolver constraint_solver;
    Matrix M1;
    Matrix M2;
    Matrix I_plus_hM1;
    linalg::LinearSolver u_solver;
};

DualOperators make_dual_operators(const SdaeProblem& p, double t, double h);

struct StepResult {
    Vector X;
    double solve_residual = 0.0;
    /// |R B X_{n+1} + R F_n + R g dW / h| where F_n is the (tamed) drift.
    double constraint_residual = 0.0;
};

struct DualStepResult {
    Vector u;
    Vector v;
    Vector X;
    double solve_residual = 0.0;
    /// |(A + R B) v_{n+1} + R B u_{n+1} + R F_n|.
    double constraint_residual = 0.0;
};

Vector step_direct(const SdaeProblem& p, double t_n, const Vector& X_n, double h, const Vector& dW);
StepResult step_direct(const DirectOperators& ops, const SdaeProblem& p, const Vector& X_n, const Vector& dW);

Vector step_untamed(const SdaeProblem& p, double t_n, const Vector& X_n, double h, const Vector& dW);
StepResult step_untamed(const DirectOperators& ops, const SdaeProblem& p, const Vector& X_n, const Vector& dW);

DualStepResult step_dual(const SdaeProblem& p, double t_n, const Vector& u_n, const Vector& v_n, double h,
                         const Vector& dW);
DualStepResult step_dual(const DualOperators& ops, const SdaeProblem& p, const Vector& u_n, const Vector& v_n,
                         const Vector& dW);

/**
 * M1 = -P' + P'(A + R B)^{-1} R B - A^- B + A^- B (A + R B)^{-1} R B
 * M2 = A^- - P'(A + R B)^{-1} R - A^- B (A + R B)^{-1} R
 * Throws SingularSystem when A + R B is singular at t.
 */
Matrix assemble_M1(const SdaeProblem& p, double t);
Matrix assemble_M2(const SdaeProblem& p, double t);

struct StabilityNode {
    double t = 0.0;
    bool step_matrix_ok = false;   ///< A - h B nonsingular
    bool constraint_ok = false;    ///< A + R B nonsingular
    bool dual_matrix_ok = false;   ///< I + h M1 nonsingular
    double inverse_norm_1 = 0.0;   ///< |(I + h M1)^{-1}|_1, NaN when singular
};

struct StabilityReport {
    double h = 0.0;
    std::vector<StabilityNode> nodes;
    /// max_n log(|(I + h M1)^{-1}|_1) / h, clamped at 0; smallest K with the exp(K h) bound on the grid.
    double observed_K = 0.0;

    bool all_nonsingular() const;
};

StabilityReport check_stability(const SdaeProblem& p, double h, const std::vector<double>& grid);

struct Trajectory {
    std::string problem;
    SchemeKind scheme = SchemeKind::DirectTamed;
    long N = 0;
    double h = 0.0;
    /// Rows X_0 .. X_k; k = N unless the run diverged.
    Matrix states;
    /// Dual scheme only: rows u_n and v_n.
    std::optional<Matrix> u;
    std::optional<Matrix> v;
    std::vector<double> solve_residuals;
    std::vector<double> constraint_residuals;
    bool diverged = false;
    /// Index of the first non-finite state when diverged.
    long diverged_step = -1;

    Vector state(long n) const { return states.row(n).transpose(); }
    long steps_completed() const { return states.rows() - 1; }
};

/// Raised by simulate when a step fails; carries the step index.
class StepFailure : public SingularSystem {
public:
    StepFailure(long step, double t, const std::string& what);
    long step;
    double t;
};

Trajectory simulate(const SdaeProblem& p, SchemeKind kind, const WienerGrid& w);

/// Columns: n, t, X_1..X_d[, u_1..u_d, v_1..v_d], solve_residual, constraint_residual.
void write_csv(std::ostream& out, const Trajectory& traj);

enum class IntervalSide {
    /// t in [t_n, t_{n+1}); a node t_n uses the step that starts there.
    HalfOpen,
    /// A node t_{n+1} is evaluated as the left limit of step n (full increment).
    LeftLimit,
};

/**
 * Continuous-time interpolant of the direct scheme on [t_n, t_{n+1}):
 *   S_h^{-1} [A X_n + f(X_n) (t - t_n) / (1 + h |f(X_n)|) + g(X_n) (W(t) - W(t_n))].
 * At t = t_n this is S_h^{-1} A X_n, which differs from X_n unless
 * S_h^{-1} A X_n = X_n. The fine grid must refine the trajectory grid and t
 * must be one of its nodes.
 */
Vector interpolate(const Trajectory& traj, const SdaeProblem& p, const WienerGrid& w_fine, double t,
                   IntervalSide side = IntervalSide::HalfOpen);

}  // namespace sdae
