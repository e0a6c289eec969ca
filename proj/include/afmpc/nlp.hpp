#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace afmpc::nlp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// minimize objective(z) subject to constraints(z) <= 0 and lower <= z <= upper.
struct NlpProblem {
    int dimension = 0;
    std::function<double(const Vector&)> objective;
    std::function<Vector(const Vector&)> inequality_constraints;  // returns m values
    int constraint_count = 0;                                       // m
    Vector lower_bounds;  // +-infinity allowed
    Vector upper_bounds;

    void validate() const;
};

struct SolverSettings {
    double kkt_tolerance = 1e-6;
    int max_iterations = 100;
    double finite_difference_step = 1e-6;
    // BFGS curvature s^T y below this fraction of |s|^2 skips the update.
    double hessian_reset_threshold = 1e-10;
    // Weight of the l1 slack when linearized constraints are inconsistent.
    double relaxation_penalty = 1e4;
};

enum class Status { kConverged, kMaxIterations, kInfeasible };

const char* to_string(Status status);

struct Solution {
    Vector minimizer;
    Vector multipliers;        // for inequality_constraints, >= 0
    Vector bound_multipliers;  // lower minus upper bound multipliers
    double objective_value = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    Status status = Status::kMaxIterations;
    std::vector<double> merit_history;  // merit value at every accepted iterate
};

/// J(z) + lambda^T c(z)
double lagrangian(const NlpProblem& problem, const Vector& z, const Vector& lambda);

/// Central-difference gradient with per-component step h * max(1, |z_i|).
Vector gradient(const std::function<double(const Vector&)>& f, const Vector& z, double step);

/// Central-difference Jacobian (rows = constraint components).
Matrix jacobian(const std::function<Vector(const Vector&)>& c, const Vector& z, int rows,
                double step);

struct QpResult {
    bool feasible = false;
    Vector x;
    Vector multipliers;  // one per constraint row, >= 0
};

/**
 * Strictly convex dense QP by the Goldfarb-Idnani dual active-set method:
 *   minimize 0.5 x^T H x + g^T x  subject to  C x >= d.
 * H must be positive definite. Infeasibility is reported, never thrown.
 */
QpResult solve_dense_qp(const Matrix& h, const Vector& g, const Matrix& c, const Vector& d);

struct SearchDirection {
    Vector step;               // p
    Vector multipliers;        // lambda for the linearized inequality constraints
    Vector bound_multipliers;  // lower minus upper
    bool relaxed = false;      // true if the l1-relaxed subproblem had to be used
};

/**
 * Solves the local subproblem min p^T grad J + 0.5 p^T H p with constraints
 * linearized at z and the box shifted to p. Falls back to an l1 relaxation of
 * the linearized constraints when they admit no point.
 */
SearchDirection search_step(const NlpProblem& problem, const Vector& z, const Matrix& hessian,
                            const SolverSettings& settings = {});

/// SQP with damped BFGS and an l1 merit backtracking line search. Deterministic.
Solution minimize(const NlpProblem& problem, const Vector& z0, const SolverSettings& settings = {});

}  // namespace afmpc::nlp
