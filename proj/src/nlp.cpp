#include "afmpc/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "afmpc/errors.hpp"

namespace afmpc::nlp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Objective and constraint values with their derivatives at one point.
struct Linearization {
    double f = 0.0;
    Vector grad;
    Vector c;
    Matrix jac;
};

Linearization linearize(const NlpProblem& problem, const Vector& z, double step) {
    Linearization lin;
    lin.f = problem.objective(z);
    lin.grad = gradient(problem.objective, z, step);
    const int m = problem.constraint_count;
    if (m > 0) {
        lin.c = problem.inequality_constraints(z);
        if (lin.c.size() != m) throw InvalidArgument("nlp: constraint callable returned wrong size");
        lin.jac = jacobian(problem.inequality_constraints, z, m, step);
    } else {
        lin.c = Vector(0);
        lin.jac = Matrix(0, problem.dimension);
    }
    if (!std::isfinite(lin.f) || !lin.grad.allFinite() || !lin.c.allFinite() ||
        !lin.jac.allFinite()) {
        throw DivergenceError("nlp: non-finite objective or constraint evaluation");
    }
    return lin;
}

double violation(const Vector& c) { return c.size() ? c.cwiseMax(0.0).sum() : 0.0; }

double merit(double f, const Vector& c, double penalty) { return f + penalty * violation(c); }

// Assembles the subproblem rows C p >= d: linearized constraints first, then finite bounds.
struct SubproblemRows {
    Matrix c;
    Vector d;
    std::vector<int> lower_index;  // row of each variable's lower bound, or -1
    std::vector<int> upper_index;
};

SubproblemRows build_rows(const NlpProblem& problem, const Vector& z, const Linearization& lin,
                          int extra_columns) {
    const int n = problem.dimension;
    const int m = problem.constraint_count;
    SubproblemRows rows;
    rows.lower_index.assign(n, -1);
    rows.upper_index.assign(n, -1);
    int count = m;
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(problem.lower_bounds[j])) rows.lower_index[j] = count++;
        if (std::isfinite(problem.upper_bounds[j])) rows.upper_index[j] = count++;
    }
    rows.c = Matrix::Zero(count, n + extra_columns);
    rows.d = Vector::Zero(count);
    for (int i = 0; i < m; ++i) {
        rows.c.row(i).head(n) = -lin.jac.row(i);
        rows.d[i] = lin.c[i];
    }
    for (int j = 0; j < n; ++j) {
        if (rows.lower_index[j] >= 0) {
            rows.c(rows.lower_index[j], j) = 1.0;
            rows.d[rows.lower_index[j]] = problem.lower_bounds[j] - z[j];
        }
        if (rows.upper_index[j] >= 0) {
            rows.c(rows.upper_index[j], j) = -1.0;
            rows.d[rows.upper_index[j]] = z[j] - problem.upper_bounds[j];
        }
    }
    return rows;
}

SearchDirection subproblem(const NlpProblem& problem, const Vector& z, const Linearization& lin,
                           const Matrix& hessian, const SolverSettings& settings) {
    const int n = problem.dimension;
    const int m = problem.constraint_count;

    SearchDirection out;
    out.bound_multipliers = Vector::Zero(n);
    auto collect_bounds = [&](const SubproblemRows& rows, const Vector& mult) {
        for (int j = 0; j < n; ++j) {
            if (rows.lower_index[j] >= 0) out.bound_multipliers[j] += mult[rows.lower_index[j]];
            if (rows.upper_index[j] >= 0) out.bound_multipliers[j] -= mult[rows.upper_index[j]];
        }
    };

    SubproblemRows rows = build_rows(problem, z, lin, 0);
    QpResult qp = solve_dense_qp(hessian, lin.grad, rows.c, rows.d);
    if (qp.feasible) {
        out.step = qp.x;
        out.multipliers = qp.multipliers.head(m);
        collect_bounds(rows, qp.multipliers);
        return out;
    }
    if (m == 0) {
        throw InvalidArgument("nlp: inconsistent bounds");
    }

    // Elastic mode: c + J p <= t, t >= 0, penalized by rho * sum(t) (+ a small
    // quadratic term so the subproblem stays strictly convex).
    SubproblemRows relaxed = build_rows(problem, z, lin, m);
    for (int i = 0; i < m; ++i) relaxed.c(i, n + i) = 1.0;
    const int base = static_cast<int>(relaxed.c.rows());
    Matrix c(base + m, n + m);
    c << relaxed.c, Matrix::Zero(m, n + m);
    Vector d(base + m);
    d << relaxed.d, Vector::Zero(m);
    for (int i = 0; i < m; ++i) c(base + i, n + i) = 1.0;

    Matrix h = Matrix::Identity(n + m, n + m);
    h.topLeftCorner(n, n) = hessian;
    Vector g(n + m);
    g << lin.grad, Vector::Constant(m, settings.relaxation_penalty);

    QpResult rq = solve_dense_qp(h, g, c, d);
    if (!rq.feasible) {
        throw InvalidArgument("nlp: inconsistent bounds");
    }
    out.step = rq.x.head(n);
    out.multipliers = rq.multipliers.head(m);
    collect_bounds(relaxed, rq.multipliers);
    out.relaxed = true;
    return out;
}

double kkt_residual(const NlpProblem& problem, const Vector& z, const Linearization& lin,
                    const Vector& lambda, const Vector& bound_mult) {
    Vector stat = lin.grad - bound_mult;
    if (lambda.size()) stat += lin.jac.transpose() * lambda;
    double r = stat.cwiseAbs().maxCoeff();
    for (int i = 0; i < lambda.size(); ++i) {
        r = std::max(r, std::max(0.0, lin.c[i]));
        r = std::max(r, std::abs(lambda[i] * lin.c[i]));
    }
    for (int j = 0; j < problem.dimension; ++j) {
        const double mu = bound_mult[j];
        if (mu > 0) r = std::max(r, std::abs(mu * (z[j] - problem.lower_bounds[j])));
        if (mu < 0) r = std::max(r, std::abs(mu * (problem.upper_bounds[j] - z[j])));
    }
    return r;
}

}  // namespace

void NlpProblem::validate() const {
    if (dimension < 1) throw InvalidArgument("nlp: dimension must be >= 1");
    if (!objective) throw InvalidArgument("nlp: objective is required");
    if (constraint_count < 0 || (constraint_count > 0 && !inequality_constraints)) {
        throw InvalidArgument("nlp: constraint callable missing for constraint_count > 0");
    }
    if (lower_bounds.size() != dimension || upper_bounds.size() != dimension) {
        throw InvalidArgument("nlp: bounds must have the problem dimension");
    }
    for (int j = 0; j < dimension; ++j) {
        if (std::isnan(lower_bounds[j]) || std::isnan(upper_bounds[j]) ||
            lower_bounds[j] > upper_bounds[j]) {
            throw InvalidArgument("nlp: bounds must satisfy lower <= upper");
        }
    }
}

const char* to_string(Status status) {
    switch (status) {
        case Status::kConverged: return "converged";
        case Status::kMaxIterations: return "max_iter";
        case Status::kInfeasible: return "infeasible";
    }
    return "unknown";
}

double lagrangian(const NlpProblem& problem, const Vector& z, const Vector& lambda) {
    double value = problem.objective(z);
    if (lambda.size() > 0) {
        if ((lambda.array() < 0).any()) throw InvalidArgument("lagrangian: multipliers must be >= 0");
        value += lambda.dot(problem.inequality_constraints(z));
    }
    return value;
}

Vector gradient(const std::function<double(const Vector&)>& f, const Vector& z, double step) {
    Vector g(z.size());
    Vector probe = z;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        const double h = step * std::max(1.0, std::abs(z[j]));
        probe[j] = z[j] + h;
        const double fp = f(probe);
        probe[j] = z[j] - h;
        const double fm = f(probe);
        probe[j] = z[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Matrix jacobian(const std::function<Vector(const Vector&)>& c, const Vector& z, int rows,
                double step) {
    Matrix jac(rows, z.size());
    Vector probe = z;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        const double h = step * std::max(1.0, std::abs(z[j]));
        probe[j] = z[j] + h;
        const Vector cp = c(probe);
        probe[j] = z[j] - h;
        const Vector cm = c(probe);
        probe[j] = z[j];
        jac.col(j) = (cp - cm) / (2.0 * h);
    }
    return jac;
}

QpResult solve_dense_qp(const Matrix& h, const Vector& g, const Matrix& c, const Vector& d) {
    const Eigen::Index n = h.rows();
    const Eigen::Index rows = c.rows();
    if (h.cols() != n || g.size() != n || (rows > 0 && c.cols() != n) || d.size() != rows) {
        throw InvalidArgument("solve_dense_qp: dimension mismatch");
    }
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success) {
        throw InvalidArgument("solve_dense_qp: Hessian is not positive definite");
    }
    const Matrix h_inv = llt.solve(Matrix::Identity(n, n));

    QpResult out;
    out.x = -h_inv * g;
    out.multipliers = Vector::Zero(rows);

    std::vector<Eigen::Index> active;
    std::vector<double> lambda;
    std::vector<bool> in_active(static_cast<std::size_t>(rows), false);

    auto tolerance = [&](Eigen::Index i) {
        return 1e-12 * std::max({1.0, std::abs(d[i]), c.row(i).norm() * out.x.norm()});
    };

    const int max_outer = static_cast<int>(10 * (rows + n) + 50);
    for (int outer = 0; outer < max_outer; ++outer) {
        // Most violated constraint not yet active.
        Eigen::Index q = -1;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (in_active[static_cast<std::size_t>(i)]) continue;
            const double s = c.row(i).dot(out.x) - d[i];
            if (s < -tolerance(i) && s < worst) {
                worst = s;
                q = i;
            }
        }
        if (q < 0) {
            for (std::size_t k = 0; k < active.size(); ++k) out.multipliers[active[k]] = lambda[k];
            out.feasible = true;
            return out;
        }

        const Vector nq = c.row(q).transpose();
        double lambda_q = 0.0;
        for (int inner = 0; inner < max_outer; ++inner) {
            const auto k = static_cast<Eigen::Index>(active.size());
            Vector z = h_inv * nq;
            Vector r(k);
            if (k > 0) {
                Matrix normals(n, k);
                for (Eigen::Index j = 0; j < k; ++j) normals.col(j) = c.row(active[j]).transpose();
                const Matrix hin = h_inv * normals;
                const Matrix gram = normals.transpose() * hin;
                r = gram.ldlt().solve(hin.transpose() * nq);
                z -= hin * r;
            }

            const double curvature = z.dot(nq);
            const bool dependent = curvature <= 1e-14 * std::max(1.0, nq.dot(h_inv * nq));
            const double s = nq.dot(out.x) - d[q];
            const double t_full = dependent ? kInf : -s / curvature;

            double t_partial = kInf;
            Eigen::Index drop = -1;
            for (Eigen::Index j = 0; j < k; ++j) {
                if (r[j] > 0) {
                    const double t = lambda[static_cast<std::size_t>(j)] / r[j];
                    if (t < t_partial) {
                        t_partial = t;
                        drop = j;
                    }
                }
            }

            const double t = std::min(t_full, t_partial);
            if (!std::isfinite(t)) {
                out.feasible = false;
                return out;
            }
            if (!dependent) out.x += t * z;
            for (Eigen::Index j = 0; j < k; ++j) lambda[static_cast<std::size_t>(j)] -= t * r[j];
            lambda_q += t;

            if (t_full <= t_partial) {
                active.push_back(q);
                lambda.push_back(lambda_q);
                in_active[static_cast<std::size_t>(q)] = true;
                break;
            }
            in_active[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)])] = false;
            active.erase(active.begin() + drop);
            lambda.erase(lambda.begin() + drop);
        }
    }
    throw Error("solve_dense_qp: iteration limit reached (cycling)");
}

SearchDirection search_step(const NlpProblem& problem, const Vector& z, const Matrix& hessian,
                            const SolverSettings& settings) {
    problem.validate();
    return subproblem(problem, z, linearize(problem, z, settings.finite_difference_step), hessian,
                      settings);
}

Solution minimize(const NlpProblem& problem, const Vector& z0, const SolverSettings& settings) {
    problem.validate();
    if (z0.size() != problem.dimension) throw InvalidArgument("minimize: z0 has wrong dimension");
    if (!(settings.kkt_tolerance > 0) || settings.max_iterations < 1 ||
        !(settings.finite_difference_step > 0) || !(settings.hessian_reset_threshold > 0) ||
        !(settings.relaxation_penalty > 0)) {
        throw InvalidArgument("minimize: solver settings must be positive");
    }

    const int n = problem.dimension;
    const double tol = settings.kkt_tolerance;
    const double h_step = settings.finite_difference_step;

    Vector z = z0.cwiseMax(problem.lower_bounds).cwiseMin(problem.upper_bounds);
    Linearization lin = linearize(problem, z, h_step);
    Matrix hessian = Matrix::Identity(n, n);
    bool hessian_is_identity = true;
    bool scaled = false;
    double penalty = 0.0;

    Solution sol;
    sol.multipliers = Vector::Zero(problem.constraint_count);
    sol.bound_multipliers = Vector::Zero(n);
    sol.merit_history.push_back(lin.f);  // penalty is zero before the first subproblem

    for (int iter = 0; iter < settings.max_iterations; ++iter) {
        sol.iterations = iter + 1;
        SearchDirection dir = subproblem(problem, z, lin, hessian, settings);
        sol.multipliers = dir.multipliers;
        sol.bound_multipliers = dir.bound_multipliers;

        sol.kkt_residual = kkt_residual(problem, z, lin, dir.multipliers, dir.bound_multipliers);
        const bool kkt_ok = sol.kkt_residual <= tol;
        // the residual is absolute, so also require the next step to be negligible
        if (kkt_ok && dir.step.lpNorm<Eigen::Infinity>() <= tol * (1.0 + z.lpNorm<Eigen::Infinity>())) {
            sol.status = Status::kConverged;
            // take the last full step if it degrades neither the residual nor the merit
            Vector polished = (z + dir.step).cwiseMax(problem.lower_bounds).cwiseMin(problem.upper_bounds);
            Linearization plin = linearize(problem, polished, h_step);
            SearchDirection pdir = subproblem(problem, polished, plin, hessian, settings);
            const double r = kkt_residual(problem, polished, plin, pdir.multipliers, pdir.bound_multipliers);
            const double polished_merit = merit(plin.f, plin.c, penalty);
            if (r <= sol.kkt_residual && polished_merit <= sol.merit_history.back()) {
                z = std::move(polished);
                lin = std::move(plin);
                sol.multipliers = pdir.multipliers;
                sol.bound_multipliers = pdir.bound_multipliers;
                sol.kkt_residual = r;
                sol.merit_history.push_back(polished_merit);
            }
            break;
        }

        if (dir.multipliers.size() > 0) {
            penalty = std::max(penalty, 1.1 * dir.multipliers.maxCoeff() + 1e-8);
        }
        const double phi = merit(lin.f, lin.c, penalty);
        Vector c_lin = lin.c;
        if (lin.c.size()) c_lin += lin.jac * dir.step;
        const double slope =
            lin.grad.dot(dir.step) + penalty * (violation(c_lin) - violation(lin.c));

        double alpha = 1.0;
        bool accepted = false;
        Vector trial;
        double trial_f = 0.0;
        Vector trial_c;
        for (int ls = 0; ls < 40; ++ls) {
            trial = (z + alpha * dir.step).cwiseMax(problem.lower_bounds).cwiseMin(problem.upper_bounds);
            trial_f = problem.objective(trial);
            trial_c = problem.constraint_count ? problem.inequality_constraints(trial) : Vector(0);
            const double phi_trial = merit(trial_f, trial_c, penalty);
            if (std::isfinite(phi_trial) &&
                phi_trial <= phi + 1e-4 * alpha * std::min(slope, 0.0)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }

        if (!accepted) {
            if (kkt_ok) {
                sol.status = Status::kConverged;
                break;
            }
            if (hessian_is_identity) break;  // no descent even along a steepest-descent model
            hessian = Matrix::Identity(n, n);
            hessian_is_identity = true;
            continue;
        }

        Linearization next = linearize(problem, trial, h_step);
        sol.merit_history.push_back(merit(next.f, next.c, penalty));

        // Damped BFGS on the Lagrangian gradient.
        const Vector s = trial - z;
        Vector y = next.grad - lin.grad;
        if (dir.multipliers.size()) y += (next.jac - lin.jac).transpose() * dir.multipliers;
        const double ss = s.squaredNorm();
        if (ss > 0) {
            if (!scaled && s.dot(y) > 0) {
                hessian = (y.squaredNorm() / s.dot(y)) * Matrix::Identity(n, n);
                scaled = true;
            }
            const Vector hs = hessian * s;
            const double shs = s.dot(hs);
            double sy = s.dot(y);
            if (sy < 0.2 * shs) {
                const double theta = 0.8 * shs / (shs - sy);
                y = theta * y + (1.0 - theta) * hs;
                sy = s.dot(y);
            }
            if (sy > settings.hessian_reset_threshold * ss && shs > 0) {
                hessian += (y * y.transpose()) / sy - (hs * hs.transpose()) / shs;
                hessian = 0.5 * (hessian + hessian.transpose()).eval();
                hessian_is_identity = false;
                if (Eigen::LLT<Matrix>(hessian).info() != Eigen::Success) {
                    hessian = Matrix::Identity(n, n);
                    hessian_is_identity = true;
                }
            }
        }

        z = trial;
        lin = std::move(next);
    }

    sol.minimizer = z;
    sol.objective_value = lin.f;
    if (sol.status != Status::kConverged && lin.c.size() && lin.c.maxCoeff() > tol) {
        sol.status = Status::kInfeasible;
    }
    return sol;
}

}  // namespace afmpc::nlp
