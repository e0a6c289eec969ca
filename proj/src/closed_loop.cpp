#include "afmpc/closed_loop.hpp"

#include <cmath>

#include "afmpc/errors.hpp"

namespace afmpc {

TrajectoryLog run_receding_horizon(const PlantState& x0, const PlantSetup& plant,
                                   mpc::Controller& controller,
                                   const mpc::ReferenceFunction& reference, int steps,
                                   const Monitor& monitor) {
    if (steps < 1) throw InvalidArgument("run_receding_horizon: steps must be >= 1");
    const double period = controller.config().control_period;
    if (!(plant.integration_step > 0) || plant.integration_step > period * (1 + 1e-9)) {
        throw InvalidArgument("plant integration step must be in (0, control period]");
    }
    const int substeps = std::max(1, static_cast<int>(std::lround(period / plant.integration_step)));
    const double h = period / substeps;

    TrajectoryLog log;
    log.dt = period;
    log.records.reserve(static_cast<std::size_t>(steps));

    PlantState x = x0;
    for (int k = 0; k < steps; ++k) {
        const double t = k * period;
        StepRecord rec;
        rec.t = t;
        rec.x = x;
        rec.y_ref = reference(t)[kAlpha];
        rec.e = rec.y_ref - output(x);
        try {
            const mpc::ControlStep cs = controller.update(t, x);
            rec.u = cs.applied_input;
            rec.cost = cs.predicted_cost;
            rec.status = cs.status;
            rec.solve_time = cs.solve_time;
            if (monitor) {
                const StepDiagnostics diag = monitor(t, x, rec.u, controller);
                rec.lyapunov = diag.lyapunov;
                rec.w_diag = diag.w_diag;
                rec.residual_bound = diag.residual_bound;
            }
            log.records.push_back(rec);
            for (int j = 0; j < substeps; ++j) {
                x = step(x, rec.u, h, plant.coeffs, plant.disturbance, t + j * h);
            }
        } catch (const DivergenceError& err) {
            log.diverged = true;
            log.failure = err.what();
            break;
        }
    }
    return log;
}

LyapunovMonitor::LyapunovMonitor(const CoeffSet& truth, const Mat4& p, const Vec4& b,
                                 mpc::ReferenceFunction reference, Eigen::VectorXd theta_f_star,
                                 Eigen::VectorXd theta_g_star)
    : truth_(truth),
      p_(p),
      b_(b),
      reference_(std::move(reference)),
      theta_f_star_(std::move(theta_f_star)),
      theta_g_star_(std::move(theta_g_star)) {}

StepDiagnostics LyapunovMonitor::operator()(double t, const PlantState& x, double u,
                                            const mpc::Controller& controller) const {
    const mpc::PredictionModel& model = controller.model();
    const double f_true = truth_.a2 * x[kThetaDot] + truth_.a3 * std::sin(x[kAlpha]) +
                          truth_.a4 * x[kAlphaDot];
    StepDiagnostics out;
    out.w_diag = (f_true - model.drift(x)) + (truth_.b2 - model.input_gain(x)) * u;

    const Vec4 e = reference_(t) - x;
    const double cross = e.dot(p_ * b_) * out.w_diag;
    out.lyapunov = 0.5 * e.dot(p_ * e) + cross;
    out.residual_bound = std::abs(cross);

    if (const auto* fuzzy = dynamic_cast<const mpc::FuzzyPredictionModel*>(&model)) {
        const auto& fm = fuzzy->fuzzy_model();
        if (theta_f_star_.size() == fm.theta_f().size()) {
            out.lyapunov += 0.5 * (fm.theta_f() - theta_f_star_).squaredNorm();
        }
        if (theta_g_star_.size() == fm.theta_g().size()) {
            out.lyapunov += 0.5 * (fm.theta_g() - theta_g_star_).squaredNorm();
        }
    }
    return out;
}

}  // namespace afmpc
