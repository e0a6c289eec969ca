#pragma once

#include <functional>
#include <string>
#include <vector>

#include "afmpc/mpc.hpp"

namespace afmpc {

struct StepRecord {
    double t = 0.0;
    PlantState x = PlantState::Zero();
    double u = 0.0;
    double y_ref = 0.0;
    double e = 0.0;  // y_ref - y
    double lyapunov = 0.0;
    double w_diag = 0.0;
    double residual_bound = 0.0;  // |e^T P b w|, not exported
    double cost = 0.0;
    mpc::StepStatus status = mpc::StepStatus::kConverged;
    double solve_time = 0.0;  // [s]
};

struct TrajectoryLog {
    double dt = 0.0;  // control period
    std::vector<StepRecord> records;
    bool diverged = false;
    std::string failure;
};

struct PlantSetup {
    CoeffSet coeffs;
    Disturbance disturbance;
    double integration_step = 1e-3;
};

struct StepDiagnostics {
    double lyapunov = 0.0;
    double w_diag = 0.0;
    double residual_bound = 0.0;
};

using Monitor = std::function<StepDiagnostics(double t, const PlantState& x, double u,
                                              const mpc::Controller& controller)>;

/**
 * Closed loop: each control period the controller sees the measured state and
 * returns one input, which is held while the plant is integrated at the finer
 * plant step. Stops early (log kept, `diverged` set) if the plant or the
 * controller diverges.
 */
TrajectoryLog run_receding_horizon(const PlantState& x0, const PlantSetup& plant,
                                   mpc::Controller& controller,
                                   const mpc::ReferenceFunction& reference, int steps,
                                   const Monitor& monitor = {});

/**
 * Lyapunov candidate along a trajectory:
 *   V = 1/2 e^T P e + e^T P b w + 1/2 |theta_f - theta_f*|^2 + 1/2 |theta_g - theta_g*|^2
 * with e = x_ref - x and w the x4-channel model residual of the controller's model
 *   w = (f(X) - f_model(X)) + (g(X) - g_model(X)) u
 * against the true plant coefficients. The parameter terms only apply when the
 * controller is adaptive and the optimal parameters are given.
 */
class LyapunovMonitor {
public:
    LyapunovMonitor(const CoeffSet& truth, const Mat4& p, const Vec4& b,
                    mpc::ReferenceFunction reference, Eigen::VectorXd theta_f_star = {},
                    Eigen::VectorXd theta_g_star = {});

    StepDiagnostics operator()(double t, const PlantState& x, double u,
                               const mpc::Controller& controller) const;

private:
    CoeffSet truth_;
    Mat4 p_;
    Vec4 b_;
    mpc::ReferenceFunction reference_;
    Eigen::VectorXd theta_f_star_;
    Eigen::VectorXd theta_g_star_;
};

}  // namespace afmpc
