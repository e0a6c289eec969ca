#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "afmpc/fuzzy.hpp"
#include "afmpc/linalg.hpp"
#include "afmpc/nlp.hpp"
#include "afmpc/plant.hpp"

namespace afmpc::mpc {

struct MpcConfig {
    int prediction_horizon = 5;  // K_p
    int control_horizon = 3;     // K_c, inputs past K_c repeat the last one
    Mat4 state_weight = 0.1 * Mat4::Identity();
    double input_weight = 0.3;
    double input_bound = 10.0;       // |u| <= u_max
    double control_period = 0.01;    // [s] between solves
    double prediction_step = 0.08;   // [s] covered by one horizon slot
    double integration_step = 0.02;  // [s] max RK4 sub-step inside a slot
    nlp::SolverSettings solver;

    int substeps() const;
    void validate() const;
};

/// One-step predictor x(k+1) = F(x(k), u(k), d(k)) built from a continuous model.
class PredictionModel {
public:
    virtual ~PredictionModel() = default;
    virtual Vec4 derivative(const PlantState& x, double u, double d) const = 0;
    virtual std::unique_ptr<PredictionModel> clone() const = 0;

    /// x4-channel decomposition alpha'' = f(X) + g(X) u implied by the model.
    virtual double drift(const PlantState& x) const = 0;
    virtual double input_gain(const PlantState& x) const = 0;

    /// Advances `duration` seconds with `substeps` RK4 steps, u and d held.
    PlantState advance(const PlantState& x, double u, double d, double duration, int substeps) const;
};

/// The state-space model with a (possibly detuned) coefficient set.
class NominalModel final : public PredictionModel {
public:
    explicit NominalModel(const CoeffSet& coeffs) : coeffs_(coeffs) {}
    Vec4 derivative(const PlantState& x, double u, double d) const override;
    std::unique_ptr<PredictionModel> clone() const override;
    double drift(const PlantState& x) const override;
    double input_gain(const PlantState& x) const override;
    const CoeffSet& coeffs() const { return coeffs_; }

private:
    CoeffSet coeffs_;
};

/// Kinematics and the arm channel from `coeffs`; alpha'' = f_hat(X) + g_hat(X) (u + d).
class FuzzyPredictionModel final : public PredictionModel {
public:
    FuzzyPredictionModel(const CoeffSet& coeffs, fuzzy::FuzzyModel model)
        : coeffs_(coeffs), model_(std::move(model)) {}
    Vec4 derivative(const PlantState& x, double u, double d) const override;
    std::unique_ptr<PredictionModel> clone() const override;
    double drift(const PlantState& x) const override;
    double input_gain(const PlantState& x) const override;
    const fuzzy::FuzzyModel& fuzzy_model() const { return model_; }

private:
    CoeffSet coeffs_;
    fuzzy::FuzzyModel model_;
};

/// Rolls the predictor over K_p slots. `inputs` has K_c entries, `disturbance` K_p.
/// Throws DivergenceError("prediction divergence") on non-finite states.
std::vector<PlantState> predict_trajectory(const PredictionModel& model, const PlantState& x0,
                                           std::span<const double> inputs,
                                           std::span<const double> disturbance,
                                           const MpcConfig& config);

/// sum_p |x_p - ref_p|_Q^2 + sum_j R u_j^2
double horizon_cost(std::span<const PlantState> states, std::span<const double> inputs,
                    std::span<const Vec4> references, const MpcConfig& config);

enum class StepStatus { kConverged, kMaxIterations, kInfeasible, kFallback };

const char* to_string(StepStatus status);

struct ControlStep {
    double applied_input = 0.0;
    double predicted_cost = 0.0;
    double warm_start_cost = 0.0;
    StepStatus status = StepStatus::kConverged;
    double solve_time = 0.0;  // [s], wall clock
    std::vector<double> optimized_sequence;
};

/**
 * Solves the horizon problem over the K_c input sequence (single shooting,
 * box bounds +-u_max) starting from `warm_start`, and returns the first input.
 * If the optimizer fails the warm start is applied instead (status kFallback).
 */
ControlStep solve_step(const PredictionModel& model, const PlantState& x,
                       std::span<const Vec4> references, std::span<const double> disturbance,
                       const MpcConfig& config, std::span<const double> warm_start);

/// x_ref(t) for the full state.
using ReferenceFunction = std::function<Vec4(double)>;

/// A receding-horizon controller driven once per control period.
class Controller {
public:
    virtual ~Controller() = default;

    /// `t` is the current time, `x` the measured state.
    virtual ControlStep update(double t, const PlantState& x) = 0;

    /// Model the most recent solve used (fuzzy models are frozen per solve).
    virtual const PredictionModel& model() const = 0;
    virtual const MpcConfig& config() const = 0;
};

/// Classical MPC: nominal prediction model.
class ClassicalMpc final : public Controller {
public:
    ClassicalMpc(MpcConfig config, const CoeffSet& model_coeffs, ReferenceFunction reference,
                 Disturbance disturbance = {});
    ControlStep update(double t, const PlantState& x) override;
    const PredictionModel& model() const override { return model_; }
    const MpcConfig& config() const override { return config_; }

private:
    MpcConfig config_;
    NominalModel model_;
    ReferenceFunction reference_;
    Disturbance disturbance_;
    std::vector<double> warm_start_;
};

struct AdaptationSettings {
    Mat4 lyapunov_p = Mat4::Identity();  // solution of A^T P + P A = -Q
    Vec4 input_direction = Vec4(0, 0, 0, 1);  // b
    double gain = 1.0;
};

/// Indirect adaptive fuzzy MPC: adapts theta_f, theta_g from the tracking error
/// once per control period, then solves with the frozen fuzzy model.
class AdaptiveFuzzyMpc final : public Controller {
public:
    AdaptiveFuzzyMpc(MpcConfig config, const CoeffSet& kinematic_coeffs, fuzzy::FuzzyModel initial,
                     AdaptationSettings adaptation, ReferenceFunction reference,
                     Disturbance disturbance = {});
    ControlStep update(double t, const PlantState& x) override;
    const PredictionModel& model() const override { return model_; }
    const MpcConfig& config() const override { return config_; }
    const fuzzy::FuzzyModel& fuzzy_model() const { return model_.fuzzy_model(); }

private:
    MpcConfig config_;
    CoeffSet coeffs_;
    FuzzyPredictionModel model_;
    AdaptationSettings adaptation_;
    ReferenceFunction reference_;
    Disturbance disturbance_;
    std::vector<double> warm_start_;
    double last_input_ = 0.0;
    bool first_ = true;
};

}  // namespace afmpc::mpc
