#include "afmpc/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "afmpc/errors.hpp"

namespace afmpc::mpc {

int MpcConfig::substeps() const {
    return std::max(1, static_cast<int>(std::ceil(prediction_step / integration_step - 1e-9)));
}

void MpcConfig::validate() const {
    if (prediction_horizon < 1 || control_horizon < 1) {
        throw InvalidArgument("horizons must be >= 1");
    }
    if (control_horizon > prediction_horizon) {
        throw InvalidArgument("K_c <= K_p violated");
    }
    if (!state_weight.allFinite() ||
        (state_weight - state_weight.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
        !is_positive_definite(state_weight)) {
        throw InvalidArgument("state weight Q must be symmetric positive definite");
    }
    if (!(input_weight > 0) || !std::isfinite(input_weight)) {
        throw InvalidArgument("input weight R must be positive");
    }
    if (!(input_bound >= 0) || !std::isfinite(input_bound)) {
        throw InvalidArgument("input bound must be finite and >= 0");
    }
    if (!(control_period > 0) || !(prediction_step > 0) || !(integration_step > 0)) {
        throw InvalidArgument("control period, prediction step and integration step must be positive");
    }
}

PlantState PredictionModel::advance(const PlantState& x, double u, double d, double duration,
                                    int substeps) const {
    const double h = duration / substeps;
    PlantState s = x;
    for (int i = 0; i < substeps; ++i) {
        s = rk4_step(s, h, [&](const Vec4& v, double) { return derivative(v, u, d); });
    }
    return s;
}

Vec4 NominalModel::derivative(const PlantState& x, double u, double d) const {
    return dynamics(x, u, coeffs_, d);
}

std::unique_ptr<PredictionModel> NominalModel::clone() const {
    return std::make_unique<NominalModel>(*this);
}

double NominalModel::drift(const PlantState& x) const {
    return coeffs_.a2 * x[kThetaDot] + coeffs_.a3 * std::sin(x[kAlpha]) + coeffs_.a4 * x[kAlphaDot];
}

double NominalModel::input_gain(const PlantState&) const { return coeffs_.b2; }

Vec4 FuzzyPredictionModel::derivative(const PlantState& x, double u, double d) const {
    const fuzzy::BasisVector eps = fuzzy::basis(model_, x);
    return {x[kThetaDot], coeffs_.a1 * x[kThetaDot] + coeffs_.b1 * u, x[kAlphaDot],
            fuzzy::f_hat(model_, eps) + fuzzy::g_hat(model_, eps) * (u + d)};
}

std::unique_ptr<PredictionModel> FuzzyPredictionModel::clone() const {
    return std::make_unique<FuzzyPredictionModel>(*this);
}

double FuzzyPredictionModel::drift(const PlantState& x) const { return fuzzy::f_hat(model_, x); }

double FuzzyPredictionModel::input_gain(const PlantState& x) const {
    return fuzzy::g_hat(model_, x);
}

std::vector<PlantState> predict_trajectory(const PredictionModel& model, const PlantState& x0,
                                           std::span<const double> inputs,
                                           std::span<const double> disturbance,
                                           const MpcConfig& config) {
    const auto kp = static_cast<std::size_t>(config.prediction_horizon);
    if (inputs.size() != static_cast<std::size_t>(config.control_horizon) ||
        disturbance.size() != kp) {
        throw InvalidArgument("predict_trajectory: sequence lengths do not match the horizons");
    }
    const int substeps = config.substeps();
    std::vector<PlantState> states;
    states.reserve(kp);
    PlantState x = x0;
    for (std::size_t p = 0; p < kp; ++p) {
        const double u = inputs[std::min(p, inputs.size() - 1)];
        x = model.advance(x, u, disturbance[p], config.prediction_step, substeps);
        if (!x.allFinite()) throw DivergenceError("prediction divergence");
        states.push_back(x);
    }
    return states;
}

double horizon_cost(std::span<const PlantState> states, std::span<const double> inputs,
                    std::span<const Vec4> references, const MpcConfig& config) {
    if (states.size() != references.size()) {
        throw InvalidArgument("horizon_cost: states and references differ in length");
    }
    double cost = 0.0;
    for (std::size_t p = 0; p < states.size(); ++p) {
        const Vec4 err = states[p] - references[p];
        cost += err.dot(config.state_weight * err);
    }
    for (double u : inputs) cost += config.input_weight * u * u;
    return cost;
}

const char* to_string(StepStatus status) {
    switch (status) {
        case StepStatus::kConverged: return "converged";
        case StepStatus::kMaxIterations: return "max_iter";
        case StepStatus::kInfeasible: return "infeasible";
        case StepStatus::kFallback: return "fallback";
    }
    return "unknown";
}

ControlStep solve_step(const PredictionModel& model, const PlantState& x,
                       std::span<const Vec4> references, std::span<const double> disturbance,
                       const MpcConfig& config, std::span<const double> warm_start) {
    const int kc = config.control_horizon;
    if (warm_start.size() != static_cast<std::size_t>(kc)) {
        throw InvalidArgument("solve_step: warm start must have K_c entries");
    }
    if (references.size() != static_cast<std::size_t>(config.prediction_horizon)) {
        throw InvalidArgument("solve_step: need K_p reference states");
    }
    const auto start = std::chrono::steady_clock::now();

    auto cost_of = [&](const nlp::Vector& u) {
        const std::span<const double> seq(u.data(), static_cast<std::size_t>(u.size()));
        const auto states = predict_trajectory(model, x, seq, disturbance, config);
        return horizon_cost(states, seq, references, config);
    };

    nlp::NlpProblem problem;
    problem.dimension = kc;
    problem.objective = cost_of;
    problem.lower_bounds = nlp::Vector::Constant(kc, -config.input_bound);
    problem.upper_bounds = nlp::Vector::Constant(kc, config.input_bound);

    nlp::Vector z0(kc);
    for (int j = 0; j < kc; ++j) {
        z0[j] = std::clamp(warm_start[static_cast<std::size_t>(j)], -config.input_bound,
                           config.input_bound);
    }

    ControlStep out;
    try {
        out.warm_start_cost = cost_of(z0);
        const nlp::Solution sol = nlp::minimize(problem, z0, config.solver);
        if (sol.status == nlp::Status::kInfeasible || !sol.minimizer.allFinite()) {
            throw DivergenceError("solver failure");
        }
        out.optimized_sequence.assign(sol.minimizer.data(), sol.minimizer.data() + kc);
        out.predicted_cost = sol.objective_value;
        out.status = sol.status == nlp::Status::kConverged ? StepStatus::kConverged
                                                           : StepStatus::kMaxIterations;
    } catch (const Error&) {
        out.optimized_sequence.assign(z0.data(), z0.data() + kc);
        out.status = StepStatus::kFallback;
        try {
            out.predicted_cost = cost_of(z0);
        } catch (const Error&) {
            out.predicted_cost = std::numeric_limits<double>::infinity();
        }
        out.warm_start_cost = out.predicted_cost;
    }
    for (double& u : out.optimized_sequence) u = std::clamp(u, -config.input_bound, config.input_bound);
    out.applied_input = out.optimized_sequence.front();
    out.solve_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

namespace {

void horizon_signals(double t, const MpcConfig& config, const ReferenceFunction& reference,
                     const Disturbance& disturbance, std::vector<Vec4>& refs,
                     std::vector<double>& dist) {
    const auto kp = static_cast<std::size_t>(config.prediction_horizon);
    refs.resize(kp);
    dist.resize(kp);
    for (std::size_t p = 0; p < kp; ++p) {
        refs[p] = reference(t + static_cast<double>(p + 1) * config.prediction_step);
        dist[p] = disturbance.forecast(t + static_cast<double>(p) * config.prediction_step);
    }
}

// Shift by one and repeat the last element.
void shift_warm_start(std::vector<double>& warm, const std::vector<double>& solved) {
    for (std::size_t j = 0; j + 1 < warm.size(); ++j) warm[j] = solved[j + 1];
    warm.back() = solved.back();
}

}  // namespace

ClassicalMpc::ClassicalMpc(MpcConfig config, const CoeffSet& model_coeffs,
                           ReferenceFunction reference, Disturbance disturbance)
    : config_(std::move(config)),
      model_(model_coeffs),
      reference_(std::move(reference)),
      disturbance_(std::move(disturbance)),
      warm_start_(static_cast<std::size_t>(config_.control_horizon), 0.0) {
    config_.validate();
}

ControlStep ClassicalMpc::update(double t, const PlantState& x) {
    std::vector<Vec4> refs;
    std::vector<double> dist;
    horizon_signals(t, config_, reference_, disturbance_, refs, dist);
    ControlStep step = solve_step(model_, x, refs, dist, config_, warm_start_);
    shift_warm_start(warm_start_, step.optimized_sequence);
    return step;
}

AdaptiveFuzzyMpc::AdaptiveFuzzyMpc(MpcConfig config, const CoeffSet& kinematic_coeffs,
                                   fuzzy::FuzzyModel initial, AdaptationSettings adaptation,
                                   ReferenceFunction reference, Disturbance disturbance)
    : config_(std::move(config)),
      coeffs_(kinematic_coeffs),
      model_(kinematic_coeffs, std::move(initial)),
      adaptation_(std::move(adaptation)),
      reference_(std::move(reference)),
      disturbance_(std::move(disturbance)),
      warm_start_(static_cast<std::size_t>(config_.control_horizon), 0.0) {
    config_.validate();
    if (!(adaptation_.gain >= 0) || !std::isfinite(adaptation_.gain)) {
        throw InvalidArgument("adaptation gain must be finite and >= 0");
    }
}

ControlStep AdaptiveFuzzyMpc::update(double t, const PlantState& x) {
    if (!first_) {
        const Vec4 e = reference_(t) - x;
        model_ = FuzzyPredictionModel(
            coeffs_, fuzzy::adapt(model_.fuzzy_model(), e, adaptation_.lyapunov_p,
                                  adaptation_.input_direction, x, last_input_,
                                  config_.control_period, adaptation_.gain));
    }
    first_ = false;

    std::vector<Vec4> refs;
    std::vector<double> dist;
    horizon_signals(t, config_, reference_, disturbance_, refs, dist);
    ControlStep step = solve_step(model_, x, refs, dist, config_, warm_start_);
    shift_warm_start(warm_start_, step.optimized_sequence);
    last_input_ = step.applied_input;
    return step;
}

}  // namespace afmpc::mpc
