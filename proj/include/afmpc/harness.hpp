#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "afmpc/closed_loop.hpp"
#include "afmpc/fuzzy.hpp"
#include "afmpc/mpc.hpp"
#include "afmpc/plant.hpp"

namespace afmpc::harness {

enum class ControllerKind { kClassical, kAfmpc };
enum class ReferenceKind { kZero, kStep, kSinusoid };
enum class FuzzyInit { kZero, kNominal };

struct ReferenceSpec {
    ReferenceKind kind = ReferenceKind::kSinusoid;
    double amplitude = 0.5;
    double frequency = 0.2;  // [Hz], sinusoid
    double step_time = 0.0;  // [s], step
    double smoothing = 0.5;  // [s], step rise window (C3 polynomial); 0 = ideal step
};

/// Multiplicative factors applied to the controller's model coefficients.
struct ModelMismatch {
    double a1 = 1.0, a2 = 1.0, a3 = 1.2, a4 = 1.0, b1 = 1.0, b2 = 1.0;

    CoeffSet apply(const CoeffSet& c) const;
};

Mat4 default_lyapunov_a();

struct ScenarioConfig {
    PlantParams plant;
    ControllerKind controller = ControllerKind::kAfmpc;
    mpc::MpcConfig mpc;

    std::array<int, 4> fuzzy_counts{3, 3, 3, 3};
    std::array<fuzzy::Interval, 4> fuzzy_ranges{
        {{-3.14159265358979, 3.14159265358979}, {-20.0, 20.0}, {-1.0, 1.0}, {-10.0, 10.0}}};
    double fuzzy_gain = 0.02;
    double fuzzy_g_floor = 1.0;
    double fuzzy_parameter_bound = 1e6;
    FuzzyInit fuzzy_init = FuzzyInit::kNominal;

    Mat4 lyapunov_a = default_lyapunov_a();
    Mat4 lyapunov_q = 500.0 * Mat4::Identity();

    ReferenceSpec reference;
    DisturbanceSpec disturbance;
    ModelMismatch mismatch;

    PlantState initial_state = PlantState(0.0, 0.0, 0.3, 0.0);
    double duration = 10.0;  // [s]
    double plant_step = 1e-3;
    std::uint64_t seed = 0;
    bool record_wall_clock = true;

    /// Throws ConfigError listing every violated invariant.
    void validate() const;
};

/// Parses `key = value` lines (`#` comments). Omitted keys keep their defaults;
/// unknown keys and bad values are all reported in one ConfigError.
ScenarioConfig parse_config(std::istream& in);
ScenarioConfig load_config(const std::string& path);

/// Every key with its current value, in a form parse_config accepts.
void print_config(std::ostream& out, const ScenarioConfig& config);

const char* to_string(ControllerKind kind);
ControllerKind parse_controller_kind(const std::string& text);

struct ReferenceSample {
    double y = 0.0;
    double dy = 0.0;
    double ddy = 0.0;
    double dddy = 0.0;
};

ReferenceSample reference_trajectory(const ReferenceSpec& spec, double t);

/// (theta_ref = 0, 0, y_ref, y_ref').
Vec4 reference_state(const ReferenceSpec& spec, double t);

struct RunMetrics {
    double rmse = 0.0;
    double iae = 0.0;
    double steady_state_error = 0.0;  // mean |e| over the final 20% of the records
    double max_abs_error = 0.0;
    double mean_solve_time = 0.0;  // [s]
    double max_solve_time = 0.0;
};

RunMetrics compute_metrics(const TrajectoryLog& log, double dt);

struct RunResult {
    TrajectoryLog log;
    RunMetrics metrics;
    std::optional<fuzzy::FuzzyModel> final_fuzzy_model;
    std::vector<std::string> warnings;
};

/// Runs the closed loop for `duration` with the configured controller. Pure compute.
RunResult run_scenario(const ScenarioConfig& config);

/// Least-squares consequents matching the drift a2 x2 + a3 sin x3 + a4 x4 and gain b2 of
/// `coeffs` on a regular sample grid over the rule ranges.
std::pair<Eigen::VectorXd, Eigen::VectorXd> fit_to_coefficients(const fuzzy::FuzzyModel& model,
                                                                const std::array<fuzzy::Interval, 4>& ranges,
                                                                const CoeffSet& coeffs);

inline constexpr const char* kCsvHeader = "t,x1,x2,x3,x4,u,y_ref,e,V,w_diag,cost,status,solve_ms";

void write_csv(std::ostream& out, const TrajectoryLog& log, bool wall_clock = true);
void export_csv(const TrajectoryLog& log, const std::string& path, bool wall_clock = true);
TrajectoryLog read_csv(std::istream& in);

std::string compare_report(const RunMetrics& classical, const RunMetrics& afmpc);

}  // namespace afmpc::harness
