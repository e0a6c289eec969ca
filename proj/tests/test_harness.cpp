#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "afmpc/errors.hpp"
#include "afmpc/harness.hpp"

using namespace afmpc;
using namespace afmpc::harness;

namespace {

ScenarioConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string config_error(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

TrajectoryLog constant_error_log(double e, int n, double dt) {
    TrajectoryLog log;
    log.dt = dt;
    for (int k = 0; k < n; ++k) {
        StepRecord r;
        r.t = k * dt;
        r.e = e;
        r.solve_time = 1e-3;
        log.records.push_back(r);
    }
    return log;
}

}  // namespace

TEST_CASE("config parsing") {
    const ScenarioConfig d = parse("");
    CHECK(d.mpc.prediction_horizon == 5);
    CHECK(d.mpc.control_horizon == 3);
    CHECK(d.plant.k_p == 74.89);
    CHECK(d.mpc.input_weight == 0.3);
    CHECK(d.mpc.state_weight == 0.1 * Mat4::Identity());
    CHECK(d.lyapunov_q == 500.0 * Mat4::Identity());

    const ScenarioConfig c = parse(
        "# horizons\n"
        "mpc.kp = 5\n"
        "mpc.kc = 3   # trailing comment\n"
        "\n"
        "controller = classical\n"
        "reference.kind = step\n"
        "reference.amplitude = 0.3\n"
        "fuzzy.counts = 5, 5, 3, 3\n"
        "mpc.q = 1, 2, 3, 4\n"
        "sim.seed = 12\n");
    CHECK(c.mpc.prediction_horizon == 5);
    CHECK(c.mpc.control_horizon == 3);
    CHECK(c.controller == ControllerKind::kClassical);
    CHECK(c.reference.kind == ReferenceKind::kStep);
    CHECK(c.fuzzy_counts == std::array<int, 4>{5, 5, 3, 3});
    CHECK(c.mpc.state_weight(3, 3) == 4.0);
    CHECK(c.seed == 12u);
}

TEST_CASE("config errors") {
    CHECK(config_error("mpc.kc = 7\nmpc.kp = 5\n").find("K_c <= K_p violated") != std::string::npos);

    // every problem is reported at once
    const std::string all = config_error("mpc.kp = five\nbogus.key = 1\nsim.duration = -1\nmpc.r = 1\nmpc.r = 2\n");
    CHECK(all.find("mpc.kp") != std::string::npos);
    CHECK(all.find("bogus.key") != std::string::npos);
    CHECK(all.find("mpc.r") != std::string::npos);

    CHECK_FALSE(config_error("no equals sign\n").empty());
    CHECK_FALSE(config_error("sim.duration = 0\n").empty());
    CHECK_FALSE(config_error("lyapunov.q = 1, 2, 3\n").empty());
    CHECK_FALSE(config_error("controller = pid\n").empty());
    CHECK_THROWS_AS(load_config("/nonexistent/scenario.cfg"), ConfigError);
}

TEST_CASE("printed defaults parse back to the same config") {
    ScenarioConfig c;
    c.mpc.input_weight = 0.123456789012345;
    c.fuzzy_ranges[1] = {-7.5, 12.25};
    c.seed = 99;
    std::ostringstream out;
    print_config(out, c);
    std::ostringstream again;
    print_config(again, parse(out.str()));
    CHECK(out.str() == again.str());
}

TEST_CASE("reference signals") {
    ReferenceSpec zero{ReferenceKind::kZero};
    const auto z = reference_trajectory(zero, 3.0);
    CHECK(z.y == 0.0);
    CHECK(z.dddy == 0.0);

    const ReferenceSpec sine{ReferenceKind::kSinusoid, 0.5, 0.2};
    const double w = 2 * std::numbers::pi * 0.2;
    const auto s0 = reference_trajectory(sine, 0.0);
    CHECK(s0.y == 0.0);
    CHECK(s0.dy == doctest::Approx(0.5 * w));
    CHECK(s0.ddy == doctest::Approx(0.0));
    CHECK(s0.dddy == doctest::Approx(-0.5 * w * w * w));

    ReferenceSpec step{ReferenceKind::kStep, 0.3, 0.0, 1.0, 0.5};
    CHECK(reference_trajectory(step, 0.9).y == 0.0);
    const auto after = reference_trajectory(step, 2.0);
    CHECK(after.y == 0.3);
    CHECK(after.dy == 0.0);
    CHECK(after.ddy == 0.0);
    CHECK(after.dddy == 0.0);
    step.smoothing = 0.0;
    CHECK(reference_trajectory(step, 1.0).y == 0.3);

    const Vec4 x = reference_state(sine, 0.4);
    CHECK(x[0] == 0.0);
    CHECK(x[1] == 0.0);
    CHECK(x[2] == reference_trajectory(sine, 0.4).y);
    CHECK(x[3] == reference_trajectory(sine, 0.4).dy);
}

TEST_CASE("reference derivatives agree with central differences") {
    const ReferenceSpec specs[] = {{ReferenceKind::kSinusoid, 0.5, 0.2},
                                   {ReferenceKind::kStep, 0.3, 0.0, 1.0, 0.5}};
    const double h = 1e-4;
    for (const auto& spec : specs) {
        for (double t : {1.05, 1.2, 1.33, 1.49, 3.7}) {
            const auto r = reference_trajectory(spec, t);
            const auto p = reference_trajectory(spec, t + h);
            const auto m = reference_trajectory(spec, t - h);
            CHECK((p.y - m.y) / (2 * h) == doctest::Approx(r.dy).epsilon(1e-6).scale(1.0));
            CHECK((p.dy - m.dy) / (2 * h) == doctest::Approx(r.ddy).epsilon(1e-6).scale(10.0));
            CHECK((p.ddy - m.ddy) / (2 * h) == doctest::Approx(r.dddy).epsilon(1e-5).scale(100.0));
        }
    }
}

TEST_CASE("metrics") {
    const RunMetrics zero = compute_metrics(constant_error_log(0.0, 10, 0.1), 0.1);
    CHECK(zero.rmse == 0.0);
    CHECK(zero.iae == 0.0);
    CHECK(zero.steady_state_error == 0.0);

    const RunMetrics m = compute_metrics(constant_error_log(0.1, 10, 0.1), 0.1);
    CHECK(m.iae == doctest::Approx(0.1));
    CHECK(m.rmse == doctest::Approx(0.1));
    CHECK(m.steady_state_error == doctest::Approx(0.1));
    CHECK(m.mean_solve_time == doctest::Approx(1e-3));

    // steady-state window is the last 20%
    TrajectoryLog log = constant_error_log(1.0, 10, 0.1);
    log.records[8].e = -0.2;
    log.records[9].e = 0.4;
    const RunMetrics w = compute_metrics(log, 0.1);
    CHECK(w.steady_state_error == doctest::Approx(0.3));
    CHECK(w.steady_state_error <= w.max_abs_error);

    CHECK_THROWS_AS(compute_metrics(TrajectoryLog{}, 0.1), InvalidArgument);
}

TEST_CASE("csv") {
    TrajectoryLog log = constant_error_log(0.1, 2, 0.01);
    std::ostringstream out;
    write_csv(out, log);
    const std::string text = out.str();
    CHECK(text.back() == '\n');
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(text.substr(0, text.find('\n')) == kCsvHeader);

    CHECK_THROWS_AS(export_csv(log, "/nonexistent/dir/out.csv"), IoError);
}

TEST_CASE("csv round trip is lossless") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> normal;
    TrajectoryLog log;
    log.dt = 0.01;
    const mpc::StepStatus statuses[] = {mpc::StepStatus::kConverged, mpc::StepStatus::kMaxIterations,
                                        mpc::StepStatus::kInfeasible, mpc::StepStatus::kFallback};
    for (int k = 0; k < 50; ++k) {
        StepRecord r;
        r.t = k * 0.01;
        r.x = PlantState(normal(rng), normal(rng) * 1e3, normal(rng) * 1e-9, normal(rng));
        r.u = normal(rng);
        r.y_ref = normal(rng);
        r.e = normal(rng);
        r.lyapunov = std::abs(normal(rng)) * 1e6;
        r.w_diag = normal(rng);
        r.cost = std::abs(normal(rng));
        r.status = statuses[k % 4];
        r.solve_time = std::abs(normal(rng)) * 1e-3;
        log.records.push_back(r);
    }
    std::stringstream ss;
    write_csv(ss, log);
    const TrajectoryLog back = read_csv(ss);
    REQUIRE(back.records.size() == log.records.size());
    for (std::size_t k = 0; k < log.records.size(); ++k) {
        const auto& a = log.records[k];
        const auto& b = back.records[k];
        CHECK(a.t == b.t);
        CHECK(a.x == b.x);
        CHECK(a.u == b.u);
        CHECK(a.y_ref == b.y_ref);
        CHECK(a.e == b.e);
        CHECK(a.lyapunov == b.lyapunov);
        CHECK(a.w_diag == b.w_diag);
        CHECK(a.cost == b.cost);
        CHECK(a.status == b.status);
        CHECK(a.solve_time == doctest::Approx(b.solve_time).epsilon(1e-15));
    }
}

TEST_CASE("comparison report") {
    RunMetrics a;
    a.steady_state_error = 0.5;
    RunMetrics b;
    b.steady_state_error = 0.01;
    const std::string r = compare_report(a, b);
    CHECK(r.find("classical") != std::string::npos);
    CHECK(r.find("ratio (afmpc / classical): 0.02\n") != std::string::npos);
    CHECK(compare_report(a, a).find("ratio (afmpc / classical): 1\n") != std::string::npos);
    RunMetrics none;
    CHECK(compare_report(none, none).find("ratio (afmpc / classical): 1\n") != std::string::npos);
}

TEST_CASE("scenario runs") {
    SUBCASE("nothing to do") {
        ScenarioConfig c;
        c.reference.kind = ReferenceKind::kZero;
        c.initial_state = PlantState::Zero();
        c.duration = 0.5;
        for (auto kind : {ControllerKind::kClassical, ControllerKind::kAfmpc}) {
            c.controller = kind;
            const RunResult r = run_scenario(c);
            CHECK_FALSE(r.log.diverged);
            CHECK(r.log.records.size() == 50);
            CHECK(r.metrics.rmse <= 1e-6);
        }
    }
    SUBCASE("repeatable") {
        ScenarioConfig c;
        c.duration = 0.3;
        c.disturbance.kind = DisturbanceKind::kBandLimitedNoise;
        c.disturbance.amplitude = 0.1;
        c.disturbance.frequency = 5.0;
        c.seed = 4;
        std::ostringstream a, b;
        write_csv(a, run_scenario(c).log, false);
        write_csv(b, run_scenario(c).log, false);
        CHECK(a.str() == b.str());
    }
    SUBCASE("adaptive run exposes its final model") {
        ScenarioConfig c;
        c.duration = 0.2;
        const RunResult r = run_scenario(c);
        REQUIRE(r.final_fuzzy_model.has_value());
        CHECK(r.final_fuzzy_model->rule_count() == 81);
        c.controller = ControllerKind::kClassical;
        CHECK_FALSE(run_scenario(c).final_fuzzy_model.has_value());
    }
    SUBCASE("literal Lyapunov matrix is flagged") {
        ScenarioConfig c;
        c.duration = 0.05;
        c.lyapunov_a << 0, 10, 0, 0, 0, 0, 10, 0, 0, 0, 0, 10, -17.2, -20.5, -10, 7;
        const RunResult r = run_scenario(c);
        CHECK_FALSE(r.warnings.empty());
    }
}

TEST_CASE("adaptive MPC beats classical on the default scenario") {
    ScenarioConfig c;
    c.controller = ControllerKind::kClassical;
    const RunResult classical = run_scenario(c);
    c.controller = ControllerKind::kAfmpc;
    const RunResult adaptive = run_scenario(c);
    REQUIRE_FALSE(classical.log.diverged);
    REQUIRE_FALSE(adaptive.log.diverged);
    CHECK(adaptive.metrics.steady_state_error < classical.metrics.steady_state_error);
}
