// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance [--known-red name,name,...]
//
// Exit status is nonzero if any criterion fails, except those named in --known-red.
// A known-red criterion that passes is also an error, so the list cannot go stale.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "afmpc/harness.hpp"
#include "afmpc/linalg.hpp"
#include "afmpc/nlp.hpp"

using namespace afmpc;
using Eigen::MatrixXd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

// ---- Lyapunov solver

Outcome lyapunov_solver() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal;
    auto random = [&](int n) {
        MatrixXd m(n, n);
        for (int i = 0; i < n * n; ++i) m.data()[i] = normal(rng);
        return m;
    };

    bool ok = true;
    double worst = 0.0;
    const auto start = Clock::now();
    for (int trial = 0; trial < 100; ++trial) {
        const MatrixXd m = random(4), s = 0.3 * random(4), r = random(4);
        const MatrixXd a = -m * m.transpose() - 0.1 * MatrixXd::Identity(4, 4) + (s - s.transpose());
        const MatrixXd q = r * r.transpose() + 0.5 * MatrixXd::Identity(4, 4);
        const auto sol = solve_lyapunov(a, q);
        const double rel = (a.transpose() * sol.P + sol.P * a + q).norm() / q.norm();
        worst = std::max(worst, rel);
        ok = ok && rel <= 1e-9 && sol.P == sol.P.transpose() && is_positive_definite(sol.P);
    }
    const double elapsed = seconds_since(start);

    MatrixXd literal(4, 4);
    literal << 0, 10, 0, 0,
               0, 0, 10, 0,
               0, 0, 0, 10,
               -17.2, -20.5, -10, 7;
    const bool unstable = Eigen::EigenSolver<MatrixXd>(literal).eigenvalues().real().maxCoeff() > 0;
    const bool flagged = !solve_lyapunov(literal, 500.0 * MatrixXd::Identity(4, 4)).positive_definite;

    return {ok && elapsed < 1.0 && unstable && flagged,
            "worst relative residual " + fmt(worst) + ", " + fmt(elapsed) +
                " s, literal matrix non-PD: " + (flagged ? "yes" : "no")};
}

// ---- Integrator order

Outcome integrator_order() {
    const CoeffSet c = derive_coefficients(PlantParams{});
    auto error = [&](int n) {
        PlantState x(0, 1, 0, 0);
        for (int i = 0; i < n; ++i) x = step(x, 0.0, 1.0 / n, c);
        return std::abs(x[kThetaDot] - std::exp(c.a1));
    };
    const double e1 = error(1000), e2 = error(2000);
    const double ratio = e1 / e2;
    return {e1 <= 1e-6 && ratio >= 12 && ratio <= 20,
            "error " + fmt(e1) + " at dt 1e-3, ratio " + fmt(ratio)};
}

// ---- Fuzzy capacity

Outcome fuzzy_capacity() {
    const auto start = Clock::now();
    const double pi = std::numbers::pi;
    const std::array<fuzzy::Interval, 4> box{{{-pi, pi}, {-10, 10}, {-pi, pi}, {-10, 10}}};
    const CoeffSet c = derive_coefficients(PlantParams{});
    fuzzy::FuzzyModel model = fuzzy::build_rule_grid({5, 5, 5, 5}, box);
    model.set_theta_f(harness::fit_to_coefficients(model, box, c).first);

    double err2 = 0.0, ref2 = 0.0;
    constexpr int n = 10;
    auto at = [&](int dim, int i) { return box[dim].lo + (box[dim].hi - box[dim].lo) * i / (n - 1); };
    for (int i0 = 0; i0 < n; ++i0)
        for (int i1 = 0; i1 < n; ++i1)
            for (int i2 = 0; i2 < n; ++i2)
                for (int i3 = 0; i3 < n; ++i3) {
                    const PlantState x(at(0, i0), at(1, i1), at(2, i2), at(3, i3));
                    const double f = c.a2 * x[kThetaDot] + c.a3 * std::sin(x[kAlpha]) + c.a4 * x[kAlphaDot];
                    err2 += std::pow(fuzzy::f_hat(model, x) - f, 2);
                    ref2 += f * f;
                }
    const double rel = std::sqrt(err2 / ref2);
    const double elapsed = seconds_since(start);
    return {rel <= 0.05 && elapsed < 30, "relative RMS " + fmt(rel) + ", " + fmt(elapsed) + " s"};
}

// ---- Optimizer KKT suite

nlp::NlpProblem problem(int n, std::function<double(const nlp::Vector&)> f,
                        std::function<nlp::Vector(const nlp::Vector&)> c = {}, int m = 0) {
    nlp::NlpProblem p;
    p.dimension = n;
    p.objective = std::move(f);
    p.inequality_constraints = c ? std::move(c) : [](const nlp::Vector&) { return nlp::Vector(); };
    p.constraint_count = m;
    p.lower_bounds = nlp::Vector::Constant(n, -std::numeric_limits<double>::infinity());
    p.upper_bounds = nlp::Vector::Constant(n, std::numeric_limits<double>::infinity());
    return p;
}

Outcome kkt_suite() {
    using nlp::Vector;
    struct Case {
        nlp::NlpProblem p;
        Vector z0;
        Vector expected;
    };
    const std::vector<Case> cases{
        {problem(1, [](const Vector& z) { return (z[0] - 3) * (z[0] - 3); },
                 [](const Vector& z) { return Vector::Constant(1, z[0] - 2); }, 1),
         Vector::Zero(1), Vector::Constant(1, 2.0)},
        {problem(2, [](const Vector& z) { return z.squaredNorm(); }), Eigen::Vector2d(5, -5),
         Vector::Zero(2)},
        {problem(2, [](const Vector& z) { return 100 * std::pow(z[1] - z[0] * z[0], 2) + std::pow(1 - z[0], 2); }),
         Eigen::Vector2d(-1.2, 1), Eigen::Vector2d(1, 1)},
        {problem(1, [](const Vector& z) { return (z[0] - 3) * (z[0] - 3); }), Vector::Zero(1),
         Vector::Constant(1, 3.0)},
        {problem(1, [](const Vector& z) { return z[0] * z[0]; },
                 [](const Vector& z) { return Vector::Constant(1, 1 - z[0]); }, 1),
         Vector::Constant(1, 0.5), Vector::Constant(1, 1.0)},
    };
    const nlp::SolverSettings settings;
    bool ok = true;
    double worst = 0.0;
    for (const auto& c : cases) {
        const auto s = nlp::minimize(c.p, c.z0, settings);
        worst = std::max(worst, s.kkt_residual);
        ok = ok && s.status == nlp::Status::kConverged && s.kkt_residual <= settings.kkt_tolerance &&
             (s.minimizer - c.expected).lpNorm<Eigen::Infinity>() <= 1e-4;
    }

    auto scaled = [](double alpha) {
        return problem(
            2,
            [alpha](const Vector& z) {
                return alpha * (std::pow(z[0] - 1, 4) + std::pow(z[0] - 2 * z[1], 2) + std::exp(z[1]));
            },
            [](const Vector& z) { return Vector::Constant(1, z[0] * z[0] + z[1] * z[1] - 1); }, 1);
    };
    const Vector base = nlp::minimize(scaled(1.0), Eigen::Vector2d(0.2, 0.2), settings).minimizer;
    double drift = 0.0;
    for (double alpha : {0.01, 10.0, 1000.0}) {
        const auto s = nlp::minimize(scaled(alpha), Eigen::Vector2d(0.2, 0.2), settings);
        ok = ok && s.status == nlp::Status::kConverged;
        drift = std::max(drift, (s.minimizer - base).lpNorm<Eigen::Infinity>());
    }
    ok = ok && drift <= 10 * settings.kkt_tolerance;
    return {ok, "worst KKT residual " + fmt(worst) + ", scaling drift " + fmt(drift)};
}

// ---- Closed-loop criteria

Outcome classical_regulation() {
    harness::ScenarioConfig c;
    c.controller = harness::ControllerKind::kClassical;
    c.reference.kind = harness::ReferenceKind::kZero;
    c.mismatch = harness::ModelMismatch{1, 1, 1, 1, 1, 1};
    c.initial_state = PlantState(0, 0, 0.3, 0);
    c.duration = 5.0;
    const auto r = harness::run_scenario(c);
    double worst = 0.0;
    for (const auto& rec : r.log.records) {
        if (rec.t >= 3.0) worst = std::max(worst, std::abs(rec.x[kAlpha]));
    }
    return {!r.log.diverged && worst < 0.05, "max |alpha| after 3 s: " + fmt(worst)};
}

struct DefaultRuns {
    harness::RunResult classical;
    harness::RunResult afmpc;
    double elapsed = 0.0;
};

DefaultRuns default_comparison() {
    harness::ScenarioConfig c;
    DefaultRuns runs;
    const auto start = Clock::now();
    c.controller = harness::ControllerKind::kClassical;
    runs.classical = harness::run_scenario(c);
    c.controller = harness::ControllerKind::kAfmpc;
    runs.afmpc = harness::run_scenario(c);
    runs.elapsed = seconds_since(start);
    return runs;
}

Outcome comparison(const DefaultRuns& runs) {
    const double a = runs.afmpc.metrics.steady_state_error;
    const double k = runs.classical.metrics.steady_state_error;
    const bool ok = !runs.afmpc.log.diverged && !runs.classical.log.diverged && a <= 0.02 && a <= 0.25 * k;
    return {ok, "afmpc " + fmt(a) + " rad, classical " + fmt(k) + " rad, ratio " + fmt(a / k)};
}

Outcome lyapunov_diagnostic(const DefaultRuns& runs) {
    const auto& recs = runs.afmpc.log.records;
    const double dt = runs.afmpc.log.dt;
    int total = 0, held = 0;
    for (std::size_t k = 0; k + 1 < recs.size(); ++k) {
        if (recs[k].t < 1.0) continue;
        ++total;
        if (recs[k + 1].lyapunov - recs[k].lyapunov <= recs[k].residual_bound * dt) ++held;
    }
    const double share = total > 0 ? static_cast<double>(held) / total : 0.0;
    return {share >= 0.9, fmt(100 * share) + "% of " + std::to_string(total) + " steps"};
}

Outcome performance(const DefaultRuns& runs) {
    const double worst = std::max(runs.classical.metrics.mean_solve_time, runs.afmpc.metrics.mean_solve_time);
    return {runs.elapsed < 60 && worst < 10e-3,
            "both runs " + fmt(runs.elapsed) + " s, mean solve classical " +
                fmt(1e3 * runs.classical.metrics.mean_solve_time) + " ms, afmpc " +
                fmt(1e3 * runs.afmpc.metrics.mean_solve_time) + " ms"};
}

Outcome determinism() {
    harness::ScenarioConfig c;
    c.duration = 2.0;
    c.disturbance.kind = DisturbanceKind::kBandLimitedNoise;
    c.disturbance.amplitude = 0.05;
    c.disturbance.frequency = 5.0;
    c.seed = 11;
    auto csv = [&] {
        std::ostringstream out;
        harness::write_csv(out, harness::run_scenario(c).log, false);
        return out.str();
    };
    const std::string a = csv(), b = csv();
    return {a == b, std::to_string(a.size()) + " bytes, identical: " + (a == b ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<std::string> known_red;
    app.add_option("--known-red", known_red, "Criteria expected to fail")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    const std::set<std::string> expected_red(known_red.begin(), known_red.end());

    const DefaultRuns runs = default_comparison();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"lyapunov-solver", lyapunov_solver},
        {"integrator-order", integrator_order},
        {"fuzzy-capacity", fuzzy_capacity},
        {"kkt-suite", kkt_suite},
        {"classical-regulation", classical_regulation},
        {"comparison", [&] { return comparison(runs); }},
        {"lyapunov-diagnostic", [&] { return lyapunov_diagnostic(runs); }},
        {"performance", [&] { return performance(runs); }},
        {"determinism", determinism},
    };

    int status = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const bool red = expected_red.count(name) > 0;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail
                  << (red ? (o.pass ? "  (listed as known red)" : "  (known red)") : "") << '\n';
        if (o.pass == red) status = 1;
    }
    for (const auto& name : expected_red) {
        const bool listed = std::any_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == name; });
        if (!listed) {
            std::cout << "unknown criterion in --known-red: " << name << '\n';
            status = 1;
        }
    }
    return status;
}
