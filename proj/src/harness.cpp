#include "afmpc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "afmpc/errors.hpp"

namespace afmpc::harness {

CoeffSet ModelMismatch::apply(const CoeffSet& c) const {
    return {c.a1 * a1, c.a2 * a2, c.a3 * a3, c.a4 * a4, c.b1 * b1, c.b2 * b2};
}

Mat4 default_lyapunov_a() {
    // Companion form of s^4 + 7 s^3 + 10 s^2 + 20.5 s + 17.2 (Hurwitz).
    Mat4 a;
    a << 0, 1, 0, 0,
         0, 0, 1, 0,
         0, 0, 0, 1,
         -17.2, -20.5, -10, -7;
    return a;
}

ReferenceSample reference_trajectory(const ReferenceSpec& spec, double t) {
    ReferenceSample r;
    switch (spec.kind) {
        case ReferenceKind::kZero:
            break;
        case ReferenceKind::kSinusoid: {
            const double w = 2.0 * std::numbers::pi * spec.frequency;
            const double s = std::sin(w * t);
            const double c = std::cos(w * t);
            r.y = spec.amplitude * s;
            r.dy = spec.amplitude * w * c;
            r.ddy = -spec.amplitude * w * w * s;
            r.dddy = -spec.amplitude * w * w * w * c;
            break;
        }
        case ReferenceKind::kStep: {
            if (t < spec.step_time) break;
            const double a = spec.amplitude;
            const double width = spec.smoothing;
            if (width <= 0 || t >= spec.step_time + width) {
                r.y = a;
                break;
            }
            // 35 s^4 - 84 s^5 + 70 s^6 - 20 s^7: derivatives up to third order vanish at both ends.
            const double s = (t - spec.step_time) / width;
            const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s, s6 = s5 * s, s7 = s6 * s;
            r.y = a * (35 * s4 - 84 * s5 + 70 * s6 - 20 * s7);
            r.dy = a * (140 * s3 - 420 * s4 + 420 * s5 - 140 * s6) / width;
            r.ddy = a * (420 * s2 - 1680 * s3 + 2100 * s4 - 840 * s5) / (width * width);
            r.dddy = a * (840 * s - 5040 * s2 + 8400 * s3 - 4200 * s4) / (width * width * width);
            break;
        }
    }
    return r;
}

Vec4 reference_state(const ReferenceSpec& spec, double t) {
    const ReferenceSample r = reference_trajectory(spec, t);
    return {0.0, 0.0, r.y, r.dy};
}

RunMetrics compute_metrics(const TrajectoryLog& log, double dt) {
    const auto& recs = log.records;
    if (recs.empty()) throw InvalidArgument("compute_metrics: empty log");
    RunMetrics m;
    double sq = 0.0;
    for (const auto& r : recs) {
        const double a = std::abs(r.e);
        sq += r.e * r.e;
        m.iae += a * dt;
        m.max_abs_error = std::max(m.max_abs_error, a);
        m.mean_solve_time += r.solve_time;
        m.max_solve_time = std::max(m.max_solve_time, r.solve_time);
    }
    const auto n = static_cast<double>(recs.size());
    m.rmse = std::sqrt(sq / n);
    m.mean_solve_time /= n;

    const std::size_t tail = std::max<std::size_t>(1, recs.size() / 5);
    double tail_sum = 0.0;
    for (std::size_t i = recs.size() - tail; i < recs.size(); ++i) tail_sum += std::abs(recs[i].e);
    m.steady_state_error = tail_sum / static_cast<double>(tail);
    return m;
}

namespace {

std::vector<PlantState> sample_grid(const std::array<fuzzy::Interval, 4>& ranges,
                                    const std::array<int, 4>& per_dim) {
    std::vector<PlantState> out;
    std::size_t total = 1;
    for (int n : per_dim) total *= static_cast<std::size_t>(n);
    out.reserve(total);
    std::array<int, 4> idx{};
    for (std::size_t k = 0; k < total; ++k) {
        PlantState x;
        for (int i = 0; i < 4; ++i) {
            const auto r = ranges[static_cast<std::size_t>(i)];
            const int n = per_dim[static_cast<std::size_t>(i)];
            x[i] = n == 1 ? 0.5 * (r.lo + r.hi) : r.lo + (r.hi - r.lo) * idx[static_cast<std::size_t>(i)] / (n - 1);
        }
        out.push_back(x);
        for (int i = 3; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < per_dim[static_cast<std::size_t>(i)]) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return out;
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> fit_to_coefficients(
    const fuzzy::FuzzyModel& model, const std::array<fuzzy::Interval, 4>& ranges,
    const CoeffSet& c) {
    std::array<int, 4> per_dim{};
    for (int i = 0; i < 4; ++i) {
        per_dim[static_cast<std::size_t>(i)] =
            2 * static_cast<int>(model.mfs()[static_cast<std::size_t>(i)].size()) + 3;
    }
    const auto samples = sample_grid(ranges, per_dim);
    std::vector<double> f(samples.size());
    std::vector<double> g(samples.size(), c.b2);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& x = samples[k];
        f[k] = c.a2 * x[kThetaDot] + c.a3 * std::sin(x[kAlpha]) + c.a4 * x[kAlphaDot];
    }
    return {fuzzy::fit_consequents(model, samples, f), fuzzy::fit_consequents(model, samples, g)};
}

RunResult run_scenario(const ScenarioConfig& config) {
    config.validate();
    RunResult result;

    const CoeffSet truth = derive_coefficients(config.plant);
    const CoeffSet model_coeffs = config.mismatch.apply(truth);

    DisturbanceSpec dspec = config.disturbance;
    dspec.seed = config.seed;
    const Disturbance disturbance(dspec);

    const ReferenceSpec ref_spec = config.reference;
    const mpc::ReferenceFunction reference = [ref_spec](double t) { return reference_state(ref_spec, t); };

    const LyapunovSolution lyap = solve_lyapunov(config.lyapunov_a, config.lyapunov_q);
    if (!lyap.positive_definite) {
        result.warnings.push_back("Lyapunov solution P is not positive definite (A is not Hurwitz)");
    }
    const Mat4 p = lyap.P;
    const Vec4 b(0, 0, 0, 1);

    std::unique_ptr<mpc::Controller> controller;
    Eigen::VectorXd theta_f_star;
    Eigen::VectorXd theta_g_star;
    if (config.controller == ControllerKind::kClassical) {
        controller = std::make_unique<mpc::ClassicalMpc>(config.mpc, model_coeffs, reference, disturbance);
    } else {
        fuzzy::FuzzyModel initial = fuzzy::build_rule_grid(
            config.fuzzy_counts, config.fuzzy_ranges, config.fuzzy_g_floor, config.fuzzy_parameter_bound);
        std::tie(theta_f_star, theta_g_star) = fit_to_coefficients(initial, config.fuzzy_ranges, truth);
        if (config.fuzzy_init == FuzzyInit::kNominal) {
            auto [tf, tg] = fit_to_coefficients(initial, config.fuzzy_ranges, model_coeffs);
            initial.set_theta_f(tf);
            initial.set_theta_g(tg);
        }
        mpc::AdaptationSettings adaptation;
        adaptation.lyapunov_p = p;
        adaptation.input_direction = b;
        adaptation.gain = config.fuzzy_gain;
        controller = std::make_unique<mpc::AdaptiveFuzzyMpc>(config.mpc, model_coeffs, std::move(initial),
                                                             adaptation, reference, disturbance);
    }

    const LyapunovMonitor monitor(truth, p, b, reference, theta_f_star, theta_g_star);
    PlantSetup plant{truth, disturbance, config.plant_step};
    const int steps = std::max(1, static_cast<int>(std::lround(config.duration / config.mpc.control_period)));

    result.log = run_receding_horizon(config.initial_state, plant, *controller, reference, steps,
                                      [&monitor](double t, const PlantState& x, double u,
                                                 const mpc::Controller& c) { return monitor(t, x, u, c); });
    if (!config.record_wall_clock) {
        for (auto& r : result.log.records) r.solve_time = 0.0;
    }
    if (!result.log.records.empty()) {
        result.metrics = compute_metrics(result.log, config.mpc.control_period);
    }
    if (const auto* adaptive = dynamic_cast<const mpc::AdaptiveFuzzyMpc*>(controller.get())) {
        result.final_fuzzy_model = adaptive->fuzzy_model();
    }
    return result;
}

namespace {

void append_number(std::string& line, double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    line.append(buf, static_cast<std::size_t>(n));
}

mpc::StepStatus parse_status(const std::string& s) {
    if (s == "converged") return mpc::StepStatus::kConverged;
    if (s == "max_iter") return mpc::StepStatus::kMaxIterations;
    if (s == "infeasible") return mpc::StepStatus::kInfeasible;
    if (s == "fallback") return mpc::StepStatus::kFallback;
    throw InvalidArgument("unknown status '" + s + "'");
}

}  // namespace

void write_csv(std::ostream& out, const TrajectoryLog& log, bool wall_clock) {
    out << kCsvHeader << '\n';
    std::string line;
    for (const auto& r : log.records) {
        line.clear();
        const double values[] = {r.t, r.x[0], r.x[1], r.x[2], r.x[3], r.u, r.y_ref,
                                 r.e, r.lyapunov, r.w_diag, r.cost};
        for (double v : values) {
            append_number(line, v);
            line += ',';
        }
        line += mpc::to_string(r.status);
        line += ',';
        append_number(line, wall_clock ? r.solve_time * 1e3 : 0.0);
        line += '\n';
        out << line;
    }
}

void export_csv(const TrajectoryLog& log, const std::string& path, bool wall_clock) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_csv(out, log, wall_clock);
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

TrajectoryLog read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw InvalidArgument("read_csv: missing or unexpected header");
    }
    TrajectoryLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 13) throw InvalidArgument("read_csv: expected 13 columns");
        auto num = [&cells](std::size_t i) { return std::strtod(cells[i].c_str(), nullptr); };
        StepRecord r;
        r.t = num(0);
        r.x = PlantState(num(1), num(2), num(3), num(4));
        r.u = num(5);
        r.y_ref = num(6);
        r.e = num(7);
        r.lyapunov = num(8);
        r.w_diag = num(9);
        r.cost = num(10);
        r.status = parse_status(cells[11]);
        r.solve_time = num(12) / 1e3;
        log.records.push_back(r);
    }
    if (log.records.size() >= 2) log.dt = log.records[1].t - log.records[0].t;
    return log;
}

std::string compare_report(const RunMetrics& classical, const RunMetrics& afmpc) {
    std::ostringstream os;
    os.precision(6);
    auto block = [&os](const char* name, const RunMetrics& m) {
        os << name << '\n'
           << "  rmse               " << m.rmse << " rad\n"
           << "  iae                " << m.iae << " rad s\n"
           << "  steady_state_error " << m.steady_state_error << " rad\n"
           << "  max_abs_error      " << m.max_abs_error << " rad\n"
           << "  mean_solve_time    " << m.mean_solve_time * 1e3 << " ms\n"
           << "  max_solve_time     " << m.max_solve_time * 1e3 << " ms\n";
    };
    block("classical MPC", classical);
    block("adaptive fuzzy MPC", afmpc);
    os << "steady-state error ratio (afmpc / classical): ";
    if (classical.steady_state_error > 0) {
        os << afmpc.steady_state_error / classical.steady_state_error;
    } else if (afmpc.steady_state_error == 0) {
        os << 1.0;
    } else {
        os << "inf";
    }
    os << '\n';
    return os.str();
}

}  // namespace afmpc::harness
