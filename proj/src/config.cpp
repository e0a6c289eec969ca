#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "afmpc/errors.hpp"
#include "afmpc/harness.hpp"

namespace afmpc::harness {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) throw ConfigError("empty value");
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + t + "'");
    }
    if (pos != t.size()) throw ConfigError("not a number: '" + t + "'");
    return v;
}

std::int64_t parse_int(const std::string& text) {
    const std::string t = trim(text);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ConfigError("not an integer: '" + t + "'");
    }
    return v;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
    return out;
}

bool parse_bool(const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("not a boolean: '" + t + "'");
}

// 4 values set the diagonal, 16 the full matrix (row-major).
Mat4 parse_matrix(const std::string& text) {
    const auto v = parse_list(text);
    if (v.size() == 4) return Eigen::Vector4d(v[0], v[1], v[2], v[3]).asDiagonal();
    if (v.size() == 16) {
        Mat4 m;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) m(i, j) = v[static_cast<std::size_t>(4 * i + j)];
        return m;
    }
    throw ConfigError("matrix needs 4 (diagonal) or 16 (row-major) values");
}

fuzzy::Interval parse_interval(const std::string& text) {
    const auto v = parse_list(text);
    if (v.size() != 2) throw ConfigError("interval needs two values 'lo, hi'");
    return {v[0], v[1]};
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string fmt_matrix(const Mat4& m) {
    const bool diagonal = (m - Mat4(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    std::string out;
    if (diagonal) {
        for (int i = 0; i < 4; ++i) out += (i ? ", " : "") + fmt(m(i, i));
        return out;
    }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out += ((i || j) ? ", " : "") + fmt(m(i, j));
    return out;
}

const char* to_string(ReferenceKind kind) {
    switch (kind) {
        case ReferenceKind::kZero: return "zero";
        case ReferenceKind::kStep: return "step";
        case ReferenceKind::kSinusoid: return "sinusoid";
    }
    return "?";
}

const char* to_string(DisturbanceKind kind) {
    switch (kind) {
        case DisturbanceKind::kNone: return "none";
        case DisturbanceKind::kConstant: return "constant";
        case DisturbanceKind::kSinusoid: return "sinusoid";
        case DisturbanceKind::kBandLimitedNoise: return "noise";
    }
    return "?";
}

const char* to_string(FuzzyInit init) { return init == FuzzyInit::kZero ? "zero" : "nominal"; }

using Setter = std::function<void(ScenarioConfig&, const std::string&)>;
using Getter = std::function<std::string(const ScenarioConfig&)>;

struct Key {
    Setter set;
    Getter get;
};

Key number(double ScenarioConfig::*field) {
    return {[field](ScenarioConfig& c, const std::string& v) { c.*field = parse_double(v); },
            [field](const ScenarioConfig& c) { return fmt(c.*field); }};
}

template <class Section>
Key nested(Section ScenarioConfig::*member, double Section::*field) {
    return {[=](ScenarioConfig& c, const std::string& v) { (c.*member).*field = parse_double(v); },
            [=](const ScenarioConfig& c) { return fmt((c.*member).*field); }};
}

const std::string kStateNames[4] = {"theta", "theta_dot", "alpha", "alpha_dot"};

// Ordered so print_config groups related keys.
const std::vector<std::pair<std::string, Key>>& key_table() {
    static const std::vector<std::pair<std::string, Key>> table = [] {
        std::vector<std::pair<std::string, Key>> t;
        t.emplace_back("plant.m1", nested(&ScenarioConfig::plant, &PlantParams::m1));
        t.emplace_back("plant.k1", nested(&ScenarioConfig::plant, &PlantParams::k1));
        t.emplace_back("plant.a_p", nested(&ScenarioConfig::plant, &PlantParams::a_p));
        t.emplace_back("plant.J1", nested(&ScenarioConfig::plant, &PlantParams::J1));
        t.emplace_back("plant.g", nested(&ScenarioConfig::plant, &PlantParams::g));
        t.emplace_back("plant.l1", nested(&ScenarioConfig::plant, &PlantParams::l1));
        t.emplace_back("plant.c1", nested(&ScenarioConfig::plant, &PlantParams::c1));
        t.emplace_back("plant.k_p", nested(&ScenarioConfig::plant, &PlantParams::k_p));

        t.emplace_back("controller",
                       Key{[](ScenarioConfig& c, const std::string& v) {
                               c.controller = parse_controller_kind(trim(v));
                           },
                           [](const ScenarioConfig& c) { return std::string(to_string(c.controller)); }});

        t.emplace_back("mpc.kp", Key{[](ScenarioConfig& c, const std::string& v) {
                                         c.mpc.prediction_horizon = static_cast<int>(parse_int(v));
                                     },
                                     [](const ScenarioConfig& c) { return std::to_string(c.mpc.prediction_horizon); }});
        t.emplace_back("mpc.kc", Key{[](ScenarioConfig& c, const std::string& v) {
                                         c.mpc.control_horizon = static_cast<int>(parse_int(v));
                                     },
                                     [](const ScenarioConfig& c) { return std::to_string(c.mpc.control_horizon); }});
        t.emplace_back("mpc.q", Key{[](ScenarioConfig& c, const std::string& v) { c.mpc.state_weight = parse_matrix(v); },
                                    [](const ScenarioConfig& c) { return fmt_matrix(c.mpc.state_weight); }});
        t.emplace_back("mpc.r", nested(&ScenarioConfig::mpc, &mpc::MpcConfig::input_weight));
        t.emplace_back("mpc.u_max", nested(&ScenarioConfig::mpc, &mpc::MpcConfig::input_bound));
        t.emplace_back("mpc.control_period", nested(&ScenarioConfig::mpc, &mpc::MpcConfig::control_period));
        t.emplace_back("mpc.prediction_step", nested(&ScenarioConfig::mpc, &mpc::MpcConfig::prediction_step));
        t.emplace_back("mpc.integration_step", nested(&ScenarioConfig::mpc, &mpc::MpcConfig::integration_step));

        t.emplace_back("solver.kkt_tolerance",
                       Key{[](ScenarioConfig& c, const std::string& v) { c.mpc.solver.kkt_tolerance = parse_double(v); },
                           [](const ScenarioConfig& c) { return fmt(c.mpc.solver.kkt_tolerance); }});
        t.emplace_back("solver.max_iterations",
                       Key{[](ScenarioConfig& c, const std::string& v) {
                               c.mpc.solver.max_iterations = static_cast<int>(parse_int(v));
                           },
                           [](const ScenarioConfig& c) { return std::to_string(c.mpc.solver.max_iterations); }});
        t.emplace_back("solver.fd_step",
                       Key{[](ScenarioConfig& c, const std::string& v) {
                               c.mpc.solver.finite_difference_step = parse_double(v);
                           },
                           [](const ScenarioConfig& c) { return fmt(c.mpc.solver.finite_difference_step); }});

        t.emplace_back("fuzzy.counts",
                       Key{[](ScenarioConfig& c, const std::string& v) {
                               const auto list = parse_list(v);
                               if (list.size() != 4) throw ConfigError("fuzzy.counts needs 4 integers");
                               for (int i = 0; i < 4; ++i) {
                                   const double n = list[static_cast<std::size_t>(i)];
                                   if (n != std::floor(n)) throw ConfigError("fuzzy.counts must be integers");
                                   c.fuzzy_counts[static_cast<std::size_t>(i)] = static_cast<int>(n);
                               }
                           },
                           [](const ScenarioConfig& c) {
                               std::string s;
                               for (int i = 0; i < 4; ++i)
                                   s += (i ? ", " : "") + std::to_string(c.fuzzy_counts[static_cast<std::size_t>(i)]);
                               return s;
                           }});
        for (std::size_t i = 0; i < 4; ++i) {
            t.emplace_back("fuzzy.range." + kStateNames[i],
                           Key{[i](ScenarioConfig& c, const std::string& v) { c.fuzzy_ranges[i] = parse_interval(v); },
                               [i](const ScenarioConfig& c) {
                                   return fmt(c.fuzzy_ranges[i].lo) + ", " + fmt(c.fuzzy_ranges[i].hi);
                               }});
        }
        t.emplace_back("fuzzy.gain", number(&ScenarioConfig::fuzzy_gain));
        t.emplace_back("fuzzy.g_floor", number(&ScenarioConfig::fuzzy_g_floor));
        t.emplace_back("fuzzy.parameter_bound", number(&ScenarioConfig::fuzzy_parameter_bound));
        t.emplace_back("fuzzy.init", Key{[](ScenarioConfig& c, const std::string& v) {
                                             const std::string s = trim(v);
                                             if (s == "zero") c.fuzzy_init = FuzzyInit::kZero;
                                             else if (s == "nominal") c.fuzzy_init = FuzzyInit::kNominal;
                                             else throw ConfigError("expected zero|nominal, got '" + s + "'");
                                         },
                                         [](const ScenarioConfig& c) { return std::string(to_string(c.fuzzy_init)); }});

        t.emplace_back("lyapunov.a", Key{[](ScenarioConfig& c, const std::string& v) { c.lyapunov_a = parse_matrix(v); },
                                         [](const ScenarioConfig& c) { return fmt_matrix(c.lyapunov_a); }});
        t.emplace_back("lyapunov.q", Key{[](ScenarioConfig& c, const std::string& v) { c.lyapunov_q = parse_matrix(v); },
                                         [](const ScenarioConfig& c) { return fmt_matrix(c.lyapunov_q); }});

        t.emplace_back("reference.kind",
                       Key{[](ScenarioConfig& c, const std::string& v) {
                               const std::string s = trim(v);
                               if (s == "zero") c.reference.kind = ReferenceKind::kZero;
                               else if (s == "step") c.reference.kind = ReferenceKind::kStep;
                               else if (s == "sinusoid") c.reference.kind = ReferenceKind::kSinusoid;
                               else throw ConfigError("expected zero|step|sinusoid, got '" + s + "'");
                           },
                           [](const ScenarioConfig& c) { return std::string(to_string(c.reference.kind)); }});
        t.emplace_back("reference.amplitude", nested(&ScenarioConfig::reference, &ReferenceSpec::amplitude));
        t.emplace_back("reference.frequency", nested(&ScenarioConfig::reference, &ReferenceSpec::frequency));
        t.emplace_back("reference.step_time", nested(&ScenarioConfig::reference, &ReferenceSpec::step_time));
        t.emplace_back("reference.smoothing", nested(&ScenarioConfig::reference, &ReferenceSpec::smoothing));

        t.emplace_back("disturbance.kind",
                       Key{[](ScenarioConfig& c, const std::string& v) {
                               const std::string s = trim(v);
                               if (s == "none") c.disturbance.kind = DisturbanceKind::kNone;
                               else if (s == "constant") c.disturbance.kind = DisturbanceKind::kConstant;
                               else if (s == "sinusoid") c.disturbance.kind = DisturbanceKind::kSinusoid;
                               else if (s == "noise") c.disturbance.kind = DisturbanceKind::kBandLimitedNoise;
                               else throw ConfigError("expected none|constant|sinusoid|noise, got '" + s + "'");
                           },
                           [](const ScenarioConfig& c) { return std::string(to_string(c.disturbance.kind)); }});
        t.emplace_back("disturbance.amplitude", nested(&ScenarioConfig::disturbance, &DisturbanceSpec::amplitude));
        t.emplace_back("disturbance.frequency", nested(&ScenarioConfig::disturbance, &DisturbanceSpec::frequency));

        const char* coeff_names[] = {"a1", "a2", "a3", "a4", "b1", "b2"};
        double ModelMismatch::*coeff_fields[] = {&ModelMismatch::a1, &ModelMismatch::a2, &ModelMismatch::a3,
                                                 &ModelMismatch::a4, &ModelMismatch::b1, &ModelMismatch::b2};
        for (int i = 0; i < 6; ++i) {
            t.emplace_back(std::string("mismatch.") + coeff_names[i],
                           nested(&ScenarioConfig::mismatch, coeff_fields[i]));
        }

        t.emplace_back("sim.initial_state",
                       Key{[](ScenarioConfig& c, const std::string& v) {
                               const auto list = parse_list(v);
                               if (list.size() != 4) throw ConfigError("sim.initial_state needs 4 values");
                               c.initial_state = PlantState(list[0], list[1], list[2], list[3]);
                           },
                           [](const ScenarioConfig& c) {
                               std::string s;
                               for (int i = 0; i < 4; ++i) s += (i ? ", " : "") + fmt(c.initial_state[i]);
                               return s;
                           }});
        t.emplace_back("sim.duration", number(&ScenarioConfig::duration));
        t.emplace_back("sim.plant_step", number(&ScenarioConfig::plant_step));
        t.emplace_back("sim.seed", Key{[](ScenarioConfig& c, const std::string& v) {
                                           const auto s = parse_int(v);
                                           if (s < 0) throw ConfigError("seed must be >= 0");
                                           c.seed = static_cast<std::uint64_t>(s);
                                       },
                                       [](const ScenarioConfig& c) { return std::to_string(c.seed); }});
        t.emplace_back("log.wall_clock",
                       Key{[](ScenarioConfig& c, const std::string& v) { c.record_wall_clock = parse_bool(v); },
                           [](const ScenarioConfig& c) { return std::string(c.record_wall_clock ? "true" : "false"); }});
        return t;
    }();
    return table;
}

}  // namespace

const char* to_string(ControllerKind kind) {
    return kind == ControllerKind::kClassical ? "classical" : "afmpc";
}

ControllerKind parse_controller_kind(const std::string& text) {
    if (text == "classical") return ControllerKind::kClassical;
    if (text == "afmpc") return ControllerKind::kAfmpc;
    throw ConfigError("expected classical|afmpc, got '" + text + "'");
}

void ScenarioConfig::validate() const {
    std::vector<std::string> errors;
    auto check = [&errors](const std::string& what, const std::function<void()>& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            errors.push_back(what + ": " + e.what());
        }
    };
    check("plant", [this] { plant.validate(); });
    check("mpc", [this] { mpc.validate(); });
    check("solver", [this] {
        const auto& s = mpc.solver;
        if (!(s.kkt_tolerance > 0) || s.max_iterations < 1 || !(s.finite_difference_step > 0)) {
            throw ConfigError("solver settings must be positive");
        }
    });
    check("fuzzy", [this] {
        for (int i = 0; i < 4; ++i) {
            if (fuzzy_counts[static_cast<std::size_t>(i)] < 1) throw ConfigError("counts must be >= 1");
            const auto r = fuzzy_ranges[static_cast<std::size_t>(i)];
            if (!(r.hi > r.lo)) throw ConfigError("range for " + kStateNames[i] + " must satisfy lo < hi");
        }
        if (!(fuzzy_gain >= 0) || !std::isfinite(fuzzy_gain)) throw ConfigError("gain must be finite and >= 0");
        if (!(fuzzy_g_floor > 0) || !(fuzzy_parameter_bound > 0)) {
            throw ConfigError("g_floor and parameter_bound must be positive");
        }
    });
    check("lyapunov", [this] {
        if (!lyapunov_a.allFinite()) throw ConfigError("A must be finite");
        if (!is_positive_definite(lyapunov_q)) throw ConfigError("Q must be symmetric positive definite");
    });
    check("reference", [this] {
        if (!std::isfinite(reference.amplitude) || reference.frequency < 0 || reference.smoothing < 0 ||
            reference.step_time < 0) {
            throw ConfigError("amplitude must be finite; frequency, step_time, smoothing >= 0");
        }
    });
    check("disturbance", [this] { disturbance.validate(); });
    check("mismatch", [this] {
        for (double f : {mismatch.a1, mismatch.a2, mismatch.a3, mismatch.a4, mismatch.b1, mismatch.b2}) {
            if (!std::isfinite(f)) throw ConfigError("factors must be finite");
        }
    });
    check("sim", [this] {
        if (!initial_state.allFinite()) throw ConfigError("initial state must be finite");
        if (!(duration > 0)) throw ConfigError("duration must be positive");
        if (!(plant_step > 0) || plant_step > mpc.control_period * (1 + 1e-9)) {
            throw ConfigError("plant_step must be in (0, mpc.control_period]");
        }
    });
    if (!errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
}

ScenarioConfig parse_config(std::istream& in) {
    std::map<std::string, const Key*> keys;
    for (const auto& [name, key] : key_table()) keys.emplace(name, &key);

    ScenarioConfig config;
    std::vector<std::string> errors;
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = "line " + std::to_string(line_no);
        if (eq == std::string::npos) {
            errors.push_back(where + ": expected 'key = value'");
            continue;
        }
        const std::string name = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = keys.find(name);
        if (it == keys.end()) {
            errors.push_back(where + ": unknown key '" + name + "'");
            continue;
        }
        if (!seen.insert(name).second) {
            errors.push_back(where + ": duplicate key '" + name + "'");
            continue;
        }
        try {
            it->second->set(config, value);
        } catch (const std::exception& e) {
            errors.push_back(where + ": " + name + ": " + e.what());
        }
    }
    if (!errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    config.validate();
    return config;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

void print_config(std::ostream& out, const ScenarioConfig& config) {
    std::string section;
    for (const auto& [name, key] : key_table()) {
        const auto dot = name.find('.');
        const std::string s = dot == std::string::npos ? "" : name.substr(0, dot);
        if (s != section && !section.empty()) out << '\n';
        section = s;
        out << name << " = " << key.get(config) << '\n';
    }
}

}  // namespace afmpc::harness
