#include "afmpc/plant.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "afmpc/errors.hpp"

namespace afmpc {

namespace {

constexpr int kNoiseComponents = 16;

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void PlantParams::validate() const {
    const double values[] = {m1, k1, a_p, J1, g, l1, c1, k_p};
    for (double v : values) {
        if (!finite(v)) throw InvalidArgument("plant parameters must be finite");
    }
    if (m1 <= 0 || J1 <= 0 || g <= 0 || l1 <= 0 || k_p <= 0) {
        throw InvalidArgument("plant parameters m1, J1, g, l1, k_p must be strictly positive");
    }
    if (c1 < 0 || k1 < 0) {
        throw InvalidArgument("plant parameters c1, k1 must be non-negative");
    }
}

CoeffSet derive_coefficients(const PlantParams& p) {
    if (!(p.J1 > 0)) {
        throw InvalidArgument("derive_coefficients: J1 must be positive");
    }
    p.validate();
    CoeffSet c;
    c.a1 = -p.a_p;
    c.a2 = -p.k1 * p.a_p / p.J1;
    c.a3 = p.m1 * p.g * p.l1 / p.J1;
    c.a4 = -p.c1 / p.J1;
    c.b1 = p.k_p;
    c.b2 = p.k1 * p.k_p / p.J1;
    return c;
}

void DisturbanceSpec::validate() const {
    if (!finite(amplitude) || amplitude < 0) {
        throw InvalidArgument("disturbance amplitude must be finite and >= 0");
    }
    if (!finite(frequency) || frequency < 0) {
        throw InvalidArgument("disturbance frequency must be finite and >= 0");
    }
    if (kind == DisturbanceKind::kBandLimitedNoise && frequency <= 0) {
        throw InvalidArgument("band-limited noise needs a positive bandwidth (frequency)");
    }
}

Disturbance::Disturbance(const DisturbanceSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.kind != DisturbanceKind::kBandLimitedNoise) return;

    std::mt19937_64 rng(spec_.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // Unit-RMS sum of equal-amplitude sinusoids, scaled by the requested amplitude.
    const double a = spec_.amplitude * std::sqrt(2.0 / kNoiseComponents);
    components_.reserve(kNoiseComponents);
    for (int i = 0; i < kNoiseComponents; ++i) {
        const double f = spec_.frequency * (1.0 - unit(rng));  // (0, bandwidth]
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        components_.push_back({a, 2.0 * std::numbers::pi * f, phase});
    }
}

double Disturbance::value(double t) const {
    switch (spec_.kind) {
        case DisturbanceKind::kNone:
            return 0.0;
        case DisturbanceKind::kConstant:
            return spec_.amplitude;
        case DisturbanceKind::kSinusoid:
            return spec_.amplitude * std::sin(2.0 * std::numbers::pi * spec_.frequency * t);
        case DisturbanceKind::kBandLimitedNoise: {
            double sum = 0.0;
            for (const auto& c : components_) sum += c.amplitude * std::sin(c.omega * t + c.phase);
            return sum;
        }
    }
    return 0.0;
}

double Disturbance::forecast(double t) const {
    return spec_.kind == DisturbanceKind::kBandLimitedNoise ? 0.0 : value(t);
}

Vec4 dynamics(const PlantState& x, double u, const CoeffSet& c, double d) {
    return {x[kThetaDot],
            c.a1 * x[kThetaDot] + c.b1 * u,
            x[kAlphaDot],
            c.a2 * x[kThetaDot] + c.a3 * std::sin(x[kAlpha]) + c.a4 * x[kAlphaDot] +
                c.b2 * (u + d)};
}

PlantState step(const PlantState& x, double u, double dt, const CoeffSet& c,
                const Disturbance& disturbance, double t) {
    if (!(dt > 0)) {
        throw InvalidArgument("step: dt must be positive");
    }
    PlantState next = rk4_step(x, dt, [&](const Vec4& s, double tau) {
        return dynamics(s, u, c, disturbance.value(t + tau));
    });
    if (!next.allFinite()) {
        throw DivergenceError("integration divergence at t = " + std::to_string(t));
    }
    return next;
}

}  // namespace afmpc
