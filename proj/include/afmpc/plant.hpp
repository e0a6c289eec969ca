#pragma once

#include <cstdint>
#include <vector>

#include "afmpc/linalg.hpp"

namespace afmpc {

/// Physical constants of the rotational inverted pendulum (defaults are the lab rig values).
struct PlantParams {
    double m1 = 0.0861;   // pendulum mass [kg]
    double k1 = 0.0019;   // arm/pendulum coupling
    double a_p = 33.04;   // arm dynamic coefficient [1/s]
    double J1 = 0.0010;   // pendulum inertia [kg m^2]
    double g = 9.8066;    // [m/s^2]
    double l1 = 0.113;    // [m]
    double c1 = 0.0029;   // pendulum damping
    double k_p = 74.89;   // input gain

    void validate() const;
};

/// Coefficients of the state-space form
///   x1' = x2, x2' = a1 x2 + b1 u, x3' = x4, x4' = a2 x2 + a3 sin x3 + a4 x4 + b2 u.
struct CoeffSet {
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
    double a4 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
};

CoeffSet derive_coefficients(const PlantParams& params);

/// State layout: (theta, theta_dot, alpha, alpha_dot). alpha = 0 is upright.
/// Angles are never wrapped.
using PlantState = Vec4;

enum StateIndex : int { kTheta = 0, kThetaDot = 1, kAlpha = 2, kAlphaDot = 3 };

enum class DisturbanceKind { kNone, kConstant, kSinusoid, kBandLimitedNoise };

struct DisturbanceSpec {
    DisturbanceKind kind = DisturbanceKind::kNone;
    double amplitude = 0.0;
    double frequency = 0.0;  // sinusoid frequency, or noise bandwidth [Hz]
    std::uint64_t seed = 0;

    void validate() const;
};

/**
 * Deterministic disturbance signal d(t), matched with the control input.
 *
 * Band-limited noise is realized as a fixed sum of sinusoids whose
 * frequencies lie in (0, bandwidth] and whose phases come from the seed; it is
 * therefore a smooth function of t that RK4 can sample at intermediate stages.
 */
class Disturbance {
public:
    Disturbance() = default;
    explicit Disturbance(const DisturbanceSpec& spec);

    double value(double t) const;

    /// Value the controller may assume at time t: noise kinds are unpredictable and forecast as 0.
    double forecast(double t) const;

    const DisturbanceSpec& spec() const { return spec_; }

private:
    struct Component {
        double amplitude;
        double omega;
        double phase;
    };

    DisturbanceSpec spec_;
    std::vector<Component> components_;
};

Vec4 dynamics(const PlantState& x, double u, const CoeffSet& c, double d = 0.0);

/// Classic RK4 step for x' = f(x, tau), with tau the offset into the step (0, dt/2, dt).
template <class F>
Vec4 rk4_step(const Vec4& x, double dt, F&& f) {
    const Vec4 k1 = f(x, 0.0);
    const Vec4 k2 = f(Vec4(x + 0.5 * dt * k1), 0.5 * dt);
    const Vec4 k3 = f(Vec4(x + 0.5 * dt * k2), 0.5 * dt);
    const Vec4 k4 = f(Vec4(x + dt * k3), dt);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// One RK4 step with u held over [t, t + dt]. Throws DivergenceError on non-finite results.
PlantState step(const PlantState& x, double u, double dt, const CoeffSet& c,
                const Disturbance& disturbance = {}, double t = 0.0);

inline double output(const PlantState& x) { return x[kAlpha]; }

}  // namespace afmpc
