#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "afmpc/linalg.hpp"
#include "afmpc/plant.hpp"

namespace afmpc::fuzzy {

struct GaussianMF {
    double center = 0.0;
    double width = 1.0;
};

/// exp(-0.5 ((x - center) / width)^2)
double membership(const GaussianMF& mf, double x);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Normalized rule firing strengths. Rule (l1, l2, l3, l4) sits at index
/// ((l1 * P2 + l2) * P3 + l3) * P4 + l4, i.e. lexicographic with l1 slowest.
using BasisVector = Eigen::VectorXd;

/**
 * Mamdani approximators f_hat(X) = theta_f^T eps(X) and g_hat(X) = theta_g^T eps(X)
 * on a full product grid of Gaussian membership functions over the 4 plant states.
 * Both approximators share the same basis.
 */
class FuzzyModel {
public:
    FuzzyModel() = default;
    FuzzyModel(std::array<std::vector<GaussianMF>, 4> mfs, double g_floor = 1.0,
               double parameter_bound = 1e6);

    std::size_t rule_count() const { return static_cast<std::size_t>(theta_f_.size()); }
    const std::array<std::vector<GaussianMF>, 4>& mfs() const { return mfs_; }

    const Eigen::VectorXd& theta_f() const { return theta_f_; }
    const Eigen::VectorXd& theta_g() const { return theta_g_; }
    void set_theta_f(const Eigen::VectorXd& v);
    void set_theta_g(const Eigen::VectorXd& v);

    double g_floor() const { return g_floor_; }
    double parameter_bound() const { return parameter_bound_; }

private:
    std::array<std::vector<GaussianMF>, 4> mfs_;
    Eigen::VectorXd theta_f_;
    Eigen::VectorXd theta_g_;
    double g_floor_ = 1.0;
    double parameter_bound_ = 1e6;
};

/// Throws DivergenceError("degenerate firing") if no rule fires (non-finite input).
BasisVector basis(const FuzzyModel& model, const PlantState& x);

double f_hat(const FuzzyModel& model, const PlantState& x);
double g_hat(const FuzzyModel& model, const PlantState& x);

// Same, for an already evaluated basis.
double f_hat(const FuzzyModel& model, const BasisVector& eps);
double g_hat(const FuzzyModel& model, const BasisVector& eps);

/**
 * One forward-Euler step of the Lyapunov adaptation laws
 *   theta_f' = -gain * (e^T P b) eps(X)
 *   theta_g' = -gain * (e^T P b) eps(X) u
 * Throws DivergenceError("parameter blow-up") when a parameter leaves the bound.
 */
FuzzyModel adapt(const FuzzyModel& model, const Vec4& e, const Mat4& p, const Vec4& b,
                 const PlantState& x, double u, double dt, double gain = 1.0);

/// Evenly spaced centers over each range, widths = spacing / sqrt(2), zero parameters.
FuzzyModel build_rule_grid(const std::array<int, 4>& counts, const std::array<Interval, 4>& ranges,
                           double g_floor = 1.0, double parameter_bound = 1e6);

/// Least-squares consequents reproducing `targets` at `samples` (ridge-regularized).
Eigen::VectorXd fit_consequents(const FuzzyModel& model, std::span<const PlantState> samples,
                                std::span<const double> targets, double ridge = 1e-9);

/// Snapshot: counts (4 lines), then per state each (center, width) pair, g_floor,
/// parameter_bound, theta_f, theta_g; one value per line.
void write_snapshot(std::ostream& out, const FuzzyModel& model);
FuzzyModel read_snapshot(std::istream& in);

}  // namespace afmpc::fuzzy
