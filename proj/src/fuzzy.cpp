#include "afmpc/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "afmpc/errors.hpp"

namespace afmpc::fuzzy {

double membership(const GaussianMF& mf, double x) {
    const double z = (x - mf.center) / mf.width;
    return std::exp(-0.5 * z * z);
}

FuzzyModel::FuzzyModel(std::array<std::vector<GaussianMF>, 4> mfs, double g_floor,
                       double parameter_bound)
    : mfs_(std::move(mfs)), g_floor_(g_floor), parameter_bound_(parameter_bound) {
    std::size_t size = 1;
    for (const auto& dim : mfs_) {
        if (dim.empty()) throw InvalidArgument("FuzzyModel: every state needs at least one MF");
        for (const auto& mf : dim) {
            if (!(mf.width > 0) || !std::isfinite(mf.width) || !std::isfinite(mf.center)) {
                throw InvalidArgument("FuzzyModel: MF widths must be positive and finite");
            }
        }
        size *= dim.size();
    }
    if (!(g_floor > 0)) throw InvalidArgument("FuzzyModel: g_floor must be positive");
    if (!(parameter_bound > 0)) throw InvalidArgument("FuzzyModel: parameter bound must be positive");
    theta_f_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
    theta_g_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
}

void FuzzyModel::set_theta_f(const Eigen::VectorXd& v) {
    if (v.size() != theta_f_.size()) throw InvalidArgument("theta_f size must equal the rule count");
    theta_f_ = v;
}

void FuzzyModel::set_theta_g(const Eigen::VectorXd& v) {
    if (v.size() != theta_g_.size()) throw InvalidArgument("theta_g size must equal the rule count");
    theta_g_ = v;
}

BasisVector basis(const FuzzyModel& model, const PlantState& x) {
    // The normalizer factorizes over the states, so each state's memberships are
    // normalized on their own. Working with exponents relative to the largest one
    // keeps far-away inputs from underflowing every rule to zero.
    std::array<std::vector<double>, 4> w;
    for (int i = 0; i < 4; ++i) {
        const auto& dim = model.mfs()[i];
        auto& wi = w[i];
        wi.resize(dim.size());
        double max_exp = -std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < dim.size(); ++l) {
            const double z = (x[i] - dim[l].center) / dim[l].width;
            wi[l] = -0.5 * z * z;
            max_exp = std::max(max_exp, wi[l]);
        }
        double sum = 0.0;
        for (double& v : wi) {
            v = std::exp(v - max_exp);
            sum += v;
        }
        if (!(sum > 0) || !std::isfinite(sum)) {
            throw DivergenceError("degenerate firing");
        }
        for (double& v : wi) v /= sum;
    }

    BasisVector eps(static_cast<Eigen::Index>(model.rule_count()));
    Eigen::Index k = 0;
    for (double w0 : w[0])
        for (double w1 : w[1])
            for (double w2 : w[2]) {
                const double w012 = w0 * w1 * w2;
                for (double w3 : w[3]) eps[k++] = w012 * w3;
            }
    return eps;
}

double f_hat(const FuzzyModel& model, const BasisVector& eps) { return model.theta_f().dot(eps); }

double g_hat(const FuzzyModel& model, const BasisVector& eps) {
    return std::max(model.g_floor(), model.theta_g().dot(eps));
}

double f_hat(const FuzzyModel& model, const PlantState& x) { return f_hat(model, basis(model, x)); }
double g_hat(const FuzzyModel& model, const PlantState& x) { return g_hat(model, basis(model, x)); }

FuzzyModel adapt(const FuzzyModel& model, const Vec4& e, const Mat4& p, const Vec4& b,
                 const PlantState& x, double u, double dt, double gain) {
    if (!(dt > 0)) throw InvalidArgument("adapt: dt must be positive");
    if (!(gain >= 0) || !std::isfinite(gain)) throw InvalidArgument("adapt: gain must be finite and >= 0");

    const double s = e.dot(p * b);
    FuzzyModel next = model;
    if (s == 0.0) return next;

    const BasisVector eps = basis(model, x);
    Eigen::VectorXd tf = model.theta_f() - (dt * gain * s) * eps;
    Eigen::VectorXd tg = model.theta_g() - (dt * gain * s * u) * eps;

    const double bound = model.parameter_bound();
    if (!tf.allFinite() || !tg.allFinite() || tf.cwiseAbs().maxCoeff() > bound ||
        tg.cwiseAbs().maxCoeff() > bound) {
        throw DivergenceError("parameter blow-up");
    }
    next.set_theta_f(tf);
    next.set_theta_g(tg);
    return next;
}

FuzzyModel build_rule_grid(const std::array<int, 4>& counts, const std::array<Interval, 4>& ranges,
                           double g_floor, double parameter_bound) {
    std::array<std::vector<GaussianMF>, 4> mfs;
    for (int i = 0; i < 4; ++i) {
        const int n = counts[i];
        const Interval r = ranges[i];
        if (n < 1) throw InvalidArgument("build_rule_grid: MF counts must be >= 1");
        if (!(r.hi > r.lo) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
            throw InvalidArgument("build_rule_grid: state ranges must satisfy lo < hi");
        }
        if (n == 1) {
            mfs[i].push_back({0.5 * (r.lo + r.hi), (r.hi - r.lo) / std::sqrt(2.0)});
            continue;
        }
        const double spacing = (r.hi - r.lo) / (n - 1);
        for (int l = 0; l < n; ++l) {
            mfs[i].push_back({r.lo + l * spacing, spacing / std::sqrt(2.0)});
        }
    }
    return FuzzyModel(std::move(mfs), g_floor, parameter_bound);
}

Eigen::VectorXd fit_consequents(const FuzzyModel& model, std::span<const PlantState> samples,
                                std::span<const double> targets, double ridge) {
    if (samples.size() != targets.size() || samples.empty()) {
        throw InvalidArgument("fit_consequents: need matching, non-empty samples and targets");
    }
    const auto n = static_cast<Eigen::Index>(model.rule_count());
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const BasisVector eps = basis(model, samples[k]);
        normal.selfadjointView<Eigen::Lower>().rankUpdate(eps);
        rhs += targets[k] * eps;
    }
    normal = normal.selfadjointView<Eigen::Lower>();
    normal.diagonal().array() += ridge * samples.size();
    return normal.ldlt().solve(rhs);
}

void write_snapshot(std::ostream& out, const FuzzyModel& model) {
    const auto old_precision = out.precision(17);
    for (const auto& dim : model.mfs()) out << dim.size() << '\n';
    for (const auto& dim : model.mfs())
        for (const auto& mf : dim) out << mf.center << '\n' << mf.width << '\n';
    out << model.g_floor() << '\n' << model.parameter_bound() << '\n';
    for (double v : model.theta_f()) out << v << '\n';
    for (double v : model.theta_g()) out << v << '\n';
    out.precision(old_precision);
}

FuzzyModel read_snapshot(std::istream& in) {
    auto next = [&in]() {
        double v;
        if (!(in >> v)) throw InvalidArgument("read_snapshot: truncated or malformed snapshot");
        return v;
    };
    std::array<std::size_t, 4> counts{};
    for (auto& c : counts) {
        const double v = next();
        if (v < 1 || v != std::floor(v)) throw InvalidArgument("read_snapshot: bad MF count");
        c = static_cast<std::size_t>(v);
    }
    std::array<std::vector<GaussianMF>, 4> mfs;
    for (int i = 0; i < 4; ++i) {
        for (std::size_t l = 0; l < counts[i]; ++l) {
            const double center = next();
            const double width = next();
            mfs[i].push_back({center, width});
        }
    }
    const double g_floor = next();
    const double bound = next();
    FuzzyModel model(std::move(mfs), g_floor, bound);
    Eigen::VectorXd tf(static_cast<Eigen::Index>(model.rule_count()));
    Eigen::VectorXd tg(tf.size());
    for (auto& v : tf) v = next();
    for (auto& v : tg) v = next();
    model.set_theta_f(tf);
    model.set_theta_g(tg);
    return model;
}

}  // namespace afmpc::fuzzy
