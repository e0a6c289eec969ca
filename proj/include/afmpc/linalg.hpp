#pragma once

#include <Eigen/Dense>

namespace afmpc {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

struct LyapunovSolution {
    Eigen::MatrixXd P;           // symmetrized solution of A^T P + P A = -Q
    double residual = 0.0;       // ||A^T P + P A + Q||_F
    bool positive_definite = false;
};

/**
 * Solves the continuous Lyapunov equation A^T P + P A = -Q.
 *
 * The equation is vectorized into (I (x) A^T + A^T (x) I) vec(P) = -vec(Q) and
 * solved densely; the result is symmetrized. Works for any square size, the
 * adaptation law only uses 4x4.
 *
 * Throws LinalgError("singular Lyapunov operator") when A has eigenvalues
 * l_i + l_j = 0. A solution that is not positive definite is still returned,
 * flagged through `positive_definite` (expected whenever A is not Hurwitz).
 */
LyapunovSolution solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q);

/// Cholesky test. Throws InvalidArgument if m is not symmetric within 1e-9 (relative).
bool is_positive_definite(const Eigen::MatrixXd& m);

/// e^T M e
double quadratic_form(const Eigen::VectorXd& e, const Eigen::MatrixXd& m);

}  // namespace afmpc
