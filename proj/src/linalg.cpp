#include "afmpc/linalg.hpp"

#include <cmath>

#include "afmpc/errors.hpp"

namespace afmpc {

LyapunovSolution solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n || q.rows() != n || q.cols() != n || n == 0) {
        throw InvalidArgument("solve_lyapunov: A and Q must be square and of equal size");
    }
    if (!a.allFinite() || !q.allFinite()) {
        throw InvalidArgument("solve_lyapunov: non-finite input");
    }

    // Column-major vec: vec(A^T P) = (I (x) A^T) vec(P), vec(P A) = (A^T (x) I) vec(P).
    const Eigen::Index nn = n * n;
    Eigen::MatrixXd op = Eigen::MatrixXd::Zero(nn, nn);
    const Eigen::MatrixXd at = a.transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
        op.block(j * n, j * n, n, n) += at;
        for (Eigen::Index i = 0; i < n; ++i) {
            op.block(i * n, j * n, n, n).diagonal().array() += at(i, j);
        }
    }
    Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(q.data(), nn);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(op);
    lu.setThreshold(1e-12);
    if (lu.rank() < nn) {
        throw LinalgError("singular Lyapunov operator");
    }
    Eigen::VectorXd x = lu.solve(rhs);

    LyapunovSolution out;
    out.P = Eigen::Map<Eigen::MatrixXd>(x.data(), n, n);
    out.P = 0.5 * (out.P + out.P.transpose()).eval();
    out.residual = (a.transpose() * out.P + out.P * a + q).norm();
    out.positive_definite = is_positive_definite(out.P);
    return out;
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) {
        throw InvalidArgument("is_positive_definite: matrix is not square");
    }
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
        throw InvalidArgument("is_positive_definite: matrix is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    return llt.info() == Eigen::Success;
}

double quadratic_form(const Eigen::VectorXd& e, const Eigen::MatrixXd& m) {
    if (m.rows() != e.size() || m.cols() != e.size()) {
        throw InvalidArgument("quadratic_form: dimension mismatch");
    }
    return e.dot(m * e);
}

}  // namespace afmpc
