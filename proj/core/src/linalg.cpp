#include "cebass/linalg.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cebass/errors.hpp"

namespace cebass {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kMaxCondition = 1e14;
}  // namespace

CholPsd::CholPsd(const Eigen::MatrixXd& s, const char* what) {
  const Eigen::Index n = s.rows();
  if (n == 0 || s.cols() != n) {
    throw SingularCovarianceError(std::string(what) + ": matrix is empty or not square");
  }
  const double trace = s.trace();
  llt_.compute(s);
  if (llt_.info() != Eigen::Success) {
    // Long streams accumulate asymmetry and tiny negative eigenvalues; retry
    // with escalating jitter before giving up.
    double jitter = 1e-12 * std::max(trace, 1e-300);
    const double max_jitter = 1e-6 * std::max(trace, 1e-300);
    bool ok = false;
    while (jitter <= max_jitter * (1.0 + 1e-12)) {
      Eigen::MatrixXd sj = s;
      sj.diagonal().array() += jitter;
      llt_.compute(sj);
      if (llt_.info() == Eigen::Success) {
        ok = true;
        jitter_ = jitter;
        break;
      }
      jitter *= 10.0;
    }
    if (!ok) {
      throw SingularCovarianceError(std::string(what) +
                                    ": covariance not positive definite after jitter escalation");
    }
  }

  const auto d = llt_.matrixLLT().diagonal();
  double log_det = 0.0;
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double di = d(i);
    log_det += 2.0 * std::log(di);
    dmin = std::min(dmin, di);
    dmax = std::max(dmax, di);
  }
  log_det_ = log_det;
  if (!(dmin > 0.0) || (dmax / dmin) * (dmax / dmin) > kMaxCondition) {
    throw SingularCovarianceError(std::string(what) + ": covariance numerically singular (cond > 1e14)");
  }
}

Eigen::MatrixXd CholPsd::inverse() const {
  const Eigen::Index n = dim();
  return llt_.solve(Eigen::MatrixXd::Identity(n, n));
}

double CholPsd::quad_form(const Eigen::VectorXd& b) const {
  // b^T S^{-1} b = || L^{-1} b ||^2
  Eigen::VectorXd half = llt_.matrixL().solve(b);
  return half.squaredNorm();
}

double log_gaussian_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                            const Eigen::MatrixXd& sigma) {
  CholPsd chol(sigma, "log_gaussian_density");
  return log_gaussian_density(x - mu, chol);
}

double log_gaussian_density(const Eigen::VectorXd& z, const CholPsd& chol) {
  const double n = static_cast<double>(z.size());
  return -0.5 * (n * kLog2Pi + chol.log_det() + chol.quad_form(z));
}

double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v(i) - m);
  return m + std::log(acc);
}

}  // namespace cebass
