#pragma once

#include <Eigen/Dense>

namespace cebass {

/// Cholesky factorisation of a symmetric positive definite matrix with
/// escalating diagonal jitter. Jitter starts at 1e-12 * trace and grows by
/// factors of 10 up to 1e-6 * trace before the matrix is declared singular.
/// A successful factor whose estimated condition number exceeds 1e14 is also
/// rejected.
class CholPsd {
 public:
  CholPsd() = default;
  /// `what` names the matrix in error messages.
  CholPsd(const Eigen::MatrixXd& s, const char* what);

  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }
  double log_det() const { return log_det_; }
  double jitter() const { return jitter_; }
  Eigen::Index dim() const { return llt_.matrixLLT().rows(); }

  /// S^{-1} b via the factor.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return llt_.solve(b); }
  /// Full inverse via the factor (used once per proposal context).
  Eigen::MatrixXd inverse() const;
  /// b^T S^{-1} b for a vector b.
  double quad_form(const Eigen::VectorXd& b) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
};

/// log N(x; mu, Sigma) via Cholesky; never exponentiates large magnitudes.
double log_gaussian_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                            const Eigen::MatrixXd& sigma);

/// log N(z; 0, S) given a precomputed factor of S.
double log_gaussian_density(const Eigen::VectorXd& z, const CholPsd& chol);

/// (M + M^T) / 2.
inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

/// Numerically stable log(sum(exp(v))).
double log_sum_exp(const Eigen::VectorXd& v);

}  // namespace cebass
