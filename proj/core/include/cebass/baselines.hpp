#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cebass/model.hpp"

namespace cebass {

/// One step's predictive summary, shared by every filter the harness runs.
struct PredictiveStep {
  Eigen::VectorXd mean;
  Eigen::MatrixXd var;
  double log_lik = 0.0;
};

/// Plain Kalman filter (identity scales everywhere).
std::vector<PredictiveStep> classical_kf(const std::vector<Eigen::VectorXd>& ys,
                                         const StateSpaceModel& model, const GaussianState& init);

/// Huberised robust variants. AO mode clips each standardised observation
/// residual at +/- clip before the gain is applied; IO mode clips each
/// standardised component of the state increment K z instead. Both keep the
/// standard covariance recursion, are deterministic, and reduce to the
/// classical filter as clip -> infinity.
struct HuberConfig {
  double clip = 1.345;
  enum class Mode { AO, IO } mode = Mode::AO;
};

std::vector<PredictiveStep> huber_filter(const std::vector<Eigen::VectorXd>& ys,
                                         const StateSpaceModel& model, const GaussianState& init,
                                         const HuberConfig& cfg);

}  // namespace cebass
