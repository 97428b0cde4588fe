#pragma once

#include <Eigen/Core>
#include <cmath>

namespace dfr::nn {

// Adam state for one parameter matrix.
struct AdamSlot {
  Eigen::MatrixXd m, v;

  void step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, double lr,
            long t, double beta1 = 0.9, double beta2 = 0.999,
            double eps = 1e-8) {
    if (m.size() == 0) {
      m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
      v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    }
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v.array().matrix() +
        (1.0 - beta2) * grad.array().square().matrix();
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    param.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
};

}  // namespace dfr::nn
