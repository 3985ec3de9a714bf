#pragma once

#include <Eigen/Dense>

namespace dmpc {

/// Matrix exponential exp(A) by scaling-and-squaring with a Pade(13) core.
Eigen::MatrixXd expm(const Eigen::MatrixXd& A);

/// Zero-order-hold pair for x' = A x + w (w held constant over dt):
///   Ad = exp(A dt),  S = integral_0^dt exp(A s) ds
/// so that x(dt) = Ad x(0) + S w.
struct ZohPair {
  Eigen::MatrixXd Ad;
  Eigen::MatrixXd S;
};

ZohPair zoh(const Eigen::MatrixXd& A, double dt);

}  // namespace dmpc
