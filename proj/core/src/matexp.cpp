#include "dmpc/matexp.hpp"

#include <cmath>

namespace dmpc {

namespace {

// Higham's scaling-and-squaring, Pade order 13 only (fine for the small
// well-scaled matrices seen here).
Eigen::MatrixXd pade13(const Eigen::MatrixXd& A) {
  static const double b[] = {64764752532480000., 32382376266240000., 7771770303897600.,
                             1187353796428800.,  129060195264000.,   10559470521600.,
                             670442572800.,      33522128640.,       1323241920.,
                             40840800.,          960960.,            16380.,
                             182.,               1.};
  const auto n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd A2 = A * A;
  const Eigen::MatrixXd A4 = A2 * A2;
  const Eigen::MatrixXd A6 = A2 * A4;
  Eigen::MatrixXd U =
      A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  Eigen::MatrixXd V =
      A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
  return (V - U).partialPivLu().solve(V + U);
}

}  // namespace

Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
  const double theta13 = 5.371920351148152;  // Pade-13 accuracy bound
  const double norm = A.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
  int squarings = 0;
  if (norm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
  }
  Eigen::MatrixXd E = pade13(A / std::pow(2.0, squarings));
  for (int i = 0; i < squarings; ++i) E = E * E;
  return E;
}

ZohPair zoh(const Eigen::MatrixXd& A, double dt) {
  const auto n = A.rows();
  // exp([[A, I], [0, 0]] dt) = [[Ad, S], [0, I]]
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = A * dt;
  aug.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n) * dt;
  const Eigen::MatrixXd E = expm(aug);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, n)};
}

}  // namespace dmpc
