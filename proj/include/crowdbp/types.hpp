#pragma once

#include <Eigen/Core>

namespace crowdbp {

using Real = double;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RealVector = Vector<Real>;
using IntVector = Vector<int>;

inline int sign_of(Real x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

}  // namespace crowdbp
