#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace emnn {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kJ{0.0, 1.0};

}  // namespace emnn
