#pragma once

#include <complex>
#include <cstddef>
#include <numbers>

#include <Eigen/Dense>

namespace qwalk {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

// Tolerance ladder shared by every module.
inline constexpr double kConstructionTol = 1e-12;
inline constexpr double kStepTol = 1e-10;
inline constexpr double kLongRunTol = 1e-8;

}  // namespace qwalk
