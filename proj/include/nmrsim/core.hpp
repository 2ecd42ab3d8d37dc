#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nmr {

using cd = std::complex<double>;

// At most three spin-1/2 nuclei, so dense matrices never exceed 8x8 and stay off the heap.
using Mat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 8, 8>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr cd I{0.0, 1.0};

inline const double magic_angle = 0.9553166181245093;  // acos(1/sqrt(3))

inline double deg(double d) { return d * pi / 180.0; }
inline double to_deg(double r) { return r * 180.0 / pi; }

// Rejected input (bad config, unknown key, violated precondition on user data).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A numerical guard tripped: truncation not converged, denominator underflow, etc.
struct NumericalGuard : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace nmr
