#pragma once

#include <array>
#include <string>

#include "nmrsim/core.hpp"

namespace nmr {

enum class Axis { x, y, z, plus, minus };

// Which pair forms the ladder operators: conventional (Ix ± iIy) or the
// rotated-frame variant (Iz ± iIy) used for amplitude-modulated frames.
enum class Ladder { xy, zy };

constexpr int max_spins = 3;

// Single-spin operator on spin `spin` embedded in the 2^n_spins product space.
// Spin 0 is the most significant tensor factor.
Mat single_spin_operator(int spin, Axis axis, int n_spins, Ladder ladder = Ladder::xy);

// Operator a·I_spin along an arbitrary real 3-vector (no normalization applied).
Mat spin_vector_operator(int spin, const Vec3& v, int n_spins);

Mat identity_operator(int n_spins);

Mat two_spin_product(const Mat& a, const Mat& b);

Mat commutator(const Mat& a, const Mat& b);

cd expectation(const Mat& rho, const Mat& op);

enum class Subspace { ZQ, DQ };

struct SubspaceBasis {
    Subspace kind;
    std::array<Mat, 3> axes;  // x, y, z of the fictitious spin-1/2
};

// Rows of each axes matrix are the per-spin x, y, z directions (orthonormal,
// right-handed not required). Throws ConfigError if not orthonormal.
SubspaceBasis zq_dq_basis(Subspace kind, const Mat3& axes1, const Mat3& axes2, int spin1 = 0,
                          int spin2 = 1, int n_spins = 2);

// Max elementwise deviation from Hermiticity.
double hermiticity_error(const Mat& a);
// Max elementwise deviation of U†U from identity.
double unitarity_error(const Mat& u);
double max_abs(const Mat& a);

// exp(-i H t) for Hermitian H via eigendecomposition.
Mat expm_hermitian(const Mat& h, double t);

// Parse labels such as "I1z", "I2x", "Ix", "Sx", "I1x+I2x".
// Single-letter I/S refer to the first spin of each nucleus type.
Mat operator_from_label(const std::string& label, int n_spins);

}  // namespace nmr
