#pragma once

#include <array>
#include <optional>
#include <utility>

#include "nmrsim/core.hpp"

namespace nmr {

struct Euler {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

// Irreducible components of a Cartesian rank-2 tensor. r1[m+1], r2[m+2].
struct SphericalTensor {
    cd r00{};
    std::array<cd, 3> r1{};
    std::array<cd, 5> r2{};

    cd rank1(int m) const { return r1[static_cast<std::size_t>(m + 1)]; }
    cd rank2(int m) const { return r2[static_cast<std::size_t>(m + 2)]; }
};

SphericalTensor cart_to_spherical(const Mat3& lambda);
Mat3 spherical_to_cart(const SphericalTensor& r);

// Throws ConfigError unless 0 <= eta <= 1.
SphericalTensor pas_components(double delta_iso, double delta_aniso, double eta);

// Cartesian principal values (xx, yy, zz) for the same parameters.
Vec3 pas_principal_values(double delta_iso, double delta_aniso, double eta);

// Reduced Wigner element d^l_{m',m}(beta) for l = 1 or 2.
double reduced_wigner(int l, int m_prime, int m, double beta);

// R^new_m = sum_{m'} exp(-i alpha m') d^l_{m'm}(beta) exp(-i gamma m) R^old_{m'}.
template <std::size_t N>
std::array<cd, N> wigner_rotate(const std::array<cd, N>& comps, const Euler& e);

SphericalTensor rotate(const SphericalTensor& t, const Euler& e);

enum class InteractionKind { chemical_shift, dipolar, j_coupling };

struct InteractionTensor {
    InteractionKind kind = InteractionKind::chemical_shift;
    double delta_iso = 0.0;    // Hz; J constant for j_coupling
    double delta_aniso = 0.0;  // Hz; dipolar coupling constant b for dipolar
    double eta = 0.0;
    Euler pas_to_crystal{};
    std::optional<std::pair<int, int>> partners;  // spins coupled (dipolar, J)
};

// Omega(t) = sum_n omega[n+2] exp(i n omega_r t), rad/s.
struct SpatialFourier {
    std::array<cd, 5> omega{};

    cd at(int n) const { return omega[static_cast<std::size_t>(n + 2)]; }
    cd& at(int n) { return omega[static_cast<std::size_t>(n + 2)]; }
    double value(double t, double omega_r) const;
    bool is_zero(double tol = 0.0) const;
};

// PAS -> crystal -> rotor by Euler rotations, then rotor -> lab with azimuth
// omega_r t and polar angle rotor_angle; the secular lab component gives the
// frequency. Rank-2 part normalized so a static axial tensor along B0 reads
// delta_aniso (Hz) before the 2 pi factor.
SpatialFourier mas_fourier_components(const InteractionTensor& tensor, const Euler& crystal,
                                      double spin_rate, double rotor_angle = magic_angle);

}  // namespace nmr
