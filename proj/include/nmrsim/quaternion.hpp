#pragma once

#include <string>
#include <vector>

#include "nmrsim/core.hpp"
#include "nmrsim/sequence.hpp"

namespace nmr {

// U = D - i (A sx + B sy + C sz) for Pauli matrices s; rotation by beta about
// (A, B, C)/sin(beta/2) with D = cos(beta/2).
struct Quaternion {
    double A = 0.0, B = 0.0, C = 0.0, D = 1.0;

    Vec3 vec() const { return {A, B, C}; }
    double norm() const;
    Quaternion conj() const { return {-A, -B, -C, D}; }
    Quaternion operator-() const { return {-A, -B, -C, -D}; }
    Eigen::Matrix2cd su2() const;
    // Rotation matrix Q with U^dag (v.I) U = (Q v).I
    Mat3 heisenberg_rotation() const;
    static Quaternion from_su2(const Eigen::Matrix2cd& u);
};

Quaternion quaternion_from_segment(double offset, double amplitude, double phase, double duration);

// Applying `earlier` then `later`.
Quaternion compose(const Quaternion& later, const Quaternion& earlier);

struct DirectionalCosines {
    Vec3 l;
    double beta = 0.0;
};

// Throws NumericalGuard for the identity rotation (axis undefined).
DirectionalCosines directional_cosines(const Quaternion& q);

struct EffectiveRotation {
    double omega_cw = 0.0;  // Hz; flip over tau_m is 2 pi omega_cw tau_m
    Vec3 axis = Vec3::UnitZ();
    double tau_m = 0.0;
    Quaternion q;  // overall period quaternion, canonical sign (D >= 0)
};

inline constexpr double identity_tol = 1e-9;

// Quaternion of one full channel period at fixed offset (Hz).
Quaternion period_quaternion(const Channel& ch, double offset);

EffectiveRotation effective_rotation(const PulseSequence& seq, const std::string& channel, double offset);
EffectiveRotation effective_rotation(const Channel& ch, double offset);

struct OffsetSweepRow {
    std::vector<double> offsets;           // Hz, per channel
    std::vector<double> omega_cw;          // Hz, signed after continuity tracking
    std::vector<Vec3> axis;                // oriented consistently with the signed omega_cw
    double hetero_metric = 0.0;            // |w_I| - |w_S|
    double homo_metric = 0.0;              // |w_1 + w_2|
};

// Grids are swept jointly: row i uses offset_grids[q][i] for every channel q.
// Signs of omega_cw are resolved by tracking the axis continuously from the
// grid point nearest zero offset outward.
std::vector<OffsetSweepRow> offset_sweep(const PulseSequence& seq, const std::vector<std::string>& channels,
                                         const std::vector<std::vector<double>>& offset_grids);

// Signed effective fields along a 1-D offset grid for one channel.
struct SignedField {
    std::vector<double> omega_cw;
    std::vector<Vec3> axis;
};
SignedField signed_effective_fields(const Channel& ch, const std::vector<double>& offsets);

}  // namespace nmr
