#pragma once

#include <string>
#include <vector>

#include "nmrsim/core.hpp"
#include "nmrsim/spin.hpp"
#include "nmrsim/tensor.hpp"

namespace nmr {

struct ShiftSpec {
    int spin = 0;
    double iso = 0.0;    // Hz relative to the channel carrier
    double aniso = 0.0;  // Hz
    double eta = 0.0;
    Euler pas{};
};

struct DipoleSpec {
    int i = 0, j = 1;
    double b = 0.0;  // Hz
    Euler pas{};
};

struct JSpec {
    int i = 0, j = 1;
    double j_hz = 0.0;
};

struct SpinSystem {
    std::vector<std::string> nuclei;  // isotope label per spin; also its rf channel label
    std::vector<ShiftSpec> shifts;
    std::vector<DipoleSpec> dipoles;
    std::vector<JSpec> couplings;

    int n_spins() const { return static_cast<int>(nuclei.size()); }
    bool homonuclear(int i, int j) const { return nuclei.at(i) == nuclei.at(j); }
    void validate() const;
    // Copy with every internal interaction multiplied by s.
    SpinSystem scaled(double s) const;
};

// Spin part of one interaction: v.I_i for single-spin terms, or
// sum_ab T_ab I_ia I_jb for bilinear terms (j >= 0).
struct SpinPart {
    int i = 0;
    int j = -1;
    Vec3 v = Vec3::Zero();
    Mat3 t = Mat3::Zero();

    bool bilinear() const { return j >= 0; }
};

struct InteractionTerm {
    InteractionKind kind;
    SpatialFourier w;  // rad/s
    SpinPart spin;
};

// Secular interaction terms for one crystallite. Homonuclear dipolar spin part
// is 2 IzSz - IxSx - IySy, heteronuclear 2 IzSz; J is I.S (homo) or IzSz (hetero).
std::vector<InteractionTerm> interaction_terms(const SpinSystem& sys, const Euler& crystal, double spin_rate,
                                               double rotor_angle = magic_angle);

Mat spin_matrix(const SpinPart& p, int n_spins);

}  // namespace nmr
