#include "nmrsim/spinsystem.hpp"

namespace nmr {

void SpinSystem::validate() const {
    const int n = n_spins();
    if (n < 1 || n > max_spins) throw ConfigError("spin systems hold 1 to 3 spins");
    auto check = [n](int s) {
        if (s < 0 || s >= n) throw ConfigError("interaction refers to a missing spin");
    };
    for (const auto& s : shifts) {
        check(s.spin);
        if (!(s.eta >= 0.0 && s.eta <= 1.0)) throw ConfigError("asymmetry eta must lie in [0, 1]");
    }
    for (const auto& d : dipoles) {
        check(d.i);
        check(d.j);
        if (d.i == d.j) throw ConfigError("dipolar coupling needs two distinct spins");
    }
    for (const auto& c : couplings) {
        check(c.i);
        check(c.j);
        if (c.i == c.j) throw ConfigError("J coupling needs two distinct spins");
    }
}

SpinSystem SpinSystem::scaled(double s) const {
    SpinSystem out = *this;
    for (auto& x : out.shifts) {
        x.iso *= s;
        x.aniso *= s;
    }
    for (auto& d : out.dipoles) d.b *= s;
    for (auto& c : out.couplings) c.j_hz *= s;
    return out;
}

std::vector<InteractionTerm> interaction_terms(const SpinSystem& sys, const Euler& crystal, double spin_rate,
                                               double rotor_angle) {
    sys.validate();
    std::vector<InteractionTerm> out;
    for (const auto& s : sys.shifts) {
        InteractionTensor t{InteractionKind::chemical_shift, s.iso, s.aniso, s.eta, s.pas, std::nullopt};
        InteractionTerm term{InteractionKind::chemical_shift, mas_fourier_components(t, crystal, spin_rate, rotor_angle), {}};
        term.spin.i = s.spin;
        term.spin.v = Vec3::UnitZ();
        if (!term.w.is_zero()) out.push_back(term);
    }
    for (const auto& d : sys.dipoles) {
        InteractionTensor t{InteractionKind::dipolar, 0.0, d.b, 0.0, d.pas, std::make_pair(d.i, d.j)};
        InteractionTerm term{InteractionKind::dipolar, mas_fourier_components(t, crystal, spin_rate, rotor_angle), {}};
        term.spin.i = d.i;
        term.spin.j = d.j;
        term.spin.t = sys.homonuclear(d.i, d.j) ? Vec3(-1.0, -1.0, 2.0).asDiagonal() : Vec3(0.0, 0.0, 2.0).asDiagonal();
        if (!term.w.is_zero()) out.push_back(term);
    }
    for (const auto& c : sys.couplings) {
        InteractionTensor t{InteractionKind::j_coupling, c.j_hz, 0.0, 0.0, {}, std::make_pair(c.i, c.j)};
        InteractionTerm term{InteractionKind::j_coupling, mas_fourier_components(t, crystal, spin_rate, rotor_angle), {}};
        term.spin.i = c.i;
        term.spin.j = c.j;
        term.spin.t = sys.homonuclear(c.i, c.j) ? Mat3::Identity() : Mat3(Vec3(0.0, 0.0, 1.0).asDiagonal());
        if (!term.w.is_zero()) out.push_back(term);
    }
    return out;
}

Mat spin_matrix(const SpinPart& p, int n) {
    if (!p.bilinear()) return spin_vector_operator(p.i, p.v, n);
    const Axis ax[3] = {Axis::x, Axis::y, Axis::z};
    Mat m = Mat::Zero(1 << n, 1 << n);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            if (p.t(a, b) != 0.0)
                m += p.t(a, b) * single_spin_operator(p.i, ax[a], n) * single_spin_operator(p.j, ax[b], n);
    return m;
}

}  // namespace nmr
