#include "nmrsim/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace nmr {

SphericalTensor cart_to_spherical(const Mat3& l) {
    SphericalTensor r;
    const double s2 = std::sqrt(2.0), s3 = std::sqrt(3.0), s6 = std::sqrt(6.0);
    r.r00 = -(l(0, 0) + l(1, 1) + l(2, 2)) / s3;
    r.r1[1] = I / s2 * (l(0, 1) - l(1, 0));
    r.r1[2] = 0.5 * ((l(2, 0) - l(0, 2)) + I * (l(2, 1) - l(1, 2)));
    r.r1[0] = 0.5 * ((l(2, 0) - l(0, 2)) - I * (l(2, 1) - l(1, 2)));
    r.r2[2] = (2.0 * l(2, 2) - l(0, 0) - l(1, 1)) / s6;
    r.r2[3] = -0.5 * ((l(0, 2) + l(2, 0)) + I * (l(1, 2) + l(2, 1)));
    r.r2[1] = 0.5 * ((l(0, 2) + l(2, 0)) - I * (l(1, 2) + l(2, 1)));
    r.r2[4] = 0.5 * ((l(0, 0) - l(1, 1)) + I * (l(0, 1) + l(1, 0)));
    r.r2[0] = 0.5 * ((l(0, 0) - l(1, 1)) - I * (l(0, 1) + l(1, 0)));
    return r;
}

Mat3 spherical_to_cart(const SphericalTensor& r) {
    const double s2 = std::sqrt(2.0), s3 = std::sqrt(3.0);
    const double iso = -(r.r00.real()) / s3;

    const double a_xy = (-I * r.r1[1] / s2).real();
    const double a_zx = (0.5 * (r.r1[2] + r.r1[0])).real();
    const double a_zy = ((r.r1[2] - r.r1[0]) / (2.0 * I)).real();

    const double szz = std::sqrt(2.0 / 3.0) * r.r2[2].real();
    const double diff = (r.r2[4] + r.r2[0]).real();
    const double sxy = ((r.r2[4] - r.r2[0]) / (2.0 * I)).real();
    const double sxz = (0.5 * (r.r2[1] - r.r2[3])).real();
    const double syz = (0.5 * I * (r.r2[3] + r.r2[1])).real();
    const double sxx = 0.5 * (-szz + diff);
    const double syy = 0.5 * (-szz - diff);

    Mat3 l;
    l << iso + sxx, sxy + a_xy, sxz - a_zx,
         sxy - a_xy, iso + syy, syz - a_zy,
         sxz + a_zx, syz + a_zy, iso + szz;
    return l;
}

SphericalTensor pas_components(double delta_iso, double delta_aniso, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("asymmetry eta must lie in [0, 1]");
    SphericalTensor r;
    r.r00 = -std::sqrt(3.0) * delta_iso;
    r.r2[2] = std::sqrt(1.5) * delta_aniso;
    r.r2[0] = r.r2[4] = -0.5 * delta_aniso * eta;
    return r;
}

Vec3 pas_principal_values(double delta_iso, double delta_aniso, double eta) {
    return {delta_iso - 0.5 * delta_aniso * (1.0 + eta), delta_iso - 0.5 * delta_aniso * (1.0 - eta),
            delta_iso + delta_aniso};
}

double reduced_wigner(int l, int mp, int m, double beta) {
    if ((l != 1 && l != 2) || std::abs(mp) > l || std::abs(m) > l)
        throw std::invalid_argument("reduced_wigner: invalid indices");
    const double c = std::cos(beta), s = std::sin(beta);
    if (l == 1) {
        const double t[3][3] = {
            {0.5 * (1 + c), s / std::sqrt(2.0), 0.5 * (1 - c)},
            {-s / std::sqrt(2.0), c, s / std::sqrt(2.0)},
            {0.5 * (1 - c), -s / std::sqrt(2.0), 0.5 * (1 + c)},
        };
        return t[mp + 1][m + 1];
    }
    const double r38 = std::sqrt(3.0 / 8.0);
    const double s2b = std::sin(2.0 * beta);
    const double t[5][5] = {
        {0.25 * (1 + c) * (1 + c), 0.5 * (1 + c) * s, r38 * s * s, 0.5 * (1 - c) * s, 0.25 * (1 - c) * (1 - c)},
        {-0.5 * (1 + c) * s, c * c - 0.5 * (1 - c), r38 * s2b, 0.5 * (1 + c) - c * c, 0.5 * (1 - c) * s},
        {r38 * s * s, -r38 * s2b, 0.5 * (3 * c * c - 1), r38 * s2b, r38 * s * s},
        {-0.5 * (1 - c) * s, 0.5 * (1 + c) - c * c, -r38 * s2b, c * c - 0.5 * (1 - c), 0.5 * (1 + c) * s},
        {0.25 * (1 - c) * (1 - c), -0.5 * (1 - c) * s, r38 * s * s, -0.5 * (1 + c) * s, 0.25 * (1 + c) * (1 + c)},
    };
    return t[mp + 2][m + 2];
}

template <std::size_t N>
std::array<cd, N> wigner_rotate(const std::array<cd, N>& comps, const Euler& e) {
    static_assert(N == 3 || N == 5, "rank 1 or 2 only");
    constexpr int l = static_cast<int>(N - 1) / 2;
    std::array<cd, N> out{};
    for (int m = -l; m <= l; ++m) {
        cd acc = 0.0;
        for (int mp = -l; mp <= l; ++mp)
            acc += std::exp(-I * (e.alpha * mp)) * reduced_wigner(l, mp, m, e.beta) *
                   comps[static_cast<std::size_t>(mp + l)];
        out[static_cast<std::size_t>(m + l)] = acc * std::exp(-I * (e.gamma * m));
    }
    return out;
}

template std::array<cd, 3> wigner_rotate<3>(const std::array<cd, 3>&, const Euler&);
template std::array<cd, 5> wigner_rotate<5>(const std::array<cd, 5>&, const Euler&);

SphericalTensor rotate(const SphericalTensor& t, const Euler& e) {
    return {t.r00, wigner_rotate(t.r1, e), wigner_rotate(t.r2, e)};
}

double SpatialFourier::value(double t, double omega_r) const {
    cd acc = 0.0;
    for (int n = -2; n <= 2; ++n) acc += at(n) * std::exp(I * (n * omega_r * t));
    return acc.real();
}

bool SpatialFourier::is_zero(double tol) const {
    for (const cd& w : omega)
        if (std::abs(w) > tol) return false;
    return true;
}

SpatialFourier mas_fourier_components(const InteractionTensor& tensor, const Euler& crystal,
                                      double spin_rate, double rotor_angle) {
    if (!(spin_rate > 0.0)) throw ConfigError("spin rate must be positive");
    SpatialFourier f;
    const double aniso = tensor.kind == InteractionKind::j_coupling ? 0.0 : tensor.delta_aniso;
    const double eta = tensor.kind == InteractionKind::chemical_shift ? tensor.eta : 0.0;
    if (aniso != 0.0) {
        const SphericalTensor pas = pas_components(0.0, aniso, eta);
        const auto rotor = wigner_rotate(wigner_rotate(pas.r2, tensor.pas_to_crystal), crystal);
        // Lab R20(t) = sum_m' exp(-i m' omega_r t) d_{m'0}(theta) R^rotor_{2m'}.
        for (int n = -2; n <= 2; ++n)
            f.at(n) = two_pi * std::sqrt(2.0 / 3.0) * reduced_wigner(2, -n, 0, rotor_angle) *
                      rotor[static_cast<std::size_t>(-n + 2)];
    }
    if (tensor.kind != InteractionKind::dipolar) f.at(0) += two_pi * tensor.delta_iso;
    return f;
}

}  // namespace nmr
