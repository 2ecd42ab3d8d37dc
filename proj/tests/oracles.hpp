#pragma once

#include <cmath>
#include <random>

#include "nmrsim/core.hpp"
#include "nmrsim/tensor.hpp"

namespace oracle {

using nmr::Mat;
using nmr::Mat3;

inline Mat3 rz(double a) {
    Mat3 r;
    r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return r;
}

inline Mat3 ry(double a) {
    Mat3 r;
    r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    return r;
}

// Components of a Cartesian tensor in the frame reached by the zyz Euler angles e.
inline Mat3 to_frame(const Mat3& t, const nmr::Euler& e) {
    const Mat3 r = rz(e.alpha) * ry(e.beta) * rz(e.gamma);
    return r.transpose() * t * r;
}

// Reduced Wigner element from the general factorial sum.
inline double wigner_d(int j, int mp, int m, double beta) {
    auto f = [](int n) { return std::tgamma(n + 1.0); };
    const double c = std::cos(beta / 2), s = std::sin(beta / 2);
    double sum = 0.0;
    for (int k = 0; k <= 2 * j; ++k) {
        if (j + m - k < 0 || mp - m + k < 0 || j - mp - k < 0) continue;
        const double num = std::sqrt(f(j + mp) * f(j - mp) * f(j + m) * f(j - m));
        const double den = f(j + m - k) * f(k) * f(mp - m + k) * f(j - mp - k);
        sum += ((mp - m + k) % 2 ? -1.0 : 1.0) * num / den * std::pow(c, 2 * j + m - mp - 2 * k) *
               std::pow(s, mp - m + 2 * k);
    }
    return sum;
}

// Distance between unitaries modulo a global phase.
inline double phase_free_distance(const Mat& a, const Mat& b) {
    const nmr::cd tr = (b.adjoint() * a).trace();
    const nmr::cd ph = std::abs(tr) > 0 ? tr / std::abs(tr) : nmr::cd(1.0);
    return (a - ph * b).norm();
}

// Plain Taylor series with scaling and squaring; independent of the eigen-based exponential.
inline Mat expm_taylor(const Mat& a) {
    int s = 0;
    double n = a.norm();
    while (n > 0.25) {
        n /= 2;
        ++s;
    }
    const Mat x = a / std::pow(2.0, s);
    Mat term = Mat::Identity(a.rows(), a.cols()), sum = term;
    for (int k = 1; k < 30; ++k) {
        term = term * x / static_cast<double>(k);
        sum += term;
    }
    for (int i = 0; i < s; ++i) sum = sum * sum;
    return sum;
}

inline Mat random_hermitian(int dim, std::mt19937& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Mat h(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) h(r, c) = nmr::cd(g(rng), g(rng));
    return 0.5 * (h + h.adjoint());
}

}  // namespace oracle
