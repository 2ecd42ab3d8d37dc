#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "nmrsim/quaternion.hpp"
#include "nmrsim/sequence.hpp"

using namespace nmr;

namespace {

double qdist(const Quaternion& a, const Quaternion& b) {
    return std::max({std::abs(a.A - b.A), std::abs(a.B - b.B), std::abs(a.C - b.C), std::abs(a.D - b.D)});
}

// Up to the double-cover sign.
double qdist_pm(const Quaternion& a, const Quaternion& b) { return std::min(qdist(a, b), qdist(a, -b)); }

Eigen::Matrix2cd segment_unitary(double off, double amp, double ph, double dur) {
    Eigen::Matrix2cd h;
    h << 0.5 * off, 0.5 * amp * std::exp(cd(0, -ph)), 0.5 * amp * std::exp(cd(0, ph)), -0.5 * off;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h);
    Eigen::Vector2cd ph_diag;
    for (int k = 0; k < 2; ++k) ph_diag(k) = std::exp(cd(0, -two_pi * es.eigenvalues()(k) * dur));
    return es.eigenvectors() * ph_diag.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

TEST_CASE("segment quaternions") {
    const double a = 20000.0;
    auto q = quaternion_from_segment(0.0, a, 0.0, 1.0 / (4 * a));
    CHECK(qdist(q, {std::sin(pi / 4), 0, 0, std::cos(pi / 4)}) < 1e-14);
    q = quaternion_from_segment(300.0, 0.0, 0.0, 1e-3);
    const double b = two_pi * 300.0 * 1e-3;
    CHECK(qdist(q, {0, 0, std::sin(b / 2), std::cos(b / 2)}) < 1e-14);
    CHECK(qdist(quaternion_from_segment(1e3, 5e3, 0.4, 0.0), Quaternion{}) == 0.0);
    CHECK_THROWS(quaternion_from_segment(0.0, 1.0, 0.0, -1.0));

    const auto half = quaternion_from_segment(0.0, a, 0.0, 1.0 / (4 * a));
    CHECK(qdist(compose(half, half), {1, 0, 0, 0}) < 1e-14);
    CHECK(qdist(compose(q, q.conj()), Quaternion{}) < 1e-14);
}

TEST_CASE("quaternion algebra is the SU(2) product") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> off(-3e4, 3e4), amp(0, 5e4), ph(0, two_pi), dur(0, 5e-5);
    for (int i = 0; i < 1000; ++i) {
        const double o1 = off(rng), a1 = amp(rng), p1 = ph(rng), d1 = dur(rng);
        const double o2 = off(rng), a2 = amp(rng), p2 = ph(rng), d2 = dur(rng);
        const auto q1 = quaternion_from_segment(o1, a1, p1, d1), q2 = quaternion_from_segment(o2, a2, p2, d2);
        const Eigen::Matrix2cd u1 = segment_unitary(o1, a1, p1, d1), u2 = segment_unitary(o2, a2, p2, d2);
        CHECK((q1.su2() - u1).cwiseAbs().maxCoeff() < 1e-12);
        const auto q = compose(q2, q1);
        CHECK(qdist_pm(q, Quaternion::from_su2(u2 * u1)) < 1e-12);
        CHECK(std::abs(q.norm() - 1.0) < 1e-12);
    }
    // Associativity.
    const auto a = quaternion_from_segment(100, 2e4, 0.3, 1e-5), b = quaternion_from_segment(-5e3, 1e4, 2.0, 3e-5),
               c = quaternion_from_segment(7e3, 0, 0, 2e-5);
    CHECK(qdist(compose(c, compose(b, a)), compose(compose(c, b), a)) < 1e-14);
}

TEST_CASE("Heisenberg rotation matches the unitary action") {
    const auto q = quaternion_from_segment(3e3, 2e4, 1.1, 1.7e-5);
    const Eigen::Matrix2cd u = q.su2();
    Eigen::Matrix2cd sx, sy, sz;
    sx << 0, 1, 1, 0;
    sy << 0, cd(0, -1), cd(0, 1), 0;
    sz << 1, 0, 0, -1;
    const Mat3 r = q.heisenberg_rotation();
    for (int k = 0; k < 3; ++k) {
        const Vec3 v = Vec3::Unit(k);
        const Eigen::Matrix2cd lhs = u.adjoint() * (v.x() * sx + v.y() * sy + v.z() * sz) * u;
        const Vec3 w = r * v;
        CHECK((lhs - (w.x() * sx + w.y() * sy + w.z() * sz)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("directional cosines") {
    const auto d = directional_cosines({std::sin(pi / 4), 0, 0, std::cos(pi / 4)});
    CHECK((d.l - Vec3(1, 0, 0)).norm() < 1e-14);
    CHECK(d.beta == doctest::Approx(pi / 2));
    // -q is the same rotation: beta -> 2 pi - beta on the acos branch, l flips with it.
    const auto q = quaternion_from_segment(2e3, 1e4, 0.7, 2e-5);
    const auto p = directional_cosines(q), m = directional_cosines(-q);
    CHECK(p.beta + m.beta == doctest::Approx(two_pi));
    CHECK((p.l + m.l).norm() < 1e-12);
    CHECK(std::abs(p.l.norm() - 1.0) < 1e-12);
    CHECK_THROWS_AS(directional_cosines(Quaternion{}), NumericalGuard);
}

TEST_CASE("effective rotation of cyclic and amplitude-modulated sequences") {
    const auto c7 = build_c7(C7Element::C7, 5000.0, PhaseDirection::increment);
    auto e = effective_rotation(c7, "I", 0.0);
    CHECK(e.omega_cw == 0.0);

    RespirationParams p;
    p.tau_r = 5e-5;
    p.amplitude_i = p.amplitude_s = 4e4;
    for (double tp : {2e-6, 6e-6, 10e-6, 14e-6}) {
        p.tau_p = tp;
        const auto seq = build_respiration_cp(p);
        for (const auto& label : {"I", "S"}) {
            const auto split = split_am(seq, label);
            e = effective_rotation(seq, label, 0.0);
            // Canonical branch folds the flip into [0, pi] per period.
            double flip = std::fmod(std::abs(split.omega_cw) * p.tau_r, 1.0);
            if (flip > 0.5) flip = 1.0 - flip;
            CHECK(e.omega_cw * p.tau_r == doctest::Approx(flip).epsilon(1e-6));
            CHECK(std::abs(std::abs(e.axis.x()) - 1.0) < 1e-12);
            CHECK(e.omega_cw * e.tau_m * two_pi <= pi + 1e-12);
        }
        const auto rows = offset_sweep(seq, {"I", "S"}, {{0.0}, {0.0}});
        CHECK(std::abs(rows[0].hetero_metric) < 1e-9);
    }
}

TEST_CASE("global phase shift rotates the axis about z") {
    RespirationParams p;
    p.tau_r = 5e-5;
    p.tau_p = 6e-6;
    p.amplitude_i = p.amplitude_s = 4e4;
    auto seq = build_respiration_cp(p);
    const double phi0 = 0.83;
    auto shifted = seq;
    for (auto& ch : shifted.channels)
        for (auto& s : ch.segments) s.phase += phi0;
    for (double off : {0.0, 3e3, -11e3}) {
        const auto a = effective_rotation(seq, "I", off), b = effective_rotation(shifted, "I", off);
        CHECK(std::abs(a.omega_cw - b.omega_cw) < 1e-10);
        const Vec3 rotated(std::cos(phi0) * a.axis.x() - std::sin(phi0) * a.axis.y(),
                           std::sin(phi0) * a.axis.x() + std::cos(phi0) * a.axis.y(), a.axis.z());
        CHECK((rotated - b.axis).norm() < 1e-10);
    }
}

TEST_CASE("negated offset with reflected phases conjugates the propagator") {
    // Offset -W with phases pi - phi gives the complex conjugate unitary: axis (-x, y, -z).
    const auto seq = build_c7(C7Element::POST, 5000.0, PhaseDirection::increment);
    auto mirrored = seq;
    for (auto& s : mirrored.channels[0].segments) s.phase = pi - s.phase;
    for (double off : {1e3, 4e3, 9e3}) {
        const auto a = effective_rotation(seq, "I", off), b = effective_rotation(mirrored, "I", -off);
        CHECK(std::abs(a.omega_cw - b.omega_cw) < 1e-9 * std::max(1.0, a.omega_cw));
        if (a.omega_cw == 0.0) continue;
        CHECK((Vec3(-a.axis.x(), a.axis.y(), -a.axis.z()) - b.axis).norm() < 1e-9);
    }
}

TEST_CASE("signed effective fields track the axis continuously") {
    const auto seq = build_c7(C7Element::C7, 5000.0, PhaseDirection::increment, {"I", "S"});
    std::vector<double> grid;
    for (int i = 0; i <= 200; ++i) grid.push_back(-1e4 + 100.0 * i);
    const auto f = signed_effective_fields(seq.channels[0], grid);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (f.omega_cw[i] == 0.0 || f.omega_cw[i - 1] == 0.0) continue;
        CHECK(f.axis[i].dot(f.axis[i - 1]) > 0.0);
    }
    const auto rows = offset_sweep(seq, {"I", "S"}, {grid, grid});
    for (std::size_t i = 0; i < rows.size(); ++i)
        CHECK(rows[i].homo_metric == doctest::Approx(std::abs(2 * f.omega_cw[i])));
    CHECK_THROWS_AS(offset_sweep(seq, {"I"}, {grid, grid}), ConfigError);
}

TEST_CASE("Gaussian pulse: quaternion elements continuous, directional cosines jump") {
    const auto seq = fixture::gaussian_half_pi();
    const auto q0 = period_quaternion(seq.channels[0], 0.0);
    CHECK(directional_cosines(q0).beta == doctest::Approx(pi / 2).epsilon(1e-3));
    const auto s = fixture::gaussian_continuity(-200.0, 200.0, 4001);
    CHECK(s.max_element_jump < 10.0 * s.bound);
    CHECK(s.max_lz_jump > 0.5);
}
