#include <doctest.h>

#include "nmrsim/propagation.hpp"
#include "nmrsim/spin.hpp"
#include "oracles.hpp"

using namespace nmr;

namespace {

SpinSystem hetero_pair(double b) {
    SpinSystem s;
    s.nuclei = {"15N", "13C"};
    s.shifts = {{0, 300.0, 2000.0, 0.3, {0.1, 0.7, 1.1}}, {1, -800.0, 5000.0, 0.6, {0.4, 0.2, 2.1}}};
    if (b != 0.0) s.dipoles = {{0, 1, b, {0.0, 0.9, 0.3}}};
    return s;
}

SpinSystem homo_pair() {
    SpinSystem s;
    s.nuclei = {"13C", "13C"};
    s.shifts = {{0, 1500.0, 4000.0, 0.2, {0.3, 0.4, 0.5}}, {1, -1500.0, 6000.0, 0.9, {1.0, 1.2, 0.1}}};
    s.dipoles = {{0, 1, -2000.0, {0.0, 1.3, 0.0}}};
    return s;
}

PulseSequence cw(const std::string& label, double amp, double phase, double period) {
    return {{Channel{label, {{period, amp, phase}}, period}}, period, ""};
}

const Euler crystal{0.4, 1.1, 2.3};

}  // namespace

TEST_CASE("constant Hamiltonian propagates exactly") {
    SpinSystem s;
    s.nuclei = {"1H"};
    s.shifts = {{0, 4000.0, 0.0, 0.0, {}}};
    const HamiltonianAssembly a(s, cw("1H", 25000.0, 0.3, 1e-4), crystal, 10000.0);
    const Mat h = a.hamiltonian(1.7e-5);
    CHECK((a.hamiltonian(6.1e-5) - h).norm() < 1e-9);
    const Mat u = a.propagate(0.0, 3.3e-5);
    CHECK(oracle::phase_free_distance(u, oracle::expm_taylor(-I * h * 3.3e-5)) < 1e-10);
    CHECK((u - oracle::expm_taylor(-I * h * 3.3e-5)).norm() < 1e-10);
}

TEST_CASE("pi pulse inverts z magnetization") {
    SpinSystem s;
    s.nuclei = {"1H"};
    const double amp = 50000.0;
    const HamiltonianAssembly a(s, cw("1H", amp, 0.0, 1.0 / (2 * amp)), crystal, 10000.0);
    const Mat iz = single_spin_operator(0, Axis::z, 1);
    const Mat u = a.propagate(0.0, 1.0 / (2 * amp));
    CHECK((u * iz * u.adjoint() + iz).norm() < 1e-10);
    // Quarter turn about x takes Iz to Iy up to sign fixed by exp(-i H t): Iz -> -Iy... checked explicitly.
    const Mat q = a.propagate(0.0, 1.0 / (4 * amp));
    const Mat iy = single_spin_operator(0, Axis::y, 1);
    CHECK((q * iz * q.adjoint() - (-iy)).norm() < 1e-10);
}

TEST_CASE("midpoint slicing converges at second order") {
    const auto sys = homo_pair();
    const auto seq = cw("13C", 30000.0, 0.0, 1e-4);
    AssemblyOptions fine;
    fine.slice_dt = 2.5e-9;
    const Mat ref = HamiltonianAssembly(sys, seq, crystal, 12500.0, fine).propagate(0.0, 8e-5);
    std::vector<double> err;
    for (double dt : {4e-7, 2e-7, 1e-7}) {
        AssemblyOptions o;
        o.slice_dt = dt;
        err.push_back((HamiltonianAssembly(sys, seq, crystal, 12500.0, o).propagate(0.0, 8e-5) - ref).norm());
    }
    CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.1));
    CHECK(err[1] / err[2] == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("propagators compose and stay unitary") {
    const auto sys = hetero_pair(-900.0);
    RespirationParams p;
    p.tau_r = 5e-5;
    p.tau_p = 4e-6;
    p.channel_i = "15N";
    p.channel_s = "13C";
    p.amplitude_i = p.amplitude_s = 4e4;
    const HamiltonianAssembly a(sys, build_respiration_cp(p), crystal, 20000.0);
    const double dt = a.slice_dt();
    const double t1 = 300 * dt, t2 = 1000 * dt;
    const Mat u = a.propagate(0.0, t2);
    CHECK((u - a.propagate(t1, t2) * a.propagate(0.0, t1)).norm() < 1e-10);
    CHECK(unitarity_error(u) < 1e-12);
    CHECK(unitarity_error(a.propagate(0.0, 20 * p.tau_r)) < 1e-11);
    for (double t : {0.0, 1.3e-5, 4.9e-5, 7.7e-5}) {
        CHECK(hermiticity_error(a.hamiltonian(t)) < 1e-9);
        CHECK(std::abs(a.hamiltonian(t).trace()) < 1e-9);
    }
    const Mat rho0 = operator_from_label("Ix", 2);
    const Mat rho = u * rho0 * u.adjoint();
    CHECK(std::abs(rho.trace() - rho0.trace()) < 1e-12);
    CHECK(std::abs((rho * rho).trace() - (rho0 * rho0).trace()) < 1e-12);
}

TEST_CASE("free evolution table agrees with direct slicing") {
    const auto sys = homo_pair();
    const auto seq = build_rfdr(1e-4, 5e-6, 1e5, 1e-6, PhaseCycle::XY8, "13C");
    AssemblyOptions direct;
    direct.free_table_steps = 0;
    direct.slice_dt = 1e-7;
    AssemblyOptions table;
    table.free_table_steps = 1000;
    table.slice_dt = 1e-7;
    const Mat a = HamiltonianAssembly(sys, seq, crystal, 10000.0, direct).propagate(0.0, 1.6e-3);
    const Mat b = HamiltonianAssembly(sys, seq, crystal, 10000.0, table).propagate(0.0, 1.6e-3);
    CHECK(oracle::phase_free_distance(a, b) < 1e-5);
}

TEST_CASE("interaction-frame identity") {
    // U(t) = U_rf(t) U_tilde(t), with U_tilde driven by U_rf^dag H_int U_rf.
    const auto sys = hetero_pair(-1500.0);
    const double amp = 15000.0;
    PulseSequence seq = cw("15N", amp, 0.0, 1e-4);
    seq.channels.push_back(Channel{"13C", {{1e-4, 22000.0, 0.0}}, 1e-4});
    AssemblyOptions o;
    o.slice_dt = 2e-9;
    const HamiltonianAssembly a(sys, seq, crystal, 11000.0, o);
    const double t_end = 6e-5;
    const Mat hrf = a.rf(0.0);
    const int n = 30000;
    const double h = t_end / n;
    Mat ut = Mat::Identity(4, 4);
    for (int k = 0; k < n; ++k) {
        const double tm = (k + 0.5) * h;
        const Mat urf = expm_hermitian(hrf, tm);
        ut = expm_hermitian(urf.adjoint() * a.internal(tm) * urf, h) * ut;
    }
    const Mat lhs = a.propagate(0.0, t_end);
    CHECK((lhs - expm_hermitian(hrf, t_end) * ut).norm() < 1e-6);
}

TEST_CASE("no dipolar coupling, no heteronuclear transfer") {
    RespirationParams p;
    p.tau_r = 5e-5;
    p.tau_p = 4e-6;
    p.channel_i = "15N";
    p.channel_s = "13C";
    p.amplitude_i = p.amplitude_s = 4e4;
    const auto seq = build_respiration_cp(p);
    const HamiltonianAssembly a(hetero_pair(0.0), seq, crystal, 20000.0);
    const Mat rho0 = operator_from_label("Ix", 2), det = operator_from_label("Sx", 2);
    const auto c = transfer_efficiency_periodic(a, rho0, det, p.tau_r, 40);
    for (double e : c.efficiency) CHECK(std::abs(e) < 1e-9);
    // With coupling the periodic and incremental samplers agree.
    const HamiltonianAssembly b(hetero_pair(-1000.0), seq, crystal, 20000.0);
    const auto per = transfer_efficiency_periodic(b, rho0, det, p.tau_r, 30);
    const auto inc = transfer_efficiency(b, rho0, det, per.times);
    REQUIRE(per.efficiency.size() == inc.efficiency.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < per.efficiency.size(); ++i) {
        CHECK(std::abs(per.efficiency[i] - inc.efficiency[i]) < 1e-9);
        peak = std::max(peak, std::abs(per.efficiency[i]));
    }
    CHECK(peak > 0.05);
}

TEST_CASE("overlap normalization and matrix powers") {
    const Mat ix = operator_from_label("Ix", 2), sx = operator_from_label("Sx", 2);
    CHECK(normalized_overlap(ix, ix, ix) == doctest::Approx(1.0));
    CHECK(std::abs(normalized_overlap(ix, ix, sx)) < 1e-15);
    CHECK_THROWS_AS(normalized_overlap(ix, Mat::Zero(4, 4), sx), ConfigError);

    std::mt19937 rng(9);
    const Mat u = expm_hermitian(oracle::random_hermitian(4, rng, 1.0), 0.7);
    Mat acc = Mat::Identity(4, 4);
    for (long k = 0; k <= 13; ++k) {
        CHECK((matrix_power(u, k) - acc).norm() < 1e-12);
        acc = u * acc;
    }
}
