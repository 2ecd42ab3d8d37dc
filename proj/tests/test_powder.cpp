#include <doctest.h>

#include <algorithm>
#include <random>

#include "nmrsim/powder.hpp"
#include "nmrsim/propagation.hpp"
#include "nmrsim/sequence.hpp"
#include "nmrsim/spin.hpp"

using namespace nmr;

namespace {

// Time-domain oracle for the zero-quantum recoupling: mean of w_D(t) exp(i beta(t)) over 2 tau_r,
// where beta integrates the sign-toggled shift difference with its mean removed.
double recoupling_oracle(double diff_hz, double rate, double b, double shift, const Euler& angles) {
    const double tr = 1.0 / rate, t1 = tr / 2 + shift / 2, t2 = 1.5 * tr - shift / 2;
    const double mean = 1.0 - (t2 - t1) / tr;
    const InteractionTensor dip{InteractionKind::dipolar, 0.0, b, 0.0, {}, std::make_pair(0, 1)};
    const auto w = mas_fourier_components(dip, angles, rate);
    const int n = 200000;
    const double h = 2 * tr / n;
    double beta = 0.0;
    cd acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) * h;
        const double sign = (t < t1 || t > t2) ? 1.0 : -1.0;
        const double rate_here = two_pi * diff_hz * (sign - mean);
        const double mid = beta + rate_here * h / 2;
        acc += w.value(t, two_pi * rate) * std::exp(I * mid);
        beta += rate_here * h;
    }
    acc /= static_cast<double>(n);
    return std::abs(acc);
}

}  // namespace

TEST_CASE("crystallite sets") {
    const auto one = grid(1, 1, 1);
    REQUIRE(one.size() == 1);
    CHECK(one.items[0].weight == 1.0);
    CHECK(one.items[0].angles.beta == 0.0);

    const std::size_t fib[] = {3, 5, 8, 13, 21, 34, 55, 89, 144, 233};
    for (int m = 1; m <= 10; ++m) {
        const auto s = zcw(m);
        CHECK(s.size() == fib[m - 1]);
        s.validate();
        if (m >= 4) CHECK(std::abs(p2_moment(s)) < 0.01);
    }
    const auto g = zcw(6, 9);
    CHECK(g.size() == 34 * 9);
    g.validate();
    CHECK(std::abs(p2_moment(grid(8, 30, 1))) < 0.01);
    CHECK_THROWS_AS(zcw(0), ConfigError);
    CHECK_THROWS_AS(grid(0, 1, 1), ConfigError);
}

TEST_CASE("crystallite file round trip and errors") {
    const auto s = zcw(5, 3);
    const auto back = parse_crystallites(format_crystallites(s));
    REQUIRE(back.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(back.items[i].angles.alpha == doctest::Approx(s.items[i].angles.alpha).epsilon(1e-12));
        CHECK(back.items[i].angles.beta == doctest::Approx(s.items[i].angles.beta).epsilon(1e-12));
        CHECK(back.items[i].weight == doctest::Approx(s.items[i].weight).epsilon(1e-12));
    }
    const auto regamma = parse_crystallites("# pairs\n0 0 0 1\n90 90 0 3\n", 4);
    CHECK(regamma.size() == 8);
    CHECK(regamma.items[4].weight == doctest::Approx(0.75 / 4));
    CHECK_THROWS_AS(parse_crystallites("0 0 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_crystallites("0 0 0 1 5\n"), ConfigError);
    CHECK_THROWS_AS(parse_crystallites("0 0 0 -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_crystallites(""), ConfigError);
    CHECK_THROWS_AS(load_crystallite_file("/nonexistent/rep66.txt"), ConfigError);
}

TEST_CASE("powder averages") {
    const auto s = zcw(6, 2);
    CHECK(powder_average(std::vector<double>(s.size(), 2.5), s) == doctest::Approx(2.5));
    CHECK_THROWS(powder_average(std::vector<double>(3, 1.0), s));

    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v(s.size());
    for (auto& x : v) x = u(rng);
    std::vector<std::size_t> perm(s.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    CrystalliteSet p;
    std::vector<double> pv;
    for (auto i : perm) {
        p.items.push_back(s.items[i]);
        pv.push_back(v[i]);
    }
    CHECK(std::abs(powder_average(v, s) - powder_average(pv, p)) < 1e-14);

    const std::vector<std::vector<double>> curves(s.size(), {1.0, 2.0});
    const auto avg = powder_average(curves, s);
    CHECK(avg[0] == doctest::Approx(1.0));
    CHECK(avg[1] == doctest::Approx(2.0));
}

TEST_CASE("isotropic observables are orientation independent") {
    SpinSystem sys;
    sys.nuclei = {"1H"};
    sys.shifts = {{0, 1234.0, 0.0, 0.0, {}}};
    const auto s = zcw(4, 3);
    const PulseSequence free{{}, 1e-4, ""};
    const Mat ix = single_spin_operator(0, Axis::x, 1);
    std::vector<double> vals;
    for (const auto& c : s.items) {
        const HamiltonianAssembly a(sys, free, c.angles, 10000.0);
        const Mat u = a.propagate(0.0, 1.7e-4);
        vals.push_back(normalized_overlap(u * ix * u.adjoint(), ix, ix));
    }
    for (double x : vals) CHECK(x == doctest::Approx(vals.front()).epsilon(1e-10));
    CHECK(powder_average(vals, s) == doctest::Approx(std::cos(two_pi * 1234.0 * 1.7e-4)).epsilon(1e-9));
}

TEST_CASE("displaced-pulse recoupling strength") {
    const auto s = zcw(5, 4);
    const double rate = 10000.0, tr = 1e-4;
    const double zero = rfdr_recoupling_strength(12000.0, rate, -2000.0, 0.0, s);
    CHECK(zero > 100.0);
    CHECK(rfdr_recoupling_strength(12000.0, rate, -2000.0, tr, s) < 1e-9 * zero);
    CHECK(rfdr_recoupling_strength(12000.0, rate, -2000.0, -tr, s) < 1e-9 * zero);
    for (double f : {-0.5, 0.3, 0.7}) {
        const double r = rfdr_recoupling_strength(12000.0, rate, -2000.0, f * tr, s) / zero;
        CHECK(r > 0.05);
        CHECK(r < 3.0);
    }
    CHECK_THROWS_AS(rfdr_recoupling_strength(12000.0, rate, -2000.0, 1.5 * tr, s), ConfigError);

    // Per-crystallite value against direct time integration.
    const Euler e{0.4, 1.0, 2.2};
    const CrystalliteSet single{{{e, 1.0}}, "one"};
    for (double shift : {0.0, 0.35 * tr, -0.6 * tr}) {
        const double lib = rfdr_recoupling_strength(12000.0, rate, -2000.0, shift, single);
        CHECK(lib == doctest::Approx(recoupling_oracle(12000.0, rate, -2000.0, shift, e)).epsilon(1e-3));
    }
}

TEST_CASE("gamma refinement barely moves rotor-synchronized transfer") {
    SpinSystem sys;
    sys.nuclei = {"13C", "13C"};
    sys.shifts = {{0, 6000.0, -7600.0, 0.9, {0, 0, deg(94)}}, {1, -6000.0, -2000.0, 0.43, {deg(90), deg(90), 0}}};
    sys.dipoles = {{0, 1, -2142.0, {0, deg(90), deg(120.8)}}};
    const auto seq = build_rfdr(1e-4, 5e-6, 1e5, 0.0, PhaseCycle::XY8, "13C");
    const Mat z1 = operator_from_label("I1z", 2), z2 = operator_from_label("I2z", 2);
    auto curve = [&](int n_gamma) {
        const auto s = zcw(7, n_gamma);
        std::vector<std::vector<double>> c;
        for (const auto& x : s.items) {
            const HamiltonianAssembly a(sys, seq, x.angles, 10000.0);
            c.push_back(transfer_efficiency_periodic(a, z1, z2, 8e-4, 3).efficiency);
        }
        return powder_average(c, s);
    };
    const auto a = curve(9), b = curve(18);
    const double peak = *std::max_element(b.begin(), b.end());
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 0.01 * peak);
}
