#include <doctest.h>

#include "nmrsim/optimizer.hpp"
#include "nmrsim/spin.hpp"

using namespace nmr;

namespace {

RfdrProblem small_problem() {
    RfdrProblem p;
    p.system.nuclei = {"13C", "13C"};
    p.system.shifts = {{0, 6000.0, -7600.0, 0.9, {0, 0, deg(94)}}, {1, -6000.0, -2000.0, 0.43, {deg(90), deg(90), 0}}};
    p.system.dipoles = {{0, 1, -2142.0, {0, deg(90), deg(120.8)}}};
    p.spin_rate = 10000.0;
    p.pi_duration = 5e-6;
    p.pi_amplitude = 1e5;
    p.channel = "13C";
    p.powder = zcw(2, 2);
    p.options.slice_dt = 1e-6;
    p.rho0 = operator_from_label("I1z", 2);
    p.detect = operator_from_label("I2z", 2);
    p.threads = 1;
    return p;
}

}  // namespace

TEST_CASE("delay list emission and parse-back") {
    const double tr = 1e-4, p = 5e-6;
    const auto plain = emit_delay_list(tangential_sweep(1, 0.0, 0.0), tr, p);
    CHECK(plain.substr(0, plain.find('\n')) == "47.500000u");
    CHECK(std::count(plain.begin(), plain.end(), '\n') == 16);

    const auto sched = tangential_sweep(2, 3e-6, deg(80));
    const auto two = emit_delay_list(sched, tr, p);
    CHECK(std::count(two.begin(), two.end(), '\n') == 32);
    const auto back = parse_delay_list(two, tr, p);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(back[i] - sched.delta_tau[i]) < 1e-12);

    const auto five = tangential_sweep(5, 3.3e-6, deg(80));
    const auto parsed = parse_delay_list(emit_delay_list(five, tr, p), tr, p);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(parsed[i] - five.delta_tau[i]) < 1e-12);

    // Every block's four delays add to two rotor periods minus the two pulses.
    std::istringstream is(two);
    std::string line;
    double sum = 0.0;
    for (int i = 0; i < 4 && std::getline(is, line); ++i) sum += std::stod(line.substr(0, line.size() - 1));
    CHECK(sum == doctest::Approx(190.0));

    SweepSchedule bad{1, 0.0, 0.0, {60e-6}};
    CHECK_THROWS_AS(emit_delay_list(bad, tr, p), ConfigError);
    CHECK_THROWS_AS(parse_delay_list("47.5\n", tr, p), ConfigError);
    CHECK_THROWS_AS(parse_delay_list("47.5u\n", tr, p), ConfigError);
}

TEST_CASE("sweep grids") {
    const auto c = coarse_sweep_grid();
    CHECK(c.tau_sweep.size() == 11);
    CHECK(c.tau_sweep.back() == doctest::Approx(5e-6));
    CHECK(c.x_co.size() == 7);
    CHECK(c.x_co.back() == doctest::Approx(deg(89)));
    const auto f = full_sweep_grid();
    CHECK(f.tau_sweep.size() == 201);
    CHECK(f.x_co.size() == 89);
}

TEST_CASE("generic scan returns the first maximizer") {
    const std::vector<ScanAxis> axes = {{"a", {0, 1, 2, 3}}, {"b", {10, 20, 30}}};
    auto plateau = [](const std::vector<double>& v) { return -std::abs(v[0] - 2) - (v[1] >= 20 ? 0.0 : 1.0); };
    const auto r = scan_grid(axes, plateau);
    CHECK(r.points.size() == 12);
    CHECK(r.points[r.best].values == std::vector<double>{2, 20});
    // Reversed axis order: same maximum, first maximizer in the new order.
    const std::vector<ScanAxis> rev = {{"a", {3, 2, 1, 0}}, {"b", {30, 20, 10}}};
    const auto q = scan_grid(rev, plateau);
    CHECK(q.points[q.best].objective == r.points[r.best].objective);
    CHECK(q.points[q.best].values == std::vector<double>{2, 30});
    CHECK_THROWS_AS(scan_grid({}, plateau), ConfigError);
    CHECK_THROWS_AS(scan_grid({{"a", {}}}, plateau), ConfigError);
}

TEST_CASE("adiabatic grid search on a small powder") {
    const auto pr = small_problem();
    SweepGrid g;
    g.tau_sweep = {0.0, 2e-6, 4e-6};
    g.x_co = {deg(60), deg(80)};
    const auto rows = grid_search_adiabatic({1, 2, 4}, g, pr);
    REQUIRE(rows.size() == 3);

    // N = 1 ignores the sweep: first grid point, standard RFDR build-up maximum.
    CHECK(rows[0].tau_sweep == 0.0);
    CHECK(rows[0].x_co == deg(60));
    const auto rfdr = adiabatic_rfdr_curve(tangential_sweep(1, 0.0, 0.0), pr);
    CHECK(rows[0].efficiency == doctest::Approx(*std::max_element(rfdr.begin(), rfdr.end())).epsilon(1e-12));

    for (const auto& r : rows) {
        const auto best = adiabatic_rfdr_curve(tangential_sweep(r.n_blocks, r.tau_sweep, r.x_co), pr);
        CHECK(best[static_cast<std::size_t>(r.cycle_index)] == doctest::Approx(r.efficiency).epsilon(1e-12));
        CHECK(r.cycle_index <= r.n_blocks);
        for (double ts : g.tau_sweep)
            for (double xc : g.x_co) {
                const auto c = adiabatic_rfdr_curve(tangential_sweep(r.n_blocks, ts, xc), pr);
                CHECK(*std::max_element(c.begin(), c.end()) <= r.efficiency + 1e-12);
            }
    }
    // Thread count does not change the result.
    auto threaded = pr;
    threaded.threads = 3;
    const auto again = grid_search_adiabatic({1, 2, 4}, g, threaded);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].efficiency == rows[i].efficiency);
}
