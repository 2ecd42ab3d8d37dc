#include <doctest.h>

#include <set>

#include "nmrsim/config.hpp"
#include "nmrsim/recipes.hpp"

using namespace nmr;

namespace {

const std::string minimal = R"(spinsys {
  nuclei 13C 13C
  shift 1 1000 -2000 0.5 0 0 0
  dipole 1 2 -2000 0 90 0
}
par {
  spin_rate 10000
}
sequence {
  name rfdr
}
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto p = s.find(from);
    REQUIRE(p != std::string::npos);
    return s.replace(p, from.size(), to);
}

}  // namespace

TEST_CASE("strict parsing") {
    CHECK_NOTHROW(parse_config(minimal));
    CHECK_THROWS_AS(parse_config(replace(minimal, "spin_rate 10000", "spin_rate 10000\n  spinrate 5")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(minimal, "spin_rate 10000", "spin_rate 10000\n  spin_rate 5")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(minimal, "spin_rate 10000", "spin_rate 10k")), ConfigError);
    CHECK_THROWS_AS(parse_config(minimal + "extra {\n}\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(minimal, "name rfdr", "name rfdr\n  x_co 80")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(minimal, "0.5 0 0 0", "1.2 0 0 0")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(minimal, "0.5 0 0 0", "-0.1 0 0 0")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(minimal, "1000 -2000", "60p -2000")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(minimal, "nuclei 13C 13C", "nuclei 13C 99Xx")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(minimal, "dipole 1 2", "dipole 1 3")), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/file.conf"), ConfigError);

    const auto ok = parse_config(replace(minimal, "spin_rate 10000", "spin_rate 10000\n  proton_frequency 400e6") );
    CHECK(ok.spin_system().shifts[0].iso == doctest::Approx(1000.0));
    const auto ppm = parse_config(
        replace(replace(minimal, "1000 -2000", "60p -2000"), "spin_rate 10000", "spin_rate 10000\n  proton_frequency 400e6"));
    CHECK(ppm.spin_system().shifts[0].iso == doctest::Approx(60.0 * larmor_frequency("13C", 400e6) * 1e-6));
}

TEST_CASE("ppm values follow a later proton frequency change") {
    auto cfg = parse_config(
        replace(replace(minimal, "1000 -2000", "60p -2000"), "spin_rate 10000", "spin_rate 10000\n  proton_frequency 400e6"));
    const double at400 = cfg.spin_system().shifts[0].iso;
    cfg.set("par.proton_frequency=800e6");
    CHECK(cfg.spin_system().shifts[0].iso == doctest::Approx(2 * at400));
    CHECK_THROWS_AS(cfg.set("par.no_such_key=1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("spinsys.nuclei=1H"), ConfigError);
    CHECK_THROWS_AS(cfg.set("par.spin_rate"), ConfigError);
}

TEST_CASE("manifest covers every schema key with resolved values") {
    const auto cfg = parse_config(minimal);
    std::set<std::string> keys;
    for (const auto& [k, v] : cfg.manifest()) {
        keys.insert(k);
        CHECK(v != "auto");
    }
    for (const auto& [k, v] : par_schema()) CHECK(keys.count("par." + k) == 1);
    for (const auto& [k, v] : sequence_schema("rfdr")) CHECK(keys.count("sequence." + k) == 1);
    CHECK(cfg.par.number("slice_dt") > 0.0);
    CHECK(cfg.sequence.text("channel") == "13C");
    CHECK(cfg.dwell() == doctest::Approx(8e-4));

    // Manifest numbers parse back to the same doubles.
    auto again = parse_config(minimal);
    for (const auto& [k, v] : cfg.manifest())
        if (k.rfind("par.", 0) == 0 || k.rfind("sequence.", 0) == 0) again.set(k + "=" + v);
    CHECK(again.manifest() == cfg.manifest());
}

TEST_CASE("glycine fixture") {
    const auto cfg = load_config(NMRSIM_FIXTURE_DIR "/glycine.conf");
    const auto sys = cfg.spin_system();
    REQUIRE(sys.n_spins() == 2);
    CHECK(sys.nuclei[0] == "13C");
    REQUIRE(sys.dipoles.size() == 1);
    CHECK(sys.dipoles[0].b == -2142.0);
    CHECK(sys.dipoles[0].pas.beta == doctest::Approx(deg(90)));
    CHECK(sys.dipoles[0].pas.gamma == doctest::Approx(deg(120.8)));
    CHECK(cfg.par.number("proton_frequency") == 400e6);
    CHECK(cfg.spin_rate() == 10000.0);
    const double c13 = larmor_frequency("13C", 400e6);
    CHECK(c13 == doctest::Approx(100.6e6).epsilon(1e-3));
    CHECK(sys.shifts[0].iso - sys.shifts[1].iso == doctest::Approx(120e-6 * c13));
    CHECK(cfg.crystallites().size() == 233 * 9);
    const auto seq = cfg.build_sequence();
    CHECK(seq.span() == doctest::Approx(8e-4));
}

TEST_CASE("recipe output is deterministic") {
    const std::vector<std::string> small = {"scan.offsets_i=-4000 4000 5", "scan.offsets_s=-4000 4000 5"};
    const auto cfg = recipe_config("fig5_4", {}, small);
    const auto a = to_csv(run_recipe("fig5_4", cfg));
    const auto b = to_csv(run_recipe("fig5_4", recipe_config("fig5_4", {}, small)));
    CHECK(a == b);
    CHECK(a.rfind("# ", 0) == 0);
    CHECK(a.find("scan.offsets_i") != std::string::npos);
    CHECK_THROWS_AS(recipe_config("fig9_9"), ConfigError);
    CHECK_THROWS_AS(recipe_config("fig5_4", {}, {"scan.bogus=1"}), ConfigError);
    for (const auto& r : recipe_list()) CHECK_NOTHROW(recipe_config(r.name));
}
