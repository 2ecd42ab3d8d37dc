#include "nmrsim/recipes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>

#include "nmrsim/aht.hpp"
#include "nmrsim/optimizer.hpp"
#include "nmrsim/parallel.hpp"
#include "nmrsim/powder.hpp"
#include "nmrsim/propagation.hpp"
#include "nmrsim/quaternion.hpp"

namespace nmr {

std::string fmt(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void Table::add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw std::logic_error("table row width does not match the header");
    rows.push_back(std::move(row));
}

namespace {

// ---------------------------------------------------------------- built-in configurations

const char* glycine_text = R"(# 13CO / 13CA pair; carrier midway between the two isotropic shifts
spinsys {
  nuclei 13C 13C
  channels 13C
  shift 1 60p -76p 0.90 0 0 94
  shift 2 -60p -20p 0.43 90 90 0
  dipole 1 2 -2142 0 90 120.8
}
par {
  proton_frequency 400e6
  spin_rate 10000
  crystal_file zcw:10
  gamma_angles 9
  slice_dt 1e-6
  start_operator I1z
  detect_operator I2z
}
sequence {
  name rfdr
  channel 13C
  pi_duration 5e-6
  pi_amplitude 100000
  cycle xy8
}
)";

std::string respiration_text(const std::string& spinsys_extra, const std::string& par_extra,
                             const std::string& seq_extra) {
    const bool own_rate = par_extra.find("spin_rate") != std::string::npos;
    return "spinsys {\n  nuclei 15N 13C\n  channels 15N 13C\n" + spinsys_extra + "}\npar {\n" +
           (own_rate ? "" : "  spin_rate 20000\n") + "  start_operator Ix\n  detect_operator Sx\n" + par_extra +
           "}\nsequence {\n  name respiration\n" + seq_extra + "}\n";
}

const char* c7_text = R"(spinsys {
  nuclei 13C 13C
  channels 13C
  dipole 1 2 1000 0 0 0
}
par {
  spin_rate 5000
  crystal_file zcw:4
  gamma_angles 4
  start_operator I1z
  detect_operator I2z
  order 1
  near_threshold_hz 1000
}
sequence {
  name c7
  element post
  channels 13C
}
)";

const char* fig4_4_text = R"(spinsys {
  nuclei 13C 13C
  channels 13C
  dipole 1 2 -2142 0 90 120.8
}
par {
  spin_rate 10000
  crystal_file zcw:10
  gamma_angles 9
}
)";

// ---------------------------------------------------------------- shared helpers

std::vector<double> linspace(const std::vector<double>& spec, const std::string& key) {
    if (spec.size() != 3 || spec[2] < 1 || spec[2] != std::floor(spec[2]))
        throw ConfigError("scan." + key + " must read '<first> <last> <count>'");
    const int n = static_cast<int>(spec[2]);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? spec[0] : spec[0] + (spec[1] - spec[0]) * i / (n - 1);
    return v;
}

std::vector<double> grid_of(const ExperimentConfig& cfg, const std::string& key) {
    return linspace(cfg.scan.numbers(key), key);
}

ExperimentConfig with(ExperimentConfig cfg, const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) cfg.set(a);
    return cfg;
}

// Copy of `sys` whose spin carries isotropic offset `hz`.
SpinSystem with_offset(SpinSystem sys, int spin, double hz) {
    for (auto& s : sys.shifts)
        if (s.spin == spin) {
            s.iso = hz;
            return sys;
        }
    ShiftSpec s;
    s.spin = spin;
    s.iso = hz;
    sys.shifts.push_back(s);
    return sys;
}

unsigned threads_of(const ExperimentConfig& cfg) { return static_cast<unsigned>(std::max(0, cfg.par.integer("threads"))); }

// Shortest rotor-synchronized repeat of the sequence.
double direct_period(const PulseSequence& seq, double tau_r) {
    const double span = seq.span();
    if (span <= 0.0) return tau_r;
    const auto r = rational_approx(span / tau_r, 100000, 1e-9);
    if (!r) throw NumericalGuard("sequence period is not commensurate with the rotor period");
    return tau_r * static_cast<double>(r->first);
}

struct PowderTransfer {
    std::vector<double> direct, effective;
};

// Powder-averaged transfer at each requested time, rounded to whole stroboscopic periods.
PowderTransfer powder_transfer(const ExperimentConfig& cfg, const SpinSystem& sys, const PulseSequence& seq,
                               const std::vector<double>& times, bool want_direct, bool want_effective) {
    const auto set = cfg.crystallites();
    const double rate = cfg.spin_rate();
    const Mat rho0 = cfg.start_operator(), det = cfg.detect_operator();
    const auto mopt = cfg.model_options();
    const auto eopt = cfg.effective_options();
    const auto aopt = cfg.assembly();
    const double period = direct_period(seq, cfg.tau_r());
    std::optional<FrameSet> frames;
    if (want_effective) frames = build_frames(sys, seq, rate, mopt);

    std::vector<std::vector<double>> d(set.size()), e(set.size());
    parallel_for(set.size(), threads_of(cfg), [&](std::size_t c) {
        const Euler& angles = set.items[c].angles;
        if (want_direct) {
            HamiltonianAssembly a(sys, seq, angles, rate, aopt);
            const Mat up = a.propagate(0.0, period);
            for (double t : times) {
                const Mat u = matrix_power(up, std::lround(t / period));
                d[c].push_back(normalized_overlap(u * rho0 * u.adjoint(), rho0, det));
            }
        }
        if (want_effective) {
            const auto h = effective_hamiltonian(build_model(sys, *frames, angles, rate, mopt.rotor_angle), eopt);
            for (double t : times) {
                const Mat u = effective_propagate(h, static_cast<int>(std::lround(t / h.tau_c_prime)));
                e[c].push_back(normalized_overlap(u * rho0 * u.adjoint(), rho0, det));
            }
        }
    });
    PowderTransfer out;
    if (want_direct) out.direct = powder_average(d, set);
    if (want_effective) out.effective = powder_average(e, set);
    return out;
}

// Powder average of ||H2|| / (2 pi delta)^2, the second-order coefficient of one interaction.
double second_order_coefficient(const ExperimentConfig& cfg, const SpinSystem& sys, const PulseSequence& seq,
                                double delta_hz) {
    if (delta_hz == 0.0) throw ConfigError("second-order coefficient needs a nonzero shift");
    const auto set = cfg.crystallites();
    const auto mopt = cfg.model_options();
    const auto eopt = cfg.effective_options();
    const auto frames = build_frames(sys, seq, cfg.spin_rate(), mopt);
    std::vector<double> v(set.size());
    parallel_for(set.size(), threads_of(cfg), [&](std::size_t c) {
        const auto m = build_model(sys, frames, set.items[c].angles, cfg.spin_rate(), mopt.rotor_angle);
        v[c] = second_order(m, eopt.exact_tol_hz, eopt.prune).matrix.norm();
    });
    const double w = two_pi * delta_hz;
    return powder_average(v, set) / (w * w);
}

struct FieldMap {
    std::vector<double> offsets_i, offsets_s;
    SignedField i, s;
};

FieldMap field_map(const PulseSequence& seq, const std::string& ch_i, const std::string& ch_s,
                   std::vector<double> offsets_i, std::vector<double> offsets_s) {
    FieldMap f;
    f.i = signed_effective_fields(seq.channel(ch_i), offsets_i);
    f.s = signed_effective_fields(seq.channel(ch_s), offsets_s);
    f.offsets_i = std::move(offsets_i);
    f.offsets_s = std::move(offsets_s);
    return f;
}

PulseSequence respiration_variant(const ExperimentConfig& cfg, const std::string& variant, double tau_com) {
    return with(cfg, {"sequence.variant=" + variant, "sequence.tau_com=" + fmt(tau_com)}).build_sequence();
}

void require_sequence(const ExperimentConfig& cfg, std::initializer_list<const char*> names) {
    for (const char* n : names)
        if (cfg.sequence_name() == n) return;
    std::string list;
    for (const char* n : names) list += (list.empty() ? "" : ", ") + std::string(n);
    throw ConfigError("this recipe needs sequence.name in {" + list + "}, got '" + cfg.sequence_name() + "'");
}

// ---------------------------------------------------------------- recipes

void recipe_fig4_4(const ExperimentConfig& cfg, RecipeOutput& out) {
    const auto sys = cfg.spin_system();
    if (sys.dipoles.empty()) throw ConfigError("fig4_4 needs a dipole line");
    const auto& dip = sys.dipoles.front();
    const auto set = cfg.crystallites();
    const double tr = cfg.tau_r();
    out.table.columns = {"relative_shift_over_tau_r", "relative_shift_s", "strength_hz"};
    for (double x : grid_of(cfg, "relative_shift")) {
        const double s = rfdr_recoupling_strength(cfg.scan.number("shift_difference_hz"), cfg.spin_rate(), dip.b,
                                                  x * tr, set, dip.pas);
        out.table.add({fmt(x), fmt(x * tr), fmt(s)});
    }
}

void recipe_fig4_5(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"rfdr", "adiabatic_rfdr"});
    const auto sweeps = cfg.scan.numbers("tau_sweep");
    const auto cutoffs = cfg.scan.numbers("x_co");
    const int nmax = cfg.scan.integer("max_blocks");
    if (static_cast<int>(sweeps.size()) < nmax || static_cast<int>(cutoffs.size()) < nmax)
        throw ConfigError("scan.tau_sweep and scan.x_co need one entry per block count up to scan.max_blocks");

    RfdrProblem pr;
    pr.system = cfg.spin_system();
    pr.spin_rate = cfg.spin_rate();
    pr.pi_duration = cfg.sequence.number("pi_duration");
    pr.pi_amplitude = cfg.sequence.number("pi_amplitude");
    pr.channel = cfg.sequence.text("channel");
    pr.powder = cfg.crystallites();
    pr.options = cfg.assembly();
    pr.rho0 = cfg.start_operator();
    pr.detect = cfg.detect_operator();
    pr.threads = threads_of(cfg);

    const double block = 8.0 * cfg.tau_r();
    out.table.columns = {"series", "n_blocks", "mixing_time_s", "tau_sweep_s", "x_co_deg", "efficiency"};
    // Standard RFDR is the zero-sweep schedule; its curve is sampled after every block.
    const auto rfdr = adiabatic_rfdr_curve(tangential_sweep(nmax, 0.0, deg(80.0)), pr);
    for (int n = 0; n <= nmax; ++n)
        out.table.add({"rfdr", std::to_string(n), fmt(n * block), "0", "", fmt(rfdr[static_cast<std::size_t>(n)])});
    for (int n = 1; n <= nmax; ++n) {
        const double ts = sweeps[static_cast<std::size_t>(n - 1)] * 1e-6;
        const double xc = cutoffs[static_cast<std::size_t>(n - 1)];
        const auto curve = adiabatic_rfdr_curve(tangential_sweep(n, ts, deg(xc)), pr);
        out.table.add({"adiabatic", std::to_string(n), fmt(n * block), fmt(ts), fmt(xc), fmt(curve.back())});
    }
}

void recipe_fig4_8(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"respiration"});
    const double tau_p = cfg.scan.number("tau_p_fraction") * cfg.tau_r();
    const int kmax = cfg.scan.integer("k_max");
    const int samples = cfg.par.integer("fourier_samples");
    out.table.columns = {"rf_ratio", "k", "re_az", "im_az", "re_ay", "im_ay", "power", "tail_beyond_10"};
    for (double ratio : cfg.scan.numbers("rf_ratios")) {
        const double amp = ratio * cfg.spin_rate();
        const auto c = with(cfg, {"sequence.tau_p=" + fmt(tau_p), "sequence.amplitude_i=" + fmt(amp),
                                  "sequence.amplitude_s=" + fmt(amp)});
        const auto seq = c.build_sequence();
        const auto split = split_am(seq, c.sequence.text("channel_i"));
        const auto spec = am_spectrum(split, split.period, samples);
        const double tail = spec.tail_fraction(10);
        for (int k = -kmax; k <= kmax; ++k) {
            const cd z = spec.z(k), y = spec.y(k);
            out.table.add({fmt(ratio), std::to_string(k), fmt(z.real()), fmt(z.imag()), fmt(y.real()), fmt(y.imag()),
                           fmt(std::norm(z) + std::norm(y)), fmt(tail)});
        }
    }
}

void recipe_fig4_9a(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"respiration"});
    const auto sys = cfg.spin_system();
    const auto times = grid_of(cfg, "mixing_time");
    out.table.columns = {"rf_ratio", "mixing_time_s", "efficiency"};
    for (double ratio : cfg.scan.numbers("rf_ratios")) {
        const double amp = ratio * cfg.spin_rate();
        const auto c = with(cfg, {"sequence.amplitude_i=" + fmt(amp), "sequence.amplitude_s=" + fmt(amp)});
        const auto r = powder_transfer(c, sys, c.build_sequence(), times, false, true);
        for (std::size_t i = 0; i < times.size(); ++i) out.table.add({fmt(ratio), fmt(times[i]), fmt(r.effective[i])});
    }
}

// Both second-order figures share the tau_p scan with rf = 1/(rf_tau_factor tau_p) when the factor is set.
void recipe_fig5_1(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"respiration"});
    const auto sys = cfg.spin_system();
    const int s_spin = cfg.scan.integer("shift_spin") - 1;
    double aniso = 0.0;
    for (const auto& s : sys.shifts)
        if (s.spin == s_spin) aniso = s.aniso;
    SpinSystem csa_only = sys;
    csa_only.dipoles.clear();
    csa_only.couplings.clear();
    const double t_mix = cfg.scan.number("mixing_time");
    out.table.columns = {"tau_p_s", "rf_hz", "xi_aniso_s", "direct", "effective"};
    for (double tp : cfg.scan.numbers("tau_p_list")) {
        const double rf = 1.0 / (cfg.scan.number("rf_tau_factor") * tp);
        const auto c = with(cfg, {"sequence.tau_p=" + fmt(tp), "sequence.amplitude_i=" + fmt(rf),
                                  "sequence.amplitude_s=" + fmt(rf)});
        const auto seq = c.build_sequence();
        const double xi = second_order_coefficient(c, csa_only, seq, aniso);
        const auto r = powder_transfer(c, sys, seq, {t_mix}, true, true);
        out.table.add({fmt(tp), fmt(rf), fmt(xi), fmt(r.direct[0]), fmt(r.effective[0])});
    }
}

void recipe_fig5_2(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"respiration"});
    const auto sys = cfg.spin_system();
    const int s_spin = cfg.scan.integer("shift_spin") - 1;
    double iso = 0.0;
    for (const auto& s : sys.shifts)
        if (s.spin == s_spin) iso = s.iso;
    out.table.columns = {"tau_p_s", "xi_iso_s"};
    for (double tp : cfg.scan.numbers("tau_p_list")) {
        const auto c = with(cfg, {"sequence.tau_p=" + fmt(tp)});
        out.table.add({fmt(tp), fmt(second_order_coefficient(c, sys, c.build_sequence(), iso))});
    }
}

void recipe_fig5_3(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"respiration"});
    const auto base = cfg.spin_system();
    const auto tps = cfg.scan.numbers("tau_p_list");
    const auto mix = cfg.scan.numbers("mixing_list");
    if (mix.size() != tps.size()) throw ConfigError("scan.mixing_list needs one mixing time per scan.tau_p_list entry");
    const int spin = cfg.scan.integer("offset_spin") - 1;
    if (spin < 0 || spin >= base.n_spins()) throw ConfigError("scan.offset_spin refers to a missing spin");
    out.table.columns = {"tau_p_s", "offset_hz", "mixing_time_s", "direct", "effective"};
    for (std::size_t i = 0; i < tps.size(); ++i) {
        const auto c = with(cfg, {"sequence.tau_p=" + fmt(tps[i])});
        const auto seq = c.build_sequence();
        for (double off : grid_of(cfg, "offsets")) {
            const auto r = powder_transfer(c, with_offset(base, spin, off), seq, {mix[i]}, true, true);
            out.table.add({fmt(tps[i]), fmt(off), fmt(mix[i]), fmt(r.direct[0]), fmt(r.effective[0])});
        }
    }
}

void add_field_rows(Table& t, const std::string& label, const FieldMap& f) {
    for (std::size_t a = 0; a < f.offsets_i.size(); ++a)
        for (std::size_t b = 0; b < f.offsets_s.size(); ++b) {
            const double wi = f.i.omega_cw[a], ws = f.s.omega_cw[b];
            t.add({label, fmt(f.offsets_i[a]), fmt(f.offsets_s[b]), fmt(wi), fmt(ws), fmt(f.i.axis[a].x()),
                   fmt(f.s.axis[b].x()), fmt(std::abs(wi) - std::abs(ws))});
        }
}

const std::vector<std::string> field_columns = {"label",       "offset_i_hz", "offset_s_hz", "omega_cw_i_hz",
                                                "omega_cw_s_hz", "axis_x_i",  "axis_x_s",    "hetero_metric_hz"};

void recipe_fig5_4(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"respiration"});
    out.table.columns = field_columns;
    out.table.columns[0] = "tau_p_s";
    for (double tp : cfg.scan.numbers("tau_p_list")) {
        const auto c = with(cfg, {"sequence.tau_p=" + fmt(tp)});
        add_field_rows(out.table, fmt(tp),
                       field_map(c.build_sequence(), c.sequence.text("channel_i"), c.sequence.text("channel_s"),
                                 grid_of(cfg, "offsets_i"), grid_of(cfg, "offsets_s")));
    }
}

void recipe_fig5_6(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"respiration"});
    std::istringstream is(cfg.scan.text("variants"));
    out.table.columns = field_columns;
    out.table.columns[0] = "variant";
    for (std::string v; is >> v;)
        add_field_rows(out.table, v,
                       field_map(respiration_variant(cfg, v, cfg.sequence.number("tau_com")),
                                 cfg.sequence.text("channel_i"), cfg.sequence.text("channel_s"),
                                 grid_of(cfg, "offsets_i"), grid_of(cfg, "offsets_s")));
}

void recipe_fig5_7(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"respiration"});
    const auto base = cfg.spin_system();
    const auto offsets = grid_of(cfg, "offsets_s");
    const double t_mix = cfg.scan.number("mixing_time");
    const int s_spin = cfg.scan.integer("offset_spin") - 1;
    out.table.columns = {"tau_com_s", "offset_s_hz", "omega_cw_i_hz", "omega_cw_s_hz", "hetero_metric_hz", "efficiency"};
    for (double tc : cfg.scan.numbers("tau_com_list")) {
        const auto seq = respiration_variant(cfg, cfg.sequence.text("variant"), tc);
        const auto f = field_map(seq, cfg.sequence.text("channel_i"), cfg.sequence.text("channel_s"), {0.0}, offsets);
        for (std::size_t b = 0; b < offsets.size(); ++b) {
            const auto r = powder_transfer(cfg, with_offset(base, s_spin, offsets[b]), seq, {t_mix}, true, false);
            const double wi = f.i.omega_cw[0], ws = f.s.omega_cw[b];
            out.table.add({fmt(tc), fmt(offsets[b]), fmt(wi), fmt(ws), fmt(std::abs(wi) - std::abs(ws)),
                           fmt(r.direct[0])});
        }
    }
}

void recipe_fig5_8a(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"respiration"});
    const auto offsets = grid_of(cfg, "offsets_s");
    out.table.columns = {"tau_com_s", "offset_s_hz", "omega_cw_i_hz", "omega_cw_s_hz", "ratio"};
    for (double tc : grid_of(cfg, "tau_com")) {
        const auto seq = respiration_variant(cfg, cfg.sequence.text("variant"), tc);
        const auto f = field_map(seq, cfg.sequence.text("channel_i"), cfg.sequence.text("channel_s"), {0.0}, offsets);
        for (std::size_t b = 0; b < offsets.size(); ++b) {
            const double wi = f.i.omega_cw[0], ws = f.s.omega_cw[b];
            out.table.add({fmt(tc), fmt(offsets[b]), fmt(wi), fmt(ws),
                           std::abs(ws) > 1e-12 ? fmt(wi / ws) : std::string("nan")});
        }
    }
}

void recipe_fig5_9(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"respiration"});
    const auto base = cfg.spin_system();
    const double tr = cfg.tau_r();
    const int bb_periods = cfg.scan.integer("bb_periods");
    const int ad_periods = cfg.scan.integer("adiabatic_periods");
    const auto bb = cfg.build_sequence();
    const auto adiabatic =
        with(cfg, {"sequence.ramp_span=" + cfg.scan.text("ramp_span"), "sequence.ramp_centre=" + cfg.scan.text("ramp_centre"),
                   "sequence.ramp_repeats=" + std::to_string(ad_periods)})
            .build_sequence();
    out.table.columns = {"series", "offset_i_hz", "offset_s_hz", "mixing_time_s", "efficiency"};
    const struct {
        const char* name;
        const PulseSequence* seq;
        double t;
    } series[] = {{"bb", &bb, bb_periods * tr}, {"adiabatic_bb", &adiabatic, ad_periods * tr}};
    for (const auto& s : series)
        for (double oi : grid_of(cfg, "offsets_i"))
            for (double os : grid_of(cfg, "offsets_s")) {
                const auto r = powder_transfer(cfg, with_offset(with_offset(base, 0, oi), 1, os), *s.seq, {s.t}, true, false);
                out.table.add({s.name, fmt(oi), fmt(os), fmt(s.t), fmt(r.direct[0])});
            }
}

void recipe_sum_of_freq(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"c7"});
    const auto offsets = grid_of(cfg, "offsets");
    const std::string ch = cfg.sequence.text("channels");
    out.table.columns = {"element", "offset_1_hz", "offset_2_hz", "omega_cw_1_hz", "omega_cw_2_hz", "sum_abs_hz"};
    for (const char* element : {"c7", "post"}) {
        const auto seq = with(cfg, {std::string("sequence.element=") + element}).build_sequence();
        const auto f = signed_effective_fields(seq.channel(ch), offsets);
        double worst = 0.0;
        for (std::size_t a = 0; a < offsets.size(); ++a)
            for (std::size_t b = 0; b < offsets.size(); ++b) {
                const double s = std::abs(f.omega_cw[a] + f.omega_cw[b]);
                worst = std::max(worst, s);
                out.table.add({element, fmt(offsets[a]), fmt(offsets[b]), fmt(f.omega_cw[a]), fmt(f.omega_cw[b]), fmt(s)});
            }
        out.manifest.emplace_back(std::string("result.max_sum_abs_hz.") + element, fmt(worst));
    }
}

void recipe_c7_prop(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"c7"});
    const auto base = cfg.spin_system();
    const auto offsets = grid_of(cfg, "offsets");
    const double t_mix = cfg.scan.number("mixing_time");
    out.table.columns = {"element", "offset_1_hz", "offset_2_hz", "direct", "effective"};
    for (const char* element : {"c7", "post"}) {
        const auto seq = with(cfg, {std::string("sequence.element=") + element}).build_sequence();
        double worst = 0.0;
        for (double o1 : offsets)
            for (double o2 : offsets) {
                const auto r = powder_transfer(cfg, with_offset(with_offset(base, 0, o1), 1, o2), seq, {t_mix}, true, true);
                worst = std::max(worst, std::abs(r.direct[0] - r.effective[0]));
                out.table.add({element, fmt(o1), fmt(o2), fmt(r.direct[0]), fmt(r.effective[0])});
            }
        out.manifest.emplace_back(std::string("result.max_discrepancy.") + element, fmt(worst));
    }
}

void recipe_table_adrfdr(const ExperimentConfig& cfg, RecipeOutput& out) {
    require_sequence(cfg, {"rfdr", "adiabatic_rfdr"});
    RfdrProblem pr;
    pr.system = cfg.spin_system();
    pr.spin_rate = cfg.spin_rate();
    pr.pi_duration = cfg.sequence.number("pi_duration");
    pr.pi_amplitude = cfg.sequence.number("pi_amplitude");
    pr.channel = cfg.sequence.text("channel");
    pr.powder = cfg.crystallites();
    pr.options = cfg.assembly();
    pr.rho0 = cfg.start_operator();
    pr.detect = cfg.detect_operator();
    pr.threads = threads_of(cfg);
    const std::string g = cfg.scan.text("grid");
    if (g != "coarse" && g != "full") throw ConfigError("scan.grid must be coarse or full");
    std::vector<int> ns;
    for (double n : cfg.scan.numbers("n_blocks")) {
        if (n < 1 || n != std::floor(n)) throw ConfigError("scan.n_blocks entries must be positive integers");
        ns.push_back(static_cast<int>(n));
    }
    const auto rows = grid_search_adiabatic(ns, g == "coarse" ? coarse_sweep_grid() : full_sweep_grid(), pr);
    out.table.columns = {"n_blocks", "tau_sweep_us", "x_co_deg", "efficiency", "cycle_index"};
    for (const auto& r : rows) {
        out.table.add({std::to_string(r.n_blocks), fmt(r.tau_sweep * 1e6), fmt(to_deg(r.x_co)), fmt(r.efficiency),
                       std::to_string(r.cycle_index)});
        const auto sched = tangential_sweep(r.n_blocks, r.tau_sweep, r.x_co);
        out.extra_files.emplace_back("table_adrfdr_N" + std::to_string(r.n_blocks) + ".delays",
                                     emit_delay_list(sched, cfg.tau_r(), pr.pi_duration));
    }
}

// ---------------------------------------------------------------- registry

struct Recipe {
    RecipeInfo info;
    std::function<std::string()> config;
    Schema scan;
    void (*run)(const ExperimentConfig&, RecipeOutput&);
};

const std::vector<Recipe>& registry() {
    static const std::vector<Recipe> r = {
        {{"fig4_4", "RFDR recoupling strength against the shift of the second pi pulse"},
         [] { return std::string(fig4_4_text); },
         {{"shift_difference_hz", "12000"}, {"relative_shift", "-1 1 41"}},
         recipe_fig4_4},
        {{"fig4_5", "RFDR and adiabatic RFDR build-up over XY-8 blocks"},
         [] { return std::string(glycine_text); },
         {{"max_blocks", "10"},
          {"tau_sweep", "0 2.9 2.5 3.2 3.3 3.4 3.7 3.5 3.7 3.6"},
          {"x_co", "80 80 80 89 80 80 79 79 81 81"}},
         recipe_fig4_5},
        {{"fig4_8", "Fourier coefficients of the RESPIRATION-CP modulation against rf strength"},
         [] { return respiration_text("", "  crystal_file single\n  gamma_angles 1\n", ""); },
         {{"tau_p_fraction", "0.06666666666666667"}, {"rf_ratios", "0.5 1 1.5 2 2.5 3 3.5 4"}, {"k_max", "15"}},
         recipe_fig4_8},
        {{"fig4_9a", "First-order RESPIRATION-CP transfer against rf strength and mixing time"},
         [] {
             return respiration_text("  dipole 1 2 1000 0 0 0\n",
                                     "  spin_rate 16670\n  crystal_file zcw:4\n  gamma_angles 3\n  order 1\n",
                                     "  tau_p 4e-6\n");
         },
         {{"rf_ratios", "0.5 0.75 1 1.25 1.5 1.75 2 2.25 2.5 2.75 3 3.25 3.5 3.75 4"},
          {"mixing_time", "0 6e-3 31"}},
         recipe_fig4_9a},
        {{"fig5_1", "Second-order anisotropic shift coefficient and transfer against pulse length"},
         [] {
             return respiration_text("  shift 2 0 5000 0 0 0 0\n  dipole 1 2 50 0 0 0\n",
                                     "  crystal_file zcw:3\n  gamma_angles 2\n  tail_limit 1e-5\n", "");
         },
         {{"tau_p_list", "2e-6 4e-6 8e-6 12e-6 16e-6 20e-6"},
          {"rf_tau_factor", "25"},
          {"shift_spin", "2"},
          {"mixing_time", "46e-3"}},
         recipe_fig5_1},
        {{"fig5_2", "Second-order isotropic shift coefficient against pulse length"},
         [] {
             return respiration_text("  shift 2 1000 0 0 0 0 0\n",
                                     "  crystal_file single\n  gamma_angles 1\n  tail_limit 1e-5\n", "");
         },
         {{"tau_p_list", "1e-6 3e-6 5e-6 7e-6 9e-6 11e-6 13e-6 15e-6 17e-6 19e-6 21e-6 23e-6"}, {"shift_spin", "2"}},
         recipe_fig5_2},
        {{"fig5_3", "Direct and effective RESPIRATION-CP transfer against isotropic offset"},
         [] {
             return respiration_text("  dipole 1 2 1000 0 0 0\n",
                                     "  crystal_file zcw:3\n  gamma_angles 2\n  tail_limit 1e-5\n  slice_dt 0.5e-6\n",
                                     "");
         },
         {{"tau_p_list", "2e-6 6e-6 10e-6 14e-6"},
          {"mixing_list", "2.4e-3 2.3e-3 2.2e-3 2.2e-3"},
          {"offsets", "-8000 8000 17"},
          {"offset_spin", "2"}},
         recipe_fig5_3},
        {{"fig5_4", "RESPIRATION-CP effective fields over an offset grid"},
         [] { return respiration_text("", "  crystal_file single\n  gamma_angles 1\n", ""); },
         {{"tau_p_list", "2e-6 14e-6"}, {"offsets_i", "-20000 20000 81"}, {"offsets_s", "-20000 20000 81"}},
         recipe_fig5_4},
        {{"fig5_6", "Effective fields of the broadband RESPIRATION-CP variants"},
         [] { return respiration_text("", "  crystal_file single\n  gamma_angles 1\n", "  tau_p 2e-6\n  tau_com 12.5e-6\n"); },
         {{"variants", "bb_nophase bb_sync bb_async"}, {"offsets_i", "-20000 20000 41"}, {"offsets_s", "-20000 20000 41"}},
         recipe_fig5_6},
        {{"fig5_7", "Broadband RESPIRATION-CP fields and transfer for several compensation pulse lengths"},
         [] {
             return respiration_text("  dipole 1 2 1000 0 0 0\n",
                                     "  crystal_file zcw:3\n  gamma_angles 2\n  slice_dt 0.5e-6\n",
                                     "  tau_p 2e-6\n  variant bb_sync\n  tau_com 12.5e-6\n");
         },
         {{"tau_com_list", "12.5e-6 10e-6 15e-6"},
          {"offsets_s", "-10000 10000 21"},
          {"offset_spin", "2"},
          {"mixing_time", "2.2e-3"}},
         recipe_fig5_7},
        {{"fig5_8a", "Ratio of the I and S effective fields against S offset and compensation pulse length"},
         [] {
             return respiration_text("", "  crystal_file single\n  gamma_angles 1\n",
                                     "  tau_p 2e-6\n  variant bb_sync\n  tau_com 12.5e-6\n");
         },
         {{"tau_com", "2.5e-6 25e-6 10"}, {"offsets_s", "-10000 10000 41"}},
         recipe_fig5_8a},
        {{"fig5_9", "Broadband and adiabatic broadband RESPIRATION-CP transfer maps"},
         [] {
             return respiration_text("  dipole 1 2 1000 0 0 0\n",
                                     "  crystal_file zcw:3\n  gamma_angles 2\n  slice_dt 0.5e-6\n",
                                     "  tau_p 2e-6\n  variant bb_sync\n  tau_com 2e-6\n");
         },
         {{"bb_periods", "22"},
          {"adiabatic_periods", "70"},
          {"ramp_span", "4000"},
          {"ramp_centre", "0"},
          {"offsets_i", "-10000 10000 11"},
          {"offsets_s", "-10000 10000 11"}},
         recipe_fig5_9},
        {{"sum_of_freq", "|w_cw1 + w_cw2| maps for C7 and POST-C7"},
         [] { return std::string(c7_text); },
         {{"offsets", "-10000 10000 41"}},
         recipe_sum_of_freq},
        {{"c7_prop", "Direct and effective C7 and POST-C7 transfer over an offset grid"},
         [] { return std::string(c7_text); },
         {{"offsets", "-10000 10000 11"}, {"mixing_time", "3.2e-3"}},
         recipe_c7_prop},
        {{"table_adrfdr", "Grid search for adiabatic RFDR sweep parameters with delay lists"},
         [] {
             std::string t = glycine_text;
             const auto at = t.find("crystal_file zcw:10");
             t.replace(at, std::string("crystal_file zcw:10").size(), "crystal_file zcw:7");
             return t;
         },
         {{"n_blocks", "1 2 3 4 5 6 7 8 9 10"}, {"grid", "coarse"}},
         recipe_table_adrfdr},
    };
    return r;
}

const Recipe& find_recipe(const std::string& name) {
    for (const auto& r : registry())
        if (r.info.name == name) return r;
    throw ConfigError("unknown recipe '" + name + "'");
}

}  // namespace

const std::vector<RecipeInfo>& recipe_list() {
    static const std::vector<RecipeInfo> list = [] {
        std::vector<RecipeInfo> v;
        for (const auto& r : registry()) v.push_back(r.info);
        return v;
    }();
    return list;
}

std::string recipe_default_config(const std::string& name) { return find_recipe(name).config(); }

Schema recipe_scan_schema(const std::string& name) { return find_recipe(name).scan; }

ExperimentConfig recipe_config(const std::string& name, const std::string& config_text,
                               const std::vector<std::string>& overrides, const std::string& base_dir) {
    const auto& r = find_recipe(name);
    auto cfg = parse_config(config_text.empty() ? r.config() : config_text, r.scan, base_dir);
    for (const auto& o : overrides) cfg.set(o);
    return cfg;
}

RecipeOutput run_recipe(const std::string& name, const ExperimentConfig& cfg) {
    const auto& r = find_recipe(name);
    RecipeOutput out;
    out.name = name;
    out.manifest.emplace_back("recipe", name);
    for (auto& kv : cfg.manifest()) out.manifest.push_back(std::move(kv));
    r.run(cfg, out);
    return out;
}

std::string to_csv(const RecipeOutput& out) {
    std::ostringstream os;
    for (const auto& [k, v] : out.manifest) os << "# " << k << " = " << v << '\n';
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    };
    line(out.table.columns);
    for (const auto& row : out.table.rows) line(row);
    return os.str();
}

std::vector<std::string> write_recipe(const RecipeOutput& out, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    auto put = [&](const std::string& file, const std::string& text) {
        const auto path = (std::filesystem::path(dir) / file).string();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + path);
        f << text;
        written.push_back(path);
    };
    put(out.name + ".csv", to_csv(out));
    std::string m;
    for (const auto& [k, v] : out.manifest) m += k + " = " + v + "\n";
    put(out.name + ".manifest", m);
    for (const auto& [file, text] : out.extra_files) put(file, text);
    return written;
}

}  // namespace nmr
