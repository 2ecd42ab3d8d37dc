#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nmrsim/aht.hpp"
#include "nmrsim/config.hpp"
#include "nmrsim/optimizer.hpp"
#include "nmrsim/parallel.hpp"
#include "nmrsim/quaternion.hpp"
#include "nmrsim/recipes.hpp"

namespace {

using namespace nmr;

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string dir_of(const std::string& path) {
    const auto p = std::filesystem::path(path).parent_path();
    return p.empty() ? "." : p.string();
}

ExperimentConfig load(const std::string& path, const std::vector<std::string>& sets) {
    auto cfg = load_config(path);
    for (const auto& s : sets) cfg.set(s);
    return cfg;
}

void emit(const RecipeOutput& out, const std::string& dir) {
    if (dir.empty()) {
        std::cout << to_csv(out);
        for (const auto& [file, text] : out.extra_files) std::cout << "\n# file " << file << '\n' << text;
        return;
    }
    for (const auto& p : write_recipe(out, dir)) std::cerr << "wrote " << p << '\n';
}

// Plain powder-averaged transfer curve sampled every dwell for np points.
RecipeOutput simulate_plain(const ExperimentConfig& cfg) {
    const auto sys = cfg.spin_system();
    const auto seq = cfg.build_sequence();
    const auto set = cfg.crystallites();
    const auto opt = cfg.assembly();
    const Mat rho0 = cfg.start_operator(), det = cfg.detect_operator();
    std::vector<double> times;
    for (int j = 0; j < cfg.par.integer("np"); ++j) times.push_back(j * cfg.dwell());
    std::vector<std::vector<double>> curves(set.size());
    parallel_for(set.size(), static_cast<unsigned>(std::max(0, cfg.par.integer("threads"))), [&](std::size_t c) {
        HamiltonianAssembly a(sys, seq, set.items[c].angles, cfg.spin_rate(), opt);
        curves[c] = transfer_efficiency(a, rho0, det, times).efficiency;
    });
    const auto avg = powder_average(curves, set);
    RecipeOutput out;
    out.name = "simulate";
    out.manifest = cfg.manifest();
    out.table.columns = {"time_s", "efficiency"};
    for (std::size_t j = 0; j < times.size(); ++j) out.table.add({fmt(times[j]), fmt(avg[j])});
    return out;
}

void print_matrix_hz(const Mat& m) {
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            const cd v = m(r, c) / two_pi;
            std::printf("%s(%.6g,%.6g)", c ? " " : "", v.real(), v.imag());
        }
        std::printf("\n");
    }
}

int effective_cmd(const ExperimentConfig& cfg, int order, int crystallite, bool dump) {
    const auto sys = cfg.spin_system();
    const auto seq = cfg.build_sequence();
    const auto set = cfg.crystallites();
    if (crystallite < 0 || crystallite >= static_cast<int>(set.size()))
        throw ConfigError("--crystallite is outside the powder set");
    const auto mopt = cfg.model_options();
    auto eopt = cfg.effective_options();
    eopt.order = order;
    const auto frames = build_frames(sys, seq, cfg.spin_rate(), mopt);
    const auto m = build_model(sys, frames, set.items[static_cast<std::size_t>(crystallite)].angles, cfg.spin_rate(),
                               mopt.rotor_angle);
    const auto h = effective_hamiltonian(m, eopt);
    std::printf("frames\t%s\n", frames.amplitude_modulated ? "amplitude_modulated" : "general");
    std::printf("order\t%d\n", h.order);
    std::printf("tau_c_prime_s\t%.10g\n", h.tau_c_prime);
    if (h.tau_c) std::printf("tau_c_s\t%.10g\n", *h.tau_c);
    for (std::size_t q = 0; q < h.big.size(); ++q)
        std::printf("spin %zu\tomega_cw_hz %.10g\taxis %.6f %.6f %.6f\tK %d\n", q + 1, h.big[q].omega_cw,
                    h.big[q].axis.x(), h.big[q].axis.y(), h.big[q].axis.z(), m.freqs().K[q]);
    std::printf("hamiltonian_hz\n");
    print_matrix_hz(h.matrix);
    if (dump) {
        const double near = eopt.near ? eopt.near->near_threshold_hz : 0.0;
        std::cout << dump_tuples(m, eopt.exact_tol_hz, near, eopt.prune);
    }
    return 0;
}

// "<channel>:<first>:<last>:<count>" per channel, comma separated; every grid must have the same count.
int fields_cmd(const ExperimentConfig& cfg, const std::string& spec) {
    const auto seq = cfg.build_sequence();
    std::vector<std::string> channels;
    std::vector<std::vector<double>> grids;
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');) {
        std::vector<std::string> f;
        std::stringstream is(item);
        for (std::string t; std::getline(is, t, ':');) f.push_back(t);
        if (f.size() != 4) throw ConfigError("--sweep entries read <channel>:<first>:<last>:<count>");
        double a, b;
        int n;
        try {
            a = std::stod(f[1]);
            b = std::stod(f[2]);
            n = std::stoi(f[3]);
        } catch (const std::exception&) {
            throw ConfigError("--sweep: malformed number in '" + item + "'");
        }
        if (n < 1) throw ConfigError("--sweep: count must be positive");
        std::vector<double> g;
        for (int i = 0; i < n; ++i) g.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
        channels.push_back(f[0]);
        grids.push_back(g);
    }
    if (channels.empty()) throw ConfigError("--sweep needs at least one channel");
    const auto rows = offset_sweep(seq, channels, grids);
    std::vector<std::string> head;
    for (const auto& c : channels) head.push_back("offset_" + c + "_hz");
    for (const auto& c : channels) head.push_back("omega_cw_" + c + "_hz");
    for (const auto& c : channels)
        for (const char* ax : {"x", "y", "z"}) head.push_back("axis_" + c + "_" + ax);
    head.push_back("hetero_metric_hz");
    head.push_back("homo_metric_hz");
    for (std::size_t i = 0; i < head.size(); ++i) std::cout << (i ? "," : "") << head[i];
    std::cout << '\n';
    for (const auto& r : rows) {
        std::vector<std::string> cells;
        for (double o : r.offsets) cells.push_back(fmt(o));
        for (double w : r.omega_cw) cells.push_back(fmt(w));
        for (const auto& a : r.axis)
            for (int k = 0; k < 3; ++k) cells.push_back(fmt(a[k]));
        cells.push_back(fmt(r.hetero_metric));
        cells.push_back(fmt(r.homo_metric));
        for (std::size_t i = 0; i < cells.size(); ++i) std::cout << (i ? "," : "") << cells[i];
        std::cout << '\n';
    }
    return 0;
}

std::vector<int> parse_block_range(const std::string& s) {
    std::vector<int> out;
    try {
        const auto dots = s.find("..");
        if (dots != std::string::npos) {
            const int a = std::stoi(s.substr(0, dots)), b = std::stoi(s.substr(dots + 2));
            for (int n = a; n <= b; ++n) out.push_back(n);
        } else {
            std::stringstream ss(s);
            for (std::string t; std::getline(ss, t, ',');) out.push_back(std::stoi(t));
        }
    } catch (const std::exception&) {
        throw ConfigError("--n-blocks reads <a>..<b> or a comma list");
    }
    if (out.empty()) throw ConfigError("--n-blocks selects no block counts");
    for (int n : out)
        if (n < 1) throw ConfigError("--n-blocks entries must be positive");
    return out;
}

int optimize_cmd(const ExperimentConfig& cfg, const std::string& blocks, bool full, const std::string& out_dir) {
    const std::string name = cfg.sequence_name();
    if (name != "rfdr" && name != "adiabatic_rfdr")
        throw ConfigError("optimize-rfdr needs an rfdr or adiabatic_rfdr sequence block");
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
    pr.threads = static_cast<unsigned>(std::max(0, cfg.par.integer("threads")));
    const auto rows = grid_search_adiabatic(parse_block_range(blocks), full ? full_sweep_grid() : coarse_sweep_grid(), pr);
    std::cout << "N\ttau_sweep_us\tx_co_deg\tefficiency\tcycle_index\n";
    for (const auto& r : rows) {
        std::cout << r.n_blocks << '\t' << fmt(r.tau_sweep * 1e6) << '\t' << fmt(to_deg(r.x_co)) << '\t'
                  << fmt(r.efficiency) << '\t' << r.cycle_index << '\n';
        const auto text = emit_delay_list(tangential_sweep(r.n_blocks, r.tau_sweep, r.x_co), cfg.tau_r(), pr.pi_duration);
        if (out_dir.empty()) {
            std::cout << "# delays N=" << r.n_blocks << '\n' << text;
        } else {
            std::filesystem::create_directories(out_dir);
            const auto path = std::filesystem::path(out_dir) / ("delays_N" + std::to_string(r.n_blocks) + ".txt");
            std::ofstream f(path);
            if (!f) throw ConfigError("cannot write " + path.string());
            f << text;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spin dynamics under MAS: direct propagation, effective Hamiltonians and recipes"};
    app.require_subcommand(1);

    std::string config, recipe, out_dir, sweep, blocks = "1..10";
    std::vector<std::string> sets;
    int order = 1, crystallite = 0;
    bool dump = false, coarse = false, full = false;

    auto* list = app.add_subcommand("list", "List the built-in recipes");

    auto* sim = app.add_subcommand("simulate", "Run a recipe or a plain transfer simulation");
    sim->add_option("--config", config, "Configuration file (a recipe falls back to its built-in one)");
    sim->add_option("--recipe", recipe, "Recipe name");
    sim->add_option("--set", sets, "Override section.key=value")->take_all();
    sim->add_option("--out", out_dir, "Output directory (default: stdout)");

    auto* eff = app.add_subcommand("effective", "Effective Hamiltonian for one crystallite");
    eff->add_option("--config", config)->required();
    eff->add_option("--order", order)->check(CLI::IsMember({1, 2}));
    eff->add_option("--crystallite", crystallite, "Index into the powder set");
    eff->add_flag("--dump-tuples", dump, "List every frequency tuple with its class");
    eff->add_option("--set", sets)->take_all();

    auto* fields = app.add_subcommand("effective-fields", "Effective field sweep over rf offsets");
    fields->add_option("--config", config)->required();
    fields->add_option("--sweep", sweep, "<channel>:<first>:<last>:<count>[,...]")->required();
    fields->add_option("--set", sets)->take_all();

    auto* opt = app.add_subcommand("optimize-rfdr", "Grid search over adiabatic RFDR sweeps");
    opt->add_option("--config", config)->required();
    opt->add_option("--n-blocks", blocks, "<a>..<b> or comma list");
    auto* c_flag = opt->add_flag("--coarse", coarse, "tau_sweep step 0.5 us, x_co step 5 deg");
    opt->add_flag("--full", full, "tau_sweep step 0.1 us, x_co step 1 deg")->excludes(c_flag);
    opt->add_option("--set", sets)->take_all();
    opt->add_option("--out", out_dir, "Directory for the delay lists (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    try {
        if (*list) {
            for (const auto& r : recipe_list()) std::cout << r.name << '\t' << r.summary << '\n';
            return 0;
        }
        if (*sim) {
            if (!recipe.empty()) {
                const std::string text = config.empty() ? std::string() : read_file(config);
                const auto cfg = recipe_config(recipe, text, sets, config.empty() ? "." : dir_of(config));
                emit(run_recipe(recipe, cfg), out_dir);
                return 0;
            }
            if (config.empty()) throw ConfigError("simulate needs --config or --recipe");
            emit(simulate_plain(load(config, sets)), out_dir);
            return 0;
        }
        if (*eff) return effective_cmd(load(config, sets), order, crystallite, dump);
        if (*fields) return fields_cmd(load(config, sets), sweep);
        if (*opt) return optimize_cmd(load(config, sets), blocks, full, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const NumericalGuard& e) {
        std::cerr << "numerical guard: " << e.what() << '\n';
        return exit_numerical;
    }
    return 0;
}
