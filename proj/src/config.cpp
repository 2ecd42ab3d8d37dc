#include "nmrsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "nmrsim/spin.hpp"

namespace nmr {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string t; is >> t;) out.push_back(t);
    return out;
}

double parse_number(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError(what + ": not a number: '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw ConfigError(what + ": not a number: '" + s + "'");
    return v;
}

int parse_int(const std::string& s, const std::string& what) {
    const double v = parse_number(s, what);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(what + ": not an integer: '" + s + "'");
    return static_cast<int>(v);
}

// Spin index as written (1-based).
int spin_index(const std::string& s, int n, const std::string& what) {
    const int v = parse_int(s, what);
    if (v < 1 || v > n) throw ConfigError(what + ": spin " + s + " does not exist");
    return v - 1;
}

// Shortest text that parses back to the same double.
std::string format_number(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// IUPAC frequency ratios relative to 1H (magnitudes).
const std::map<std::string, double>& frequency_ratios() {
    static const std::map<std::string, double> r{
        {"1H", 1.0},           {"13C", 0.25145020045668346}, {"15N", 0.10136767},
        {"19F", 0.94094011},   {"29Si", 0.19867187},         {"31P", 0.40480742},
    };
    return r;
}

const std::set<std::string> sequence_names{"none", "rfdr", "adiabatic_rfdr", "respiration", "c7", "gaussian"};

}  // namespace

Section::Section(std::string name, const Schema& schema) : name_(std::move(name)) {
    for (const auto& [k, v] : schema) {
        order_.push_back(k);
        values_[k] = v;
    }
}

void Section::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown key '" + key + "' in section " + name_);
    it->second = value;
}

const std::string& Section::text(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing key '" + key + "' in section " + name_);
    return it->second;
}

double Section::number(const std::string& key) const { return parse_number(text(key), name_ + "." + key); }
int Section::integer(const std::string& key) const { return parse_int(text(key), name_ + "." + key); }

bool Section::flag(const std::string& key) const {
    const auto& v = text(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(name_ + "." + key + ": expected true or false, got '" + v + "'");
}

std::vector<double> Section::numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& t : split_ws(text(key))) out.push_back(parse_number(t, name_ + "." + key));
    return out;
}

Schema par_schema() {
    return {
        {"proton_frequency", "0"},  // Hz; required when shifts use the ppm suffix
        {"spin_rate", "10000"},
        {"rotor_angle", format_number(to_deg(magic_angle))},
        {"crystal_file", "zcw:10"},
        {"gamma_angles", "9"},
        {"slice_dt", "auto"},
        {"free_table_steps", "1000"},
        {"np", "10"},
        {"dwell", "auto"},
        {"start_operator", "I1z"},
        {"detect_operator", "I2z"},
        {"threads", "0"},
        {"truncation", "auto"},
        {"fourier_samples", "65536"},
        {"tail_limit", "1e-6"},
        {"order", "2"},
        {"exact_tol_hz", "1e-3"},
        {"near_threshold_hz", "0"},
    };
}

Schema sequence_schema(const std::string& name) {
    if (name == "none") return {{"name", name}};
    if (name == "rfdr")
        return {{"name", name},           {"channel", "auto"},    {"pi_duration", "5e-6"},
                {"pi_amplitude", "100000"}, {"delta_tau", "0"},   {"cycle", "xy8"}};
    if (name == "adiabatic_rfdr")
        return {{"name", name},         {"channel", "auto"},     {"pi_duration", "5e-6"}, {"pi_amplitude", "100000"},
                {"n_blocks", "3"},      {"tau_sweep", "2.5e-6"}, {"x_co", "80"}};
    if (name == "respiration")
        return {{"name", name},
                {"channel_i", "auto"},
                {"channel_s", "auto"},
                {"tau_p", "6e-6"},
                {"amplitude_i", "auto"},
                {"amplitude_s", "auto"},
                {"n_periods", "1"},
                {"variant", "plain"},
                {"tau_com", "0"},
                {"com_amplitude_i", "0"},
                {"com_amplitude_s", "0"},
                {"ramp_span", "0"},
                {"ramp_centre", "0"},
                {"ramp_repeats", "1"},
                {"counter_phase_s", "true"}};
    if (name == "c7")
        return {{"name", name}, {"element", "c7"}, {"direction", "increment"}, {"channels", "auto"}};
    if (name == "gaussian")
        return {{"name", name},       {"channel", "auto"},     {"peak", "25000"}, {"centre", "0"},
                {"sigma", "10e-6"},   {"half_window", "20e-6"}, {"n_segments", "64"}};
    throw ConfigError("unknown sequence '" + name + "'");
}

double larmor_frequency(const std::string& nucleus, double proton_frequency) {
    const auto& r = frequency_ratios();
    auto it = r.find(nucleus);
    if (it == r.end()) throw ConfigError("no frequency ratio known for nucleus '" + nucleus + "'");
    return it->second * proton_frequency;
}

SpinSystem ExperimentConfig::spin_system() const {
    SpinSystem sys;
    sys.nuclei = nuclei;
    const int n = static_cast<int>(nuclei.size());
    const double proton = par.number("proton_frequency");
    auto shift_value = [&](const std::string& tok, int spin, const std::string& what) {
        if (!tok.empty() && tok.back() == 'p') {
            if (!(proton > 0.0)) throw ConfigError(what + ": ppm value needs par.proton_frequency");
            const double larmor = larmor_frequency(nuclei[static_cast<std::size_t>(spin)], proton);
            return parse_number(tok.substr(0, tok.size() - 1), what) * 1e-6 * larmor;
        }
        return parse_number(tok, what);
    };
    for (const auto& t : shift_lines) {
        if (t.size() != 8) throw ConfigError("shift: expected 'shift <spin> <iso> <aniso> <eta> <alpha> <beta> <gamma>'");
        ShiftSpec s;
        s.spin = spin_index(t[1], n, "shift");
        s.iso = shift_value(t[2], s.spin, "shift iso");
        s.aniso = shift_value(t[3], s.spin, "shift aniso");
        s.eta = parse_number(t[4], "shift eta");
        s.pas = {deg(parse_number(t[5], "shift alpha")), deg(parse_number(t[6], "shift beta")),
                 deg(parse_number(t[7], "shift gamma"))};
        sys.shifts.push_back(s);
    }
    for (const auto& t : dipole_lines) {
        if (t.size() != 7) throw ConfigError("dipole: expected 'dipole <i> <j> <b_hz> <alpha> <beta> <gamma>'");
        DipoleSpec d;
        d.i = spin_index(t[1], n, "dipole");
        d.j = spin_index(t[2], n, "dipole");
        d.b = parse_number(t[3], "dipole b");
        d.pas = {deg(parse_number(t[4], "dipole alpha")), deg(parse_number(t[5], "dipole beta")),
                 deg(parse_number(t[6], "dipole gamma"))};
        sys.dipoles.push_back(d);
    }
    for (const auto& t : j_lines) {
        if (t.size() != 4) throw ConfigError("jcoupling: expected 'jcoupling <i> <j> <J_hz>'");
        JSpec j;
        j.i = spin_index(t[1], n, "jcoupling");
        j.j = spin_index(t[2], n, "jcoupling");
        j.j_hz = parse_number(t[3], "jcoupling J");
        sys.couplings.push_back(j);
    }
    sys.validate();
    return sys;
}

CrystalliteSet ExperimentConfig::crystallites() const {
    const std::string spec = par.text("crystal_file");
    const int ng = par.integer("gamma_angles");
    if (ng < 1) throw ConfigError("par.gamma_angles must be at least 1");
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "zcw") return zcw(parse_int(arg, "crystal_file zcw"), ng);
    if (kind == "single") return grid(1, 1, 1);
    if (kind == "grid") {
        std::string a = arg;
        std::replace(a.begin(), a.end(), ',', ' ');
        const auto t = split_ws(a);
        if (t.size() != 2) throw ConfigError("crystal_file grid:<n_alpha>,<n_beta> expected");
        return grid(parse_int(t[0], "grid"), parse_int(t[1], "grid"), ng);
    }
    if (kind == "file") {
        std::filesystem::path p(arg);
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        return load_crystallite_file(p.string(), ng);
    }
    throw ConfigError("unknown crystal_file scheme '" + spec + "' (zcw:<m>, grid:<a>,<b>, file:<path>, single)");
}

AssemblyOptions ExperimentConfig::assembly() const {
    AssemblyOptions o;
    o.slice_dt = par.number("slice_dt");
    o.free_table_steps = par.integer("free_table_steps");
    o.rotor_angle = deg(par.number("rotor_angle"));
    return o;
}

ModelOptions ExperimentConfig::model_options() const {
    ModelOptions o;
    o.K = par.integer("truncation");
    o.samples = par.integer("fourier_samples");
    o.tail_limit = par.number("tail_limit");
    o.rotor_angle = deg(par.number("rotor_angle"));
    return o;
}

EffectiveOptions ExperimentConfig::effective_options() const {
    EffectiveOptions o;
    o.order = par.integer("order");
    o.exact_tol_hz = par.number("exact_tol_hz");
    const double near = par.number("near_threshold_hz");
    if (near > 0.0) {
        NearResonanceOptions n;
        n.exact_tol_hz = o.exact_tol_hz;
        n.near_threshold_hz = near;
        o.near = n;
    }
    return o;
}

Mat ExperimentConfig::start_operator() const {
    return operator_from_label(par.text("start_operator"), static_cast<int>(nuclei.size()));
}

Mat ExperimentConfig::detect_operator() const {
    return operator_from_label(par.text("detect_operator"), static_cast<int>(nuclei.size()));
}

PulseSequence ExperimentConfig::build_sequence() const {
    const std::string name = sequence_name();
    const Section& s = sequence;
    const double tr = tau_r();
    if (name == "none") return PulseSequence{{}, tr, "free evolution"};
    if (name == "rfdr") {
        const std::string c = s.text("cycle");
        PhaseCycle cycle;
        if (c == "none")
            cycle = PhaseCycle::none;
        else if (c == "xy4")
            cycle = PhaseCycle::XY4;
        else if (c == "xy8")
            cycle = PhaseCycle::XY8;
        else
            throw ConfigError("sequence.cycle must be none, xy4 or xy8");
        return build_rfdr(tr, s.number("pi_duration"), s.number("pi_amplitude"), s.number("delta_tau"), cycle,
                          s.text("channel"));
    }
    if (name == "adiabatic_rfdr")
        return build_adiabatic_rfdr(tr, s.number("pi_duration"), s.number("pi_amplitude"),
                                    tangential_sweep(s.integer("n_blocks"), s.number("tau_sweep"), deg(s.number("x_co"))),
                                    s.text("channel"));
    if (name == "respiration") {
        RespirationParams p;
        p.tau_r = tr;
        p.tau_p = s.number("tau_p");
        p.channel_i = s.text("channel_i");
        p.channel_s = s.text("channel_s");
        p.amplitude_i = s.number("amplitude_i");
        p.amplitude_s = s.number("amplitude_s");
        p.n_periods_per_element = s.integer("n_periods");
        const std::string v = s.text("variant");
        if (v == "plain")
            p.variant = RespirationVariant::plain;
        else if (v == "bb_sync")
            p.variant = RespirationVariant::bb_sync;
        else if (v == "bb_async")
            p.variant = RespirationVariant::bb_async;
        else if (v == "bb_nophase")
            p.variant = RespirationVariant::bb_nophase;
        else
            throw ConfigError("sequence.variant must be plain, bb_sync, bb_async or bb_nophase");
        p.tau_com = s.number("tau_com");
        p.com_amplitude_i = s.number("com_amplitude_i");
        p.com_amplitude_s = s.number("com_amplitude_s");
        const double span = s.number("ramp_span"), centre = s.number("ramp_centre");
        if (span != 0.0 || centre != 0.0) p.sweep = AmplitudeRamp{span, centre, s.integer("ramp_repeats")};
        p.counter_phase_s = s.flag("counter_phase_s");
        return build_respiration_cp(p);
    }
    if (name == "c7") {
        const std::string e = s.text("element"), d = s.text("direction");
        if (e != "c7" && e != "post") throw ConfigError("sequence.element must be c7 or post");
        if (d != "increment" && d != "decrement") throw ConfigError("sequence.direction must be increment or decrement");
        return build_c7(e == "c7" ? C7Element::C7 : C7Element::POST, spin_rate(),
                        d == "increment" ? PhaseDirection::increment : PhaseDirection::decrement,
                        split_ws(s.text("channels")));
    }
    if (name == "gaussian")
        return gaussian_pulse(s.number("peak"), s.number("centre"), s.number("sigma"), s.number("half_window"),
                              s.integer("n_segments"), s.text("channel"));
    throw ConfigError("unknown sequence '" + name + "'");
}

double ExperimentConfig::dwell() const { return par.number("dwell"); }

void ExperimentConfig::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ConfigError("override must read section.key=value: '" + assignment + "'");
    const std::string sec = assignment.substr(0, dot);
    const std::string key = assignment.substr(dot + 1, eq - dot - 1);
    const std::string val = trim(assignment.substr(eq + 1));
    if (sec == "par")
        par.set(key, val);
    else if (sec == "scan")
        scan.set(key, val);
    else if (sec == "sequence") {
        if (key == "name") {
            Section fresh("sequence", sequence_schema(val));
            sequence = fresh;
        } else {
            sequence.set(key, val);
        }
    } else {
        throw ConfigError("overrides apply to par, sequence or scan, not '" + sec + "'");
    }
    finalize();
}

void ExperimentConfig::finalize() {
    if (nuclei.empty()) throw ConfigError("spinsys: 'nuclei' line is required");
    for (const auto& c : channels)
        if (std::find(nuclei.begin(), nuclei.end(), c) == nuclei.end())
            throw ConfigError("spinsys: channel '" + c + "' matches no nucleus");
    if (!(spin_rate() > 0.0)) throw ConfigError("par.spin_rate must be positive");
    if (par.text("slice_dt") == "auto") par.set("slice_dt", format_number(tau_r() / 1000.0));
    if (!(par.number("slice_dt") > 0.0)) throw ConfigError("par.slice_dt must be positive");
    if (par.text("truncation") == "auto") par.set("truncation", std::to_string(auto_truncation));
    if (par.integer("np") < 1) throw ConfigError("par.np must be at least 1");
    if (par.number("proton_frequency") < 0.0) throw ConfigError("par.proton_frequency must not be negative");

    // Distinct nucleus labels in order of appearance.
    std::vector<std::string> labels;
    for (const auto& n : nuclei)
        if (std::find(labels.begin(), labels.end(), n) == labels.end()) labels.push_back(n);
    auto fill = [&](const char* key, const std::string& v) {
        if (sequence.has(key) && sequence.text(key) == "auto") sequence.set(key, v);
    };
    fill("channel", labels.front());
    fill("channels", labels.front());
    fill("channel_i", labels.front());
    fill("channel_s", labels.size() > 1 ? labels[1] : labels.front());
    fill("amplitude_i", format_number(2.0 * spin_rate()));
    fill("amplitude_s", format_number(2.0 * spin_rate()));

    const auto seq = build_sequence();
    if (par.text("dwell") == "auto") par.set("dwell", format_number(seq.span() > 0.0 ? seq.span() : tau_r()));
    if (!(dwell() > 0.0)) throw ConfigError("par.dwell must be positive");
    spin_system();
    start_operator();
    detect_operator();
    crystallites().validate();
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::manifest() const {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("spinsys.nuclei", [&] {
        std::string s;
        for (const auto& n : nuclei) s += (s.empty() ? "" : " ") + n;
        return s;
    }());
    auto join = [](const std::vector<std::string>& t) {
        std::string s;
        for (std::size_t i = 1; i < t.size(); ++i) s += (i > 1 ? " " : "") + t[i];
        return s;
    };
    for (std::size_t i = 0; i < shift_lines.size(); ++i)
        out.emplace_back("spinsys.shift." + std::to_string(i + 1), join(shift_lines[i]));
    for (std::size_t i = 0; i < dipole_lines.size(); ++i)
        out.emplace_back("spinsys.dipole." + std::to_string(i + 1), join(dipole_lines[i]));
    for (std::size_t i = 0; i < j_lines.size(); ++i)
        out.emplace_back("spinsys.jcoupling." + std::to_string(i + 1), join(j_lines[i]));
    for (const Section* s : {&par, &sequence, &scan})
        for (const auto& k : s->keys()) out.emplace_back(s->name() + "." + k, s->text(k));
    return out;
}

ExperimentConfig parse_config(const std::string& text, const Schema& scan_schema, const std::string& base_dir) {
    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    cfg.par = Section("par", par_schema());
    cfg.scan = Section("scan", scan_schema);
    std::map<std::string, std::string> seq_values;
    std::vector<std::string> seq_order;

    std::istringstream is(text);
    std::string line, section;
    std::set<std::string> seen_sections, seen_keys;
    int lineno = 0;
    bool have_nuclei = false;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (section.empty()) {
            const auto t = split_ws(line);
            if (t.size() != 2 || t[1] != "{") throw ConfigError(where + "expected '<section> {'");
            section = t[0];
            if (section != "spinsys" && section != "par" && section != "sequence" && section != "scan")
                throw ConfigError(where + "unknown section '" + section + "'");
            if (!seen_sections.insert(section).second) throw ConfigError(where + "duplicate section '" + section + "'");
            continue;
        }
        if (line == "}") {
            section.clear();
            continue;
        }
        const auto t = split_ws(line);
        const std::string& key = t[0];
        const std::string value = trim(line.substr(key.size()));
        if (section == "spinsys") {
            if (key == "nuclei") {
                if (have_nuclei) throw ConfigError(where + "duplicate 'nuclei'");
                cfg.nuclei.assign(t.begin() + 1, t.end());
                for (const auto& n : cfg.nuclei)
                    if (!frequency_ratios().count(n)) throw ConfigError(where + "unknown nucleus '" + n + "'");
                have_nuclei = true;
            } else if (key == "channels") {
                cfg.channels.assign(t.begin() + 1, t.end());
            } else if (key == "shift") {
                cfg.shift_lines.push_back(t);
            } else if (key == "dipole") {
                cfg.dipole_lines.push_back(t);
            } else if (key == "jcoupling") {
                cfg.j_lines.push_back(t);
            } else {
                throw ConfigError(where + "unknown spinsys entry '" + key + "'");
            }
            continue;
        }
        if (value.empty()) throw ConfigError(where + "key '" + key + "' has no value");
        if (!seen_keys.insert(section + "." + key).second) throw ConfigError(where + "duplicate key '" + key + "'");
        try {
            if (section == "par")
                cfg.par.set(key, value);
            else if (section == "scan")
                cfg.scan.set(key, value);
            else {
                seq_values[key] = value;
                seq_order.push_back(key);
            }
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    if (!section.empty()) throw ConfigError("section '" + section + "' is not closed");

    const std::string name = seq_values.count("name") ? seq_values["name"] : "none";
    if (!sequence_names.count(name)) throw ConfigError("unknown sequence '" + name + "'");
    cfg.sequence = Section("sequence", sequence_schema(name));
    for (const auto& k : seq_order) cfg.sequence.set(k, seq_values[k]);
    cfg.finalize();
    return cfg;
}

ExperimentConfig load_config(const std::string& path, const Schema& scan_schema) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path();
    return parse_config(ss.str(), scan_schema, dir.empty() ? "." : dir.string());
}

}  // namespace nmr
