#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nmrsim/aht.hpp"
#include "nmrsim/powder.hpp"
#include "nmrsim/propagation.hpp"
#include "nmrsim/sequence.hpp"
#include "nmrsim/spinsystem.hpp"

namespace nmr {

// (key, default). Defaults spelled "auto" are resolved from other values and the
// resolved number is what the manifest reports.
using Schema = std::vector<std::pair<std::string, std::string>>;

// Key/value block restricted to its schema; every schema key always has a value.
class Section {
public:
    Section() = default;
    Section(std::string name, const Schema& schema);

    const std::string& name() const { return name_; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);  // ConfigError on unknown key
    const std::string& text(const std::string& key) const;
    double number(const std::string& key) const;
    int integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<double> numbers(const std::string& key) const;  // whitespace-separated list
    const std::vector<std::string>& keys() const { return order_; }

private:
    std::string name_;
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
};

Schema par_schema();
// Keys of the named sequence (rfdr, adiabatic_rfdr, respiration, c7, gaussian, none).
Schema sequence_schema(const std::string& name);

// Larmor frequency (Hz, magnitude) of a nucleus label such as "13C" for the given 1H frequency.
double larmor_frequency(const std::string& nucleus, double proton_frequency);

// Parsed experiment. The spin system is kept as tokens so that a later change of
// proton_frequency re-scales ppm values.
struct ExperimentConfig {
    std::vector<std::string> channels;
    std::vector<std::string> nuclei;
    std::vector<std::vector<std::string>> shift_lines, dipole_lines, j_lines;
    Section par;
    Section sequence;
    Section scan;
    std::string base_dir;

    std::string sequence_name() const { return sequence.text("name"); }
    SpinSystem spin_system() const;
    double spin_rate() const { return par.number("spin_rate"); }
    double tau_r() const { return 1.0 / spin_rate(); }
    CrystalliteSet crystallites() const;
    AssemblyOptions assembly() const;
    ModelOptions model_options() const;
    EffectiveOptions effective_options() const;
    Mat start_operator() const;
    Mat detect_operator() const;
    PulseSequence build_sequence() const;
    // Time between detection points; defaults to one pass of the sequence.
    double dwell() const;

    // "section.key=value" for par, sequence or scan.
    void set(const std::string& assignment);
    // Checks every value and resolves "auto" entries; called by the parser and after set().
    void finalize();
    // Every resolved key, "section.key" -> value, in schema order.
    std::vector<std::pair<std::string, std::string>> manifest() const;
};

// Strict parser: unknown sections or keys, malformed numbers, eta outside [0, 1],
// ppm values without proton_frequency and overlapping pulses all throw ConfigError.
ExperimentConfig parse_config(const std::string& text, const Schema& scan_schema = {},
                              const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path, const Schema& scan_schema = {});

}  // namespace nmr
