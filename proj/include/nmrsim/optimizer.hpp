#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nmrsim/powder.hpp"
#include "nmrsim/propagation.hpp"
#include "nmrsim/sequence.hpp"
#include "nmrsim/spinsystem.hpp"

namespace nmr {

// Everything the adiabatic-RFDR objective needs besides the sweep itself.
struct RfdrProblem {
    SpinSystem system;
    double spin_rate = 0.0;     // Hz
    double pi_duration = 0.0;   // s
    double pi_amplitude = 0.0;  // Hz
    std::string channel;
    CrystalliteSet powder;
    AssemblyOptions options;
    Mat rho0;
    Mat detect;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct GridSearchRow {
    int n_blocks = 0;
    double tau_sweep = 0.0;  // s
    double x_co = 0.0;       // rad
    double efficiency = 0.0;
    int cycle_index = 0;  // XY-8 block count at which the maximum occurs
};

struct SweepGrid {
    std::vector<double> tau_sweep;  // s
    std::vector<double> x_co;       // rad
};

// tau_sweep 0..5 us step 0.5 us; x_co 60..85 deg step 5 plus 89 deg.
SweepGrid coarse_sweep_grid();
// tau_sweep 0..20 us step 0.1 us; x_co 1..89 deg step 1.
SweepGrid full_sweep_grid();

// Powder-averaged efficiency after each XY-8 block (index 0 is the start).
std::vector<double> adiabatic_rfdr_curve(const SweepSchedule& schedule, const RfdrProblem& problem);

// For each N the grid maximum of max_b efficiency(b), b <= N. Ties keep the first point in
// tau_sweep-major, x_co-minor order. Schedules that coincide (N <= 3 ignores x_co) are evaluated once.
std::vector<GridSearchRow> grid_search_adiabatic(const std::vector<int>& n_list, const SweepGrid& grid,
                                                 const RfdrProblem& problem);

// Sixteen "<microseconds>u" lines per block; throws ConfigError on a negative delay.
std::string emit_delay_list(const SweepSchedule& schedule, double tau_r, double pi_duration);
// Inverse of emit_delay_list: one delta_tau (s) per block.
std::vector<double> parse_delay_list(const std::string& text, double tau_r, double pi_duration);

struct ScanAxis {
    std::string name;
    std::vector<double> values;
};

struct ScanPoint {
    std::vector<double> values;  // one per axis
    double objective = 0.0;
};

struct ScanResult {
    std::vector<ScanPoint> points;  // first axis slowest
    std::size_t best = 0;           // first maximizer
};

// Exhaustive scan over the Cartesian product of the axes.
ScanResult scan_grid(const std::vector<ScanAxis>& axes,
                     const std::function<double(const std::vector<double>&)>& objective);

}  // namespace nmr
