#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nmrsim/core.hpp"

namespace nmr {

struct PulseSegment {
    double duration = 0.0;   // s
    double amplitude = 0.0;  // Hz, nutation frequency
    double phase = 0.0;      // rad
};

// A channel's segment list covers exactly one period and repeats indefinitely.
struct Channel {
    std::string label;
    std::vector<PulseSegment> segments;
    double period = 0.0;  // s

    double total_duration() const;
    // Segment active at time t (periodic extension); t_start receives the
    // absolute start of that segment.
    const PulseSegment& segment_at(double t, double* t_start = nullptr) const;
};

struct PulseSequence {
    std::vector<Channel> channels;
    double tau_r = 0.0;         // rotor period the sequence was built for, s
    std::string rotor_sync;     // e.g. "tau_m = 2 tau_r"

    const Channel& channel(const std::string& label) const;
    const Channel* find(const std::string& label) const;
    // Longest channel period; the span covered by one pass of every list.
    double span() const;
    void validate() const;
    // One segment per line: channel, duration_s, amplitude_Hz, phase_rad.
    std::string dump() const;
};

enum class PhaseCycle { none, XY4, XY8 };

// Two rotor periods with pi pulses centred at tau_r/2 + dt and 3 tau_r/2 - dt.
// XY4/XY8 repeat that unit with the standard phase tables.
PulseSequence build_rfdr(double tau_r, double pi_duration, double pi_amplitude, double delta_tau,
                         PhaseCycle cycle, const std::string& channel = "I");

struct SweepSchedule {
    int n_blocks = 1;
    double tau_sweep = 0.0;  // s
    double x_co = 0.0;       // rad
    std::vector<double> delta_tau;  // s, one per block
};

SweepSchedule tangential_sweep(int n_blocks, double tau_sweep, double x_co);

// One XY-8 block (8 rotor periods) per schedule entry.
PulseSequence build_adiabatic_rfdr(double tau_r, double pi_duration, double pi_amplitude,
                                   const SweepSchedule& schedule, const std::string& channel = "I");

// Delays before/after each pi pulse of the two periods of a unit.
struct RfdrDelays {
    double before_first, after_first, before_second, after_second;  // s
};
RfdrDelays rfdr_delays(double tau_r, double pi_duration, double delta_tau);

enum class RespirationVariant { plain, bb_sync, bb_async, bb_nophase };

struct AmplitudeRamp {
    double span = 0.0;       // Hz, total linear excursion across the repeats
    double centre = 0.0;     // Hz, offset added to the nominal amplitude
    int repeats = 1;         // number of rotor periods the ramp spans
};

struct RespirationParams {
    double tau_r = 0.0;
    double tau_p = 0.0;
    std::string channel_i = "I";
    std::string channel_s = "S";
    double amplitude_i = 0.0;  // Hz, phase-alternating block and short pulse
    double amplitude_s = 0.0;
    int n_periods_per_element = 1;
    RespirationVariant variant = RespirationVariant::plain;
    double tau_com = 0.0;
    double com_amplitude_i = 0.0;  // Hz; zero means use amplitude_i
    double com_amplitude_s = 0.0;
    std::optional<AmplitudeRamp> sweep;  // applied to the I phase-alternating pulses
    // S block runs -x then +x. With identical patterns on both channels the
    // zero-quantum dipolar components cancel, so no transfer would occur.
    bool counter_phase_s = true;
};

PulseSequence build_respiration_cp(const RespirationParams& p);

enum class C7Element { C7, POST };
enum class PhaseDirection { increment, decrement };

PulseSequence build_c7(C7Element element, double spin_rate, PhaseDirection direction,
                       const std::vector<std::string>& channels = {"I"});

struct AmSplit {
    double omega_cw = 0.0;              // Hz, mean signed amplitude
    Vec3 axis = Vec3::UnitX();          // rf axis shared by every segment
    std::vector<PulseSegment> am_component;  // signed amplitudes in `amplitude`, phase unused
    double period = 0.0;
};

// Rejects channels whose phases are not collinear (mod pi).
AmSplit split_am(const PulseSequence& seq, const std::string& channel);

// Gaussian amplitude envelope sampled into n segments over [centre - half, centre + half].
PulseSequence gaussian_pulse(double peak_hz, double centre, double width_sigma, double half_window,
                             int n_segments, const std::string& channel = "I");

}  // namespace nmr
