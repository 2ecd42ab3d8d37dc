#include "nmrsim/sequence.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace nmr {

namespace {

constexpr double time_tol = 1e-12;

void push(std::vector<PulseSegment>& segs, double duration, double amplitude, double phase) {
    if (duration > time_tol) segs.push_back({duration, amplitude, phase});
}

double wrap_phase(double p) {
    double w = std::fmod(p, two_pi);
    if (w < 0) w += two_pi;
    return w;
}

}  // namespace

double Channel::total_duration() const {
    double s = 0.0;
    for (const auto& seg : segments) s += seg.duration;
    return s;
}

const PulseSegment& Channel::segment_at(double t, double* t_start) const {
    if (segments.empty()) throw std::logic_error("channel has no segments");
    const double cycles = std::floor(t / period);
    double local = t - cycles * period;
    double start = cycles * period;
    for (const auto& seg : segments) {
        if (local < seg.duration || &seg == &segments.back()) {
            if (t_start) *t_start = start;
            return seg;
        }
        local -= seg.duration;
        start += seg.duration;
    }
    return segments.back();
}

const Channel* PulseSequence::find(const std::string& label) const {
    for (const auto& c : channels)
        if (c.label == label) return &c;
    return nullptr;
}

const Channel& PulseSequence::channel(const std::string& label) const {
    const Channel* c = find(label);
    if (!c) throw ConfigError("sequence has no channel '" + label + "'");
    return *c;
}

double PulseSequence::span() const {
    double s = 0.0;
    for (const auto& c : channels) s = std::max(s, c.period);
    return s;
}

void PulseSequence::validate() const {
    for (const auto& c : channels) {
        for (const auto& seg : c.segments)
            if (!(seg.duration > 0.0) || seg.amplitude < 0.0)
                throw ConfigError("invalid segment on channel " + c.label);
        if (std::abs(c.total_duration() - c.period) > time_tol)
            throw ConfigError("segment durations do not add up to the period on channel " + c.label);
    }
}

std::string PulseSequence::dump() const {
    std::ostringstream os;
    char buf[160];
    for (const auto& c : channels)
        for (const auto& seg : c.segments) {
            std::snprintf(buf, sizeof buf, "%s %.12e %.12e %.12e\n", c.label.c_str(), seg.duration,
                          seg.amplitude, seg.phase);
            os << buf;
        }
    return os.str();
}

RfdrDelays rfdr_delays(double tau_r, double p, double dt) {
    RfdrDelays d{};
    d.before_first = tau_r / 2.0 + dt - p / 2.0;
    d.after_first = tau_r - d.before_first - p;
    d.before_second = tau_r / 2.0 - dt - p / 2.0;
    d.after_second = tau_r - d.before_second - p;
    return d;
}

namespace {

void check_rfdr_geometry(double tau_r, double p, double dt) {
    if (!(p > 0.0 && p < tau_r)) throw ConfigError("pi pulse must be shorter than the rotor period");
    // Separation between the two pulses of a unit is tau_r - 2 dt, and across
    // the unit boundary tau_r + 2 dt; both must fit a pulse.
    if (std::abs(2.0 * dt) > tau_r - p + time_tol)
        throw ConfigError("rfdr pulses overlap: |delta_tau| exceeds (tau_r - p)/2");
}

void append_rfdr_unit(std::vector<PulseSegment>& segs, double tau_r, double p, double amp, double dt,
                      double phase_a, double phase_b) {
    const double lead = tau_r / 2.0 + dt - p / 2.0;
    push(segs, lead, 0.0, 0.0);
    push(segs, p, amp, phase_a);
    push(segs, tau_r - 2.0 * dt - p, 0.0, 0.0);
    push(segs, p, amp, phase_b);
    push(segs, lead, 0.0, 0.0);
}

const std::vector<std::pair<double, double>>& xy8_units() {
    static const std::vector<std::pair<double, double>> u = {
        {0.0, pi / 2}, {0.0, pi / 2}, {pi / 2, 0.0}, {pi / 2, 0.0}};
    return u;
}

}  // namespace

PulseSequence build_rfdr(double tau_r, double p, double amp, double dt, PhaseCycle cycle,
                         const std::string& channel) {
    check_rfdr_geometry(tau_r, p, dt);
    std::vector<std::pair<double, double>> units;
    switch (cycle) {
        case PhaseCycle::none: units = {{0.0, 0.0}}; break;
        case PhaseCycle::XY4: units = {{0.0, pi / 2}, {0.0, pi / 2}}; break;
        case PhaseCycle::XY8: units = xy8_units(); break;
    }
    Channel ch{channel, {}, 2.0 * tau_r * static_cast<double>(units.size())};
    for (const auto& [a, b] : units) append_rfdr_unit(ch.segments, tau_r, p, amp, dt, a, b);
    PulseSequence seq{{ch}, tau_r, "tau_m = " + std::to_string(2 * units.size()) + " tau_r"};
    seq.validate();
    return seq;
}

SweepSchedule tangential_sweep(int n, double tau_sweep, double x_co) {
    if (n < 1) throw ConfigError("number of blocks must be at least 1");
    SweepSchedule s{n, tau_sweep, x_co, {}};
    if (n == 1) {
        s.delta_tau = {0.0};
        return s;
    }
    if (!(x_co > 0.0)) throw ConfigError("tangential cut-off must be positive");
    if (n >= 4 && !(x_co < pi / 2)) throw ConfigError("tangential cut-off must be below 90 degrees");
    for (int i = 0; i < n; ++i) {
        const double u = -1.0 + 2.0 * i / static_cast<double>(n - 1);
        // Endpoints and centre are exact so that x_co -> 90 deg stays finite for N <= 3.
        double ratio;
        if (2 * i == n - 1)
            ratio = 0.0;
        else if (i == 0 || i == n - 1)
            ratio = u;
        else
            ratio = std::tan(x_co * u) / std::tan(x_co);
        s.delta_tau.push_back(0.5 * tau_sweep * ratio);
    }
    return s;
}

PulseSequence build_adiabatic_rfdr(double tau_r, double p, double amp, const SweepSchedule& schedule,
                                   const std::string& channel) {
    Channel ch{channel, {}, 8.0 * tau_r * static_cast<double>(schedule.delta_tau.size())};
    for (double dt : schedule.delta_tau) {
        check_rfdr_geometry(tau_r, p, dt);
        for (const auto& [a, b] : xy8_units()) append_rfdr_unit(ch.segments, tau_r, p, amp, dt, a, b);
    }
    PulseSequence seq{{ch}, tau_r, "one XY-8 block of 8 tau_r per sweep step"};
    seq.validate();
    return seq;
}

PulseSequence build_respiration_cp(const RespirationParams& p) {
    if (!(p.tau_p > 0.0 && p.tau_p < p.tau_r)) throw ConfigError("short pulse must be shorter than tau_r");
    const bool bb = p.variant != RespirationVariant::plain;
    if (bb && !(p.tau_com > 0.0 && p.tau_com + p.tau_p < p.tau_r))
        throw ConfigError("compensation and short pulse overflow the rotor period");
    if (p.n_periods_per_element < 1) throw ConfigError("periods per element must be at least 1");
    const bool alternating = p.variant == RespirationVariant::bb_sync || p.variant == RespirationVariant::bb_async;
    int n = p.n_periods_per_element * (alternating ? 2 : 1);
    if (p.sweep) n = std::max(1, p.sweep->repeats);

    auto build = [&](bool is_i) {
        const double amp = is_i ? p.amplitude_i : p.amplitude_s;
        double com = is_i ? p.com_amplitude_i : p.com_amplitude_s;
        if (com == 0.0) com = amp;
        Channel ch{is_i ? p.channel_i : p.channel_s, {}, n * p.tau_r};
        const double lead = (!is_i && p.counter_phase_s) ? pi : 0.0;
        for (int m = 0; m < n; ++m) {
            double block_amp = amp;
            if (is_i && p.sweep) {
                const double frac = n > 1 ? static_cast<double>(m) / (n - 1) - 0.5 : 0.0;
                block_amp = amp + p.sweep->centre + p.sweep->span * frac;
                if (block_amp < 0.0) throw ConfigError("amplitude ramp drives the rf amplitude negative");
            }
            if (!bb) {
                const double half = (p.tau_r - p.tau_p) / 2.0;
                push(ch.segments, half, block_amp, lead);
                push(ch.segments, half, block_amp, pi - lead);
            } else {
                const double half = (p.tau_r - p.tau_p - p.tau_com) / 2.0;
                bool plus = true;
                if (p.variant == RespirationVariant::bb_sync) plus = (m % 2 == 0);
                if (p.variant == RespirationVariant::bb_async) plus = ((m + (is_i ? 0 : 1)) % 2 == 0);
                push(ch.segments, half, block_amp, lead);
                push(ch.segments, p.tau_com, com, plus ? 0.0 : pi);
                push(ch.segments, half, block_amp, pi - lead);
            }
            push(ch.segments, p.tau_p, amp, 0.0);
        }
        return ch;
    };
    PulseSequence seq{{build(true), build(false)}, p.tau_r, "tau_m = tau_r"};
    if (alternating) seq.rotor_sync = "tau_m = 2 tau_r";
    if (p.sweep) seq.rotor_sync = "swept over " + std::to_string(n) + " tau_r";
    seq.validate();
    return seq;
}

PulseSequence build_c7(C7Element element, double spin_rate, PhaseDirection direction,
                       const std::vector<std::string>& channels) {
    if (!(spin_rate > 0.0)) throw ConfigError("spin rate must be positive");
    const double amp = 7.0 * spin_rate;
    const double turn = 1.0 / amp;  // duration of a 2 pi rotation
    const double sign = direction == PhaseDirection::increment ? 1.0 : -1.0;
    std::vector<PulseSegment> segs;
    for (int j = 0; j < 7; ++j) {
        const double phi = wrap_phase(sign * two_pi * j / 7.0);
        if (element == C7Element::C7) {
            segs.push_back({turn, amp, phi});
            segs.push_back({turn, amp, wrap_phase(phi + pi)});
        } else {
            segs.push_back({turn / 4.0, amp, phi});
            segs.push_back({turn, amp, wrap_phase(phi + pi)});
            segs.push_back({0.75 * turn, amp, phi});
        }
    }
    PulseSequence seq;
    seq.tau_r = 1.0 / spin_rate;
    seq.rotor_sync = "tau_m = 2 tau_r";
    for (const auto& label : channels) seq.channels.push_back({label, segs, 2.0 / spin_rate});
    seq.validate();
    return seq;
}

AmSplit split_am(const PulseSequence& seq, const std::string& label) {
    const Channel& ch = seq.channel(label);
    AmSplit s;
    s.period = ch.period;
    double ref = 0.0;
    bool have_ref = false;
    for (const auto& seg : ch.segments)
        if (seg.amplitude != 0.0) {
            ref = seg.phase;
            have_ref = true;
            break;
        }
    s.axis = Vec3(std::cos(ref), std::sin(ref), 0.0);
    std::vector<double> signed_amp;
    double area = 0.0;
    for (const auto& seg : ch.segments) {
        double sgn = 1.0;
        if (have_ref && seg.amplitude != 0.0) {
            const double d = wrap_phase(seg.phase - ref);
            if (std::min(d, two_pi - d) < 1e-9)
                sgn = 1.0;
            else if (std::abs(d - pi) < 1e-9)
                sgn = -1.0;
            else
                throw ConfigError("channel " + label + " is not amplitude-modulated (non-collinear phases)");
        }
        signed_amp.push_back(sgn * seg.amplitude);
        area += sgn * seg.amplitude * seg.duration;
    }
    s.omega_cw = area / ch.period;
    for (std::size_t i = 0; i < ch.segments.size(); ++i)
        s.am_component.push_back({ch.segments[i].duration, signed_amp[i] - s.omega_cw, 0.0});
    return s;
}

PulseSequence gaussian_pulse(double peak_hz, double centre, double sigma, double half_window,
                             int n_segments, const std::string& channel) {
    if (n_segments < 1 || !(half_window > 0.0)) throw ConfigError("invalid gaussian pulse discretisation");
    Channel ch{channel, {}, 2.0 * half_window};
    const double h = 2.0 * half_window / n_segments;
    for (int j = 0; j < n_segments; ++j) {
        const double t = centre - half_window + (j + 0.5) * h;
        const double x = (t - centre) / sigma;
        ch.segments.push_back({h, peak_hz * std::exp(-0.5 * x * x), 0.0});
    }
    PulseSequence seq{{ch}, 0.0, "single pulse"};
    return seq;
}

}  // namespace nmr
