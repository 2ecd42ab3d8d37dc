#pragma once

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nmrsim/core.hpp"
#include "nmrsim/quaternion.hpp"
#include "nmrsim/sequence.hpp"
#include "nmrsim/spinsystem.hpp"

namespace nmr {

inline constexpr int default_truncation = 30;
inline constexpr int default_samples = 65536;
inline constexpr double default_tail_limit = 1e-6;
// Passing this as K selects the smallest truncation whose tail passes the limit.
inline constexpr int auto_truncation = -1;

// Interaction-frame expansion of one spin's operators.
// Frame propagator U(t) = V(t) exp(-i 2 pi omega_cw t F.I) with V periodic in tau_m.
// a[j][j'][k+K] are Fourier coefficients of b_{j,j'}(t) = 2 Tr(I_{j'} V^dag I_j V), where
// j is a conventional axis and j' a row of `basis` (x', y', z' with z' along F).
struct FourierCoefficientSet {
    double omega_m = 0.0;   // Hz
    double omega_cw = 0.0;  // Hz, signed
    int K = 0;
    Mat3 basis = Mat3::Identity();
    std::array<std::array<std::vector<cd>, 3>, 3> a;
    double tail_energy = 0.0;  // fraction of total energy beyond |k| > K
    // Filled by the amplitude-modulated path only: coefficients of cos and sin of
    // the modulation angle.
    std::vector<cd> az, ay;

    bool rotated() const { return omega_cw != 0.0; }
    cd raw(int j, int jp, int k) const;
    // Coefficient of I_{j'} (rotated basis) times exp(i k w_m t) exp(i l w_cw t) in U^dag I_j U.
    cd coefficient(int j, int jp, int k, int l) const;
    // Same expansion mapped to conventional target axes: W(j, c).
    Eigen::Matrix3cd operator_matrix(int k, int l) const;
    // Truncated Fourier series of b_{j,j'} summed at time t.
    cd evaluate(int j, int jp, double t) const;
};

// Full spectrum of cos/sin of the modulation angle for an amplitude-modulated channel.
struct AmSpectrum {
    std::vector<cd> az, ay;  // index k + M/2 for k in [-M/2, M/2)
    int samples = 0;

    cd z(int k) const { return az[static_cast<std::size_t>(k + samples / 2)]; }
    cd y(int k) const { return ay[static_cast<std::size_t>(k + samples / 2)]; }
    double tail_fraction(int K) const;
    int suggest_truncation(double limit) const;
};

AmSpectrum am_spectrum(const AmSplit& split, double tau_m, int samples = default_samples);

// Throws NumericalGuard when the tail beyond K exceeds `tail_limit` (message names a sufficient K).
FourierCoefficientSet am_coefficients(const AmSplit& split, double tau_m, int K = default_truncation,
                                      int samples = default_samples, double tail_limit = default_tail_limit);

FourierCoefficientSet general_coefficients(const Channel& ch, double offset, int K = default_truncation,
                                           int samples = default_samples, double tail_limit = default_tail_limit);
FourierCoefficientSet general_coefficients(const PulseSequence& seq, const std::string& channel, double offset,
                                           int K = default_truncation, int samples = default_samples,
                                           double tail_limit = default_tail_limit);

struct FrequencyTuple {
    int n = 0;
    std::array<int, 3> k{};
    std::array<int, 3> l{};

    auto operator<=>(const FrequencyTuple&) const = default;
    std::string str(int n_spins) const;
};

// Fundamental frequencies in rad/s.
struct FrequencySet {
    double omega_r = 0.0;
    std::vector<double> omega_m;
    std::vector<double> omega_cw;
    std::vector<int> K;  // truncation per spin

    double of(const FrequencyTuple& t) const;
};

struct NearResonanceReport {
    FrequencyTuple tuple;
    double delta_omega_near = 0.0;  // Hz
    int absorbed_into_spin = 0;
};

struct ResonanceResult {
    std::vector<FrequencyTuple> resonant;
    std::vector<NearResonanceReport> near;
};

// Supports list which spins carry nonzero indices (single spins and pairs).
ResonanceResult enumerate_resonances(const FrequencySet& f, const std::vector<std::vector<int>>& supports,
                                     double exact_tol_hz = 1e-3, double near_threshold_hz = 0.0);

struct FourierComponentSet {
    FrequencySet freqs;
    std::map<FrequencyTuple, Mat> components;
};

// Interaction terms expanded in per-spin frames; components are evaluated on demand.
class ComponentModel {
public:
    ComponentModel(std::vector<InteractionTerm> terms, std::vector<FourierCoefficientSet> frames, double spin_rate);

    int n_spins() const { return n_; }
    const FrequencySet& freqs() const { return freqs_; }
    const std::vector<FourierCoefficientSet>& frames() const { return frames_; }
    const std::vector<InteractionTerm>& terms() const { return terms_; }
    std::vector<std::vector<int>> supports() const;

    Mat component(const FrequencyTuple& t) const;
    // Cheap upper bound on max_abs(component(t)).
    double component_bound(const FrequencyTuple& t) const;
    // Every tuple whose component can be nonzero after pruning negligible frame entries.
    std::vector<FrequencyTuple> all_tuples(double prune = 1e-14) const;
    FourierComponentSet materialize(double prune = 1e-14) const;
    // Sum over materialized components at time t.
    Mat evaluate(double t, double prune = 1e-14) const;

private:
    const Eigen::Matrix3cd& w(int spin, int k, int l) const;
    bool active(int spin, int k, int l, double prune) const;

    int n_;
    std::vector<InteractionTerm> terms_;
    std::vector<FourierCoefficientSet> frames_;
    FrequencySet freqs_;
    std::vector<std::vector<Eigen::Matrix3cd>> w_;  // per spin, index (k+K)*3 + l+1
    std::vector<std::vector<double>> w_norm_;
    std::array<std::array<Mat, 3>, 3> ops_;  // ops_[spin][axis]
    std::map<std::pair<int, int>, std::array<Mat, 9>> pair_ops_;  // I_ia I_jb, index 3a + b
};

// Assemble every component over the full tuple range.
FourierComponentSet assemble_components(const ComponentModel& model, double prune = 1e-14);

struct EffectiveHamiltonian {
    int order = 1;
    Mat matrix;
    double tau_c_prime = 0.0;          // s, stroboscopic sub-period
    std::optional<double> tau_c;        // s, full period when commensurate
    std::vector<EffectiveRotation> big;  // per spin: signed omega_cw (Hz) and axis, conventional frame
};

EffectiveHamiltonian first_order(const ComponentModel& m, const std::vector<FrequencyTuple>& resonant);

// -1/2 sum_w [H_w^dag, H_w]/w + sum_w [H_0, H_w]/w over frequency-grouped components,
// H_0 gathering every |w| <= exact_tol.
EffectiveHamiltonian second_order(const ComponentModel& m, double exact_tol_hz = 1e-3, double prune = 1e-14);

struct NearResonanceOptions {
    double exact_tol_hz = 1e-3;
    double near_threshold_hz = 1000.0;
    double max_fraction_of_rf = 0.1;
    double mean_rf_hz = 0.0;  // 0 disables the fraction check
};

struct CorrectedModel {
    ComponentModel model;
    EffectiveHamiltonian h1;
    std::optional<NearResonanceReport> report;
};

// Absorbs the strongest near resonance into the l = +1 spin's effective field,
// re-enumerates exact resonances and adds the residual longitudinal term.
CorrectedModel near_resonance_correction(const ComponentModel& m, const NearResonanceOptions& opt);

// Sub-period (tau_c') and commensurate full period from the frame frequencies.
void fill_periods(EffectiveHamiltonian& h, const ComponentModel& m, double tau_c_prime);

// U(N tau_c') in the rotating frame: exp(-i G N tau') exp(-i Hbar N tau'),
// G = sum_q 2 pi omega_cw_q F_q.I_q.
Mat effective_propagate(const EffectiveHamiltonian& h, int N);
// Interaction-frame part only.
Mat effective_interaction_propagate(const EffectiveHamiltonian& h, int N);

// Interaction terms with isotropic shifts removed (they move into the frame).
std::vector<InteractionTerm> strip_isotropic(std::vector<InteractionTerm> terms, const SpinSystem& sys);
double isotropic_offset(const SpinSystem& sys, int spin);

// Best rational p/q approximation with q <= max_den; nullopt when none within tol.
std::optional<std::pair<long, long>> rational_approx(double x, long max_den = 1000000, double tol = 1e-9);

// Tab-separated tuple dump: tuple, frequency (Hz), component norm, class.
std::string dump_tuples(const ComponentModel& m, double exact_tol_hz, double near_threshold_hz, double prune = 1e-14);

enum class FramePolicy { automatic, amplitude_modulated, general };

struct ModelOptions {
    FramePolicy policy = FramePolicy::automatic;
    int K = auto_truncation;
    int samples = default_samples;
    double tail_limit = default_tail_limit;
    double rotor_angle = magic_angle;
};

// One frame per spin from the rf on its channel (none: free precession). Amplitude-modulated
// frames are rf-only and leave isotropic shifts in the interaction terms; general frames
// absorb each spin's isotropic offset. `automatic` picks the amplitude-modulated path when
// every channel's phases are collinear and falls back to the general one otherwise.
struct FrameSet {
    std::vector<FourierCoefficientSet> frames;
    bool amplitude_modulated = false;
};

// Frames depend on the sequence and isotropic offsets only, so one set serves every crystallite.
FrameSet build_frames(const SpinSystem& sys, const PulseSequence& seq, double spin_rate, const ModelOptions& opt = {});
ComponentModel build_model(const SpinSystem& sys, const FrameSet& frames, const Euler& crystal, double spin_rate,
                           double rotor_angle = magic_angle);
ComponentModel build_model(const SpinSystem& sys, const PulseSequence& seq, const Euler& crystal, double spin_rate,
                           const ModelOptions& opt = {});

// Smallest common multiple of tau_r and every frame's modulation period; throws when incommensurate.
double common_sub_period(const ComponentModel& m);

struct EffectiveOptions {
    int order = 1;
    double exact_tol_hz = 1e-3;
    double prune = 1e-14;
    std::optional<NearResonanceOptions> near;  // absorb the strongest near resonance first
};

// First order (optionally plus second order) with periods filled in.
EffectiveHamiltonian effective_hamiltonian(const ComponentModel& m, const EffectiveOptions& opt = {});

}  // namespace nmr
