#pragma once

#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "nmrsim/core.hpp"
#include "nmrsim/sequence.hpp"
#include "nmrsim/spinsystem.hpp"

namespace nmr {

struct AssemblyOptions {
    double slice_dt = 0.0;        // s; 0 selects min(segment, tau_r / 1000)
    int free_table_steps = 1000;  // rf-off intervals reuse a per-rotor-period table; 0 disables
    double rotor_angle = magic_angle;
};

// Rotating-frame Hamiltonian for one crystallite:
// H(t) = sum_n M_n exp(i n w_r t) + sum_channels 2 pi a(t) (cos phi Fx + sin phi Fy).
class HamiltonianAssembly {
public:
    HamiltonianAssembly(const SpinSystem& sys, const PulseSequence& seq, const Euler& crystal, double spin_rate,
                        const AssemblyOptions& opt = {});

    int n_spins() const { return n_; }
    double omega_r() const { return omega_r_; }
    double tau_r() const { return two_pi / omega_r_; }
    double slice_dt() const { return slice_dt_; }

    Mat hamiltonian(double t) const;
    Mat internal(double t) const;
    Mat rf(double t) const;
    const Mat& internal_fourier(int n) const { return m_[static_cast<std::size_t>(n + 2)]; }

    // Ordered product of midpoint-sampled slice exponentials, t0 -> t1.
    Mat propagate(double t0, double t1) const;

    // Same crystallite and internal Hamiltonian driven by another sequence; shares the free-evolution table.
    HamiltonianAssembly with_sequence(const PulseSequence& seq) const;

private:
    struct RfChannel {
        Channel channel;
        std::vector<double> starts;  // segment start offsets within one period
        Mat fx, fy;
    };

    void bind(const PulseSequence& seq);
    Mat rf_from_state(const std::vector<std::pair<double, double>>& state) const;
    // Constant-rf pieces covering [t0, t1]: (start, end, per-channel (amp, phase)).
    void rf_pieces(double t0, double t1,
                   std::vector<std::tuple<double, double, std::vector<std::pair<double, double>>>>& out) const;
    Mat sliced(double t0, double t1, const Mat& rf_part) const;
    Mat free_evolution(double t0, double t1) const;

    int n_;
    double omega_r_;
    double slice_dt_;
    std::array<Mat, 5> m_;
    std::vector<RfChannel> rf_;
    std::vector<std::string> nuclei_;

    int table_steps_ = 0;
    double table_h_ = 0.0;
    std::shared_ptr<const std::vector<Mat>> table_;  // U(0 -> j h), j = 0..steps; back() is U(tau_r)
};

struct TransferCurve {
    std::vector<double> times;
    std::vector<double> efficiency;
};

// Re Tr(rho D^dag) normalized by sqrt(Tr(rho0^2) Tr(D^dag D)), so perfect transfer reads 1.
double normalized_overlap(const Mat& rho, const Mat& rho0, const Mat& detect);

// Samples at the given ascending times, propagating incrementally from t = 0.
TransferCurve transfer_efficiency(const HamiltonianAssembly& a, const Mat& rho0, const Mat& detect,
                                  const std::vector<double>& times);

// The Hamiltonian must be periodic with `period`; samples m * period for m = 0..cycles.
TransferCurve transfer_efficiency_periodic(const HamiltonianAssembly& a, const Mat& rho0, const Mat& detect,
                                           double period, int cycles);

Mat matrix_power(const Mat& u, long k);

}  // namespace nmr
