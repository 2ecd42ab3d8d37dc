#include "nmrsim/propagation.hpp"

#include <algorithm>
#include <cmath>

namespace nmr {

namespace {
constexpr double bp_tol = 1e-13;
}

HamiltonianAssembly::HamiltonianAssembly(const SpinSystem& sys, const PulseSequence& seq, const Euler& crystal,
                                         double spin_rate, const AssemblyOptions& opt)
    : n_(sys.n_spins()), omega_r_(two_pi * spin_rate) {
    if (!(spin_rate > 0.0)) throw ConfigError("spin rate must be positive");
    const int dim = 1 << n_;
    for (auto& m : m_) m = Mat::Zero(dim, dim);
    for (const auto& term : interaction_terms(sys, crystal, spin_rate, opt.rotor_angle)) {
        const Mat s = spin_matrix(term.spin, n_);
        for (int n = -2; n <= 2; ++n) m_[static_cast<std::size_t>(n + 2)] += term.w.at(n) * s;
    }
    slice_dt_ = opt.slice_dt > 0.0 ? opt.slice_dt : tau_r() / 1000.0;

    nuclei_ = sys.nuclei;
    bind(seq);

    if (opt.free_table_steps > 0) {
        table_steps_ = opt.free_table_steps;
        table_h_ = tau_r() / table_steps_;
        auto table = std::make_shared<std::vector<Mat>>();
        table->reserve(static_cast<std::size_t>(table_steps_ + 1));
        Mat u = Mat::Identity(dim, dim);
        table->push_back(u);
        for (int j = 0; j < table_steps_; ++j) {
            u = expm_hermitian(internal((j + 0.5) * table_h_), table_h_) * u;
            table->push_back(u);
        }
        table_ = std::move(table);
    }
}

void HamiltonianAssembly::bind(const PulseSequence& seq) {
    const int dim = 1 << n_;
    rf_.clear();
    for (const auto& ch : seq.channels) {
        RfChannel rc{ch, {}, Mat::Zero(dim, dim), Mat::Zero(dim, dim)};
        double acc = 0.0;
        for (const auto& s : ch.segments) {
            rc.starts.push_back(acc);
            acc += s.duration;
        }
        bool matched = false;
        for (int q = 0; q < n_; ++q)
            if (nuclei_[static_cast<std::size_t>(q)] == ch.label) {
                rc.fx += single_spin_operator(q, Axis::x, n_);
                rc.fy += single_spin_operator(q, Axis::y, n_);
                matched = true;
            }
        if (!matched) throw ConfigError("rf channel '" + ch.label + "' matches no nucleus");
        rf_.push_back(std::move(rc));
    }
}

HamiltonianAssembly HamiltonianAssembly::with_sequence(const PulseSequence& seq) const {
    HamiltonianAssembly out = *this;
    out.bind(seq);
    return out;
}

Mat HamiltonianAssembly::internal(double t) const {
    Mat h = m_[2];
    for (int n = 1; n <= 2; ++n) {
        const Mat x = std::exp(I * (n * omega_r_ * t)) * m_[static_cast<std::size_t>(n + 2)];
        h += x + x.adjoint();
    }
    return h;
}

Mat HamiltonianAssembly::rf_from_state(const std::vector<std::pair<double, double>>& state) const {
    const int dim = 1 << n_;
    Mat h = Mat::Zero(dim, dim);
    for (std::size_t c = 0; c < rf_.size(); ++c) {
        const auto [amp, phase] = state[c];
        if (amp != 0.0) h += two_pi * amp * (std::cos(phase) * rf_[c].fx + std::sin(phase) * rf_[c].fy);
    }
    return h;
}

Mat HamiltonianAssembly::rf(double t) const {
    std::vector<std::pair<double, double>> state;
    for (const auto& rc : rf_) {
        const PulseSegment& s = rc.channel.segment_at(t);
        state.emplace_back(s.amplitude, s.phase);
    }
    return rf_from_state(state);
}

Mat HamiltonianAssembly::hamiltonian(double t) const { return internal(t) + rf(t); }

void HamiltonianAssembly::rf_pieces(
    double t0, double t1,
    std::vector<std::tuple<double, double, std::vector<std::pair<double, double>>>>& out) const {
    std::vector<double> bps{t0, t1};
    for (const auto& rc : rf_) {
        const double p = rc.channel.period;
        for (double k = std::floor(t0 / p); k * p < t1; k += 1.0)
            for (double s : rc.starts) {
                const double bp = k * p + s;
                if (bp > t0 + bp_tol && bp < t1 - bp_tol) bps.push_back(bp);
            }
    }
    std::sort(bps.begin(), bps.end());
    std::vector<double> uniq;
    for (double b : bps)
        if (uniq.empty() || b - uniq.back() > bp_tol) uniq.push_back(b);
    uniq.back() = t1;
    out.clear();
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
        const double a = uniq[i], b = uniq[i + 1];
        const double mid = 0.5 * (a + b);
        std::vector<std::pair<double, double>> state;
        for (const auto& rc : rf_) {
            const double p = rc.channel.period;
            const double local = mid - std::floor(mid / p) * p;
            auto it = std::upper_bound(rc.starts.begin(), rc.starts.end(), local);
            const std::size_t idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - rc.starts.begin() - 1));
            const PulseSegment& s = rc.channel.segments[idx];
            state.emplace_back(s.amplitude, s.phase);
        }
        out.emplace_back(a, b, std::move(state));
    }
}

Mat HamiltonianAssembly::sliced(double t0, double t1, const Mat& rf_part) const {
    const double len = t1 - t0;
    const int n = std::max(1, static_cast<int>(std::ceil(len / slice_dt_ - 1e-9)));
    const double h = len / n;
    Mat u = Mat::Identity(rf_part.rows(), rf_part.cols());
    for (int j = 0; j < n; ++j) u = expm_hermitian(internal(t0 + (j + 0.5) * h) + rf_part, h) * u;
    return u;
}

Mat HamiltonianAssembly::free_evolution(double t0, double t1) const {
    const double h = table_h_;
    const long ga = static_cast<long>(std::ceil(t0 / h - 1e-7));
    const long gb = static_cast<long>(std::floor(t1 / h + 1e-7));
    const int dim = 1 << n_;
    const Mat zero_rf = Mat::Zero(dim, dim);
    if (gb <= ga) return sliced(t0, t1, zero_rf);
    auto split = [this](long g) {
        const long q = g >= 0 ? g / table_steps_ : -((-g + table_steps_ - 1) / table_steps_);
        return std::make_pair(q, static_cast<std::size_t>(g - q * table_steps_));
    };
    const auto [qa, ra] = split(ga);
    const auto [qb, rb] = split(gb);
    const auto& tab = *table_;
    Mat u = tab[rb] * matrix_power(tab.back(), qb - qa) * tab[ra].adjoint();
    const double ta = ga * h, tb = gb * h;
    if (ta - t0 > bp_tol) u = u * expm_hermitian(internal(0.5 * (t0 + ta)), ta - t0);
    if (t1 - tb > bp_tol) u = expm_hermitian(internal(0.5 * (tb + t1)), t1 - tb) * u;
    return u;
}

Mat HamiltonianAssembly::propagate(double t0, double t1) const {
    const int dim = 1 << n_;
    Mat u = Mat::Identity(dim, dim);
    if (t1 <= t0) return u;
    std::vector<std::tuple<double, double, std::vector<std::pair<double, double>>>> pieces;
    rf_pieces(t0, t1, pieces);
    for (const auto& [a, b, state] : pieces) {
        const bool rf_off = std::all_of(state.begin(), state.end(), [](const auto& s) { return s.first == 0.0; });
        if (rf_off && table_steps_ > 0 && (b - a) > 2.0 * table_h_)
            u = free_evolution(a, b) * u;
        else
            u = sliced(a, b, rf_from_state(state)) * u;
    }
    return u;
}

Mat matrix_power(const Mat& u, long k) {
    if (k < 0) return matrix_power(u.adjoint(), -k);
    Mat result = Mat::Identity(u.rows(), u.cols());
    Mat base = u;
    while (k > 0) {
        if (k & 1) result = result * base;
        base = base * base;
        k >>= 1;
    }
    return result;
}

double normalized_overlap(const Mat& rho, const Mat& rho0, const Mat& detect) {
    const double n0 = std::sqrt((rho0.adjoint() * rho0).trace().real());
    const double nd = std::sqrt((detect.adjoint() * detect).trace().real());
    if (n0 == 0.0 || nd == 0.0) throw ConfigError("zero initial or detection operator");
    return (rho * detect.adjoint()).trace().real() / (n0 * nd);
}

TransferCurve transfer_efficiency(const HamiltonianAssembly& a, const Mat& rho0, const Mat& detect,
                                  const std::vector<double>& times) {
    TransferCurve c;
    Mat u = Mat::Identity(rho0.rows(), rho0.cols());
    double t = 0.0;
    for (double tt : times) {
        if (tt < t) throw std::invalid_argument("sample times must ascend");
        u = a.propagate(t, tt) * u;
        t = tt;
        c.times.push_back(tt);
        c.efficiency.push_back(normalized_overlap(u * rho0 * u.adjoint(), rho0, detect));
    }
    return c;
}

TransferCurve transfer_efficiency_periodic(const HamiltonianAssembly& a, const Mat& rho0, const Mat& detect,
                                           double period, int cycles) {
    const Mat up = a.propagate(0.0, period);
    TransferCurve c;
    Mat rho = rho0;
    for (int m = 0; m <= cycles; ++m) {
        if (m > 0) rho = up * rho * up.adjoint();
        c.times.push_back(m * period);
        c.efficiency.push_back(normalized_overlap(rho, rho0, detect));
    }
    return c;
}

}  // namespace nmr
