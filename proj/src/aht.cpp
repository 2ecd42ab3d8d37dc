#include "nmrsim/aht.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "nmrsim/spin.hpp"

namespace nmr {

namespace {

// Fourier coefficients a_k (|k| <= M/2) of b sampled at midpoints (s + 1/2) tau / M.
std::vector<cd> midpoint_spectrum(const std::vector<double>& samples) {
    const int m = static_cast<int>(samples.size());
    std::vector<cd> in(samples.begin(), samples.end()), out;
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    std::vector<cd> a(static_cast<std::size_t>(m));
    for (int idx = 0; idx < m; ++idx) {
        const int k = idx < m / 2 ? idx : idx - m;  // signed frequency for this bin
        a[static_cast<std::size_t>(k + m / 2)] = out[static_cast<std::size_t>(idx)] *
                                                 std::exp(-I * (pi * k / m)) / static_cast<double>(m);
    }
    return a;
}

int check_samples(int samples) {
    if (samples < 64 || (samples & (samples - 1)) != 0)
        throw ConfigError("sample count must be a power of two >= 64");
    return samples;
}

// Shared back end: Heisenberg rotation of V(t) at midpoints, projected on `basis`.
FourierCoefficientSet analyse(const std::vector<Mat3>& qv, const Mat3& basis, double omega_m, double omega_cw,
                              int K, double tail_limit) {
    const int m = static_cast<int>(qv.size());
    if (K != auto_truncation && (K < 0 || 2 * K + 1 > m))
        throw ConfigError("truncation K out of range for the sample count");
    std::vector<double> energy(static_cast<std::size_t>(m / 2 + 1), 0.0);  // energy at |k|
    double total = 0.0;
    std::vector<double> b(static_cast<std::size_t>(m));
    std::array<std::array<std::vector<cd>, 3>, 3> spectra;
    for (int j = 0; j < 3; ++j)
        for (int jp = 0; jp < 3; ++jp) {
            for (int s = 0; s < m; ++s) b[static_cast<std::size_t>(s)] = basis.row(jp).dot(qv[static_cast<std::size_t>(s)].col(j));
            auto spec = midpoint_spectrum(b);
            for (int k = -m / 2; k < m / 2; ++k) {
                const double e = std::norm(spec[static_cast<std::size_t>(k + m / 2)]);
                energy[static_cast<std::size_t>(std::abs(k))] += e;
                total += e;
            }
            spectra[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)] = std::move(spec);
        }
    if (K == auto_truncation) {
        // Smallest K meeting the tail limit, with a floor that keeps short expansions well resolved.
        double acc = energy[0];
        K = 0;
        while (K < m / 2 - 1 && 1.0 - acc / total > tail_limit) acc += energy[static_cast<std::size_t>(++K)];
        K = std::max(K, 4);
    }
    FourierCoefficientSet f;
    f.omega_m = omega_m;
    f.omega_cw = omega_cw;
    f.K = K;
    f.basis = basis;
    for (int j = 0; j < 3; ++j)
        for (int jp = 0; jp < 3; ++jp) {
            const auto& spec = spectra[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)];
            f.a[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)].assign(spec.begin() + (m / 2 - K),
                                                                                  spec.begin() + (m / 2 + K + 1));
        }
    double kept = 0.0;
    for (int k = 0; k <= K; ++k) kept += energy[static_cast<std::size_t>(k)];
    f.tail_energy = std::max(0.0, 1.0 - kept / total);
    if (f.tail_energy > tail_limit) {
        int suggest = K;
        double acc = kept;
        while (suggest < m / 2 && 1.0 - acc / total > tail_limit) acc += energy[static_cast<std::size_t>(++suggest)];
        std::ostringstream os;
        os << "Fourier truncation K = " << K << " leaves tail energy " << f.tail_energy << " > " << tail_limit
           << "; use K >= " << suggest;
        throw NumericalGuard(os.str());
    }
    return f;
}

// Rotated basis rows x', y', z' with z' along f.
Mat3 rotated_basis(const Vec3& f) {
    const Vec3 z = f.normalized();
    Vec3 x = Vec3::UnitZ().cross(z);
    if (x.norm() < 1e-12) x = Vec3::UnitX();
    x.normalize();
    const Vec3 y = z.cross(x);
    Mat3 b;
    b.row(0) = x.transpose();
    b.row(1) = y.transpose();
    b.row(2) = z.transpose();
    return b;
}

Quaternion axis_rotation(const Vec3& n, double angle) {
    const double s = std::sin(angle / 2.0);
    return {n.x() * s, n.y() * s, n.z() * s, std::cos(angle / 2.0)};
}

std::vector<double> am_angles(const AmSplit& split, double tau_m, int m) {
    std::vector<double> beta(static_cast<std::size_t>(m));
    double start = 0.0, acc = 0.0;
    std::size_t seg = 0;
    const auto& segs = split.am_component;
    for (int s = 0; s < m; ++s) {
        const double t = (s + 0.5) * tau_m / m;
        while (seg + 1 < segs.size() && t >= start + segs[seg].duration) {
            acc += two_pi * segs[seg].amplitude * segs[seg].duration;
            start += segs[seg].duration;
            ++seg;
        }
        beta[static_cast<std::size_t>(s)] = segs.empty() ? 0.0 : acc + two_pi * segs[seg].amplitude * (t - start);
    }
    return beta;
}

}  // namespace

cd FourierCoefficientSet::raw(int j, int jp, int k) const {
    if (std::abs(k) > K) return 0.0;
    return a[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)][static_cast<std::size_t>(k + K)];
}

cd FourierCoefficientSet::coefficient(int j, int jp, int k, int l) const {
    if (!rotated()) return l == 0 ? raw(j, jp, k) : cd(0.0);
    switch (jp) {
        case 0: return l == 0 ? cd(0.0) : 0.5 * (raw(j, 0, k) - I * static_cast<double>(l) * raw(j, 1, k));
        case 1: return l == 0 ? cd(0.0) : 0.5 * (raw(j, 1, k) + I * static_cast<double>(l) * raw(j, 0, k));
        default: return l == 0 ? raw(j, 2, k) : cd(0.0);
    }
}

Eigen::Matrix3cd FourierCoefficientSet::operator_matrix(int k, int l) const {
    Eigen::Matrix3cd w = Eigen::Matrix3cd::Zero();
    for (int j = 0; j < 3; ++j)
        for (int jp = 0; jp < 3; ++jp) {
            const cd c = coefficient(j, jp, k, l);
            if (c != 0.0)
                for (int col = 0; col < 3; ++col) w(j, col) += c * basis(jp, col);
        }
    return w;
}

cd FourierCoefficientSet::evaluate(int j, int jp, double t) const {
    cd sum = 0.0;
    for (int k = -K; k <= K; ++k)
        for (int l = -1; l <= 1; ++l) {
            const cd c = coefficient(j, jp, k, l);
            if (c != 0.0) sum += c * std::exp(I * (two_pi * (k * omega_m + l * omega_cw) * t));
        }
    return sum;
}

double AmSpectrum::tail_fraction(int K) const {
    double total = 0.0, kept = 0.0;
    for (int k = -samples / 2; k < samples / 2; ++k) {
        const double e = std::norm(z(k)) + std::norm(y(k));
        total += e;
        if (std::abs(k) <= K) kept += e;
    }
    return std::max(0.0, 1.0 - kept / total);
}

int AmSpectrum::suggest_truncation(double limit) const {
    for (int K = 0; K < samples / 2; ++K)
        if (tail_fraction(K) <= limit) return K;
    return samples / 2;
}

AmSpectrum am_spectrum(const AmSplit& split, double tau_m, int samples) {
    const int m = check_samples(samples);
    const auto beta = am_angles(split, tau_m, m);
    std::vector<double> c(beta.size()), s(beta.size());
    for (std::size_t i = 0; i < beta.size(); ++i) {
        c[i] = std::cos(beta[i]);
        s[i] = std::sin(beta[i]);
    }
    return {midpoint_spectrum(c), midpoint_spectrum(s), m};
}

FourierCoefficientSet am_coefficients(const AmSplit& split, double tau_m, int K, int samples, double tail_limit) {
    const int m = check_samples(samples);
    if (tau_m <= 0.0) throw ConfigError("modulation period must be positive");
    double net = 0.0, scale = 0.0;
    for (const auto& s : split.am_component) {
        net += s.amplitude * s.duration;
        scale += std::abs(s.amplitude) * s.duration;
    }
    if (std::abs(net) > 1e-9 * std::max(scale, 1e-300) && std::abs(net) > 1e-15)
        throw ConfigError("amplitude-modulated component must integrate to zero over the period");
    const Vec3 n = split.axis.normalized();
    const auto beta = am_angles(split, tau_m, m);
    std::vector<Mat3> qv(beta.size());
    for (std::size_t s = 0; s < beta.size(); ++s) qv[s] = axis_rotation(n, beta[s]).heisenberg_rotation();
    auto f = analyse(qv, rotated_basis(n), 1.0 / tau_m, split.omega_cw, K, tail_limit);
    const auto spec = am_spectrum(split, tau_m, m);
    for (int k = -K; k <= K; ++k) {
        f.az.push_back(spec.z(k));
        f.ay.push_back(spec.y(k));
    }
    return f;
}

FourierCoefficientSet general_coefficients(const Channel& ch, double offset, int K, int samples, double tail_limit) {
    const int m = check_samples(samples);
    const EffectiveRotation eff = effective_rotation(ch, offset);
    const double tau_m = ch.period;
    if (tau_m <= 0.0) throw ConfigError("channel period must be positive");
    const Vec3 f = eff.axis;
    if (std::abs(f.norm() - 1.0) > 1e-9) throw NumericalGuard("effective field axis is not a unit vector");
    std::vector<Mat3> qv(static_cast<std::size_t>(m));
    Quaternion before;  // propagator up to the start of segment `seg`
    double start = 0.0;
    std::size_t seg = 0;
    for (int s = 0; s < m; ++s) {
        const double t = (s + 0.5) * tau_m / m;
        while (seg + 1 < ch.segments.size() && t >= start + ch.segments[seg].duration) {
            const auto& g = ch.segments[seg];
            before = compose(quaternion_from_segment(offset, g.amplitude, g.phase, g.duration), before);
            start += g.duration;
            ++seg;
        }
        Quaternion u = before;
        if (!ch.segments.empty()) {
            const auto& g = ch.segments[seg];
            u = compose(quaternion_from_segment(offset, g.amplitude, g.phase, t - start), before);
        }
        // V = U exp(+i theta F.I): remove the accumulated effective-field rotation.
        const Quaternion v = compose(u, axis_rotation(f, -two_pi * eff.omega_cw * t));
        qv[static_cast<std::size_t>(s)] = v.heisenberg_rotation();
    }
    const Mat3 basis = eff.omega_cw == 0.0 ? Mat3::Identity() : rotated_basis(f);
    return analyse(qv, basis, 1.0 / tau_m, eff.omega_cw, K, tail_limit);
}

FourierCoefficientSet general_coefficients(const PulseSequence& seq, const std::string& channel, double offset,
                                           int K, int samples, double tail_limit) {
    return general_coefficients(seq.channel(channel), offset, K, samples, tail_limit);
}

std::string FrequencyTuple::str(int n_spins) const {
    std::ostringstream os;
    os << "n=" << n << " k=(";
    for (int q = 0; q < n_spins; ++q) os << (q ? "," : "") << k[static_cast<std::size_t>(q)];
    os << ") l=(";
    for (int q = 0; q < n_spins; ++q) os << (q ? "," : "") << l[static_cast<std::size_t>(q)];
    os << ")";
    return os.str();
}

double FrequencySet::of(const FrequencyTuple& t) const {
    double w = t.n * omega_r;
    for (std::size_t q = 0; q < omega_m.size(); ++q) w += t.k[q] * omega_m[q] + t.l[q] * omega_cw[q];
    return w;
}

ResonanceResult enumerate_resonances(const FrequencySet& f, const std::vector<std::vector<int>>& supports,
                                     double exact_tol_hz, double near_threshold_hz) {
    const double exact = two_pi * exact_tol_hz;
    const double window = two_pi * std::max(exact_tol_hz, near_threshold_hz);
    std::set<FrequencyTuple> resonant, near;
    for (auto sup : supports) {
        if (sup.empty()) continue;
        std::sort(sup.begin(), sup.end());
        const int last = sup.back();
        const std::size_t depth = sup.size() - 1;
        FrequencyTuple t;
        // Assign (k, l) to every support spin but the last, then solve for the last spin's k.
        auto recurse = [&](auto&& self, std::size_t pos, double partial) -> void {
            if (pos == depth) {
                const double wm = f.omega_m[static_cast<std::size_t>(last)];
                const int K = f.K[static_cast<std::size_t>(last)];
                for (int l = -1; l <= 1; ++l) {
                    if (l != 0 && f.omega_cw[static_cast<std::size_t>(last)] == 0.0) continue;
                    const double x = partial + l * f.omega_cw[static_cast<std::size_t>(last)];
                    const int lo = std::max(-K, static_cast<int>(std::ceil((-x - window) / wm)));
                    const int hi = std::min(K, static_cast<int>(std::floor((-x + window) / wm)));
                    for (int k = lo; k <= hi; ++k) {
                        const double w = x + k * wm;
                        t.k[static_cast<std::size_t>(last)] = k;
                        t.l[static_cast<std::size_t>(last)] = l;
                        if (std::abs(w) <= exact) {
                            resonant.insert(t);
                        } else if (std::abs(w) <= window) {
                            near.insert(t);
                        }
                    }
                }
                t.k[static_cast<std::size_t>(last)] = 0;
                t.l[static_cast<std::size_t>(last)] = 0;
                return;
            }
            const auto q = static_cast<std::size_t>(sup[pos]);
            for (int l = -1; l <= 1; ++l) {
                if (l != 0 && f.omega_cw[q] == 0.0) continue;
                for (int k = -f.K[q]; k <= f.K[q]; ++k) {
                    t.k[q] = k;
                    t.l[q] = l;
                    self(self, pos + 1, partial + k * f.omega_m[q] + l * f.omega_cw[q]);
                }
            }
            t.k[q] = 0;
            t.l[q] = 0;
        };
        for (int n = -2; n <= 2; ++n) {
            t = FrequencyTuple{};
            t.n = n;
            recurse(recurse, 0, n * f.omega_r);
        }
    }
    ResonanceResult out;
    out.resonant.assign(resonant.begin(), resonant.end());
    for (const auto& t : near) {
        // Keep one of each mirrored pair: the lowest spin carrying an effective-field index has l = +1.
        int q = -1;
        for (std::size_t p = 0; p < f.omega_m.size(); ++p)
            if (t.l[p] != 0) {
                q = static_cast<int>(p);
                break;
            }
        if (q < 0 || t.l[static_cast<std::size_t>(q)] != 1) continue;
        out.near.push_back({t, f.of(t) / two_pi, q});
    }
    return out;
}

ComponentModel::ComponentModel(std::vector<InteractionTerm> terms, std::vector<FourierCoefficientSet> frames,
                               double spin_rate)
    : n_(static_cast<int>(frames.size())), terms_(std::move(terms)), frames_(std::move(frames)) {
    if (n_ < 1 || n_ > max_spins) throw ConfigError("one coefficient set per spin (1 to 3 spins) required");
    if (spin_rate <= 0.0) throw ConfigError("spinning rate must be positive");
    for (const auto& t : terms_) {
        if (t.spin.i < 0 || t.spin.i >= n_ || t.spin.j >= n_)
            throw ConfigError("interaction term refers to a spin without coefficients");
    }
    freqs_.omega_r = two_pi * spin_rate;
    const Axis ax[3] = {Axis::x, Axis::y, Axis::z};
    for (int q = 0; q < n_; ++q) {
        const auto& f = frames_[static_cast<std::size_t>(q)];
        freqs_.omega_m.push_back(two_pi * f.omega_m);
        freqs_.omega_cw.push_back(two_pi * f.omega_cw);
        freqs_.K.push_back(f.K);
        std::vector<Eigen::Matrix3cd> w;
        std::vector<double> norms;
        for (int k = -f.K; k <= f.K; ++k)
            for (int l = -1; l <= 1; ++l) {
                w.push_back(f.operator_matrix(k, l));
                norms.push_back(w.back().cwiseAbs().maxCoeff());
            }
        w_.push_back(std::move(w));
        w_norm_.push_back(std::move(norms));
        for (int c = 0; c < 3; ++c) ops_[static_cast<std::size_t>(q)][static_cast<std::size_t>(c)] = single_spin_operator(q, ax[c], n_);
    }
    for (const auto& t : terms_) {
        if (!t.spin.bilinear()) continue;
        auto& p = pair_ops_[{t.spin.i, t.spin.j}];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                p[static_cast<std::size_t>(3 * a + b)] =
                    ops_[static_cast<std::size_t>(t.spin.i)][static_cast<std::size_t>(a)] *
                    ops_[static_cast<std::size_t>(t.spin.j)][static_cast<std::size_t>(b)];
    }
}

const Eigen::Matrix3cd& ComponentModel::w(int spin, int k, int l) const {
    static const Eigen::Matrix3cd zero = Eigen::Matrix3cd::Zero();
    const int K = freqs_.K[static_cast<std::size_t>(spin)];
    if (std::abs(k) > K || std::abs(l) > 1) return zero;
    return w_[static_cast<std::size_t>(spin)][static_cast<std::size_t>((k + K) * 3 + l + 1)];
}

bool ComponentModel::active(int spin, int k, int l, double prune) const {
    const int K = freqs_.K[static_cast<std::size_t>(spin)];
    if (std::abs(k) > K || std::abs(l) > 1) return false;
    return w_norm_[static_cast<std::size_t>(spin)][static_cast<std::size_t>((k + K) * 3 + l + 1)] > prune;
}

std::vector<std::vector<int>> ComponentModel::supports() const {
    std::set<std::vector<int>> s;
    for (const auto& t : terms_) {
        if (t.spin.bilinear()) {
            s.insert({std::min(t.spin.i, t.spin.j), std::max(t.spin.i, t.spin.j)});
        } else {
            s.insert({t.spin.i});
        }
    }
    return {s.begin(), s.end()};
}

Mat ComponentModel::component(const FrequencyTuple& tup) const {
    const int dim = 1 << n_;
    Mat out = Mat::Zero(dim, dim);
    if (std::abs(tup.n) > 2) return out;
    for (const auto& term : terms_) {
        const int i = term.spin.i, j = term.spin.j;
        bool outside = false;
        for (int p = 0; p < n_; ++p)
            if (p != i && p != j && (tup.k[static_cast<std::size_t>(p)] != 0 || tup.l[static_cast<std::size_t>(p)] != 0))
                outside = true;
        if (outside) continue;
        const cd wn = term.w.at(tup.n);
        if (wn == 0.0) continue;
        const auto& wi = w(i, tup.k[static_cast<std::size_t>(i)], tup.l[static_cast<std::size_t>(i)]);
        if (!term.spin.bilinear()) {
            const Eigen::Vector3cd u = wi.transpose() * term.spin.v.cast<cd>();
            for (int c = 0; c < 3; ++c)
                if (u(c) != 0.0) out += (wn * u(c)) * ops_[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        } else {
            const auto& wj = w(j, tup.k[static_cast<std::size_t>(j)], tup.l[static_cast<std::size_t>(j)]);
            const Eigen::Matrix3cd mm = wi.transpose() * term.spin.t.cast<cd>() * wj;
            const auto& pops = pair_ops_.at({i, j});
            for (int c = 0; c < 3; ++c)
                for (int d = 0; d < 3; ++d)
                    if (mm(c, d) != 0.0) out += (wn * mm(c, d)) * pops[static_cast<std::size_t>(3 * c + d)];
        }
    }
    return out;
}

double ComponentModel::component_bound(const FrequencyTuple& tup) const {
    if (std::abs(tup.n) > 2) return 0.0;
    auto wmax = [&](int q) {
        const int K = freqs_.K[static_cast<std::size_t>(q)];
        const int k = tup.k[static_cast<std::size_t>(q)], l = tup.l[static_cast<std::size_t>(q)];
        if (std::abs(k) > K || std::abs(l) > 1) return 0.0;
        return w_norm_[static_cast<std::size_t>(q)][static_cast<std::size_t>((k + K) * 3 + l + 1)];
    };
    double b = 0.0;
    for (const auto& term : terms_) {
        const int i = term.spin.i, j = term.spin.j;
        bool outside = false;
        for (int p = 0; p < n_; ++p)
            if (p != i && p != j && (tup.k[static_cast<std::size_t>(p)] != 0 || tup.l[static_cast<std::size_t>(p)] != 0))
                outside = true;
        if (outside) continue;
        const double wn = std::abs(term.w.at(tup.n));
        // Spin-1/2 operators have entries of at most 1/2, products at most 1/4.
        if (!term.spin.bilinear())
            b += wn * 3.0 * wmax(i) * term.spin.v.cwiseAbs().sum() * 0.5;
        else
            b += wn * 9.0 * wmax(i) * term.spin.t.cwiseAbs().sum() * wmax(j) * 0.25;
    }
    return b;
}

std::vector<FrequencyTuple> ComponentModel::all_tuples(double prune) const {
    std::set<FrequencyTuple> out;
    auto entries = [&](int q) {
        std::vector<std::pair<int, int>> e;
        const int K = freqs_.K[static_cast<std::size_t>(q)];
        for (int k = -K; k <= K; ++k)
            for (int l = -1; l <= 1; ++l)
                if (active(q, k, l, prune)) e.emplace_back(k, l);
        return e;
    };
    std::vector<std::vector<std::pair<int, int>>> act;
    for (int q = 0; q < n_; ++q) act.push_back(entries(q));
    for (const auto& term : terms_) {
        for (int n = -2; n <= 2; ++n) {
            if (std::abs(term.w.at(n)) <= 0.0) continue;
            const int i = term.spin.i, j = term.spin.j;
            for (const auto& [ki, li] : act[static_cast<std::size_t>(i)]) {
                FrequencyTuple t;
                t.n = n;
                t.k[static_cast<std::size_t>(i)] = ki;
                t.l[static_cast<std::size_t>(i)] = li;
                if (!term.spin.bilinear()) {
                    out.insert(t);
                    continue;
                }
                for (const auto& [kj, lj] : act[static_cast<std::size_t>(j)]) {
                    t.k[static_cast<std::size_t>(j)] = kj;
                    t.l[static_cast<std::size_t>(j)] = lj;
                    out.insert(t);
                }
            }
        }
    }
    return {out.begin(), out.end()};
}

FourierComponentSet ComponentModel::materialize(double prune) const {
    FourierComponentSet s;
    s.freqs = freqs_;
    for (const auto& t : all_tuples(prune)) {
        Mat c = component(t);
        if (max_abs(c) > prune) s.components.emplace(t, std::move(c));
    }
    return s;
}

Mat ComponentModel::evaluate(double t, double prune) const {
    const int dim = 1 << n_;
    Mat h = Mat::Zero(dim, dim);
    for (const auto& [tup, c] : materialize(prune).components) h += std::exp(I * (freqs_.of(tup) * t)) * c;
    return h;
}

FourierComponentSet assemble_components(const ComponentModel& model, double prune) { return model.materialize(prune); }

namespace {

std::vector<EffectiveRotation> big_rotations(const ComponentModel& m) {
    std::vector<EffectiveRotation> out;
    for (const auto& f : m.frames()) {
        EffectiveRotation e;
        e.omega_cw = f.omega_cw;
        e.axis = f.basis.row(2).transpose();
        e.tau_m = 1.0 / f.omega_m;
        out.push_back(e);
    }
    return out;
}

}  // namespace

EffectiveHamiltonian first_order(const ComponentModel& m, const std::vector<FrequencyTuple>& resonant) {
    EffectiveHamiltonian h;
    h.order = 1;
    const int dim = 1 << m.n_spins();
    h.matrix = Mat::Zero(dim, dim);
    for (const auto& t : resonant) h.matrix += m.component(t);
    h.big = big_rotations(m);
    return h;
}

EffectiveHamiltonian second_order(const ComponentModel& m, double exact_tol_hz, double prune) {
    const double tol = two_pi * exact_tol_hz;
    const double bin = tol > 0.0 ? tol : 1e-9;
    const int dim = 1 << m.n_spins();
    std::map<long long, std::pair<double, Mat>> buckets;
    for (const auto& t : m.all_tuples(prune)) {
        Mat c = m.component(t);
        if (max_abs(c) <= prune) continue;
        const double w = m.freqs().of(t);
        const auto key = std::llround(w / bin);
        auto it = buckets.find(key);
        if (it == buckets.end()) {
            buckets.emplace(key, std::make_pair(w, std::move(c)));
        } else {
            it->second.second += c;
        }
    }
    // Merge adjacent buckets so frequencies within the tolerance share one group.
    std::vector<std::pair<double, Mat>> groups;
    long long prev = 0;
    bool first = true;
    for (auto& [key, val] : buckets) {
        if (!first && key == prev + 1) {
            groups.back().second += val.second;
        } else {
            groups.push_back(val);
        }
        prev = key;
        first = false;
    }
    Mat h0 = Mat::Zero(dim, dim);
    for (const auto& [w, c] : groups)
        if (std::abs(w) <= bin) h0 += c;
    Mat h2 = Mat::Zero(dim, dim);
    for (const auto& [w, c] : groups) {
        if (std::abs(w) <= bin) continue;
        if (std::abs(w) < 1e-12)
            throw NumericalGuard("second-order denominator underflow; raise the resonance tolerance");
        h2 += (-0.5 * commutator(c.adjoint(), c) + commutator(h0, c)) / w;
    }
    EffectiveHamiltonian h;
    h.order = 2;
    h.matrix = h2;
    h.big = big_rotations(m);
    return h;
}

CorrectedModel near_resonance_correction(const ComponentModel& m, const NearResonanceOptions& opt) {
    const auto res = enumerate_resonances(m.freqs(), m.supports(), opt.exact_tol_hz, opt.near_threshold_hz);
    std::optional<NearResonanceReport> best;
    double best_norm = 1e-9;
    // Visit candidates by decreasing bound; stop once no bound can beat the best so far.
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < res.near.size(); ++i) order.emplace_back(m.component_bound(res.near[i].tuple), i);
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [bound, idx] : order) {
        if (bound <= best_norm) break;
        const auto& r = res.near[idx];
        const double nrm = max_abs(m.component(r.tuple));
        if (nrm > best_norm) {
            best_norm = nrm;
            best = r;
        }
    }
    if (!best) return {m, first_order(m, res.resonant), std::nullopt};
    if (opt.mean_rf_hz > 0.0 && std::abs(best->delta_omega_near) >= opt.max_fraction_of_rf * opt.mean_rf_hz)
        throw NumericalGuard("near-resonance offset too large relative to the rf amplitude for axis invariance");
    const int q = best->absorbed_into_spin;
    auto frames = m.frames();
    auto& fq = frames[static_cast<std::size_t>(q)];
    fq.omega_cw -= best->delta_omega_near;
    ComponentModel shifted(m.terms(), frames, m.freqs().omega_r / two_pi);
    const auto exact = enumerate_resonances(shifted.freqs(), shifted.supports(), opt.exact_tol_hz, 0.0);
    EffectiveHamiltonian h = first_order(shifted, exact.resonant);
    // The slower frame leaves a residual longitudinal field along F_q.
    h.matrix += (two_pi * best->delta_omega_near) * spin_vector_operator(q, fq.basis.row(2).transpose(), m.n_spins());
    return {std::move(shifted), std::move(h), best};
}

std::optional<std::pair<long, long>> rational_approx(double x, long max_den, double tol) {
    // Continued-fraction convergents of x.
    long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double r = x;
    for (int it = 0; it < 64; ++it) {
        const double a = std::floor(r);
        if (std::abs(a) > 1e15) break;
        const long ai = static_cast<long>(a);
        const long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
        if (q2 > max_den) break;
        if (std::abs(x - static_cast<double>(p2) / static_cast<double>(q2)) <= tol) return std::make_pair(p2, q2);
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        const double frac = r - a;
        if (frac < 1e-300) break;
        r = 1.0 / frac;
    }
    return std::nullopt;
}

void fill_periods(EffectiveHamiltonian& h, const ComponentModel& m, double tau_c_prime) {
    h.tau_c_prime = tau_c_prime;
    h.tau_c.reset();
    long p = 1;
    for (const auto& f : m.frames()) {
        const auto r = rational_approx(f.omega_cw * tau_c_prime, 1000000, 1e-9);
        if (!r) return;
        p = std::lcm(p, r->second);
        if (p > 1000000) return;
    }
    h.tau_c = static_cast<double>(p) * tau_c_prime;
}

Mat effective_interaction_propagate(const EffectiveHamiltonian& h, int N) {
    if (N < 0) throw std::invalid_argument("negative cycle count");
    return expm_hermitian(h.matrix, N * h.tau_c_prime);
}

Mat effective_propagate(const EffectiveHamiltonian& h, int N) {
    const int n = static_cast<int>(h.big.size());
    const int dim = static_cast<int>(h.matrix.rows());
    Mat g = Mat::Zero(dim, dim);
    for (int q = 0; q < n; ++q)
        g += (two_pi * h.big[static_cast<std::size_t>(q)].omega_cw) *
             spin_vector_operator(q, h.big[static_cast<std::size_t>(q)].axis, n);
    return expm_hermitian(g, N * h.tau_c_prime) * effective_interaction_propagate(h, N);
}

double isotropic_offset(const SpinSystem& sys, int spin) {
    double iso = 0.0;
    for (const auto& s : sys.shifts)
        if (s.spin == spin) iso += s.iso;
    return iso;
}

std::vector<InteractionTerm> strip_isotropic(std::vector<InteractionTerm> terms, const SpinSystem& sys) {
    std::vector<bool> done(static_cast<std::size_t>(sys.n_spins()), false);
    std::vector<InteractionTerm> out;
    for (auto& t : terms) {
        if (t.kind == InteractionKind::chemical_shift && !done[static_cast<std::size_t>(t.spin.i)]) {
            t.w.at(0) -= two_pi * isotropic_offset(sys, t.spin.i);
            done[static_cast<std::size_t>(t.spin.i)] = true;
            if (t.w.is_zero(1e-9)) continue;
        }
        out.push_back(t);
    }
    return out;
}

std::string dump_tuples(const ComponentModel& m, double exact_tol_hz, double near_threshold_hz, double prune) {
    std::ostringstream os;
    os << "tuple\tfrequency_hz\tnorm\tclass\n";
    os.precision(10);
    for (const auto& t : m.all_tuples(prune)) {
        const double nrm = max_abs(m.component(t));
        if (nrm <= prune) continue;
        const double w = m.freqs().of(t) / two_pi;
        const char* cls = std::abs(w) <= exact_tol_hz ? "resonant" : std::abs(w) <= near_threshold_hz ? "near" : "off";
        os << t.str(m.n_spins()) << '\t' << w << '\t' << nrm << '\t' << cls << '\n';
    }
    return os.str();
}

FrameSet build_frames(const SpinSystem& sys, const PulseSequence& seq, double spin_rate, const ModelOptions& opt) {
    sys.validate();
    const int n = sys.n_spins();
    const double tau_r = 1.0 / spin_rate;
    bool am = opt.policy != FramePolicy::general;
    std::vector<std::optional<AmSplit>> splits(static_cast<std::size_t>(n));
    if (am) {
        for (int q = 0; q < n && am; ++q) {
            const auto& label = sys.nuclei[static_cast<std::size_t>(q)];
            if (!seq.find(label)) continue;
            try {
                splits[static_cast<std::size_t>(q)] = split_am(seq, label);
            } catch (const ConfigError&) {
                if (opt.policy == FramePolicy::amplitude_modulated) throw;
                am = false;
            }
        }
    }
    std::vector<FourierCoefficientSet> frames;
    for (int q = 0; q < n; ++q) {
        const auto& label = sys.nuclei[static_cast<std::size_t>(q)];
        const Channel* ch = seq.find(label);
        if (am) {
            if (ch) {
                frames.push_back(am_coefficients(*splits[static_cast<std::size_t>(q)], ch->period, opt.K, opt.samples,
                                                 opt.tail_limit));
            } else {
                AmSplit idle;
                idle.period = tau_r;
                idle.am_component = {{tau_r, 0.0, 0.0}};
                frames.push_back(am_coefficients(idle, tau_r, opt.K, opt.samples, opt.tail_limit));
            }
        } else {
            const double off = isotropic_offset(sys, q);
            if (ch) {
                frames.push_back(general_coefficients(*ch, off, opt.K, opt.samples, opt.tail_limit));
            } else {
                const Channel idle{label, {{tau_r, 0.0, 0.0}}, tau_r};
                frames.push_back(general_coefficients(idle, off, opt.K, opt.samples, opt.tail_limit));
            }
        }
    }
    return {std::move(frames), am};
}

ComponentModel build_model(const SpinSystem& sys, const FrameSet& frames, const Euler& crystal, double spin_rate,
                           double rotor_angle) {
    auto terms = interaction_terms(sys, crystal, spin_rate, rotor_angle);
    if (!frames.amplitude_modulated) terms = strip_isotropic(std::move(terms), sys);
    return ComponentModel(std::move(terms), frames.frames, spin_rate);
}

ComponentModel build_model(const SpinSystem& sys, const PulseSequence& seq, const Euler& crystal, double spin_rate,
                           const ModelOptions& opt) {
    return build_model(sys, build_frames(sys, seq, spin_rate, opt), crystal, spin_rate, opt.rotor_angle);
}

double common_sub_period(const ComponentModel& m) {
    const double tau_r = two_pi / m.freqs().omega_r;
    long mult = 1;  // period = mult * tau_r / den
    long den = 1;
    for (const auto& f : m.frames()) {
        const auto r = rational_approx(1.0 / (f.omega_m * tau_r), 100000, 1e-9);
        if (!r) throw NumericalGuard("modulation period incommensurate with the rotor period");
        // tau_m / tau_r = p / q; lcm of fractions a/b and p/q is lcm(a, p) / gcd(b, q).
        mult = std::lcm(mult, r->first);
        den = std::gcd(den, r->second);
    }
    return tau_r * static_cast<double>(mult) / static_cast<double>(den);
}

EffectiveHamiltonian effective_hamiltonian(const ComponentModel& m, const EffectiveOptions& opt) {
    if (opt.order != 1 && opt.order != 2) throw ConfigError("effective Hamiltonian order must be 1 or 2");
    std::optional<CorrectedModel> corrected;
    EffectiveHamiltonian h;
    if (opt.near) {
        corrected = near_resonance_correction(m, *opt.near);
        h = corrected->h1;
    } else {
        h = first_order(m, enumerate_resonances(m.freqs(), m.supports(), opt.exact_tol_hz, 0.0).resonant);
    }
    const ComponentModel& used = corrected ? corrected->model : m;
    if (opt.order == 2) {
        h.matrix += second_order(used, opt.exact_tol_hz, opt.prune).matrix;
        h.order = 2;
    }
    fill_periods(h, used, common_sub_period(used));
    return h;
}

}  // namespace nmr
