#include "nmrsim/powder.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "nmrsim/aht.hpp"
#include "nmrsim/sequence.hpp"

namespace nmr {

void CrystalliteSet::validate() const {
    if (items.empty()) throw ConfigError("empty crystallite set");
    double sum = 0.0;
    for (const auto& c : items) {
        if (!(c.angles.beta >= -1e-12 && c.angles.beta <= pi + 1e-12)) throw ConfigError("crystallite beta outside [0, pi]");
        if (!(c.weight >= 0.0)) throw ConfigError("negative crystallite weight");
        sum += c.weight;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("crystallite weights do not sum to one");
}

namespace {

void normalize(CrystalliteSet& s) {
    double sum = 0.0;
    for (const auto& c : s.items) sum += c.weight;
    if (!(sum > 0.0)) throw ConfigError("crystallite weights sum to zero");
    for (auto& c : s.items) c.weight /= sum;
}

}  // namespace

CrystalliteSet zcw(int m, int n_gamma) {
    if (m < 1 || m > 40) throw ConfigError("ZCW index out of range");
    std::vector<long> fib{1, 1};
    while (static_cast<int>(fib.size()) < m + 3) fib.push_back(fib[fib.size() - 1] + fib[fib.size() - 2]);
    const long n = fib[static_cast<std::size_t>(m + 2)];
    const long g = fib[static_cast<std::size_t>(m)];
    CrystalliteSet s;
    s.scheme = "zcw" + std::to_string(n);
    for (long j = 0; j < n; ++j) {
        const double fa = std::fmod(static_cast<double>(j * g) / n, 1.0);
        const double fb = std::fmod(static_cast<double>(j) / n, 1.0);
        s.items.push_back({{two_pi * fa, std::acos(std::clamp(2.0 * fb - 1.0, -1.0, 1.0)), 0.0}, 1.0});
    }
    normalize(s);
    return n_gamma > 1 ? with_gamma(s, n_gamma) : s;
}

CrystalliteSet grid(int n_alpha, int n_beta, int n_gamma) {
    if (n_alpha < 1 || n_beta < 1 || n_gamma < 1) throw ConfigError("grid counts must be positive");
    CrystalliteSet s;
    s.scheme = "grid";
    for (int a = 0; a < n_alpha; ++a)
        for (int b = 0; b < n_beta; ++b)
            for (int g = 0; g < n_gamma; ++g) {
                const double beta = n_beta == 1 ? 0.0 : pi * (b + 0.5) / n_beta;
                const double w = n_beta == 1 ? 1.0 : std::sin(beta);
                s.items.push_back({{two_pi * a / n_alpha, beta, two_pi * g / n_gamma}, w});
            }
    normalize(s);
    return s;
}

CrystalliteSet with_gamma(const CrystalliteSet& pairs, int n_gamma) {
    if (n_gamma < 1) throw ConfigError("gamma count must be positive");
    CrystalliteSet s;
    s.scheme = pairs.scheme + "x" + std::to_string(n_gamma);
    for (const auto& c : pairs.items)
        for (int g = 0; g < n_gamma; ++g)
            s.items.push_back({{c.angles.alpha, c.angles.beta, two_pi * g / n_gamma}, c.weight / n_gamma});
    normalize(s);
    return s;
}

CrystalliteSet parse_crystallites(const std::string& text, int n_gamma, const std::string& scheme) {
    CrystalliteSet s;
    s.scheme = scheme;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        double a, b, g, w;
        if (!(ls >> a)) continue;
        if (!(ls >> b >> g >> w)) throw ConfigError("crystallite line " + std::to_string(lineno) + ": expected 4 numbers");
        std::string extra;
        if (ls >> extra) throw ConfigError("crystallite line " + std::to_string(lineno) + ": trailing text");
        s.items.push_back({{deg(a), deg(b), deg(g)}, w});
    }
    if (s.items.empty()) throw ConfigError("crystallite data holds no orientations");
    normalize(s);
    s.validate();
    return n_gamma > 0 ? with_gamma(s, n_gamma) : s;
}

CrystalliteSet load_crystallite_file(const std::string& path, int n_gamma) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open crystallite file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    std::string name = path.substr(path.find_last_of('/') + 1);
    return parse_crystallites(ss.str(), n_gamma, name);
}

std::string format_crystallites(const CrystalliteSet& set) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& c : set.items)
        os << to_deg(c.angles.alpha) << ' ' << to_deg(c.angles.beta) << ' ' << to_deg(c.angles.gamma) << ' ' << c.weight
           << '\n';
    return os.str();
}

double powder_average(const std::vector<double>& values, const CrystalliteSet& set) {
    if (values.size() != set.size()) throw std::invalid_argument("one value per crystallite required");
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) acc += set.items[i].weight * values[i];
    return acc;
}

std::vector<double> powder_average(const std::vector<std::vector<double>>& curves, const CrystalliteSet& set) {
    if (curves.size() != set.size()) throw std::invalid_argument("one curve per crystallite required");
    if (curves.empty()) return {};
    std::vector<double> out(curves.front().size(), 0.0);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (curves[i].size() != out.size()) throw std::invalid_argument("curves differ in length");
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += set.items[i].weight * curves[i][j];
    }
    return out;
}

double p2_moment(const CrystalliteSet& set) {
    double acc = 0.0;
    for (const auto& c : set.items) {
        const double x = std::cos(c.angles.beta);
        acc += c.weight * 0.5 * (3.0 * x * x - 1.0);
    }
    return acc;
}

double rfdr_recoupling_strength(double shift_difference_hz, double spin_rate, double dipolar_b, double relative_shift,
                                const CrystalliteSet& set, const Euler& dipole_pas) {
    const double tau_r = 1.0 / spin_rate;
    if (std::abs(relative_shift) > tau_r) throw ConfigError("relative shift beyond one rotor period");
    const double t1 = tau_r / 2.0 + relative_shift / 2.0;
    const double t2 = 1.5 * tau_r - relative_shift / 2.0;
    const double mean = (2.0 * tau_r - 2.0 * (t2 - t1)) / (2.0 * tau_r);  // time average of the sign
    AmSplit split;
    split.period = 2.0 * tau_r;
    split.am_component = {{t1, shift_difference_hz * (1.0 - mean), 0.0},
                          {t2 - t1, shift_difference_hz * (-1.0 - mean), 0.0},
                          {2.0 * tau_r - t2, shift_difference_hz * (1.0 - mean), 0.0}};
    const AmSpectrum spec = am_spectrum(split, split.period, 4096);
    const InteractionTensor dip{InteractionKind::dipolar, 0.0, dipolar_b, 0.0, dipole_pas, std::make_pair(0, 1)};
    std::vector<double> strength;
    for (const auto& c : set.items) {
        const SpatialFourier w = mas_fourier_components(dip, c.angles, spin_rate);
        cd wx = 0.0, wy = 0.0;
        for (int n = -2; n <= 2; ++n) {
            // Resonance n w_r + k w_m = 0 with w_m = w_r / 2 selects k = -2n.
            wx += w.at(n) * spec.z(-2 * n);
            wy += w.at(n) * spec.y(-2 * n);
        }
        strength.push_back(std::hypot(wx.real(), wy.real()));
    }
    return powder_average(strength, set);
}

}  // namespace nmr
