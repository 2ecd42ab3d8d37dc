#include "nmrsim/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "nmrsim/parallel.hpp"

namespace nmr {

namespace {

// Delays are printed in microseconds with this many decimals.
constexpr int delay_decimals = 6;

// Below printing resolution a delay counts as zero.
constexpr double delay_tol = 1e-12;  // s

std::vector<double> block_times(int n_blocks, double tau_r) {
    std::vector<double> t;
    for (int b = 0; b <= n_blocks; ++b) t.push_back(8.0 * tau_r * b);
    return t;
}

}  // namespace

SweepGrid coarse_sweep_grid() {
    SweepGrid g;
    for (int i = 0; i <= 10; ++i) g.tau_sweep.push_back(0.5e-6 * i);
    for (int d = 60; d <= 85; d += 5) g.x_co.push_back(deg(d));
    g.x_co.push_back(deg(89));
    return g;
}

SweepGrid full_sweep_grid() {
    SweepGrid g;
    for (int i = 0; i <= 200; ++i) g.tau_sweep.push_back(0.1e-6 * i);
    for (int d = 1; d <= 89; ++d) g.x_co.push_back(deg(d));
    return g;
}

std::vector<double> adiabatic_rfdr_curve(const SweepSchedule& schedule, const RfdrProblem& pr) {
    const double tau_r = 1.0 / pr.spin_rate;
    const auto seq = build_adiabatic_rfdr(tau_r, pr.pi_duration, pr.pi_amplitude, schedule, pr.channel);
    const auto times = block_times(schedule.n_blocks, tau_r);
    std::vector<std::vector<double>> curves(pr.powder.size());
    parallel_for(pr.powder.size(), pr.threads, [&](std::size_t c) {
        HamiltonianAssembly a(pr.system, seq, pr.powder.items[c].angles, pr.spin_rate, pr.options);
        curves[c] = transfer_efficiency(a, pr.rho0, pr.detect, times).efficiency;
    });
    return powder_average(curves, pr.powder);
}

std::vector<GridSearchRow> grid_search_adiabatic(const std::vector<int>& n_list, const SweepGrid& grid,
                                                 const RfdrProblem& pr) {
    if (grid.tau_sweep.empty() || grid.x_co.empty()) throw ConfigError("empty sweep grid");
    const double tau_r = 1.0 / pr.spin_rate;

    // Distinct schedules; each grid point refers to one of them.
    std::map<std::vector<double>, std::size_t> index;
    std::vector<SweepSchedule> unique;
    struct Point {
        int n;
        double ts, xc;
        std::size_t sched;
    };
    std::vector<Point> points;
    for (int n : n_list)
        for (double ts : grid.tau_sweep)
            for (double xc : grid.x_co) {
                SweepSchedule s = tangential_sweep(n, ts, xc);
                auto [it, fresh] = index.try_emplace(s.delta_tau, unique.size());
                if (fresh) unique.push_back(std::move(s));
                points.push_back({n, ts, xc, it->second});
            }

    std::vector<PulseSequence> seqs;
    for (const auto& s : unique) seqs.push_back(build_adiabatic_rfdr(tau_r, pr.pi_duration, pr.pi_amplitude, s, pr.channel));

    // One assembly per crystallite serves every schedule; per-crystallite results keep the
    // reduction order fixed whatever the thread count.
    std::vector<std::vector<std::vector<double>>> per(pr.powder.size());
    parallel_for(pr.powder.size(), pr.threads, [&](std::size_t c) {
        const HamiltonianAssembly base(pr.system, seqs.front(), pr.powder.items[c].angles, pr.spin_rate, pr.options);
        auto& out = per[c];
        out.reserve(unique.size());
        for (std::size_t k = 0; k < unique.size(); ++k) {
            const auto a = base.with_sequence(seqs[k]);
            out.push_back(transfer_efficiency(a, pr.rho0, pr.detect, block_times(unique[k].n_blocks, tau_r)).efficiency);
        }
    });

    std::vector<std::vector<double>> averaged(unique.size());
    for (std::size_t k = 0; k < unique.size(); ++k) {
        std::vector<std::vector<double>> curves(pr.powder.size());
        for (std::size_t c = 0; c < pr.powder.size(); ++c) curves[c] = per[c][k];
        averaged[k] = powder_average(curves, pr.powder);
    }

    std::vector<GridSearchRow> rows;
    for (int n : n_list) {
        GridSearchRow best{n, 0.0, 0.0, -1.0, 0};
        for (const auto& p : points) {
            if (p.n != n) continue;
            const auto& curve = averaged[p.sched];
            const auto it = std::max_element(curve.begin(), curve.end());
            if (*it > best.efficiency)
                best = {n, p.ts, p.xc, *it, static_cast<int>(it - curve.begin())};
        }
        rows.push_back(best);
    }
    return rows;
}

std::string emit_delay_list(const SweepSchedule& schedule, double tau_r, double pi_duration) {
    std::ostringstream os;
    char buf[64];
    for (double dt : schedule.delta_tau) {
        const RfdrDelays d = rfdr_delays(tau_r, pi_duration, dt);
        for (double v : {d.before_first, d.after_first, d.before_second, d.after_second})
            if (v < -delay_tol) throw ConfigError("negative delay: pi pulses overlap");
        // XY-8 is four two-period units with identical timing.
        for (int unit = 0; unit < 4; ++unit)
            for (double v : {d.before_first, d.after_first, d.before_second, d.after_second}) {
                std::snprintf(buf, sizeof buf, "%.*fu\n", delay_decimals, std::max(0.0, v) * 1e6);
                os << buf;
            }
    }
    return os.str();
}

std::vector<double> parse_delay_list(const std::string& text, double tau_r, double pi_duration) {
    std::vector<double> delays;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line.back() != 'u') throw ConfigError("delay line without 'u' suffix: " + line);
        std::size_t used = 0;
        const double v = std::stod(line.substr(0, line.size() - 1), &used);
        if (used != line.size() - 1) throw ConfigError("malformed delay line: " + line);
        delays.push_back(v * 1e-6);
    }
    if (delays.size() % 16 != 0) throw ConfigError("delay list length is not a multiple of 16");
    std::vector<double> dts;
    for (std::size_t b = 0; b < delays.size(); b += 16)
        dts.push_back(delays[b] - tau_r / 2.0 + pi_duration / 2.0);
    return dts;
}

ScanResult scan_grid(const std::vector<ScanAxis>& axes,
                     const std::function<double(const std::vector<double>&)>& objective) {
    if (axes.empty()) throw ConfigError("scan needs at least one axis");
    for (const auto& a : axes)
        if (a.values.empty()) throw ConfigError("scan axis '" + a.name + "' is empty");
    ScanResult r;
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
        ScanPoint p;
        for (std::size_t d = 0; d < axes.size(); ++d) p.values.push_back(axes[d].values[idx[d]]);
        p.objective = objective(p.values);
        if (r.points.empty() || p.objective > r.points[r.best].objective) r.best = r.points.size();
        r.points.push_back(std::move(p));
        std::size_t d = axes.size();
        while (d > 0) {
            --d;
            if (++idx[d] < axes[d].values.size()) break;
            idx[d] = 0;
            if (d == 0) return r;
        }
    }
}

}  // namespace nmr
