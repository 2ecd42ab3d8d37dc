#pragma once

#include <cmath>
#include <vector>

#include "nmrsim/quaternion.hpp"
#include "nmrsim/sequence.hpp"

namespace fixture {

// Gaussian pi/2 pulse: peak a = 250/sqrt(2 pi) rad/s, centre 250 ms, width pi/500 s,
// sampled over a 50 ms window (about +-4 widths) so the area is pi/2.
inline nmr::PulseSequence gaussian_half_pi(int n_segments = 500) {
    const double a = 250.0 / std::sqrt(nmr::two_pi);
    return nmr::gaussian_pulse(a / nmr::two_pi, 0.25, nmr::pi / 500.0, 0.025, n_segments);
}

struct ContinuitySweep {
    double max_element_jump = 0.0;  // largest adjacent change of any quaternion element
    double bound = 0.0;             // pi * T * grid spacing: Lipschitz bound of the elements in offset
    double max_lz_jump = 0.0;
};

inline ContinuitySweep gaussian_continuity(double first, double last, int count) {
    const auto seq = gaussian_half_pi();
    const auto& ch = seq.channels[0];
    const double h = (last - first) / (count - 1);
    ContinuitySweep out;
    out.bound = nmr::pi * ch.period * h;
    nmr::Quaternion prev;
    double prev_lz = 0.0;
    for (int i = 0; i < count; ++i) {
        const nmr::Quaternion q = nmr::period_quaternion(ch, first + i * h);
        const double lz = nmr::directional_cosines(q).l.z();
        if (i > 0) {
            const double jump = std::max({std::abs(q.A - prev.A), std::abs(q.B - prev.B), std::abs(q.C - prev.C),
                                          std::abs(q.D - prev.D)});
            out.max_element_jump = std::max(out.max_element_jump, jump);
            out.max_lz_jump = std::max(out.max_lz_jump, std::abs(lz - prev_lz));
        }
        prev = q;
        prev_lz = lz;
    }
    return out;
}

}  // namespace fixture
