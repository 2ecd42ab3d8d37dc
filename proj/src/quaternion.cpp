#include "nmrsim/quaternion.hpp"

#include <cmath>

namespace nmr {

double Quaternion::norm() const { return std::sqrt(A * A + B * B + C * C + D * D); }

Eigen::Matrix2cd Quaternion::su2() const {
    Eigen::Matrix2cd u;
    u << cd(D, -C), cd(-B, -A), cd(B, -A), cd(D, C);
    return u;
}

Quaternion Quaternion::from_su2(const Eigen::Matrix2cd& u) {
    // u = D - i(A sx + B sy + C sz)
    Quaternion q;
    q.D = 0.5 * (u(0, 0) + u(1, 1)).real();
    q.C = -0.5 * (u(0, 0) - u(1, 1)).imag();
    q.A = -0.5 * (u(0, 1) + u(1, 0)).imag();
    q.B = 0.5 * (u(1, 0) - u(0, 1)).real();
    return q;
}

Mat3 Quaternion::heisenberg_rotation() const {
    // U^dag (v.s) U rotates v by -beta about n: Rodrigues with the inverse sense.
    const Vec3 n = vec();
    const double w = D;
    Mat3 k;
    k << 0, -n.z(), n.y(), n.z(), 0, -n.x(), -n.y(), n.x(), 0;
    // Active rotation by beta about n is 1 + 2w K + 2K^2 (unit quaternion form).
    const Mat3 active = Mat3::Identity() + 2.0 * w * k + 2.0 * k * k;
    return active.transpose();
}

Quaternion quaternion_from_segment(double offset, double amplitude, double phase, double duration) {
    if (duration < 0.0) throw std::invalid_argument("negative duration");
    const double field = std::hypot(offset, amplitude);
    if (field == 0.0 || duration == 0.0) return {};
    const double theta = std::atan2(amplitude, offset);
    const double beta = two_pi * field * duration;
    const double s = std::sin(beta / 2.0);
    return {std::sin(theta) * std::cos(phase) * s, std::sin(theta) * std::sin(phase) * s, std::cos(theta) * s,
            std::cos(beta / 2.0)};
}

Quaternion compose(const Quaternion& b, const Quaternion& a) {
    return {b.D * a.A - b.C * a.B + b.B * a.C + b.A * a.D,
            b.C * a.A + b.D * a.B - b.A * a.C + b.B * a.D,
            -b.B * a.A + b.A * a.B + b.D * a.C + b.C * a.D,
            -b.A * a.A - b.B * a.B - b.C * a.C + b.D * a.D};
}

DirectionalCosines directional_cosines(const Quaternion& q) {
    const double d = std::clamp(q.D, -1.0, 1.0);
    const double beta = 2.0 * std::acos(d);
    const double s = std::sin(beta / 2.0);
    if (std::abs(s) < identity_tol) throw NumericalGuard("identity rotation: axis undefined");
    return {q.vec() / s, beta};
}

Quaternion period_quaternion(const Channel& ch, double offset) {
    Quaternion q;
    for (const auto& seg : ch.segments)
        q = compose(quaternion_from_segment(offset, seg.amplitude, seg.phase, seg.duration), q);
    return q;
}

EffectiveRotation effective_rotation(const Channel& ch, double offset) {
    Quaternion q = period_quaternion(ch, offset);
    if (q.D < 0.0) q = -q;
    EffectiveRotation e;
    e.tau_m = ch.period;
    e.q = q;
    const double s = q.vec().norm();
    if (s < identity_tol) return e;  // omega_cw = 0, axis fixed at z
    const double flip = 2.0 * std::atan2(s, q.D);  // in [0, pi]
    e.omega_cw = flip / (two_pi * ch.period);
    e.axis = q.vec() / s;
    return e;
}

EffectiveRotation effective_rotation(const PulseSequence& seq, const std::string& channel, double offset) {
    return effective_rotation(seq.channel(channel), offset);
}

SignedField signed_effective_fields(const Channel& ch, const std::vector<double>& offsets) {
    const std::size_t n = offsets.size();
    SignedField out{std::vector<double>(n), std::vector<Vec3>(n)};
    if (n == 0) return out;
    std::vector<EffectiveRotation> raw;
    raw.reserve(n);
    for (double o : offsets) raw.push_back(effective_rotation(ch, o));
    std::size_t centre = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(offsets[i]) < std::abs(offsets[centre])) centre = i;
    auto assign = [&](std::size_t i, const Vec3& ref) {
        double w = raw[i].omega_cw;
        Vec3 a = raw[i].axis;
        if (w != 0.0 && a.dot(ref) < 0.0) {
            w = -w;
            a = -a;
        }
        out.omega_cw[i] = w;
        out.axis[i] = a;
    };
    // Reference orientation at the centre: the axis as extracted.
    out.omega_cw[centre] = raw[centre].omega_cw;
    out.axis[centre] = raw[centre].axis;
    for (std::size_t i = centre + 1; i < n; ++i) assign(i, out.axis[i - 1]);
    for (std::size_t i = centre; i-- > 0;) assign(i, out.axis[i + 1]);
    return out;
}

std::vector<OffsetSweepRow> offset_sweep(const PulseSequence& seq, const std::vector<std::string>& channels,
                                         const std::vector<std::vector<double>>& grids) {
    if (channels.size() != grids.size()) throw ConfigError("one offset grid per channel required");
    const std::size_t n = grids.empty() ? 0 : grids.front().size();
    for (const auto& g : grids)
        if (g.size() != n) throw ConfigError("offset grids must have equal length");
    std::vector<SignedField> fields;
    for (std::size_t q = 0; q < channels.size(); ++q)
        fields.push_back(signed_effective_fields(seq.channel(channels[q]), grids[q]));
    std::vector<OffsetSweepRow> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& r = rows[i];
        for (std::size_t q = 0; q < channels.size(); ++q) {
            r.offsets.push_back(grids[q][i]);
            r.omega_cw.push_back(fields[q].omega_cw[i]);
            r.axis.push_back(fields[q].axis[i]);
        }
        if (r.omega_cw.size() >= 2) {
            r.hetero_metric = std::abs(r.omega_cw[0]) - std::abs(r.omega_cw[1]);
            r.homo_metric = std::abs(r.omega_cw[0] + r.omega_cw[1]);
        }
    }
    return rows;
}

}  // namespace nmr
