#include "nmrsim/spin.hpp"

#include <cctype>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace nmr {

namespace {

Mat pauli_half(Axis axis, Ladder ladder) {
    Mat m = Mat::Zero(2, 2);
    const Mat x = (Mat(2, 2) << 0.0, 0.5, 0.5, 0.0).finished();
    const Mat y = (Mat(2, 2) << 0.0, -0.5 * I, 0.5 * I, 0.0).finished();
    const Mat z = (Mat(2, 2) << 0.5, 0.0, 0.0, -0.5).finished();
    const Mat& first = ladder == Ladder::xy ? x : z;
    switch (axis) {
        case Axis::x: return x;
        case Axis::y: return y;
        case Axis::z: return z;
        case Axis::plus: return first + I * y;
        case Axis::minus: return first - I * y;
    }
    return m;
}

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

void check_same_dim(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("operator dimension mismatch");
}

}  // namespace

Mat single_spin_operator(int spin, Axis axis, int n_spins, Ladder ladder) {
    if (n_spins < 1 || n_spins > max_spins || spin < 0 || spin >= n_spins)
        throw std::out_of_range("spin index out of range");
    Mat out = Mat::Identity(1, 1);
    for (int s = 0; s < n_spins; ++s)
        out = kron(out, s == spin ? pauli_half(axis, ladder) : Mat(Mat::Identity(2, 2)));
    return out;
}

Mat spin_vector_operator(int spin, const Vec3& v, int n_spins) {
    return v.x() * single_spin_operator(spin, Axis::x, n_spins) +
           v.y() * single_spin_operator(spin, Axis::y, n_spins) +
           v.z() * single_spin_operator(spin, Axis::z, n_spins);
}

Mat identity_operator(int n_spins) {
    const int dim = 1 << n_spins;
    return Mat::Identity(dim, dim);
}

Mat two_spin_product(const Mat& a, const Mat& b) {
    check_same_dim(a, b);
    return a * b;
}

Mat commutator(const Mat& a, const Mat& b) {
    check_same_dim(a, b);
    return a * b - b * a;
}

cd expectation(const Mat& rho, const Mat& op) {
    check_same_dim(rho, op);
    return (rho * op).trace();
}

SubspaceBasis zq_dq_basis(Subspace kind, const Mat3& axes1, const Mat3& axes2, int spin1,
                          int spin2, int n_spins) {
    for (const Mat3* a : {&axes1, &axes2})
        if ((*a * a->transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10)
            throw ConfigError("axis triple is not orthonormal");
    if (spin1 == spin2) throw std::invalid_argument("subspace needs two distinct spins");
    auto op = [&](int spin, const Mat3& axes, int row) {
        return spin_vector_operator(spin, axes.row(row).transpose(), n_spins);
    };
    const Mat x1 = op(spin1, axes1, 0), y1 = op(spin1, axes1, 1), z1 = op(spin1, axes1, 2);
    const Mat x2 = op(spin2, axes2, 0), y2 = op(spin2, axes2, 1), z2 = op(spin2, axes2, 2);
    SubspaceBasis b{kind, {}};
    if (kind == Subspace::ZQ) {
        b.axes[0] = x1 * x2 + y1 * y2;
        b.axes[1] = y1 * x2 - x1 * y2;
        b.axes[2] = 0.5 * (z1 - z2);
    } else {
        b.axes[0] = x1 * x2 - y1 * y2;
        b.axes[1] = x1 * y2 + y1 * x2;
        b.axes[2] = 0.5 * (z1 + z2);
    }
    return b;
}

double max_abs(const Mat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double hermiticity_error(const Mat& a) { return max_abs(a - a.adjoint()); }

double unitarity_error(const Mat& u) {
    return max_abs(u.adjoint() * u - Mat::Identity(u.rows(), u.cols()));
}

Mat expm_hermitian(const Mat& h, double t) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    const auto& v = es.eigenvectors();
    Mat d = Mat::Zero(h.rows(), h.cols());
    for (Eigen::Index i = 0; i < h.rows(); ++i) d(i, i) = std::exp(-I * (es.eigenvalues()(i) * t));
    return v * d * v.adjoint();
}

Mat operator_from_label(const std::string& label, int n_spins) {
    Mat total = Mat::Zero(1 << n_spins, 1 << n_spins);
    std::stringstream ss(label);
    std::string term;
    while (std::getline(ss, term, '+')) {
        if (term.size() < 2) throw ConfigError("bad operator label: " + label);
        const char letter = term.front();
        int spin = 0;
        std::size_t pos = 1;
        if (letter == 'S') {
            spin = 1;
        } else if (letter != 'I') {
            throw ConfigError("bad operator label: " + label);
        }
        if (pos < term.size() && std::isdigit(static_cast<unsigned char>(term[pos]))) {
            spin = term[pos] - '1';
            ++pos;
        }
        if (pos + 1 != term.size()) throw ConfigError("bad operator label: " + label);
        Axis axis;
        switch (term[pos]) {
            case 'x': axis = Axis::x; break;
            case 'y': axis = Axis::y; break;
            case 'z': axis = Axis::z; break;
            case 'p': axis = Axis::plus; break;
            case 'm': axis = Axis::minus; break;
            default: throw ConfigError("bad operator label: " + label);
        }
        if (spin < 0 || spin >= n_spins) throw ConfigError("operator label refers to missing spin: " + label);
        total += single_spin_operator(spin, axis, n_spins);
    }
    return total;
}

}  // namespace nmr
