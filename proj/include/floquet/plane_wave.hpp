#pragma once

// Truncated plane-wave representation of the Bloch Hamiltonian
//   H0(k) = (i grad - k)^2 + q   on the torus R^n / Z^n,
// with entries (k + 2 pi m).(k + 2 pi m) delta + qhat(m - m') - lambda delta.
// The square is bilinear (unconjugated) so every entry is analytic in k.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "potential.hpp"

namespace floquet {

inline int default_cutoff(int dim) { return dim == 1 ? 8 : dim == 2 ? 6 : 3; }

class PlaneWaveBasis {
public:
    PlaneWaveBasis(int dim, int cutoff) : dim_(dim), cutoff_(cutoff) {
        require(dim >= 1 && dim <= max_dim, "basis dim must be 1, 2 or 3");
        require(cutoff >= 1, "plane-wave cutoff must be >= 1");
        const int side = 2 * cutoff + 1;
        std::size_t n = 1;
        for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(side);
        indices_.reserve(n);
        // Lexicographic, first axis most significant.
        for (std::size_t flat = 0; flat < n; ++flat) {
            LatticeVec m{0, 0, 0};
            std::size_t rem = flat;
            for (int a = dim - 1; a >= 0; --a) {
                m[a] = static_cast<int>(rem % side) - cutoff;
                rem /= side;
            }
            indices_.push_back(m);
        }
    }

    int dim() const { return dim_; }
    int cutoff() const { return cutoff_; }
    std::size_t size() const { return indices_.size(); }
    const std::vector<LatticeVec>& indices() const { return indices_; }

private:
    int dim_;
    int cutoff_;
    std::vector<LatticeVec> indices_;
};

struct BlochMatrix {
    ComplexVec k{};
    cplx lambda{};
    Eigen::MatrixXcd entries;
    bool hermitian = false;
};

/// log|det| and principal phase of a determinant.
struct LogDet {
    double log_abs = 0;
    double phase = 0;

    bool singular() const { return std::isinf(log_abs) && log_abs < 0; }
    /// Sign of a real determinant, read off the phase.
    int sign() const { return std::cos(phase) >= 0 ? 1 : -1; }
    cplx value() const { return singular() ? cplx(0) : std::polar(std::exp(log_abs), phase); }
};

/// The potential part of H0(k) is independent of (k, lambda); this caches it
/// so that sweeps over many quasimomenta only rebuild the diagonal.
class BlochFamily {
public:
    BlochFamily(PlaneWaveBasis basis, const FourierPotential& q) : basis_(std::move(basis)) {
        require(q.dim() == basis_.dim(), "potential and basis dimensions differ");
        const auto& idx = basis_.indices();
        const auto n = static_cast<Eigen::Index>(idx.size());
        potential_l1_ = q.oscillation_l1();
        potential_.setZero(n, n);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b) {
                LatticeVec d{idx[a][0] - idx[b][0], idx[a][1] - idx[b][1], idx[a][2] - idx[b][2]};
                potential_(a, b) = q.coeff(d);
            }
        if (potential_.imag().cwiseAbs().maxCoeff() == 0.0) real_potential_ = potential_.real();
    }

    /// True when H0(k) is real symmetric for real k (even potential).
    bool real_symmetric() const { return real_potential_.size() > 0; }

    const PlaneWaveBasis& basis() const { return basis_; }
    std::size_t size() const { return basis_.size(); }
    int dim() const { return basis_.dim(); }
    /// Sum of |qhat(m)| over m != 0.
    double potential_l1() const { return potential_l1_; }

    /// (k + 2 pi m).(k + 2 pi m) for basis function a.
    cplx kinetic(std::size_t a, const ComplexVec& k) const {
        const auto& m = basis_.indices()[a];
        cplx s = 0;
        for (int d = 0; d < dim(); ++d) {
            const cplx p = k[d] + two_pi * m[d];
            s += p * p;
        }
        return s;
    }

    BlochMatrix matrix(const ComplexVec& k, cplx lambda) const {
        BlochMatrix out;
        out.k = k;
        out.lambda = lambda;
        out.entries = potential_;
        for (std::size_t a = 0; a < size(); ++a) {
            const auto i = static_cast<Eigen::Index>(a);
            out.entries(i, i) += kinetic(a, k) - lambda;
        }
        bool real = lambda.imag() == 0;
        for (int d = 0; d < dim(); ++d) real = real && k[d].imag() == 0;
        out.hermitian = real;
        return out;
    }

    BlochMatrix matrix(const RealVec& k, double lambda) const { return matrix(to_complex(k), cplx(lambda)); }

    /// Ascending eigenvalues of the truncated H0(k) at real k.
    Eigen::VectorXd spectrum(const RealVec& k) const {
        if (real_symmetric()) {
            Eigen::MatrixXd h = real_potential_;
            for (std::size_t a = 0; a < size(); ++a) {
                const auto i = static_cast<Eigen::Index>(a);
                h(i, i) += kinetic(a, to_complex(k)).real();
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
            return es.eigenvalues();
        }
        Eigen::MatrixXcd h = potential_;
        for (std::size_t a = 0; a < size(); ++a) {
            const auto i = static_cast<Eigen::Index>(a);
            h(i, i) += kinetic(a, to_complex(k));
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    /// Eigenvalues and eigenvectors (columns) of H0(k) at real k.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eigensystem(const RealVec& k) const {
        Eigen::MatrixXcd h = potential_;
        for (std::size_t a = 0; a < size(); ++a) {
            const auto i = static_cast<Eigen::Index>(a);
            h(i, i) += kinetic(a, to_complex(k));
        }
        return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(h);
    }

    /// d/dk_axis log det(H0(k) - lambda) = tr(A^{-1} dA/dk_axis), with
    /// dA/dk_axis = diag(2 (k_axis + 2 pi m_axis)). Returns the log-derivative
    /// together with the determinant; analytic in k.
    std::pair<cplx, LogDet> log_derivative(const ComplexVec& k, cplx lambda, int axis) const {
        const BlochMatrix m = matrix(k, lambda);
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m.entries);
        const LogDet ld = log_det_of(lu);
        if (ld.singular()) return {cplx(std::numeric_limits<double>::infinity()), ld};
        const Eigen::MatrixXcd inv = lu.inverse();
        cplx tr = 0;
        for (std::size_t a = 0; a < size(); ++a) {
            const auto i = static_cast<Eigen::Index>(a);
            tr += inv(i, i) * 2.0 * (k[axis] + two_pi * basis_.indices()[a][axis]);
        }
        return {tr, ld};
    }

    /// log det(H0(k) - lambda) at real (k, lambda), real arithmetic when possible.
    LogDet log_det_real(const RealVec& k, double lambda) const {
        if (!real_symmetric()) {
            Eigen::PartialPivLU<Eigen::MatrixXcd> lu(matrix(k, lambda).entries);
            return log_det_of(lu);
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(real_matrix(k, lambda));
        return log_det_of(lu);
    }

    /// Real-k version of log_derivative; the trace is real for Hermitian A.
    std::pair<double, LogDet> log_derivative_real(const RealVec& k, double lambda, int axis) const {
        if (!real_symmetric()) {
            const auto [d, ld] = log_derivative(to_complex(k), cplx(lambda), axis);
            return {d.real(), ld};
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(real_matrix(k, lambda));
        const LogDet ld = log_det_of(lu);
        if (ld.singular()) return {std::numeric_limits<double>::infinity(), ld};
        const Eigen::MatrixXd inv = lu.inverse();
        double tr = 0;
        for (std::size_t a = 0; a < size(); ++a) {
            const auto i = static_cast<Eigen::Index>(a);
            tr += inv(i, i) * 2.0 * (k[axis] + two_pi * basis_.indices()[a][axis]);
        }
        return {tr, ld};
    }

    template <class Scalar>
    static LogDet log_det_of(const Eigen::PartialPivLU<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& lu) {
        const auto& lu_m = lu.matrixLU();
        LogDet out;
        out.phase = lu.permutationP().determinant() < 0 ? pi : 0.0;
        for (Eigen::Index i = 0; i < lu_m.rows(); ++i) {
            const cplx p = lu_m(i, i);
            if (p == cplx(0)) {
                out.log_abs = -std::numeric_limits<double>::infinity();
                out.phase = 0;
                return out;
            }
            out.log_abs += std::log(std::abs(p));
            out.phase += std::arg(p);
        }
        out.phase = std::arg(std::polar(1.0, out.phase));
        return out;
    }

private:
    Eigen::MatrixXd real_matrix(const RealVec& k, double lambda) const {
        Eigen::MatrixXd h = real_potential_;
        for (std::size_t a = 0; a < size(); ++a) {
            const auto i = static_cast<Eigen::Index>(a);
            h(i, i) += kinetic(a, to_complex(k)).real() - lambda;
        }
        return h;
    }

public:
private:
    PlaneWaveBasis basis_;
    Eigen::MatrixXcd potential_;
    Eigen::MatrixXd real_potential_;
    double potential_l1_ = 0;
};

inline BlochMatrix assemble(const PlaneWaveBasis& basis, const FourierPotential& q, const ComplexVec& k,
                            cplx lambda) {
    return BlochFamily(basis, q).matrix(k, lambda);
}

/// log|det| via partial-pivot LU; an exactly singular matrix gives -inf.
inline LogDet log_det(const BlochMatrix& m) {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m.entries);
    return BlochFamily::log_det_of(lu);
}

/// All eigenvalues of H0(k) (the lambda shift removed), ascending.
inline std::vector<double> hermitian_spectrum(const BlochMatrix& m) {
    require(m.hermitian, "hermitian_spectrum needs real k and real lambda");
    Eigen::MatrixXcd h = m.entries;
    h.diagonal().array() += m.lambda;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = es.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

/// sign(det) * exp(log|det| / N): the real, geometric-mean-scaled determinant.
inline double contour_value(const LogDet& ld, std::size_t n) {
    if (ld.singular()) return 0.0;
    return ld.sign() * std::exp(ld.log_abs / static_cast<double>(n));
}

}  // namespace floquet
