#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "floquet/plane_wave.hpp"

using namespace floquet;

namespace {

// Laplace expansion along the first row; only for tiny matrices.
cplx cofactor_det(const Eigen::MatrixXcd& a) {
    const auto n = a.rows();
    if (n == 1) return a(0, 0);
    cplx s = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::MatrixXcd minor(n - 1, n - 1);
        for (Eigen::Index r = 1; r < n; ++r)
            for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
                if (c == j) continue;
                minor(r - 1, cc++) = a(r, c);
            }
        s += (j % 2 == 0 ? 1.0 : -1.0) * a(0, j) * cofactor_det(minor);
    }
    return s;
}

std::vector<double> free_levels(int dim, int cutoff, const RealVec& k, double shift) {
    std::vector<double> out;
    const int side = 2 * cutoff + 1;
    int total = 1;
    for (int a = 0; a < dim; ++a) total *= side;
    for (int f = 0; f < total; ++f) {
        int rem = f;
        double s = 0;
        for (int a = 0; a < dim; ++a) {
            const int m = rem % side - cutoff;
            rem /= side;
            s += std::pow(k[a] + two_pi * m, 2);
        }
        out.push_back(s + shift);
    }
    std::sort(out.begin(), out.end());
    return out;
}

FourierPotential random_potential(int dim, int radius, std::mt19937_64& rng, bool even) {
    std::normal_distribution<double> nd;
    FourierPotential::CoeffMap m;
    const int side = 2 * radius + 1;
    int total = 1;
    for (int a = 0; a < dim; ++a) total *= side;
    for (int f = 0; f < total; ++f) {
        LatticeVec v{0, 0, 0};
        int rem = f;
        for (int a = 0; a < dim; ++a) {
            v[a] = rem % side - radius;
            rem /= side;
        }
        const LatticeVec w{-v[0], -v[1], -v[2]};
        if (m.count(w)) continue;
        const cplx c(nd(rng), even ? 0.0 : nd(rng));
        m[v] = c;
        m[w] = std::conj(c);
        if (v == w) m[v] = c.real();
    }
    return FourierPotential(dim, m);
}

}  // namespace

TEST(PlaneWave, BasisIsLexicographic) {
    const PlaneWaveBasis b(2, 1);
    ASSERT_EQ(b.size(), 9u);
    EXPECT_EQ(b.indices()[0], (LatticeVec{-1, -1, 0}));
    EXPECT_EQ(b.indices()[1], (LatticeVec{-1, 0, 0}));
    EXPECT_EQ(b.indices()[3], (LatticeVec{0, -1, 0}));
    EXPECT_EQ(b.indices()[8], (LatticeVec{1, 1, 0}));
    EXPECT_EQ(PlaneWaveBasis(3, 2).size(), 125u);
    EXPECT_THROW(PlaneWaveBasis(1, 0), InputError);
    EXPECT_THROW(PlaneWaveBasis(0, 3), InputError);
}

TEST(PlaneWave, DefaultCutoffs) {
    EXPECT_EQ(default_cutoff(1), 8);
    EXPECT_EQ(default_cutoff(2), 6);
    EXPECT_EQ(default_cutoff(3), 3);
}

TEST(PlaneWave, FreeSpectrumIsExact) {
    for (int dim : {1, 2, 3}) {
        const int M = dim == 3 ? 2 : 4;
        const BlochFamily fam(PlaneWaveBasis(dim, M), constant_potential(dim, 0.75));
        const RealVec k{0.3, -1.1, 2.0};
        const auto ev = fam.spectrum(k);
        const auto ref = free_levels(dim, M, k, 0.75);
        ASSERT_EQ(static_cast<std::size_t>(ev.size()), ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(ev(static_cast<Eigen::Index>(i)), ref[i], 1e-10);
    }
}

TEST(PlaneWave, MatrixEntriesFollowDefinition) {
    const auto q = mathieu(1.0);
    const PlaneWaveBasis basis(1, 2);
    const ComplexVec k{cplx(0.4, 0.3), 0, 0};
    const auto m = assemble(basis, q, k, cplx(1.5, -0.2));
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) {
            const int ma = a - 2, mb = b - 2;
            cplx expect = q.coeff({ma - mb, 0, 0});
            if (a == b) expect += (k[0] + two_pi * ma) * (k[0] + two_pi * ma) - cplx(1.5, -0.2);
            EXPECT_NEAR(std::abs(m.entries(a, b) - expect), 0.0, 1e-13);
        }
    EXPECT_FALSE(m.hermitian);
    EXPECT_TRUE(assemble(basis, q, to_complex(RealVec{0.4, 0, 0}), 1.0).hermitian);
}

TEST(PlaneWave, HermitianForRealQuasimomentum) {
    std::mt19937_64 rng(7);
    const auto q = random_potential(2, 2, rng, false);
    const BlochFamily fam(PlaneWaveBasis(2, 2), q);
    EXPECT_FALSE(fam.real_symmetric());
    const auto m = fam.matrix(RealVec{0.7, 2.1, 0}, 0.3);
    EXPECT_LT((m.entries - m.entries.adjoint()).norm(), 1e-13);
}

TEST(PlaneWave, LogDetMatchesCofactorExpansion) {
    std::mt19937_64 rng(11);
    for (bool even : {true, false}) {
        const auto q = random_potential(2, 1, rng, even);
        const BlochFamily fam(PlaneWaveBasis(2, 1), q);
        const ComplexVec k{cplx(0.3, 0.2), cplx(-1.0, 0.5), 0};
        const auto m = fam.matrix(k, cplx(2.0, 0.1));
        const cplx ref = cofactor_det(m.entries);
        const cplx got = log_det(m).value();
        EXPECT_NEAR(std::abs(got - ref) / std::abs(ref), 0.0, 1e-11);
    }
}

TEST(PlaneWave, RealLogDetSignMatchesSpectrum) {
    const BlochFamily fam(PlaneWaveBasis(2, 3), tensor_sum({{mathieu(1), mathieu(1)}}));
    ASSERT_TRUE(fam.real_symmetric());
    for (double lam : {-1.0, 3.0, 12.5, 30.0}) {
        const RealVec k{0.9, 2.4, 0};
        const auto ev = fam.spectrum(k);
        int neg = 0;
        double log_abs = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (ev(i) < lam) ++neg;
            log_abs += std::log(std::abs(ev(i) - lam));
        }
        const auto ld = fam.log_det_real(k, lam);
        EXPECT_EQ(ld.sign(), neg % 2 == 0 ? 1 : -1);
        EXPECT_NEAR(ld.log_abs, log_abs, 1e-9 * std::abs(log_abs) + 1e-9);
        const auto ldc = log_det(fam.matrix(k, lam));
        EXPECT_EQ(ldc.sign(), ld.sign());
    }
}

TEST(PlaneWave, LogDerivativeMatchesFiniteDifference) {
    const BlochFamily fam(PlaneWaveBasis(1, 4), mathieu(1));
    const ComplexVec k{cplx(0.8, 0.3), 0, 0};
    const cplx lam(5.0, 0.0);
    const auto [d, ld] = fam.log_derivative(k, lam, 0);
    const double h = 1e-6;
    ComplexVec kp = k, km = k;
    kp[0] += h;
    km[0] -= h;
    const cplx fp = log_det(fam.matrix(kp, lam)).value(), fm = log_det(fam.matrix(km, lam)).value();
    const cplx fd = (fp - fm) / (2 * h) / ld.value();
    EXPECT_NEAR(std::abs(d - fd) / std::abs(d), 0.0, 1e-6);

    const auto [dr, ldr] = fam.log_derivative_real(RealVec{0.8, 0, 0}, 5.0, 0);
    const auto [dc, ldc] = fam.log_derivative(to_complex(RealVec{0.8, 0, 0}), cplx(5.0), 0);
    EXPECT_NEAR(dr, dc.real(), 1e-10 * (1 + std::abs(dr)));
    EXPECT_NEAR(dc.imag(), 0.0, 1e-9);
}

TEST(PlaneWave, DeterminantAnalyticInK) {
    // Cauchy-Riemann: d/d(Re k) = -i d/d(Im k) for an analytic function.
    const BlochFamily fam(PlaneWaveBasis(1, 3), mathieu(0.6));
    const ComplexVec k{cplx(1.1, 0.4), 0, 0};
    const double h = 1e-6;
    auto f = [&](cplx z) {
        ComplexVec kk = k;
        kk[0] = z;
        return log_det(fam.matrix(kk, cplx(3.0))).value();
    };
    const cplx dx = (f(k[0] + h) - f(k[0] - h)) / (2 * h);
    const cplx dy = (f(k[0] + cplx(0, h)) - f(k[0] - cplx(0, h))) / (2 * h);
    EXPECT_NEAR(std::abs(dx + cplx(0, 1) * dy) / std::abs(dx), 0.0, 1e-6);
}

TEST(PlaneWave, SingularDeterminantDetected) {
    const BlochFamily fam(PlaneWaveBasis(1, 2), FourierPotential(1));
    const auto ld = fam.log_det_real(RealVec{0.5, 0, 0}, 0.25);
    EXPECT_TRUE(ld.singular() || ld.log_abs < -30);
    EXPECT_EQ(contour_value(LogDet{-std::numeric_limits<double>::infinity(), 0}, 5), 0.0);
}

TEST(PlaneWave, HermitianSpectrumRequiresRealData) {
    const auto m = assemble(PlaneWaveBasis(1, 2), mathieu(1), ComplexVec{cplx(0.1, 0.1), 0, 0}, 0.0);
    EXPECT_THROW(hermitian_spectrum(m), InputError);
    const auto r = assemble(PlaneWaveBasis(1, 2), mathieu(1), to_complex(RealVec{0.1, 0, 0}), 2.0);
    const auto ev = hermitian_spectrum(r);
    const auto ref = BlochFamily(PlaneWaveBasis(1, 2), mathieu(1)).spectrum(RealVec{0.1, 0, 0});
    for (std::size_t i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev[i], ref(static_cast<Eigen::Index>(i)), 1e-12);
}
