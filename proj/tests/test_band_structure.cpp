#include <gtest/gtest.h>

#include <algorithm>

#include "floquet/band_structure.hpp"

using namespace floquet;

namespace {

std::vector<double> free_levels(int dim, int cutoff, const RealVec& k, double shift) {
    std::vector<double> out;
    const int side = 2 * cutoff + 1;
    int total = 1;
    for (int a = 0; a < dim; ++a) total *= side;
    for (int f = 0; f < total; ++f) {
        int rem = f;
        double s = shift;
        for (int a = 0; a < dim; ++a) {
            s += std::pow(k[a] + two_pi * (rem % side - cutoff), 2);
            rem /= side;
        }
        out.push_back(s);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(BrillouinGrid, IndexingRoundTrip) {
    const BrillouinGrid g(3, 5, RealVec{-pi, 0, 1});
    EXPECT_EQ(g.size(), 125u);
    for (std::size_t i : {0u, 7u, 63u, 124u}) EXPECT_EQ(g.flat(g.index(i)), i);
    EXPECT_NEAR(g.spacing(), two_pi / 4, 1e-15);
    const auto last = g.node(124);
    EXPECT_NEAR(last[0], pi, 1e-14);
    EXPECT_NEAR(last[1], two_pi, 1e-14);
    EXPECT_NEAR(last[2], 1 + two_pi, 1e-14);
    EXPECT_THROW(BrillouinGrid(2, 1), InputError);
}

TEST(BandStructure, FreeBandsExactOnGrid) {
    for (int dim : {1, 2}) {
        const int M = 4;
        const double c = -0.4;
        const BrillouinGrid grid(dim, dim == 1 ? 41 : 13);
        const int nb = static_cast<int>(PlaneWaveBasis(dim, M).size() / 2);
        const auto bs = band_functions(constant_potential(dim, c), PlaneWaveBasis(dim, M), grid, nb);
        double err = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto ref = free_levels(dim, M, grid.node(i), c);
            for (int j = 0; j < nb; ++j) err = std::max(err, std::abs(bs.values[i][j] - ref[j]));
        }
        EXPECT_LT(err, 1e-10) << "dim " << dim;
    }
}

TEST(BandStructure, ConstantShiftMovesEveryBand) {
    const BrillouinGrid grid(2, 9);
    const PlaneWaveBasis basis(2, 3);
    const auto q = tensor_sum({{mathieu(1), mathieu(0.5)}});
    const auto a = band_functions(q, basis, grid, 6);
    const auto b = band_functions(q.shifted(2.5), basis, grid, 6);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (int j = 0; j < 6; ++j) EXPECT_NEAR(b.values[i][j] - a.values[i][j], 2.5, 1e-10);
}

TEST(BandStructure, MathieuEdgesAgreeWithHill) {
    const auto q = mathieu(1.0);
    auto bs = extract_bands(band_functions(q, PlaneWaveBasis(1, 8), BrillouinGrid(1, 201), 4), 1e-10);
    const auto hill = bands_1d(q, 160.0);
    ASSERT_EQ(bs.bands.size(), 4u);
    for (int j = 0; j < 4; ++j) {
        EXPECT_NEAR(bs.bands[j].lo, hill[j].lo, 1e-6) << "band " << j;
        EXPECT_NEAR(bs.bands[j].hi, hill[j].hi, 1e-6) << "band " << j;
    }
    ASSERT_GE(bs.gaps.size(), 3u);
    EXPECT_NEAR(bs.gaps[0].lo, hill[0].hi, 1e-6);
    EXPECT_NEAR(bs.gaps[0].hi, hill[1].lo, 1e-6);
    // Edges of the even-potential bands sit at k = 0 or k = pi.
    for (const auto& e : bs.minima) {
        const double k = wrap_two_pi(e.k[0]);
        EXPECT_LT(std::min({k, std::abs(k - pi), two_pi - k}), 1e-4);
    }
}

TEST(BandStructure, BandsAreSortedAndContinuous) {
    const auto bs = band_functions(tensor_sum({{mathieu(1), mathieu(1)}}), PlaneWaveBasis(2, 4), BrillouinGrid(2, 21), 8);
    for (const auto& v : bs.values) EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
    EXPECT_EQ(continuity_violations(bs), 0u);
}

TEST(BandStructure, GapsBetweenMergesOverlaps) {
    const auto g = gaps_between({{0, 1}, {0.5, 2}, {3, 4}, {3.5, 3.7}, {4.2, 5}});
    ASSERT_EQ(g.size(), 2u);
    EXPECT_DOUBLE_EQ(g[0].lo, 2);
    EXPECT_DOUBLE_EQ(g[0].hi, 3);
    EXPECT_DOUBLE_EQ(g[1].lo, 4);
    EXPECT_DOUBLE_EQ(g[1].hi, 4.2);
}

TEST(BandStructure, TooManyBandsRejected) {
    EXPECT_THROW(band_functions(mathieu(1), PlaneWaveBasis(1, 2), BrillouinGrid(1, 11), 3), InputError);
    EXPECT_THROW(band_functions(mathieu(1), PlaneWaveBasis(1, 2), BrillouinGrid(2, 11), 1), InputError);
}

TEST(SpectrumMembership, MathieuVerdicts) {
    const auto q = mathieu(1.0);
    const PlaneWaveBasis basis(1, 8);
    const BrillouinGrid grid(1, 201);
    const auto hill = bands_1d(q, 60.0);

    const auto inside = in_spectrum(q, basis, 5.0, grid);
    EXPECT_EQ(inside.verdict, SpectrumVerdict::inside_band_interior);
    EXPECT_EQ(inside.band, 0);
    ASSERT_TRUE(inside.witness.has_value());
    EXPECT_LT(inside.witness_residual, 1e-8);
    const auto ev = BlochFamily(basis, q).spectrum(*inside.witness);
    EXPECT_NEAR(ev(0), 5.0, 1e-8);

    const auto gap = in_spectrum(q, basis, 0.5 * (hill[0].hi + hill[1].lo), grid);
    EXPECT_EQ(gap.verdict, SpectrumVerdict::in_gap);
    EXPECT_NEAR(gap.distance, 0.5 * (hill[1].lo - hill[0].hi), 1e-6);

    const auto below = in_spectrum(q, basis, -3.0, grid);
    EXPECT_EQ(below.verdict, SpectrumVerdict::in_gap);

    const auto edge = in_spectrum(q, basis, hill[1].lo + 1e-8, grid);
    EXPECT_EQ(edge.verdict, SpectrumVerdict::at_edge_within_tol);
}

TEST(SpectrumMembership, TwoDimensionalSeparable) {
    const auto q = tensor_sum({{mathieu(1), mathieu(1)}});
    const PlaneWaveBasis basis(2, 4);
    const BrillouinGrid grid(2, 21);
    // Bottom of the spectrum is twice the 1D bottom.
    const double bottom = 2 * bands_1d(mathieu(1), 20.0)[0].lo;
    EXPECT_EQ(in_spectrum(q, basis, bottom - 0.05, grid).verdict, SpectrumVerdict::in_gap);
    const auto m = in_spectrum(q, basis, 12.0, grid);
    EXPECT_EQ(m.verdict, SpectrumVerdict::inside_band_interior);
    ASSERT_TRUE(m.witness.has_value());
    EXPECT_LT(m.witness_residual, 1e-8);
}
