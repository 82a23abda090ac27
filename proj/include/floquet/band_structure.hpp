#pragma once

// Band functions lambda_j(k) over the Brillouin zone [0, 2 pi]^n, band
// intervals [a_j, b_j] and gaps, and the in-spectrum predicate.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "hill.hpp"
#include "parallel.hpp"
#include "plane_wave.hpp"

namespace floquet {

inline int default_grid_nodes(int dim) { return dim == 1 ? 201 : dim == 2 ? 61 : 21; }

/// Uniform, endpoint-inclusive grid over origin + [0, 2 pi]^dim.
class BrillouinGrid {
public:
    BrillouinGrid(int dim, int nodes_per_axis, RealVec origin = {0, 0, 0})
        : dim_(dim), n_(nodes_per_axis), origin_(origin) {
        require(dim >= 1 && dim <= max_dim, "grid dim must be 1, 2 or 3");
        require(nodes_per_axis >= 2, "Brillouin grid needs at least 2 nodes per axis");
    }

    int dim() const { return dim_; }
    int nodes_per_axis() const { return n_; }
    const RealVec& origin() const { return origin_; }
    double spacing() const { return two_pi / (n_ - 1); }

    std::size_t size() const {
        std::size_t s = 1;
        for (int a = 0; a < dim_; ++a) s *= static_cast<std::size_t>(n_);
        return s;
    }

    std::array<int, max_dim> index(std::size_t flat) const {
        std::array<int, max_dim> idx{0, 0, 0};
        for (int a = dim_ - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(flat % n_);
            flat /= n_;
        }
        return idx;
    }

    std::size_t flat(const std::array<int, max_dim>& idx) const {
        std::size_t f = 0;
        for (int a = 0; a < dim_; ++a) f = f * n_ + static_cast<std::size_t>(idx[a]);
        return f;
    }

    RealVec node(const std::array<int, max_dim>& idx) const {
        RealVec k{0, 0, 0};
        for (int a = 0; a < dim_; ++a) k[a] = origin_[a] + spacing() * idx[a];
        return k;
    }

    RealVec node(std::size_t flat_index) const { return node(index(flat_index)); }

private:
    int dim_;
    int n_;
    RealVec origin_;
};

struct BandExtremum {
    double value = 0;
    RealVec k{0, 0, 0};
};

struct BandStructure {
    BrillouinGrid grid{1, 2};
    int n_bands = 0;
    std::vector<std::vector<double>> values;  // per node, ascending
    std::vector<Interval> bands;              // [a_j, b_j], filled by extract_bands
    std::vector<Interval> gaps;               // open gaps between merged band hulls
    std::vector<BandExtremum> minima, maxima; // refined locations of a_j and b_j
    std::shared_ptr<const BlochFamily> family;

    double lipschitz_bound() const;
};

/// Sorted Hermitian spectra of the truncated H0(k) at every grid node.
inline BandStructure band_functions(std::shared_ptr<const BlochFamily> family, const BrillouinGrid& grid,
                                    int n_bands) {
    require(family->dim() == grid.dim(), "grid and basis dimensions differ");
    require(n_bands >= 1, "n_bands must be positive");
    require(static_cast<std::size_t>(n_bands) * 2 <= family->size(),
            "n_bands exceeds half the plane-wave basis size (" + std::to_string(family->size()) +
                "); raise the cutoff");
    BandStructure bs;
    bs.grid = grid;
    bs.n_bands = n_bands;
    bs.family = family;
    bs.values.resize(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        const Eigen::VectorXd ev = family->spectrum(grid.node(i));
        bs.values[i].assign(ev.data(), ev.data() + n_bands);
    });
    return bs;
}

inline BandStructure band_functions(const FourierPotential& q, const PlaneWaveBasis& basis, const BrillouinGrid& grid,
                                    int n_bands) {
    return band_functions(std::make_shared<const BlochFamily>(basis, q), grid, n_bands);
}

/// Bound on |lambda_j(k) - lambda_j(k')| / |k - k'|: 2(|k| + 2 pi M + 1) + 2 sum|qhat|.
inline double BandStructure::lipschitz_bound() const {
    double kmax = 0;
    for (int a = 0; a < grid.dim(); ++a) {
        const double e = std::max(std::abs(grid.origin()[a]), std::abs(grid.origin()[a] + two_pi));
        kmax += e * e;
    }
    const double root_dim = std::sqrt(static_cast<double>(grid.dim()));
    return 2.0 * (std::sqrt(kmax) + two_pi * family->basis().cutoff() * root_dim + 1.0) +
           2.0 * family->potential_l1();
}

namespace band_detail {

inline double band_value(const BlochFamily& family, const RealVec& k, int j) {
    return family.spectrum(k)(j);
}

// Golden-section extremization of f on [a, b].
template <class F>
double golden(F&& f, double a, double b, bool maximize, double xtol, double& best) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    auto better = [maximize](double u, double v) { return maximize ? u > v : u < v; };
    while (b - a > xtol) {
        if (better(fc, fd)) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    best = f(x);
    return x;
}

// Coordinate-descent refinement of a grid extremum of band j.
inline BandExtremum refine_extremum(const BlochFamily& family, const BrillouinGrid& grid, RealVec k0, double v0,
                                    int j, bool maximize, double refine_tol) {
    const int dim = grid.dim();
    const double h = grid.spacing();
    const double xtol = dim == 1 ? std::max(1e-11, refine_tol * 1e-2) : std::max(1e-9, std::sqrt(refine_tol) * 0.1);
    BandExtremum best{v0, k0};
    const int max_sweeps = dim == 1 ? 1 : 6;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const double before = best.value;
        for (int a = 0; a < dim; ++a) {
            auto f = [&](double t) {
                RealVec k = best.k;
                k[a] = t;
                return band_value(family, k, j);
            };
            double val = 0;
            const double t = golden(f, best.k[a] - h, best.k[a] + h, maximize, xtol, val);
            if (maximize ? val >= best.value : val <= best.value) {
                best.value = val;
                best.k[a] = t;
            }
        }
        if (std::abs(best.value - before) < refine_tol) break;
    }
    return best;
}

}  // namespace band_detail

/// Refines the grid extremum of band j (0-based) into (minimum, maximum).
inline std::pair<BandExtremum, BandExtremum> refine_band(const BandStructure& bs, int j, double refine_tol) {
    std::size_t imin = 0, imax = 0;
    for (std::size_t i = 1; i < bs.values.size(); ++i) {
        if (bs.values[i][j] < bs.values[imin][j]) imin = i;
        if (bs.values[i][j] > bs.values[imax][j]) imax = i;
    }
    const auto lo = band_detail::refine_extremum(*bs.family, bs.grid, bs.grid.node(imin), bs.values[imin][j], j,
                                                 false, refine_tol);
    const auto hi = band_detail::refine_extremum(*bs.family, bs.grid, bs.grid.node(imax), bs.values[imax][j], j,
                                                 true, refine_tol);
    return {lo, hi};
}

/// Complement of the union of band hulls between the lowest and highest band.
/// Hulls closer than 1e-9 (relative) are treated as touching.
inline std::vector<Interval> gaps_between(const std::vector<Interval>& bands) {
    std::vector<Interval> sorted = bands;
    std::sort(sorted.begin(), sorted.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> gaps;
    if (sorted.empty()) return gaps;
    double hi = sorted.front().hi;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].lo > hi + 1e-9 * (1 + std::abs(hi))) gaps.push_back({hi, sorted[i].lo});
        hi = std::max(hi, sorted[i].hi);
    }
    return gaps;
}

/// a_j = min lambda_j, b_j = max lambda_j over the zone, each refined from the
/// grid extremum by local extremization.
inline BandStructure extract_bands(BandStructure bs, double refine_tol = 1e-8) {
    require(!bs.values.empty() && bs.family, "extract_bands needs computed band functions");
    bs.bands.assign(bs.n_bands, {});
    bs.minima.assign(bs.n_bands, {});
    bs.maxima.assign(bs.n_bands, {});
    parallel_for(static_cast<std::size_t>(bs.n_bands), [&](std::size_t j) {
        const auto [lo, hi] = refine_band(bs, static_cast<int>(j), refine_tol);
        bs.minima[j] = lo;
        bs.maxima[j] = hi;
        bs.bands[j] = {lo.value, hi.value};
    });
    bs.gaps = gaps_between(bs.bands);
    return bs;
}

enum class SpectrumVerdict { inside_band_interior, at_edge_within_tol, in_gap };

inline const char* to_string(SpectrumVerdict v) {
    switch (v) {
        case SpectrumVerdict::inside_band_interior: return "inside_band_interior";
        case SpectrumVerdict::at_edge_within_tol: return "at_edge_within_tol";
        case SpectrumVerdict::in_gap: return "in_gap";
    }
    return "?";
}

struct SpectrumMembership {
    SpectrumVerdict verdict = SpectrumVerdict::in_gap;
    int band = -1;                   // 0-based band index carrying lambda, if any
    std::optional<RealVec> witness;  // k with lambda_band(k) = lambda
    double witness_residual = 0;
    double distance = 0;             // distance to the nearest band when in a gap
    std::vector<Interval> bands;     // refined hulls that were examined
};

/// Decides whether lambda lies in a band interior, at an edge (1e-6), or in a
/// gap, using refined band hulls of every band that could reach lambda.
inline SpectrumMembership in_spectrum(std::shared_ptr<const BlochFamily> family, double lambda,
                                      const BrillouinGrid& grid, double edge_tol = 1e-6) {
    const int n_bands = static_cast<int>(family->size() / 2);
    const BandStructure bs = band_functions(family, grid, n_bands);
    // Grid hulls, widened by the Lipschitz bound times the half-diagonal of a cell.
    const double slack = bs.lipschitz_bound() * grid.spacing() * std::sqrt(static_cast<double>(grid.dim()));
    std::vector<Interval> grid_hull(n_bands, {1e300, -1e300});
    for (const auto& v : bs.values)
        for (int j = 0; j < n_bands; ++j) {
            grid_hull[j].lo = std::min(grid_hull[j].lo, v[j]);
            grid_hull[j].hi = std::max(grid_hull[j].hi, v[j]);
        }
    require(lambda <= grid_hull[n_bands - 1].hi,
            "lambda lies above the highest resolved band; raise the cutoff");
    double d_grid = 1e300;
    for (const auto& h : grid_hull)
        d_grid = std::min(d_grid, lambda < h.lo ? h.lo - lambda : lambda > h.hi ? lambda - h.hi : 0.0);

    SpectrumMembership out;
    std::vector<int> candidates;
    for (int j = 0; j < n_bands; ++j) {
        const auto& h = grid_hull[j];
        const double d = lambda < h.lo ? h.lo - lambda : lambda > h.hi ? lambda - h.hi : 0.0;
        if (d <= d_grid + 2 * slack) candidates.push_back(j);
    }
    std::vector<std::pair<BandExtremum, BandExtremum>> refined(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t c) { refined[c] = refine_band(bs, candidates[c], 1e-10); });

    double best_distance = 1e300;
    int edge_band = -1;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const Interval hull{refined[c].first.value, refined[c].second.value};
        out.bands.push_back(hull);
        if (lambda > hull.lo + edge_tol && lambda < hull.hi - edge_tol && out.band < 0) out.band = candidates[c];
        const double d = lambda < hull.lo ? hull.lo - lambda : lambda > hull.hi ? lambda - hull.hi : 0.0;
        if (d == 0 && edge_band < 0) edge_band = candidates[c];
        best_distance = std::min(best_distance, d);
    }
    // Edge proximity also counts for bands lambda lies just outside of.
    double nearest_edge = 1e300;
    for (const auto& hull : out.bands)
        nearest_edge = std::min({nearest_edge, std::abs(lambda - hull.lo), std::abs(lambda - hull.hi)});

    if (out.band >= 0) {
        out.verdict = SpectrumVerdict::inside_band_interior;
        // Witness: bisection along the segment from the band minimum to its maximum.
        const auto c = static_cast<std::size_t>(
            std::find(candidates.begin(), candidates.end(), out.band) - candidates.begin());
        const RealVec k0 = refined[c].first.k, k1 = refined[c].second.k;
        auto at = [&](double t) {
            RealVec k{0, 0, 0};
            for (int a = 0; a < grid.dim(); ++a) k[a] = k0[a] + t * (k1[a] - k0[a]);
            return k;
        };
        double t0 = 0, t1 = 1;
        for (int it = 0; it < 200 && t1 - t0 > 1e-16; ++it) {
            const double tm = 0.5 * (t0 + t1);
            if (band_detail::band_value(*family, at(tm), out.band) < lambda)
                t0 = tm;
            else
                t1 = tm;
        }
        RealVec k = at(0.5 * (t0 + t1));
        out.witness = k;
        out.witness_residual = std::abs(band_detail::band_value(*family, k, out.band) - lambda);
    } else if (edge_band >= 0 || nearest_edge <= edge_tol) {
        out.verdict = SpectrumVerdict::at_edge_within_tol;
        out.band = edge_band;
    } else {
        out.verdict = SpectrumVerdict::in_gap;
        out.distance = best_distance;
    }
    return out;
}

inline SpectrumMembership in_spectrum(const FourierPotential& q, const PlaneWaveBasis& basis, double lambda,
                                      const BrillouinGrid& grid) {
    return in_spectrum(std::make_shared<const BlochFamily>(basis, q), lambda, grid);
}

/// Number of adjacent-node pairs whose band values differ by more than the
/// Lipschitz bound times their distance (under-resolution flags).
inline std::size_t continuity_violations(const BandStructure& bs) {
    const double lip = bs.lipschitz_bound();
    std::size_t count = 0;
    for (std::size_t i = 0; i < bs.grid.size(); ++i) {
        auto idx = bs.grid.index(i);
        for (int a = 0; a < bs.grid.dim(); ++a) {
            if (idx[a] + 1 >= bs.grid.nodes_per_axis()) continue;
            auto nb = idx;
            ++nb[a];
            const auto& u = bs.values[i];
            const auto& v = bs.values[bs.grid.flat(nb)];
            for (int j = 0; j < bs.n_bands; ++j)
                if (std::abs(u[j] - v[j]) > lip * bs.grid.spacing()) ++count;
        }
    }
    return count;
}

}  // namespace floquet
