#pragma once

// Finite-box laboratory for H = -Laplacian + q + v with a localized or slowly
// decaying impurity v: Dirichlet discretization, eigenpairs in an energy
// window, box-ladder classification, decay fits, and the von Neumann-Wigner
// style construction of an embedded eigenvalue.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "band_structure.hpp"
#include "common.hpp"
#include "hill.hpp"
#include "parallel.hpp"
#include "plane_wave.hpp"
#include "potential.hpp"

namespace floquet {

// ---- impurities ------------------------------------------------------------------

struct Impurity {
    enum class Kind { gaussian, power_oscillatory, tabulated };

    Kind kind = Kind::gaussian;
    double amplitude = 0;  // gaussian: v = A exp(-|x - c|^2 / w^2)
    double width = 1;
    double center = 0;
    double target_lambda = 0;               // power_oscillatory
    std::function<double(double)> profile;  // power_oscillatory (1D)
    std::vector<double> grid_x, grid_v;     // tabulated (1D, linear, zero outside)

    // Claimed decay |v(x)| <= C exp(-(|x| / scale)^r), or |v| <= C |x|^-rate
    // when algebraic.
    double decay_C = 0;
    double decay_r = 2;
    double decay_scale = 1;
    bool algebraic = false;
    double algebraic_rate = 0;

    /// True when the claimed decay fails |v| <= C e^{-|x|^r} with r > 4/3.
    bool violates_decay_hypothesis() const { return algebraic || decay_r <= 4.0 / 3.0; }

    double operator()(double x) const {
        switch (kind) {
            case Kind::gaussian: {
                const double t = (x - center) / width;
                return amplitude * std::exp(-t * t);
            }
            case Kind::power_oscillatory:
                return profile ? profile(x) : 0.0;
            case Kind::tabulated: {
                if (grid_x.empty() || x < grid_x.front() || x > grid_x.back()) return 0.0;
                const auto it = std::upper_bound(grid_x.begin(), grid_x.end(), x);
                if (it == grid_x.end()) return grid_v.back();
                const auto j = static_cast<std::size_t>(it - grid_x.begin());
                const double t = (x - grid_x[j - 1]) / (grid_x[j] - grid_x[j - 1]);
                return (1 - t) * grid_v[j - 1] + t * grid_v[j];
            }
        }
        return 0.0;
    }

    double operator()(const RealVec& x, int dim) const {
        if (dim == 1) return (*this)(x[0]);
        require(kind == Kind::gaussian, "only gaussian impurities are defined in 2D");
        double r2 = 0;
        for (int d = 0; d < dim; ++d) r2 += (x[d] - center) * (x[d] - center);
        return amplitude * std::exp(-r2 / (width * width));
    }

    std::string describe() const {
        switch (kind) {
            case Kind::gaussian: return "gaussian";
            case Kind::power_oscillatory: return "power_oscillatory";
            case Kind::tabulated: return "tabulated";
        }
        return "unknown";
    }
};

inline Impurity gaussian_impurity(double amplitude, double width, double center = 0) {
    require(width > 0, "gaussian width must be positive");
    Impurity v;
    v.kind = Impurity::Kind::gaussian;
    v.amplitude = amplitude;
    v.width = width;
    v.center = center;
    v.decay_C = std::abs(amplitude) * std::exp(center * center / (width * width) * 2);
    v.decay_r = 2;
    v.decay_scale = width;
    return v;
}

inline Impurity tabulated_impurity(std::vector<double> xs, std::vector<double> vs) {
    require(xs.size() == vs.size() && xs.size() >= 2, "tabulated impurity needs matching x and v samples");
    require(std::is_sorted(xs.begin(), xs.end()), "tabulated impurity grid must be ascending");
    Impurity v;
    v.kind = Impurity::Kind::tabulated;
    v.grid_x = std::move(xs);
    v.grid_v = std::move(vs);
    // Compact support: any r holds.
    for (double s : v.grid_v) v.decay_C = std::max(v.decay_C, std::abs(s));
    v.decay_r = std::numeric_limits<double>::infinity();
    return v;
}

inline Impurity zero_impurity() { return gaussian_impurity(0.0, 1.0); }

// ---- box problem and discretization -------------------------------------------------

struct BoxProblem {
    int dim = 1;
    double half_width = 20;  // L, in cells
    double h = 0.02;
    FourierPotential background{1};
    Impurity impurity = zero_impurity();
    int order = 6;  // finite-difference order of the Laplacian: 2, 4, 6 or 8
};

inline constexpr std::size_t max_unknowns = 2'000'000;

/// Symmetric matrix stored by its lower bands: band(d, i) = H(i, i - d).
struct BandedSymmetric {
    Eigen::Index n = 0;
    Eigen::Index bandwidth = 0;
    Eigen::MatrixXd band;

    double at(Eigen::Index i, Eigen::Index j) const {
        if (i < j) std::swap(i, j);
        const Eigen::Index d = i - j;
        return d > bandwidth ? 0.0 : band(d, i);
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        Eigen::VectorXd y = band.row(0).transpose().cwiseProduct(x);
        for (Eigen::Index d = 1; d <= bandwidth; ++d)
            for (Eigen::Index i = d; i < n; ++i) {
                y(i) += band(d, i) * x(i - d);
                y(i - d) += band(d, i) * x(i);
            }
        return y;
    }

    /// Number of eigenvalues strictly below sigma, by Sylvester inertia of the
    /// unpivoted LDL^T of H - sigma.
    Eigen::Index count_below(double sigma) const {
        const Eigen::Index b = bandwidth;
        Eigen::MatrixXd l = Eigen::MatrixXd::Zero(b + 1, n);  // l(d, i) = L(i, i - d)
        Eigen::VectorXd dvec(n);
        const double tiny = std::numeric_limits<double>::min() * 1e10;
        Eigen::Index neg = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index j0 = std::max<Eigen::Index>(0, i - b);
            for (Eigen::Index j = j0; j < i; ++j) {
                double s = band(i - j, i);
                for (Eigen::Index k = std::max(j0, j - b); k < j; ++k) s -= l(i - k, i) * l(j - k, j) * dvec(k);
                l(i - j, i) = s / dvec(j);
            }
            double di = band(0, i) - sigma;
            for (Eigen::Index k = j0; k < i; ++k) di -= l(i - k, i) * l(i - k, i) * dvec(k);
            if (di == 0) di = -tiny;
            dvec(i) = di;
            if (di < 0) ++neg;
        }
        return neg;
    }

    Eigen::SparseMatrix<double> sparse() const {
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(n * (2 * bandwidth + 1)));
        for (Eigen::Index d = 0; d <= bandwidth; ++d)
            for (Eigen::Index i = d; i < n; ++i) {
                const double v = band(d, i);
                if (v == 0) continue;
                t.emplace_back(i, i - d, v);
                if (d > 0) t.emplace_back(i - d, i, v);
            }
        Eigen::SparseMatrix<double> s(n, n);
        s.setFromTriplets(t.begin(), t.end());
        return s;
    }
};

struct BoxOperator {
    int dim = 1;
    double half_width = 0;
    double h = 0;
    int n_side = 0;               // interior nodes per axis
    std::vector<double> axis;     // interior node coordinates along one axis
    Eigen::VectorXd potential;    // q + v at the unknowns
    BandedSymmetric matrix;

    std::size_t size() const { return static_cast<std::size_t>(matrix.n); }
    RealVec point(Eigen::Index i) const {
        if (dim == 1) return {axis[static_cast<std::size_t>(i)], 0, 0};
        return {axis[static_cast<std::size_t>(i / n_side)], axis[static_cast<std::size_t>(i % n_side)], 0};
    }
};

/// Central second-difference weights c_0..c_{order/2} for -d^2/dx^2 (times h^2).
inline std::vector<double> laplacian_stencil(int order) {
    switch (order) {
        case 2: return {2.0, -1.0};
        case 4: return {30.0 / 12, -16.0 / 12, 1.0 / 12};
        case 6: return {490.0 / 180, -270.0 / 180, 27.0 / 180, -2.0 / 180};
        case 8: return {14350.0 / 5040, -8064.0 / 5040, 1008.0 / 5040, -128.0 / 5040, 9.0 / 5040};
        default: throw InputError("stencil order must be 2, 4, 6 or 8");
    }
}

/// Dirichlet box discretization of -Laplacian + q + v on [-L, L]^dim.
/// Ghost values beyond a wall are odd reflections, which keeps the matrix
/// symmetric at every stencil order.
inline BoxOperator discretize(const BoxProblem& p) {
    require(p.dim == 1 || p.dim == 2, "box problems are 1D or 2D");
    require(p.background.dim() == p.dim, "background potential dimension differs from box dimension");
    require(p.half_width > 0 && p.h > 0, "box half-width and step must be positive");
    if (p.dim == 1) require(p.h <= 0.02 + 1e-15, "1D box step must be <= 0.02");
    const double cells = 2 * p.half_width / p.h;
    const auto segments = static_cast<long long>(std::llround(cells));
    require(segments >= 2, "box step too coarse");
    const int n_side = static_cast<int>(segments - 1);
    double unknowns = n_side;
    if (p.dim == 2) unknowns *= n_side;
    require(unknowns <= static_cast<double>(max_unknowns), "box problem exceeds 2e6 unknowns");

    BoxOperator op;
    op.dim = p.dim;
    op.half_width = p.half_width;
    op.h = 2 * p.half_width / static_cast<double>(segments);
    op.n_side = n_side;
    op.axis.resize(static_cast<std::size_t>(n_side));
    for (int i = 0; i < n_side; ++i) op.axis[static_cast<std::size_t>(i)] = -p.half_width + op.h * (i + 1);

    const auto c = laplacian_stencil(p.order);
    const int r = static_cast<int>(c.size()) - 1;
    const double inv_h2 = 1.0 / (op.h * op.h);
    const Eigen::Index n = p.dim == 1 ? n_side : static_cast<Eigen::Index>(n_side) * n_side;
    auto& m = op.matrix;
    m.n = n;
    m.bandwidth = p.dim == 1 ? r : static_cast<Eigen::Index>(r) * n_side;
    m.band = Eigen::MatrixXd::Zero(m.bandwidth + 1, n);

    // 1D operator along one axis; node index 0..n_side-1 is grid index 1..n_side.
    auto axis_entries = [&](int i, auto&& emit) {
        for (int d = -r; d <= r; ++d) {
            const double w = c[static_cast<std::size_t>(std::abs(d))] * inv_h2;
            int g = i + 1 + d;  // grid index, walls at 0 and n_side + 1
            double sign = 1;
            if (g <= 0) {
                g = -g;
                sign = -1;
            } else if (g >= n_side + 1) {
                g = 2 * (n_side + 1) - g;
                sign = -1;
            }
            if (g == 0 || g == n_side + 1) continue;
            emit(g - 1, sign * w);
        }
    };
    auto add = [&](Eigen::Index i, Eigen::Index j, double v) {
        if (j > i) return;  // lower triangle holds the symmetric matrix
        m.band(i - j, i) += v;
    };

    op.potential.resize(n);
    for (Eigen::Index f = 0; f < n; ++f) {
        const RealVec x = op.point(f);
        const double val = p.background.evaluate(x) + p.impurity(x, p.dim);
        op.potential(f) = val;
        m.band(0, f) += val;
    }
    if (p.dim == 1) {
        for (int i = 0; i < n_side; ++i) axis_entries(i, [&](int j, double w) { add(i, j, w); });
    } else {
        for (int i = 0; i < n_side; ++i)
            for (int j = 0; j < n_side; ++j) {
                const Eigen::Index f = static_cast<Eigen::Index>(i) * n_side + j;
                axis_entries(i, [&](int i2, double w) { add(f, static_cast<Eigen::Index>(i2) * n_side + j, w); });
                axis_entries(j, [&](int j2, double w) { add(f, static_cast<Eigen::Index>(i) * n_side + j2, w); });
            }
    }
    return op;
}

// ---- decay fits ------------------------------------------------------------------------

struct DecayFit {
    double c = 0;
    double p = 0;
    double log_amplitude = 0;
    double fit_rms = 0;
    double p_stderr = std::numeric_limits<double>::infinity();
    int trusted_cells = 0;
    double boundary_ratio = 0;  // max |u| in the outermost cells / peak
    bool reliable = false;
    std::string note;
};

struct DecayFitOptions {
    double cell_width = 1;
    double center = 0;
    double trusted_hi = 1e-2;
    double trusted_lo = 1e-10;
    double boundary_threshold = 1e-3;
    int min_cells = 8;
};

namespace perturbed_detail {

struct CellSample {
    double r;
    double log_m;
};

// Least squares log m = a - c r^p at fixed p; returns (rss, a, c).
inline std::array<double, 3> fit_fixed_p(const std::vector<CellSample>& s, double p) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(s.size());
    for (const auto& e : s) {
        const double x = std::pow(e.r, p);
        sx += x;
        sy += e.log_m;
        sxx += x * x;
        sxy += x * e.log_m;
    }
    const double det = n * sxx - sx * sx;
    if (det <= 0) return {std::numeric_limits<double>::infinity(), 0, 0};
    const double slope = (n * sxy - sx * sy) / det;
    const double a = (sy - slope * sx) / n;
    double rss = 0;
    for (const auto& e : s) {
        const double res = e.log_m - (a + slope * std::pow(e.r, p));
        rss += res * res;
    }
    return {rss, a, -slope};
}

}  // namespace perturbed_detail

/// Fits per-cell maxima m_l = max |u| over cell l to log m = a - c r^p, with r
/// the distance from the centre to the location of the cell maximum.
inline DecayFit decay_fit(const std::vector<double>& x, const std::vector<double>& u, const DecayFitOptions& opt = {}) {
    require(x.size() == u.size() && x.size() >= 2, "decay_fit needs matching sample arrays");
    require(opt.cell_width > 0, "cell width must be positive");
    DecayFit out;
    struct Cell {
        double m = 0;
        double r = 0;
    };
    std::map<long long, Cell> cells;
    double peak = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::abs(u[i]);
        peak = std::max(peak, a);
        const auto id = static_cast<long long>(std::floor((x[i] - opt.center) / opt.cell_width));
        auto& c = cells[id];
        if (a >= c.m) {
            c.m = a;
            c.r = std::abs(x[i] - opt.center);
        }
    }
    if (peak == 0) {
        out.note = "zero function";
        return out;
    }
    out.boundary_ratio = std::max(cells.begin()->second.m, cells.rbegin()->second.m) / peak;
    std::vector<perturbed_detail::CellSample> samples;
    for (const auto& [id, c] : cells) {
        const double rel = c.m / peak;
        if (rel <= opt.trusted_hi && rel >= opt.trusted_lo) samples.push_back({c.r, std::log(c.m)});
    }
    out.trusted_cells = static_cast<int>(samples.size());
    if (out.trusted_cells < opt.min_cells) {
        out.note = "fewer than " + std::to_string(opt.min_cells) + " trusted cells";
        return out;
    }
    auto rss = [&](double p) { return perturbed_detail::fit_fixed_p(samples, p)[0]; };
    // Coarse scan then golden section, since rss(p) can have shallow side minima.
    double best_p = 0.05, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 79; ++i) {
        const double p = 0.05 + (4.0 - 0.05) * i / 79.0;
        const double v = rss(p);
        if (v < best) {
            best = v;
            best_p = p;
        }
    }
    const double step = (4.0 - 0.05) / 79.0;
    const double p = hill_detail::golden_extremum(rss, std::max(0.05, best_p - step), std::min(4.0, best_p + step),
                                                  false, 1e-10);
    const auto [r0, a, c] = perturbed_detail::fit_fixed_p(samples, p);
    out.p = p;
    out.c = c;
    out.log_amplitude = a;
    const double n = static_cast<double>(samples.size());
    out.fit_rms = std::sqrt(r0 / n);
    const double dp = 1e-3 * std::max(1.0, p);
    const double curv = (rss(p + dp) - 2 * r0 + rss(std::max(1e-3, p - dp))) / (dp * dp);
    if (curv > 0 && n > 3) out.p_stderr = std::sqrt(2 * (r0 / (n - 3)) / curv);
    if (out.boundary_ratio >= opt.boundary_threshold) {
        out.note = "not decayed below threshold before the boundary";
        return out;
    }
    out.reliable = true;
    return out;
}

// ---- eigenvalue search ---------------------------------------------------------------

enum class Classification { eigenvalue, box_artifact, undecided };

inline const char* to_string(Classification c) {
    switch (c) {
        case Classification::eigenvalue: return "eigenvalue";
        case Classification::box_artifact: return "box_artifact";
        case Classification::undecided: return "undecided";
    }
    return "undecided";
}

struct Candidate {
    double lambda = 0;
    double residual = 0;
    double l_stability = std::numeric_limits<double>::infinity();
    std::vector<double> ladder_values;  // matched lambda per rung, NaN when unmatched
    DecayFit decay;
    Classification classification = Classification::undecided;
    bool converged = true;
    bool near_band_edge = false;   // set when a 1D background band table is available
    std::string region;            // "band", "gap" or "" when unknown
    std::vector<double> vector;    // eigenfunction samples when requested
};

struct EigReport {
    double window_lo = 0, window_hi = 0;
    std::vector<double> ladder;
    std::vector<Candidate> candidates;
    bool partial = false;
    std::vector<double> axis;  // sample coordinates of stored vectors (1D)
};

struct EigOptions {
    double residual_target = 1e-10;
    int max_inverse_iterations = 8;
    bool keep_vectors = false;
    std::size_t max_candidates = 20000;
    DecayFitOptions decay{};
};

namespace perturbed_detail {

// Sorted eigenvalues in [lo, hi) with multiplicity, by bisection on inertia counts.
inline std::vector<double> bisect_eigenvalues(const BandedSymmetric& m, double lo, double hi, std::size_t cap) {
    const Eigen::Index c_lo = m.count_below(lo), c_hi = m.count_below(hi);
    const auto total = static_cast<std::size_t>(c_hi - c_lo);
    if (total > cap) throw InputError("energy window holds " + std::to_string(total) + " eigenvalues, above the cap");
    std::vector<double> out;
    out.reserve(total);
    struct Node {
        double a, b;
        Eigen::Index ca, cb;
    };
    std::vector<Node> stack{{lo, hi, c_lo, c_hi}};
    while (!stack.empty()) {
        const Node nd = stack.back();
        stack.pop_back();
        if (nd.cb == nd.ca) continue;
        const double mid = 0.5 * (nd.a + nd.b);
        const double tol = 4 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(nd.a), std::abs(nd.b)});
        if (nd.b - nd.a <= tol || mid <= nd.a || mid >= nd.b) {
            for (Eigen::Index k = nd.ca; k < nd.cb; ++k) out.push_back(mid);
            continue;
        }
        const Eigen::Index cm = m.count_below(mid);
        // Upper half first so that pops come out ascending.
        stack.push_back({mid, nd.b, cm, nd.cb});
        stack.push_back({nd.a, mid, nd.ca, cm});
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace perturbed_detail

/// All discrete eigenpairs of the box operator in [lo, hi]: inertia-count
/// bisection locates the eigenvalues, shift-invert iteration at each one gives
/// the eigenvector (orthogonalized within near-degenerate clusters), and the
/// Rayleigh quotient and residual ||Hu - lambda u|| / ||u|| are recorded.
inline EigReport eigs_in_window(const BoxOperator& op, double lo, double hi, const EigOptions& opt = {}) {
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "energy window must be finite with lo < hi");
    EigReport rep;
    rep.window_lo = lo;
    rep.window_hi = hi;
    rep.ladder = {op.half_width};
    const auto lambdas = perturbed_detail::bisect_eigenvalues(op.matrix, lo, hi, opt.max_candidates);
    // Group near-degenerate eigenvalues into clusters.
    std::vector<std::pair<std::size_t, std::size_t>> clusters;
    for (std::size_t i = 0; i < lambdas.size();) {
        std::size_t j = i + 1;
        while (j < lambdas.size() && lambdas[j] - lambdas[j - 1] <= 1e-9 * (1 + std::abs(lambdas[j]))) ++j;
        clusters.push_back({i, j});
        i = j;
    }
    const Eigen::SparseMatrix<double> h = op.matrix.sparse();
    const Eigen::Index n = op.matrix.n;
    const bool need_axis = op.dim == 1;
    if (need_axis && opt.keep_vectors) rep.axis = op.axis;
    rep.candidates.resize(lambdas.size());
    std::vector<char> partial(clusters.size(), 0);

    parallel_for(clusters.size(), [&](std::size_t ci) {
        const auto [i0, i1] = clusters[ci];
        const double sigma0 = lambdas[i0];
        // Offset keeps the shifted matrix numerically nonsingular.
        const double sigma = sigma0 + 1e-11 * (1 + std::abs(sigma0));
        Eigen::SparseMatrix<double> a = h;
        for (Eigen::Index k = 0; k < n; ++k) a.coeffRef(k, k) -= sigma;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success) throw NumericalFailure("shift-invert factorization failed");
        std::mt19937_64 rng(0x5eed + ci);
        std::normal_distribution<double> nd;
        std::vector<Eigen::VectorXd> basis;
        for (std::size_t e = i0; e < i1; ++e) {
            Eigen::VectorXd v(n);
            for (Eigen::Index k = 0; k < n; ++k) v(k) = nd(rng);
            double lam = lambdas[e], res = std::numeric_limits<double>::infinity();
            for (int it = 0; it < opt.max_inverse_iterations; ++it) {
                v = lu.solve(v);
                for (const auto& b : basis) v -= b.dot(v) * b;
                v.normalize();
                const Eigen::VectorXd hv = op.matrix.apply(v);
                lam = v.dot(hv);
                res = (hv - lam * v).norm();
                if (res <= opt.residual_target * (1 + std::abs(lam)) && it >= 1) break;
            }
            basis.push_back(v);
            Candidate& c = rep.candidates[e];
            c.lambda = lam;
            c.residual = res;
            c.converged = res <= 1e-8;
            if (!c.converged) partial[ci] = 1;
            if (need_axis) {
                std::vector<double> samples(v.data(), v.data() + n);
                c.decay = decay_fit(op.axis, samples, opt.decay);
                if (opt.keep_vectors) c.vector = std::move(samples);
            } else if (opt.keep_vectors) {
                c.vector.assign(v.data(), v.data() + n);
            }
            c.ladder_values = {lam};
            c.l_stability = 0;
        }
    });
    rep.partial = std::any_of(partial.begin(), partial.end(), [](char c) { return c != 0; });
    std::stable_sort(rep.candidates.begin(), rep.candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.lambda < b.lambda; });
    return rep;
}

inline EigReport eigs_in_window(const BoxProblem& p, double lo, double hi, const EigOptions& opt = {}) {
    return eigs_in_window(discretize(p), lo, hi, opt);
}

struct StabilityOptions {
    EigOptions eig{};
    double stability_scale = 1e-5;  // L_stability threshold is scale (1 + |lambda|)
    double residual_limit = 1e-8;
    double min_p = 0.5;
    double edge_margin = 1e-3;      // distance to a band edge below which a candidate is flagged
};

/// Runs the window on every rung of the box ladder, matches the largest-box
/// candidates to the other rungs by nearest lambda (accepted within half the
/// local level spacing), and classifies each candidate:
///   eigenvalue   L_stability < s(1+|lambda|), trusted decay fit with p >= min_p, residual < limit
///   box_artifact lambda drifts monotonically with L by more than 10 s(1+|lambda|), or the
///                eigenfunction is not localized (decay fit not trusted at the boundary)
///   undecided    otherwise, including unmatched candidates and candidates within
///                edge_margin of a band edge of a 1D background.
inline EigReport stability_scan(const BoxProblem& p, std::vector<double> ladder, double lo, double hi,
                                const StabilityOptions& opt = {}) {
    require(ladder.size() >= 3, "L-ladder needs at least 3 rungs");
    require(std::is_sorted(ladder.begin(), ladder.end()) &&
                std::adjacent_find(ladder.begin(), ladder.end()) == ladder.end(),
            "L-ladder must be strictly ascending");
    std::vector<EigReport> rungs(ladder.size());
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        BoxProblem pi = p;
        pi.half_width = ladder[i];
        EigOptions eo = opt.eig;
        if (i + 1 < ladder.size()) eo.keep_vectors = false;
        rungs[i] = eigs_in_window(pi, lo, hi, eo);
    }
    EigReport out = std::move(rungs.back());
    out.ladder = ladder;
    for (std::size_t i = 0; i + 1 < rungs.size(); ++i) out.partial = out.partial || rungs[i].partial;

    // Annotate against the background band table when it is 1D.
    std::vector<Interval> bands;
    if (p.dim == 1) bands = bands_1d(p.background, hi + 1.0);

    for (auto& c : out.candidates) {
        const double thr = opt.stability_scale * (1 + std::abs(c.lambda));
        c.ladder_values.assign(ladder.size(), std::numeric_limits<double>::quiet_NaN());
        c.ladder_values.back() = c.lambda;
        bool matched = true;
        for (std::size_t i = 0; i + 1 < rungs.size(); ++i) {
            const auto& cs = rungs[i].candidates;
            if (cs.empty()) {
                matched = false;
                continue;
            }
            const auto it = std::lower_bound(cs.begin(), cs.end(), c.lambda,
                                             [](const Candidate& a, double v) { return a.lambda < v; });
            std::size_t j = it == cs.end() ? cs.size() - 1 : static_cast<std::size_t>(it - cs.begin());
            if (j > 0 && std::abs(cs[j - 1].lambda - c.lambda) < std::abs(cs[j].lambda - c.lambda)) --j;
            // Local level spacing on that rung; window edges count as open.
            double spacing = std::numeric_limits<double>::infinity();
            if (j > 0) spacing = std::min(spacing, cs[j].lambda - cs[j - 1].lambda);
            if (j + 1 < cs.size()) spacing = std::min(spacing, cs[j + 1].lambda - cs[j].lambda);
            if (std::abs(cs[j].lambda - c.lambda) <= 0.5 * spacing)
                c.ladder_values[i] = cs[j].lambda;
            else
                matched = false;
        }
        double stab = 0;
        for (double v : c.ladder_values)
            if (!std::isnan(v)) stab = std::max(stab, std::abs(v - c.lambda));
        c.l_stability = matched ? stab : std::numeric_limits<double>::infinity();

        bool monotone = matched;
        if (matched) {
            double sgn = 0;
            for (std::size_t i = 0; i + 1 < c.ladder_values.size(); ++i) {
                const double d = c.ladder_values[i + 1] - c.ladder_values[i];
                if (d == 0) {
                    monotone = false;
                    break;
                }
                if (sgn == 0) sgn = d;
                if (d * sgn < 0) monotone = false;
            }
        }
        const bool localized = c.decay.reliable || c.decay.boundary_ratio < opt.eig.decay.boundary_threshold;
        if (matched && c.l_stability < thr && c.decay.reliable && c.decay.p >= opt.min_p &&
            c.residual < opt.residual_limit) {
            c.classification = Classification::eigenvalue;
        } else if ((monotone && c.l_stability > 10 * thr) || !localized) {
            c.classification = Classification::box_artifact;
        } else {
            c.classification = Classification::undecided;
        }

        if (!bands.empty()) {
            c.region = "gap";
            double edge_dist = std::numeric_limits<double>::infinity();
            for (const auto& b : bands) {
                if (b.contains(c.lambda)) c.region = "band";
                edge_dist = std::min({edge_dist, std::abs(c.lambda - b.lo), std::abs(c.lambda - b.hi)});
            }
            c.near_band_edge = edge_dist < opt.edge_margin;
            // Edge windows are logged, not classified.
            if (c.near_band_edge) c.classification = Classification::undecided;
        }
    }
    return out;
}

// ---- von Neumann-Wigner construction ------------------------------------------------------

enum class WvnEnvelope { stretched, algebraic };

struct WvnOptions {
    WvnEnvelope envelope = WvnEnvelope::stretched;
    double beta = 2;      // stretched: G(g) = beta ((1 + g^2)^{p0/2} - 1)
    double p0 = 0.75;
    double gamma = 1;     // algebraic: G(g) = gamma log(1 + g^2)
    int cutoff = 12;      // plane-wave cutoff for the Bloch solution
    double check_half_width = 80;
    double check_step = 0.01;
    double edge_margin = 0.05;  // minimal distance of lambda* from band edges
};

/// u = psi exp(-G(g)) with psi a real Bloch solution at lambda* and
/// g(x) = int_0^x psi^2; then v = -4 G' psi psi' + (G'^2 - G'') psi^4 is
/// bounded and (-u'' + (q + v) u = lambda* u) holds exactly.
struct WvnConstruction {
    double lambda_star = 0;
    double k_witness = 0;
    int band = -1;
    Impurity impurity;
    std::function<double(double)> u;
    double residual = 0;       // ||(-u'' + (q + v - lambda*) u)|| / ||u|| on the check grid
    double v_max = 0;
    double tail_fraction = 0;  // int_{|x| > L/2} u^2 / int u^2 on the check grid
    std::vector<double> check_x;
};

namespace perturbed_detail {

struct BlochWave {
    double k = 0;
    std::vector<cplx> c;  // coefficients of e^{i (k + 2 pi m) x}, m = -M..M
    int M = 0;
    std::vector<cplx> a;  // a[s + 2M] = sum_{m - n = s} c_m conj(c_n)
    std::vector<cplx> b;  // b[t + 2M] = sum_{m + n = t} c_m c_n

    void prepare() {
        a.assign(static_cast<std::size_t>(4 * M + 1), cplx(0));
        b.assign(static_cast<std::size_t>(4 * M + 1), cplx(0));
        for (int m = -M; m <= M; ++m)
            for (int n = -M; n <= M; ++n) {
                a[static_cast<std::size_t>(m - n + 2 * M)] += c[idx(m)] * std::conj(c[idx(n)]);
                b[static_cast<std::size_t>(m + n + 2 * M)] += c[idx(m)] * c[idx(n)];
            }
    }
    std::size_t idx(int m) const { return static_cast<std::size_t>(m + M); }

    // psi, psi', psi''
    std::array<double, 3> eval(double x) const {
        cplx f = 0, fp = 0, fpp = 0;
        for (int m = -M; m <= M; ++m) {
            const double w = k + two_pi * m;
            const cplx e = c[idx(m)] * std::polar(1.0, w * x);
            f += e;
            fp += cplx(0, w) * e;
            fpp += -w * w * e;
        }
        return {f.real(), fp.real(), fpp.real()};
    }

    // int_0^x psi^2 with psi = Re(phi): psi^2 = |phi|^2 / 2 + Re(phi^2) / 2.
    double integral_sq(double x) const {
        double s = 0.5 * a[static_cast<std::size_t>(2 * M)].real() * x;
        for (int d = -2 * M; d <= 2 * M; ++d) {
            if (d != 0) {
                const double w = two_pi * d;
                s += 0.5 * (a[static_cast<std::size_t>(d + 2 * M)] * (std::polar(1.0, w * x) - 1.0) / cplx(0, w)).real();
            }
            const double w2 = 2 * k + two_pi * d;
            s += 0.5 * (b[static_cast<std::size_t>(d + 2 * M)] * (std::polar(1.0, w2 * x) - 1.0) / cplx(0, w2)).real();
        }
        return s;
    }
};

}  // namespace perturbed_detail

inline WvnConstruction make_wvn(const FourierPotential& q, double lambda_star, const WvnOptions& opt = {}) {
    require(q.dim() == 1, "make_wvn needs a 1D background");
    require(opt.p0 > 0 && opt.p0 < 2 && opt.beta > 0 && opt.gamma > 0.25, "invalid envelope parameters");
    const auto bands = bands_1d(q, lambda_star + 10.0);
    int band = -1;
    for (std::size_t j = 0; j < bands.size(); ++j)
        if (lambda_star > bands[j].lo + opt.edge_margin && lambda_star < bands[j].hi - opt.edge_margin)
            band = static_cast<int>(j);
    require(band >= 0, "lambda* must lie strictly inside a band");

    // Bloch wave at lambda*: root of the band function lambda_band(k) - lambda* on (0, pi).
    const PlaneWaveBasis basis(1, opt.cutoff);
    const BlochFamily fam(basis, q);
    auto band_minus = [&](double k) { return fam.spectrum(RealVec{k, 0, 0})(band) - lambda_star; };
    const double f0 = band_minus(1e-9), f1 = band_minus(pi - 1e-9);
    if ((f0 < 0) == (f1 < 0)) throw ConstructionFailure("band function does not cross lambda* on (0, pi)");
    const double kw = hill_detail::bracket_root(band_minus, 1e-9, pi - 1e-9, f0, f1, 1e-15);

    perturbed_detail::BlochWave bw;
    bw.k = kw;
    bw.M = opt.cutoff;
    {
        const auto es = fam.eigensystem(RealVec{kw, 0, 0});
        Eigen::VectorXcd vec = es.eigenvectors().col(band);
        vec *= std::sqrt(2.0) / vec.norm();  // mean psi^2 = 1, so g(x) ~ x
        bw.c.assign(vec.data(), vec.data() + vec.size());
    }
    bw.prepare();

    struct EnvelopeFns {
        WvnOptions o;
        double G(double g) const {
            if (o.envelope == WvnEnvelope::stretched) return o.beta * (std::pow(1 + g * g, 0.5 * o.p0) - 1);
            return o.gamma * std::log1p(g * g);
        }
        double dG(double g) const {
            if (o.envelope == WvnEnvelope::stretched) return o.beta * o.p0 * g * std::pow(1 + g * g, 0.5 * o.p0 - 1);
            return o.gamma * 2 * g / (1 + g * g);
        }
        double d2G(double g) const {
            if (o.envelope == WvnEnvelope::stretched) {
                const double s = 1 + g * g;
                return o.beta * o.p0 * (std::pow(s, 0.5 * o.p0 - 1) + g * g * (o.p0 - 2) * std::pow(s, 0.5 * o.p0 - 2));
            }
            const double s = 1 + g * g;
            return o.gamma * 2 * (1 - g * g) / (s * s);
        }
    };
    const EnvelopeFns env{opt};
    auto shared = std::make_shared<const perturbed_detail::BlochWave>(std::move(bw));

    WvnConstruction out;
    out.lambda_star = lambda_star;
    out.k_witness = kw;
    out.band = band;
    auto vfun = [shared, env](double x) {
        const auto [psi, dpsi, d2psi] = shared->eval(x);
        const double g = shared->integral_sq(x);
        const double g1 = env.dG(g), g2 = env.d2G(g);
        const double p2 = psi * psi;
        return -4 * g1 * psi * dpsi + (g1 * g1 - g2) * p2 * p2;
    };
    out.u = [shared, env](double x) { return shared->eval(x)[0] * std::exp(-env.G(shared->integral_sq(x))); };
    Impurity imp;
    imp.kind = Impurity::Kind::power_oscillatory;
    imp.target_lambda = lambda_star;
    imp.profile = vfun;
    imp.algebraic = true;
    imp.decay_r = 0;
    imp.algebraic_rate = opt.envelope == WvnEnvelope::stretched ? 1 - opt.p0 : 1;

    // A priori check on a fine grid: u'' from the product rule with analytic
    // psi'' (independent of the closed form used for v).
    const double Lc = opt.check_half_width;
    const auto n = static_cast<std::size_t>(std::llround(2 * Lc / opt.check_step)) + 1;
    double num = 0, den = 0, tail = 0, vmax = 0;
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = -Lc + opt.check_step * static_cast<double>(i);
    for (double x : xs) {
        const auto [psi, dpsi, d2psi] = shared->eval(x);
        const double g = shared->integral_sq(x);
        const double w = std::exp(-env.G(g));
        const double gp = psi * psi, gpp = 2 * psi * dpsi;
        const double G1 = env.dG(g), G2 = env.d2G(g);
        const double w1 = -G1 * gp * w;
        const double w2 = (G1 * G1 * gp * gp - G2 * gp * gp - G1 * gpp) * w;
        const double u = psi * w;
        const double upp = d2psi * w + 2 * dpsi * w1 + psi * w2;
        const double v = vfun(x);
        const double r = -upp + (q.evaluate(x) + v - lambda_star) * u;
        num += r * r;
        den += u * u;
        if (std::abs(x) > 0.5 * Lc) tail += u * u;
        vmax = std::max(vmax, std::abs(v));
    }
    out.residual = std::sqrt(num / den);
    out.tail_fraction = tail / den;
    out.v_max = vmax;
    out.check_x = std::move(xs);
    imp.decay_C = vmax;
    out.impurity = std::move(imp);
    if (!std::isfinite(vmax) || !std::isfinite(out.residual))
        throw ConstructionFailure("constructed perturbation is not bounded on the check grid");
    if (out.residual > 1e-8)
        throw ConstructionFailure("construction residual " + std::to_string(out.residual) + " above 1e-8");
    return out;
}

}  // namespace floquet
