#pragma once

// One-dimensional Hill operator -u'' + q u = lambda u: monodromy matrix,
// discriminant, band intervals and Floquet exponents. This is the independent
// 1D reference used to cross-check plane-wave results.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "common.hpp"
#include "potential.hpp"

namespace floquet {

struct Monodromy {
    cplx lambda{};
    Eigen::Matrix2cd matrix;  // columns: solutions with initial data (1,0) and (0,1)
    double tol = 0;

    cplx trace() const { return matrix.trace(); }
    cplx det() const { return matrix.determinant(); }
};

struct Interval {
    double lo = 0;
    double hi = 0;

    bool contains(double x) const { return lo <= x && x <= hi; }
    double width() const { return hi - lo; }
};

namespace hill_detail {

// Dormand-Prince 5(4) tableau.
struct DP54 {
    static constexpr double c[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1, 1};
    static constexpr double a[7][6] = {
        {},
        {1.0 / 5},
        {3.0 / 40, 9.0 / 40},
        {44.0 / 45, -56.0 / 15, 32.0 / 9},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
        {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
    static constexpr double b[7] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0};
    static constexpr double e[7] = {35.0 / 384 - 5179.0 / 57600,
                                    0,
                                    500.0 / 1113 - 7571.0 / 16695,
                                    125.0 / 192 - 393.0 / 640,
                                    -2187.0 / 6784 + 92097.0 / 339200,
                                    11.0 / 84 - 187.0 / 2100,
                                    -1.0 / 40};
};

}  // namespace hill_detail

/// Fundamental solutions of -u'' + q u = lambda u on [0, x_end], 1D only.
class HillSolver {
public:
    explicit HillSolver(const FourierPotential& q) {
        require(q.dim() == 1, "Hill solver needs a one-dimensional potential");
        // Conjugate pairs folded: q = qhat(0) + sum_{m>0} 2 Re(qhat(m) e^{2 pi i m x}).
        for (const auto& [m, c] : q.coeffs())
            if (m[0] > 0) terms_.push_back({two_pi * m[0], c});
        even_ = q.is_even();
        mean_ = q.mean();
        osc_ = q.oscillation_l1();
    }

    bool even() const { return even_; }
    /// A value below the bottom of the spectrum.
    double lower_bound() const { return mean_ - osc_ - 1.0; }

    double q(double x) const {
        double s = mean_;
        for (const auto& [w, c] : terms_) s += 2.0 * (c.real() * std::cos(w * x) - c.imag() * std::sin(w * x));
        return s;
    }

    /// (y1, y1', y2, y2') at x_end with y1(0)=1, y1'(0)=0, y2(0)=0, y2'(0)=1.
    std::array<cplx, 4> solve(cplx lambda, double x_end, double tol) const {
        if (lambda.imag() == 0) {
            const auto r = integrate<double>(lambda.real(), x_end, tol);
            return {cplx(r[0]), cplx(r[1]), cplx(r[2]), cplx(r[3])};
        }
        return integrate<cplx>(lambda, x_end, tol);
    }

    /// Adaptive Dormand-Prince 5(4) with mixed absolute/relative tolerance tol.
    template <class T>
    std::array<T, 4> integrate(T lambda, double x_end, double tol) const {
        using hill_detail::DP54;
        using State = std::array<T, 4>;
        require(tol >= 1e-13 && tol <= 1e-6, "Hill integration tolerance must lie in [1e-13, 1e-6]");
        State y{T(1), T(0), T(0), T(1)};
        double x = 0;
        const double scale = 1 + std::sqrt(std::abs(lambda) + osc_ + std::abs(mean_));
        double h = std::min(0.05, 0.5 / scale);
        auto rhs = [&](double xx, const State& s) {
            const T f = T(q(xx)) - lambda;
            return State{s[1], f * s[0], s[3], f * s[2]};
        };
        std::array<State, 7> k;
        k[0] = rhs(x, y);
        long steps = 0;
        while (x < x_end) {
            const bool last = x + h >= x_end;
            if (last) h = x_end - x;
            for (int st = 1; st < 7; ++st) {
                State tmp = y;
                for (int j = 0; j < st; ++j)
                    for (int i = 0; i < 4; ++i) tmp[i] += (h * DP54::a[st][j]) * k[j][i];
                k[st] = rhs(x + DP54::c[st] * h, tmp);
            }
            State ynew = y;
            double err = 0;
            for (int i = 0; i < 4; ++i) {
                T inc = 0, e = 0;
                for (int st = 0; st < 7; ++st) {
                    inc += DP54::b[st] * k[st][i];
                    e += DP54::e[st] * k[st][i];
                }
                ynew[i] += h * inc;
                const double sc = tol * (1 + std::max(std::abs(y[i]), std::abs(ynew[i])));
                err = std::max(err, std::abs(h * e) / sc);
            }
            if (err <= 1) {
                x = last ? x_end : x + h;
                y = ynew;
                k[0] = k[6];  // first-same-as-last
            }
            h *= err == 0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (h < 1e-14 * (1 + x_end) || ++steps > 5'000'000)
                throw IntegrationFailure("Hill integration step size collapsed", x);
        }
        return y;
    }

    Monodromy monodromy(cplx lambda, double tol) const {
        const auto s = solve(lambda, 1.0, tol);
        Monodromy m;
        m.lambda = lambda;
        m.tol = tol;
        m.matrix << s[0], s[2], s[1], s[3];
        return m;
    }

    cplx discriminant(cplx lambda, double tol) const { return monodromy(lambda, tol).trace(); }

private:
    std::vector<std::pair<double, cplx>> terms_;
    bool even_ = false;
    double mean_ = 0;
    double osc_ = 0;
};

inline Monodromy monodromy(const FourierPotential& q1, cplx lambda, double tol = 1e-12) {
    return HillSolver(q1).monodromy(lambda, tol);
}

inline cplx discriminant(const FourierPotential& q1, cplx lambda, double tol = 1e-12) {
    return HillSolver(q1).discriminant(lambda, tol);
}

/// k with 2 cos k = d, Re k in [0, 2 pi), Im k >= 0. On the band (|d| <= 2,
/// d real) the representative with Re k in [0, pi] is returned.
inline cplx principal_floquet_exponent(cplx d) {
    const cplx half = 0.5 * d;
    if (std::abs(d.imag()) < 1e-14 && std::abs(d.real()) <= 2.0)
        return cplx(std::acos(std::clamp(half.real(), -1.0, 1.0)), 0.0);
    // w = e^{ik} solves w^2 - d w + 1 = 0; |w| <= 1 gives Im k >= 0.
    const cplx root = std::sqrt(half * half - 1.0);
    cplx w = half + root;
    if (std::abs(w) > 1.0) w = half - root;
    const cplx k = cplx(0, -1) * std::log(w);
    return cplx(wrap_two_pi(k.real()), std::max(0.0, k.imag()));
}

inline cplx floquet_exponent(const FourierPotential& q1, cplx lambda, double tol = 1e-12) {
    return principal_floquet_exponent(discriminant(q1, lambda, tol));
}

namespace hill_detail {

inline double bracket_root(const std::function<double(double)>& f, double a, double b, double fa, double fb,
                           double xtol) {
    if (fa == 0) return a;
    if (fb == 0) return b;
    std::uintmax_t iters = 200;
    auto tol = [xtol](double l, double r) { return std::abs(r - l) <= xtol * (1 + std::abs(l)); };
    const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    return 0.5 * (r.first + r.second);
}

// Adaptive scan of f on [lo, hi]: the step starts at `step` and is halved
// wherever consecutive values differ by more than max_jump. Returns the sample
// points and values.
inline std::pair<std::vector<double>, std::vector<double>> adaptive_scan(const std::function<double(double)>& f,
                                                                       double lo, double hi, double step,
                                                                       double max_jump, double min_step) {
    std::vector<double> xs{lo}, ys{f(lo)};
    double h = step;
    while (xs.back() < hi) {
        const double x0 = xs.back();
        const double y0 = ys.back();
        double x1 = std::min(hi, x0 + h);
        double y1 = f(x1);
        while (std::abs(y1 - y0) > max_jump * (1 + std::abs(y0))) {
            h *= 0.5;
            if (h < min_step)
                throw ResolutionFailure("Hill scan cannot resolve the discriminant near lambda = " +
                                        std::to_string(x0));
            x1 = std::min(hi, x0 + h);
            y1 = f(x1);
        }
        xs.push_back(x1);
        ys.push_back(y1);
        h = std::min(step, 2 * h);
    }
    return {std::move(xs), std::move(ys)};
}

inline std::vector<double> sign_change_roots(const std::function<double(double)>& f, const std::vector<double>& xs,
                                             const std::vector<double>& ys, double xtol) {
    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        if (ys[i] == 0) {
            roots.push_back(xs[i]);
            continue;
        }
        if ((ys[i] < 0) != (ys[i + 1] < 0) && ys[i + 1] != 0)
            roots.push_back(bracket_root(f, xs[i], xs[i + 1], ys[i], ys[i + 1], xtol));
    }
    if (!ys.empty() && ys.back() == 0) roots.push_back(xs.back());
    return roots;
}

inline double golden_extremum(const std::function<double(double)>& f, double a, double b, bool maximize,
                              double xtol) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    auto better = [maximize](double u, double v) { return maximize ? u > v : u < v; };
    while (b - a > xtol * (1 + std::abs(a))) {
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
    return 0.5 * (a + b);
}

}  // namespace hill_detail

/// Spectral bands of the Hill operator below lambda_max: the set |D| <= 2.
/// For even potentials the band edges are taken as the simple roots of the
/// half-period factors (D - 2 = 4 y1'(1/2) y2(1/2), D + 2 = 4 y1(1/2) y2'(1/2)),
/// which stays accurate for exponentially thin gaps. Otherwise edges are found
/// from crossings of |D| = 2 plus a search of every local extremum of D for
/// gaps too thin for the scan to bracket.
inline std::vector<Interval> bands_1d(const FourierPotential& q1, double lambda_max, double tol = 1e-12,
                                      double edge_tol = 1e-12) {
    using namespace hill_detail;
    const HillSolver solver(q1);
    const double lo = solver.lower_bound();
    require(lambda_max > lo + 1.0, "bands_1d: lambda_max must lie above the bottom of the spectrum");
    const double step = 0.1;

    std::vector<double> edges;
    if (solver.even()) {
        auto half = [&](double lam) { return solver.integrate<double>(lam, 0.5, tol); };
        // One scan drives all four factors; its step adapts to the fastest one.
        std::vector<double> xs{lo};
        std::vector<std::array<double, 4>> ys{half(lo)};
        double h = step;
        auto jump = [](const std::array<double, 4>& u, const std::array<double, 4>& v) {
            double j = 0;
            for (int i = 0; i < 4; ++i) j = std::max(j, std::abs(u[i] - v[i]) / (1 + std::abs(u[i])));
            return j;
        };
        while (xs.back() < lambda_max) {
            double x1 = std::min(lambda_max, xs.back() + h);
            auto y1 = half(x1);
            while (jump(ys.back(), y1) > 0.5) {
                h *= 0.5;
                if (h < 1e-9) throw ResolutionFailure("Hill scan cannot resolve half-period solutions");
                x1 = std::min(lambda_max, xs.back() + h);
                y1 = half(x1);
            }
            xs.push_back(x1);
            ys.push_back(y1);
            h = std::min(step, 2 * h);
        }
        for (int comp = 0; comp < 4; ++comp) {
            auto f = [&, comp](double lam) { return half(lam)[comp]; };
            std::vector<double> yc(ys.size());
            for (std::size_t i = 0; i < ys.size(); ++i) yc[i] = ys[i][comp];
            const auto r = sign_change_roots(f, xs, yc, edge_tol);
            edges.insert(edges.end(), r.begin(), r.end());
        }
    } else {
        auto d = [&](double lam) { return solver.discriminant(cplx(lam), tol).real(); };
        const auto [xs, ys] = adaptive_scan(d, lo, lambda_max, step, 0.5, 1e-9);
        auto dm2 = [&](double lam) { return d(lam) - 2.0; };
        auto dp2 = [&](double lam) { return d(lam) + 2.0; };
        std::vector<double> ym(ys.size()), yp(ys.size());
        for (std::size_t i = 0; i < ys.size(); ++i) {
            ym[i] = ys[i] - 2.0;
            yp[i] = ys[i] + 2.0;
        }
        auto r1 = sign_change_roots(dm2, xs, ym, edge_tol);
        auto r2 = sign_change_roots(dp2, xs, yp, edge_tol);
        edges.insert(edges.end(), r1.begin(), r1.end());
        edges.insert(edges.end(), r2.begin(), r2.end());
        // Thin gaps: an interior extremum of D beyond +-2 that the samples did
        // not bracket.
        for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
            const bool is_max = ys[i] >= ys[i - 1] && ys[i] >= ys[i + 1];
            const bool is_min = ys[i] <= ys[i - 1] && ys[i] <= ys[i + 1];
            if (!is_max && !is_min) continue;
            if (is_max && ys[i] < 1.0) continue;
            if (is_min && ys[i] > -1.0) continue;
            // Already bracketed by the sign-change pass.
            if (std::abs(ys[i]) > 2.0 || std::abs(ys[i - 1]) > 2.0 || std::abs(ys[i + 1]) > 2.0) continue;
            const double xe = golden_extremum(d, xs[i - 1], xs[i + 1], is_max, 1e-13);
            const double de = d(xe);
            const double excess = std::abs(de) - 2.0;
            if (excess <= 1e-10) continue;
            auto g = is_max ? std::function<double(double)>(dm2) : std::function<double(double)>(dp2);
            edges.push_back(bracket_root(g, xs[i - 1], xe, g(xs[i - 1]), g(xe), edge_tol));
            edges.push_back(bracket_root(g, xe, xs[i + 1], g(xe), g(xs[i + 1]), edge_tol));
        }
    }
    std::sort(edges.begin(), edges.end());

    std::vector<Interval> bands;
    for (std::size_t i = 0; i < edges.size(); i += 2) {
        const double a = edges[i];
        const double b = i + 1 < edges.size() ? edges[i + 1] : lambda_max;
        bands.push_back({a, std::min(b, lambda_max)});
    }
    // Merge touching bands (closed gaps).
    std::vector<Interval> merged;
    for (const auto& b : bands) {
        if (!merged.empty() && b.lo - merged.back().hi <= 1e-9 * (1 + std::abs(b.lo)))
            merged.back().hi = std::max(merged.back().hi, b.hi);
        else
            merged.push_back(b);
    }
    if (merged.empty()) throw ResolutionFailure("bands_1d found no band below lambda_max");
    return merged;
}

}  // namespace floquet
