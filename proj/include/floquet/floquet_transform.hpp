#pragma once

// Discrete Floquet transform of functions sampled on a block of unit cells:
//   fhat(k, x0) = sum_l f(x0 + l) exp(-i k.(x0 + l)),   x0 on the cell grid,
// its exact inverse on the dual grid, block diagonalization of H0, and the
// growth order of fhat along imaginary directions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "common.hpp"
#include "parallel.hpp"
#include "potential.hpp"

namespace floquet {

/// Cells l with |l|_inf <= cells, each sampled at x0 = j / s (j = 0..s-1 per axis).
class CellArray {
public:
    CellArray(int dim, int cells, int samples_per_axis) : dim_(dim), cells_(cells), s_(samples_per_axis) {
        require(dim >= 1 && dim <= max_dim, "cell array dim must be 1, 2 or 3");
        require(cells >= 0, "cell range must be >= 0");
        require(samples_per_axis >= 1, "need at least one sample per cell axis");
        values_.assign(n_cells() * n_intra(), cplx(0));
    }

    int dim() const { return dim_; }
    int cells() const { return cells_; }
    int samples_per_axis() const { return s_; }
    int period() const { return 2 * cells_ + 1; }
    std::size_t n_cells() const { return ipow(static_cast<std::size_t>(period())); }
    std::size_t n_intra() const { return ipow(static_cast<std::size_t>(s_)); }

    LatticeVec cell(std::size_t c) const {
        LatticeVec l{0, 0, 0};
        for (int a = dim_ - 1; a >= 0; --a) {
            l[a] = static_cast<int>(c % static_cast<std::size_t>(period())) - cells_;
            c /= static_cast<std::size_t>(period());
        }
        return l;
    }
    std::size_t cell_index(const LatticeVec& l) const {
        std::size_t c = 0;
        for (int a = 0; a < dim_; ++a) c = c * static_cast<std::size_t>(period()) + static_cast<std::size_t>(l[a] + cells_);
        return c;
    }
    bool contains(const LatticeVec& l) const {
        for (int a = 0; a < dim_; ++a)
            if (std::abs(l[a]) > cells_) return false;
        return true;
    }
    RealVec offset(std::size_t j) const {
        RealVec x{0, 0, 0};
        for (int a = dim_ - 1; a >= 0; --a) {
            x[a] = static_cast<double>(j % static_cast<std::size_t>(s_)) / s_;
            j /= static_cast<std::size_t>(s_);
        }
        return x;
    }
    RealVec point(std::size_t c, std::size_t j) const {
        const LatticeVec l = cell(c);
        RealVec x = offset(j);
        for (int a = 0; a < dim_; ++a) x[a] += l[a];
        return x;
    }

    cplx& at(std::size_t c, std::size_t j) { return values_[c * n_intra() + j]; }
    cplx at(std::size_t c, std::size_t j) const { return values_[c * n_intra() + j]; }
    std::vector<cplx>& values() { return values_; }
    const std::vector<cplx>& values() const { return values_; }

    template <class F>
    void fill(F&& f) {
        for (std::size_t c = 0; c < n_cells(); ++c)
            for (std::size_t j = 0; j < n_intra(); ++j) at(c, j) = f(point(c, j));
    }

    /// Discrete L2 norm over one cell (sample mean of |f|^2).
    double cell_norm(std::size_t c) const {
        double s = 0;
        for (std::size_t j = 0; j < n_intra(); ++j) s += std::norm(at(c, j));
        return std::sqrt(s / static_cast<double>(n_intra()));
    }
    double norm_squared() const {
        double s = 0;
        for (std::size_t c = 0; c < n_cells(); ++c) s += std::pow(cell_norm(c), 2);
        return s;
    }
    /// Translate by l0; values shifted out of range are dropped.
    CellArray shifted(const LatticeVec& l0) const {
        CellArray out(dim_, cells_, s_);
        for (std::size_t c = 0; c < n_cells(); ++c) {
            LatticeVec l = cell(c);
            for (int a = 0; a < dim_; ++a) l[a] += l0[a];
            if (!contains(l)) continue;
            const std::size_t c2 = cell_index(l);
            for (std::size_t j = 0; j < n_intra(); ++j) out.at(c2, j) = at(c, j);
        }
        return out;
    }

private:
    std::size_t ipow(std::size_t b) const {
        std::size_t r = 1;
        for (int a = 0; a < dim_; ++a) r *= b;
        return r;
    }

    int dim_;
    int cells_;
    int s_;
    std::vector<cplx> values_;
};

/// fhat on the dual grid k = 2 pi j / P (j = 0..P-1 per axis), P = 2 cells + 1.
struct FloquetField {
    int dim = 1;
    int cells = 0;
    int samples_per_axis = 1;
    std::vector<RealVec> k_grid;
    std::vector<std::vector<cplx>> values;  // values[k][intra]

    int period() const { return 2 * cells + 1; }
};

inline std::vector<RealVec> dual_grid(int dim, int cells) {
    const int P = 2 * cells + 1;
    std::size_t n = 1;
    for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(P);
    std::vector<RealVec> out(n);
    for (std::size_t f = 0; f < n; ++f) {
        std::size_t rem = f;
        RealVec k{0, 0, 0};
        for (int a = dim - 1; a >= 0; --a) {
            k[a] = two_pi * static_cast<double>(rem % static_cast<std::size_t>(P)) / P;
            rem /= static_cast<std::size_t>(P);
        }
        out[f] = k;
    }
    return out;
}

/// f exp(-i phase), formed in the log domain when the exponential alone could
/// overflow (complex k), so tiny samples times huge weights stay finite.
inline cplx weighted_term(cplx fv, cplx phase) {
    if (fv == cplx(0)) return cplx(0);
    if (phase.imag() == 0) return fv * std::polar(1.0, -phase.real());
    return std::exp(std::log(fv) + cplx(0, -1) * phase);
}

/// fhat(k, x0) on the cell grid for one (possibly complex) k.
inline std::vector<cplx> forward(const CellArray& f, const ComplexVec& k) {
    std::vector<cplx> out(f.n_intra(), cplx(0));
    for (std::size_t c = 0; c < f.n_cells(); ++c)
        for (std::size_t j = 0; j < f.n_intra(); ++j) {
            const RealVec x = f.point(c, j);
            cplx phase = 0;
            for (int a = 0; a < f.dim(); ++a) phase += k[a] * x[a];
            out[j] += weighted_term(f.at(c, j), phase);
        }
    return out;
}

inline std::vector<cplx> forward(const CellArray& f, const RealVec& k) { return forward(f, to_complex(k)); }

inline FloquetField forward(const CellArray& f) {
    FloquetField out;
    out.dim = f.dim();
    out.cells = f.cells();
    out.samples_per_axis = f.samples_per_axis();
    out.k_grid = dual_grid(f.dim(), f.cells());
    out.values.resize(out.k_grid.size());
    parallel_for(out.k_grid.size(), [&](std::size_t i) { out.values[i] = forward(f, out.k_grid[i]); });
    return out;
}

/// Exact discrete inversion: f(x0 + l) = P^-d sum_k fhat(k, x0) exp(i k.(x0 + l)).
inline CellArray inverse(const FloquetField& F) {
    CellArray out(F.dim, F.cells, F.samples_per_axis);
    const auto expected = dual_grid(F.dim, F.cells);
    require(F.k_grid.size() == expected.size() && F.values.size() == expected.size(),
            "Floquet field grid does not match the cell range");
    for (std::size_t i = 0; i < expected.size(); ++i)
        for (int a = 0; a < F.dim; ++a)
            require(std::abs(F.k_grid[i][a] - expected[i][a]) < 1e-12, "Floquet field grid is not the dual grid");
    const double scale = 1.0 / static_cast<double>(expected.size());
    parallel_for(out.n_cells(), [&](std::size_t c) {
        for (std::size_t j = 0; j < out.n_intra(); ++j) {
            const RealVec x = out.point(c, j);
            cplx s = 0;
            for (std::size_t i = 0; i < expected.size(); ++i) {
                double phase = 0;
                for (int a = 0; a < F.dim; ++a) phase += F.k_grid[i][a] * x[a];
                s += F.values[i][j] * std::polar(1.0, phase);
            }
            out.at(c, j) = s * scale;
        }
    });
    return out;
}

/// Discrete cell norm of a periodic cell function.
inline double cell_function_norm(const std::vector<cplx>& v) {
    double s = 0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s / static_cast<double>(v.size()));
}

// ---- block diagonalization ------------------------------------------------------------

namespace transform_detail {

// Applies a diagonal Fourier multiplier on a periodic box with `n` points per
// axis and side length `len`: symbol(xi) for the angular frequency vector xi.
template <class Symbol>
std::vector<cplx> fourier_multiply(const std::vector<cplx>& v, int dim, int n, double len, Symbol&& symbol) {
    Eigen::FFT<double> fft;
    std::vector<cplx> data = v;
    std::size_t stride = 1;
    std::vector<std::size_t> strides(static_cast<std::size_t>(dim));
    for (int a = dim - 1; a >= 0; --a) {
        strides[static_cast<std::size_t>(a)] = stride;
        stride *= static_cast<std::size_t>(n);
    }
    const std::size_t total = stride;
    auto along = [&](int a, bool inverse) {
        const std::size_t st = strides[static_cast<std::size_t>(a)];
        std::vector<cplx> line(static_cast<std::size_t>(n)), res;
        for (std::size_t base = 0; base < total; ++base) {
            if ((base / st) % static_cast<std::size_t>(n) != 0) continue;
            for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = data[base + static_cast<std::size_t>(i) * st];
            if (inverse)
                fft.inv(res, line);
            else
                fft.fwd(res, line);
            for (int i = 0; i < n; ++i) data[base + static_cast<std::size_t>(i) * st] = res[static_cast<std::size_t>(i)];
        }
    };
    for (int a = 0; a < dim; ++a) along(a, false);
    for (std::size_t f = 0; f < total; ++f) {
        RealVec xi{0, 0, 0};
        std::size_t rem = f;
        for (int a = dim - 1; a >= 0; --a) {
            int m = static_cast<int>(rem % static_cast<std::size_t>(n));
            rem /= static_cast<std::size_t>(n);
            if (m >= (n + 1) / 2) m -= n;
            xi[a] = two_pi * m / len;
        }
        data[f] *= symbol(xi);
    }
    for (int a = 0; a < dim; ++a) along(a, true);
    return data;
}

}  // namespace transform_detail

struct DiagonalizationReport {
    double max_residual = 0;
    std::vector<double> residuals;  // per k
    bool guard_band_ok = true;
};

/// max_k ||(H0 f)^(k) - H0(k) fhat(k)|| / ||fhat(k)||: H0 f by spectral
/// differentiation on the whole sampled range, H0(k) = (i grad - k)^2 + q on
/// the cell torus. Guard band: the two outermost cell shells must be
/// negligible (below 1e-12 of the peak cell norm).
inline DiagonalizationReport diagonalization_residual(const CellArray& f, const FourierPotential& q,
                                                      const std::vector<RealVec>& k_grid) {
    require(q.dim() == f.dim(), "potential and cell array dimensions differ");
    const int dim = f.dim(), P = f.period(), s = f.samples_per_axis();
    DiagonalizationReport rep;
    double peak = 0, edge = 0;
    for (std::size_t c = 0; c < f.n_cells(); ++c) {
        const double nrm = f.cell_norm(c);
        peak = std::max(peak, nrm);
        const LatticeVec l = f.cell(c);
        int linf = 0;
        for (int a = 0; a < dim; ++a) linf = std::max(linf, std::abs(l[a]));
        if (linf >= f.cells() - 1) edge = std::max(edge, nrm);
    }
    rep.guard_band_ok = f.cells() >= 2 && edge <= 1e-12 * peak;

    // Extended grid: n = P s points per axis, point index = (l + cells) s + j.
    const int n = P * s;
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n);
    std::vector<cplx> ext(total);
    auto ext_index = [&](std::size_t c, std::size_t j) {
        const LatticeVec l = f.cell(c);
        std::size_t rem = j, idx = 0;
        std::array<int, max_dim> jj{0, 0, 0};
        for (int a = dim - 1; a >= 0; --a) {
            jj[a] = static_cast<int>(rem % static_cast<std::size_t>(s));
            rem /= static_cast<std::size_t>(s);
        }
        for (int a = 0; a < dim; ++a)
            idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>((l[a] + f.cells()) * s + jj[a]);
        return idx;
    };
    for (std::size_t c = 0; c < f.n_cells(); ++c)
        for (std::size_t j = 0; j < f.n_intra(); ++j) ext[ext_index(c, j)] = f.at(c, j);
    auto lap = transform_detail::fourier_multiply(ext, dim, n, static_cast<double>(P), [&](const RealVec& xi) {
        double s2 = 0;
        for (int a = 0; a < dim; ++a) s2 += xi[a] * xi[a];
        return cplx(s2);
    });
    CellArray hf(dim, f.cells(), s);
    for (std::size_t c = 0; c < f.n_cells(); ++c)
        for (std::size_t j = 0; j < f.n_intra(); ++j)
            hf.at(c, j) = lap[ext_index(c, j)] + q.evaluate(f.point(c, j)) * f.at(c, j);

    std::vector<double> qcell(f.n_intra());
    for (std::size_t j = 0; j < f.n_intra(); ++j) qcell[j] = q.evaluate(f.offset(j));

    rep.residuals.resize(k_grid.size());
    parallel_for(k_grid.size(), [&](std::size_t i) {
        const RealVec& k = k_grid[i];
        const auto fh = forward(f, k);
        const auto lhs = forward(hf, k);
        auto rhs = transform_detail::fourier_multiply(fh, dim, s, 1.0, [&](const RealVec& xi) {
            double s2 = 0;
            for (int a = 0; a < dim; ++a) s2 += (xi[a] + k[a]) * (xi[a] + k[a]);
            return cplx(s2);
        });
        double num = 0, den = 0;
        for (std::size_t j = 0; j < rhs.size(); ++j) {
            rhs[j] += qcell[j] * fh[j];
            num += std::norm(lhs[j] - rhs[j]);
            den += std::norm(fh[j]);
        }
        rep.residuals[i] = den > 0 ? std::sqrt(num / den) : 0.0;
    });
    for (double r : rep.residuals) rep.max_residual = std::max(rep.max_residual, r);
    return rep;
}

// ---- growth order -------------------------------------------------------------------------

struct GrowthProbe {
    double s_hat = 0;
    double a = 0, b = 0;
    double fit_rms = 0;
    std::vector<double> tau;
    std::vector<double> log_norm;
    std::vector<double> last_shell_ratio;
    std::vector<char> used_in_fit;
};

/// log ||fhat(i tau e, .)|| for tau in tau_list, fitted to a + b tau^s over the
/// two largest decades of tau. Throws ProbeFailure when the outermost cell
/// shell carries more than 1e-3 of the value (truncation-dominated regime).
inline GrowthProbe growth_order_probe(const CellArray& f, const RealVec& direction, std::vector<double> tau_list) {
    require(!tau_list.empty(), "growth probe needs tau values");
    std::sort(tau_list.begin(), tau_list.end());
    require(tau_list.front() > 0, "tau values must be positive");
    GrowthProbe out;
    out.tau = tau_list;
    out.log_norm.resize(tau_list.size());
    out.last_shell_ratio.resize(tau_list.size());
    std::vector<char> shell(f.n_cells());
    for (std::size_t c = 0; c < f.n_cells(); ++c) {
        const LatticeVec l = f.cell(c);
        int linf = 0;
        for (int a = 0; a < f.dim(); ++a) linf = std::max(linf, std::abs(l[a]));
        shell[c] = linf == f.cells() && f.cells() > 0;
    }
    for (std::size_t t = 0; t < tau_list.size(); ++t) {
        ComplexVec k{0, 0, 0};
        for (int a = 0; a < f.dim(); ++a) k[a] = cplx(0, tau_list[t] * direction[a]);
        std::vector<cplx> all(f.n_intra(), cplx(0)), last(f.n_intra(), cplx(0));
        for (std::size_t c = 0; c < f.n_cells(); ++c)
            for (std::size_t j = 0; j < f.n_intra(); ++j) {
                const RealVec x = f.point(c, j);
                cplx phase = 0;
                for (int a = 0; a < f.dim(); ++a) phase += k[a] * x[a];
                const cplx term = weighted_term(f.at(c, j), phase);
                all[j] += term;
                if (shell[c]) last[j] += term;
            }
        const double nrm = cell_function_norm(all);
        out.last_shell_ratio[t] = nrm > 0 ? cell_function_norm(last) / nrm : 1.0;
        if (!(nrm > 0) || !std::isfinite(nrm))
            throw ProbeFailure("growth probe value not representable at tau = " + std::to_string(tau_list[t]));
        if (out.last_shell_ratio[t] > 1e-3)
            throw ProbeFailure("growth probe truncation-dominated at tau = " + std::to_string(tau_list[t]));
        out.log_norm[t] = std::log(nrm);
    }
    const double tmax = tau_list.back();
    std::vector<double> xs, ys;
    out.used_in_fit.assign(tau_list.size(), 0);
    for (std::size_t t = 0; t < tau_list.size(); ++t)
        if (tau_list[t] >= tmax / 100) {
            xs.push_back(tau_list[t]);
            ys.push_back(out.log_norm[t]);
            out.used_in_fit[t] = 1;
        }
    require(xs.size() >= 3, "growth probe needs at least 3 tau values in the fitted range");
    auto fit = [&](double s) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double x = std::pow(xs[i], s);
            sx += x;
            sy += ys[i];
            sxx += x * x;
            sxy += x * ys[i];
        }
        const double det = n * sxx - sx * sx;
        const double b = det > 0 ? (n * sxy - sx * sy) / det : 0.0;
        const double a = (sy - b * sx) / n;
        double rss = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double r = ys[i] - a - b * std::pow(xs[i], s);
            rss += r * r;
        }
        return std::array<double, 3>{rss, a, b};
    };
    double best_s = 0.2, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 160; ++i) {
        const double s = 0.2 + 0.05 * i;
        const double r = fit(s)[0];
        if (r < best) {
            best = r;
            best_s = s;
        }
    }
    double lo = std::max(0.2, best_s - 0.05), hi = best_s + 0.05;
    const double g = 0.5 * (std::sqrt(5.0) - 1);
    double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
    double fc = fit(c)[0], fd = fit(d)[0];
    while (hi - lo > 1e-9) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = fit(c)[0];
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = fit(d)[0];
        }
    }
    out.s_hat = 0.5 * (lo + hi);
    const auto [rss, a, b] = fit(out.s_hat);
    out.a = a;
    out.b = b;
    out.fit_rms = std::sqrt(rss / static_cast<double>(xs.size()));
    return out;
}

}  // namespace floquet
