#pragma once

// Real Fermi varieties F_{R,lambda}(q) = {k real : det(H0(k) - lambda) = 0}
// traced on the Brillouin torus, complex zeros of the determinant along
// complex lines (argument principle), real component counts, and the Hill
// cross-check for separable potentials.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <vector>

#include "band_structure.hpp"
#include "common.hpp"
#include "hill.hpp"
#include "parallel.hpp"
#include "plane_wave.hpp"

namespace floquet {

struct FermiTrace {
    double lambda = 0;
    int dim = 1;
    std::vector<double> points;                 // dim = 1
    std::vector<RealVec> vertices;              // dim >= 2, canonical in the grid window
    std::vector<double> vertex_residuals;       // min_j |lambda_j(k) - lambda| per vertex (points in 1D)
    std::vector<std::array<int, 2>> segments;   // vertex index pairs
    std::vector<int> segment_slice;             // k3 slice index (dim = 3), else 0
    std::vector<int> component_ids;             // per segment (per point in 1D)
    int saddle_cells = 0;                       // ambiguous cells resolved by the centre value
    int unconverged_vertices = 0;

    bool empty() const { return points.empty() && vertices.empty(); }
    double max_residual() const {
        double r = 0;
        for (double v : vertex_residuals) r = std::max(r, v);
        return r;
    }
};

namespace fermi_detail {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

// Zero of det(H0(k_a + t span e_axis) - lambda) for t in [0, 1], given the
// determinant signs at the ends differ. Newton on det (via the log-derivative)
// safeguarded by bisection.
inline std::pair<double, bool> edge_root(const BlochFamily& fam, double lambda, const RealVec& k_a, int axis,
                                         double span, int sign_a) {
    double t0 = 0, t1 = 1, t = 0.5;
    auto at = [&](double s) {
        RealVec k = k_a;
        k[axis] += s * span;
        return k;
    };
    for (int it = 0; it < 100; ++it) {
        const auto [dlog, ld] = fam.log_derivative_real(at(t), lambda, axis);
        if (ld.singular()) return {t, true};
        if (ld.sign() == sign_a)
            t0 = t;
        else
            t1 = t;
        const double dt = 1.0 / (dlog * span);
        double tn = t - dt;
        if (!(tn > t0 && tn < t1) || !std::isfinite(tn)) tn = 0.5 * (t0 + t1);
        if (std::abs(tn - t) * std::abs(span) < 1e-15 || (t1 - t0) * std::abs(span) < 1e-15) return {tn, true};
        t = tn;
    }
    return {t, false};
}

inline double spectral_residual(const BlochFamily& fam, const RealVec& k, double lambda) {
    const Eigen::VectorXd ev = fam.spectrum(k);
    return (ev.array() - lambda).abs().minCoeff();
}

inline int det_sign(const BlochFamily& fam, const RealVec& k, double lambda) {
    const LogDet ld = fam.log_det_real(k, lambda);
    return ld.singular() ? 1 : ld.sign();
}

// One 2D slice: marching squares on the sign of det over the periodic grid.
// Appends vertices/segments to `out`; component labels are left to the caller.
inline void trace_slice(const BlochFamily& fam, double lambda, const BrillouinGrid& grid, double k3, int slice,
                        FermiTrace& out) {
    const int n = grid.nodes_per_axis();
    const int P = n - 1;  // distinct nodes per axis on the torus
    const double h = grid.spacing();
    auto node_k = [&](int i, int j) {
        RealVec k{grid.origin()[0] + h * i, grid.origin()[1] + h * j, k3};
        return k;
    };
    std::vector<int> sign(static_cast<std::size_t>(P) * P);
    parallel_for(sign.size(), [&](std::size_t f) {
        const int i = static_cast<int>(f / P), j = static_cast<int>(f % P);
        sign[f] = det_sign(fam, node_k(i, j), lambda);
    });
    auto s = [&](int i, int j) { return sign[static_cast<std::size_t>((i % P) * P + (j % P))]; };

    // Edge keys: (axis, i mod P, j mod P); crossing edges collected in key order.
    struct EdgeKey {
        int axis, i, j;
        auto operator<=>(const EdgeKey&) const = default;
    };
    std::map<EdgeKey, int> edge_vertex;
    for (int i = 0; i < P; ++i)
        for (int j = 0; j < P; ++j) {
            if (s(i, j) != s(i + 1, j)) edge_vertex[{0, i, j}] = -1;
            if (s(i, j) != s(i, j + 1)) edge_vertex[{1, i, j}] = -1;
        }
    std::vector<EdgeKey> keys;
    keys.reserve(edge_vertex.size());
    for (auto& [key, v] : edge_vertex) {
        v = static_cast<int>(out.vertices.size() + keys.size());
        keys.push_back(key);
    }
    std::vector<RealVec> verts(keys.size());
    std::vector<double> resid(keys.size());
    std::vector<char> converged(keys.size());
    parallel_for(keys.size(), [&](std::size_t e) {
        const auto& key = keys[e];
        const RealVec ka = node_k(key.i, key.j);
        const auto [t, ok] = edge_root(fam, lambda, ka, key.axis, h, s(key.i, key.j));
        RealVec k = ka;
        k[key.axis] += t * h;
        verts[e] = k;
        resid[e] = spectral_residual(fam, k, lambda);
        converged[e] = ok;
    });
    for (std::size_t e = 0; e < keys.size(); ++e) {
        out.vertices.push_back(verts[e]);
        out.vertex_residuals.push_back(resid[e]);
        if (!converged[e]) ++out.unconverged_vertices;
    }

    auto vid = [&](int axis, int i, int j) { return edge_vertex.at({axis, i % P, j % P}); };
    auto add = [&](int a, int b) {
        out.segments.push_back({a, b});
        out.segment_slice.push_back(slice);
    };
    for (int i = 0; i < P; ++i)
        for (int j = 0; j < P; ++j) {
            const int s00 = s(i, j), s10 = s(i + 1, j), s11 = s(i + 1, j + 1), s01 = s(i, j + 1);
            std::vector<int> cut;
            const bool bottom = s00 != s10, right = s10 != s11, top = s01 != s11, left = s00 != s01;
            if (bottom) cut.push_back(vid(0, i, j));
            if (right) cut.push_back(vid(1, i + 1, j));
            if (top) cut.push_back(vid(0, i, j + 1));
            if (left) cut.push_back(vid(1, i, j));
            if (cut.size() == 2) {
                add(cut[0], cut[1]);
            } else if (cut.size() == 4) {
                ++out.saddle_cells;
                RealVec c = node_k(i, j);
                c[0] += 0.5 * h;
                c[1] += 0.5 * h;
                const int sc = det_sign(fam, c, lambda);
                if (sc == s00) {
                    // s00/s11 region connected through the centre: cut off corners s10 and s01.
                    add(vid(0, i, j), vid(1, i + 1, j));
                    add(vid(0, i, j + 1), vid(1, i, j));
                } else {
                    add(vid(0, i, j), vid(1, i, j));
                    add(vid(0, i, j + 1), vid(1, i + 1, j));
                }
            }
        }
}

}  // namespace fermi_detail

/// Numerical real Fermi variety at real lambda on the grid window.
/// dim 1: roots of det on the periodic grid; dim 2: marching squares on the
/// sign of det with vertices polished along grid edges; dim 3: stack of 2D
/// slices over the k3 nodes. Components are labelled after torus gluing.
inline FermiTrace trace_real(std::shared_ptr<const BlochFamily> family, double lambda, const BrillouinGrid& grid) {
    require(family->dim() == grid.dim(), "grid and basis dimensions differ");
    const auto& fam = *family;
    FermiTrace out;
    out.lambda = lambda;
    out.dim = grid.dim();
    const int P = grid.nodes_per_axis() - 1;
    const double h = grid.spacing();

    if (grid.dim() == 1) {
        std::vector<int> sign(P);
        parallel_for(static_cast<std::size_t>(P), [&](std::size_t i) {
            sign[i] = fermi_detail::det_sign(fam, RealVec{grid.origin()[0] + h * static_cast<double>(i), 0, 0},
                                             lambda);
        });
        std::vector<int> edges;
        for (int i = 0; i < P; ++i)
            if (sign[i] != sign[(i + 1) % P]) edges.push_back(i);
        out.points.resize(edges.size());
        out.vertex_residuals.resize(edges.size());
        std::vector<char> ok(edges.size());
        parallel_for(edges.size(), [&](std::size_t e) {
            const RealVec ka{grid.origin()[0] + h * edges[e], 0, 0};
            const auto [t, conv] = fermi_detail::edge_root(fam, lambda, ka, 0, h, sign[edges[e]]);
            out.points[e] = ka[0] + t * h;
            out.vertex_residuals[e] = fermi_detail::spectral_residual(fam, RealVec{out.points[e], 0, 0}, lambda);
            ok[e] = conv;
        });
        for (char c : ok)
            if (!c) ++out.unconverged_vertices;
        out.component_ids.resize(out.points.size());
        std::iota(out.component_ids.begin(), out.component_ids.end(), 0);
        return out;
    }

    if (grid.dim() == 2) {
        fermi_detail::trace_slice(fam, lambda, grid, 0.0, 0, out);
    } else {
        for (int s = 0; s < P; ++s) fermi_detail::trace_slice(fam, lambda, grid, grid.origin()[2] + h * s, s, out);
    }
    fermi_detail::UnionFind uf(out.vertices.size());
    for (const auto& seg : out.segments) uf.unite(static_cast<std::size_t>(seg[0]), static_cast<std::size_t>(seg[1]));
    std::map<std::size_t, int> label;
    out.component_ids.reserve(out.segments.size());
    for (const auto& seg : out.segments) {
        const auto root = uf.find(static_cast<std::size_t>(seg[0]));
        auto it = label.find(root);
        if (it == label.end()) it = label.emplace(root, static_cast<int>(label.size())).first;
        out.component_ids.push_back(it->second);
    }
    return out;
}

inline FermiTrace trace_real(const FourierPotential& q, const PlaneWaveBasis& basis, double lambda,
                             const BrillouinGrid& grid) {
    return trace_real(std::make_shared<const BlochFamily>(basis, q), lambda, grid);
}

// ---- components --------------------------------------------------------------

struct ComponentInfo {
    int id = 0;
    std::size_t segments = 0;  // points in 1D
    double length = 0;         // summed segment length on the torus (0 in 1D)
    RealVec lo{0, 0, 0};
    RealVec hi{0, 0, 0};
};

struct ComponentReport {
    int n_components = 0;
    std::vector<ComponentInfo> components;
};

/// Component count and per-component length and bounding box after torus gluing.
inline ComponentReport component_report(const FermiTrace& t) {
    ComponentReport rep;
    if (t.dim == 1) {
        for (std::size_t i = 0; i < t.points.size(); ++i) {
            ComponentInfo c;
            c.id = t.component_ids[i];
            c.segments = 1;
            c.lo = c.hi = RealVec{t.points[i], 0, 0};
            rep.components.push_back(c);
        }
        rep.n_components = static_cast<int>(rep.components.size());
        return rep;
    }
    std::map<int, ComponentInfo> by_id;
    for (std::size_t s = 0; s < t.segments.size(); ++s) {
        const int id = t.component_ids[s];
        auto [it, fresh] = by_id.try_emplace(id);
        auto& c = it->second;
        const auto& a = t.vertices[t.segments[s][0]];
        const auto& b = t.vertices[t.segments[s][1]];
        if (fresh) {
            c.id = id;
            c.lo = c.hi = a;
        }
        double len2 = 0;
        for (int d = 0; d < t.dim; ++d) {
            const double dk = wrap_pi(b[d] - a[d]);
            len2 += dk * dk;
            c.lo[d] = std::min({c.lo[d], a[d], b[d]});
            c.hi[d] = std::max({c.hi[d], a[d], b[d]});
        }
        c.length += std::sqrt(len2);
        ++c.segments;
    }
    for (auto& [id, c] : by_id) rep.components.push_back(c);
    rep.n_components = static_cast<int>(rep.components.size());
    return rep;
}

// ---- complex lines -------------------------------------------------------------

/// Rectangle [re0, re1] x [im0, im1] in the complex coordinate z of the line
/// k = k0 + z e_axis.
struct ComplexLineProbe {
    RealVec k0{0, 0, 0};
    int axis = 0;
    double re0 = 0, re1 = 0, im0 = 0, im1 = 0;
};

struct ProbeResult {
    int zero_count = 0;
    int retries = 0;                // rectangle perturbations after boundary collisions
    std::size_t boundary_samples = 0;
    ComplexLineProbe used;          // rectangle actually integrated
};

namespace fermi_detail {

inline double phase_at(const BlochFamily& fam, const ComplexLineProbe& p, double lambda, cplx z, bool& singular) {
    ComplexVec k = to_complex(p.k0);
    k[p.axis] += z;
    const LogDet ld = log_det(fam.matrix(k, cplx(lambda)));
    singular = ld.singular();
    return ld.phase;
}

// Winding number of det along the rectangle boundary; nullopt on collision.
inline std::optional<int> winding(const BlochFamily& fam, double lambda, const ComplexLineProbe& p,
                                  std::size_t& samples) {
    const cplx corners[5] = {{p.re0, p.im0}, {p.re1, p.im0}, {p.re1, p.im1}, {p.re0, p.im1}, {p.re0, p.im0}};
    const double perimeter = 2 * ((p.re1 - p.re0) + (p.im1 - p.im0));
    const double min_len = 1e-10 * perimeter;
    double total = 0;
    for (int side = 0; side < 4; ++side) {
        const cplx a = corners[side], b = corners[side + 1];
        constexpr int initial = 16;
        std::vector<std::pair<cplx, double>> stack;  // pending right endpoints
        bool sing = false;
        double prev_phase = phase_at(fam, p, lambda, a, sing);
        ++samples;
        if (sing) return std::nullopt;
        for (int s = initial; s >= 1; --s) {
            const cplx zr = a + (b - a) * (static_cast<double>(s) / initial);
            stack.push_back({zr, phase_at(fam, p, lambda, zr, sing)});
            ++samples;
            if (sing) return std::nullopt;
        }
        cplx za = a;
        while (!stack.empty()) {
            const auto [zb, phb] = stack.back();
            const double d = wrap_pi(phb - prev_phase);
            if (std::abs(d) < 0.5 * pi) {
                total += d;
                prev_phase = phb;
                za = zb;
                stack.pop_back();
                continue;
            }
            if (std::abs(zb - za) < min_len) return std::nullopt;
            const cplx zm = 0.5 * (za + zb);
            const double phm = phase_at(fam, p, lambda, zm, sing);
            ++samples;
            if (sing) return std::nullopt;
            stack.push_back({zm, phm});
        }
    }
    const double turns = total / two_pi;
    const double rounded = std::round(turns);
    if (std::abs(turns - rounded) > 1e-6) return std::nullopt;
    return static_cast<int>(rounded);
}

}  // namespace fermi_detail

/// Number of zeros of z -> det(H0(k0 + z e_axis) - lambda) inside the probe
/// rectangle, by adaptive phase tracking along its boundary. A boundary that
/// passes too close to a zero is shifted by 1e-3 and retried up to 5 times.
inline ProbeResult complex_zero_count(const BlochFamily& fam, double lambda, const ComplexLineProbe& probe) {
    require(probe.axis >= 0 && probe.axis < fam.dim(), "probe axis out of range");
    require(probe.re1 > probe.re0 && probe.im1 > probe.im0, "probe rectangle must have positive extent");
    ProbeResult res;
    ComplexLineProbe p = probe;
    for (int attempt = 0; attempt <= 5; ++attempt) {
        if (attempt > 0) {
            const double d = 1e-3 * attempt;
            p.re0 = probe.re0 - d;
            p.re1 = probe.re1 + d;
            p.im0 = probe.im0 - d;
            p.im1 = probe.im1 + d;
        }
        const auto w = fermi_detail::winding(fam, lambda, p, res.boundary_samples);
        if (w) {
            res.zero_count = *w;
            res.retries = attempt;
            res.used = p;
            return res;
        }
    }
    throw ProbeFailure("complex probe boundary keeps colliding with a zero of the determinant");
}

inline ProbeResult complex_zero_count(const FourierPotential& q, const PlaneWaveBasis& basis, double lambda,
                                      const ComplexLineProbe& probe) {
    return complex_zero_count(BlochFamily(basis, q), lambda, probe);
}

struct PolishedRoot {
    cplx z;
    double residual = 0;  // |det / det'| at z, the Newton distance to the zero
    int multiplicity = 1;
    bool polished = true;
};

namespace fermi_detail {

inline std::optional<int> count_in(const BlochFamily& fam, double lambda, const ComplexLineProbe& r) {
    std::size_t dummy = 0;
    return winding(fam, lambda, r, dummy);
}

inline std::pair<cplx, double> newton_step(const BlochFamily& fam, double lambda, const ComplexLineProbe& p, cplx z) {
    ComplexVec k = to_complex(p.k0);
    k[p.axis] += z;
    const auto [dlog, ld] = fam.log_derivative(k, cplx(lambda), p.axis);
    if (ld.singular()) return {cplx(0), 0.0};
    const cplx step = 1.0 / dlog;
    return {step, std::abs(step)};
}

inline void polish_rect(const BlochFamily& fam, double lambda, const ComplexLineProbe& r, int count, int depth,
                        std::vector<PolishedRoot>& out) {
    if (count <= 0) return;
    const double w = r.re1 - r.re0, hgt = r.im1 - r.im0;
    const cplx centre(0.5 * (r.re0 + r.re1), 0.5 * (r.im0 + r.im1));
    if (count == 1) {
        cplx z = centre;
        for (int it = 0; it < 60; ++it) {
            const auto [step, size] = newton_step(fam, lambda, r, z);
            z -= step;
            const bool inside = z.real() >= r.re0 - 0.5 * w && z.real() <= r.re1 + 0.5 * w &&
                                z.imag() >= r.im0 - 0.5 * hgt && z.imag() <= r.im1 + 0.5 * hgt;
            if (!inside) break;
            if (size <= 1e-14 * (1 + std::abs(z))) {
                const double resid = newton_step(fam, lambda, r, z).second;
                if (z.real() >= r.re0 && z.real() <= r.re1 && z.imag() >= r.im0 && z.imag() <= r.im1) {
                    out.push_back({z, resid, 1, true});
                    return;
                }
                break;
            }
        }
        // Newton left the rectangle or stagnated: shrink and try again.
        if (std::max(w, hgt) < 1e-9) {
            out.push_back({centre, newton_step(fam, lambda, r, centre).second, 1, false});
            return;
        }
    }
    if (std::max(w, hgt) < 1e-9 || depth > 80) {
        out.push_back({centre, newton_step(fam, lambda, r, centre).second, count, false});
        return;
    }
    // Bisect the longer side; nudge the split line if it hits a zero.
    for (int attempt = 0; attempt < 8; ++attempt) {
        const double frac = 0.5 + 0.037 * attempt * (attempt % 2 ? 1 : -1);
        ComplexLineProbe a = r, b = r;
        if (w >= hgt) {
            a.re1 = b.re0 = r.re0 + frac * w;
        } else {
            a.im1 = b.im0 = r.im0 + frac * hgt;
        }
        const auto ca = count_in(fam, lambda, a);
        const auto cb = count_in(fam, lambda, b);
        if (!ca || !cb || *ca + *cb != count) continue;
        polish_rect(fam, lambda, a, *ca, depth + 1, out);
        polish_rect(fam, lambda, b, *cb, depth + 1, out);
        return;
    }
    out.push_back({centre, newton_step(fam, lambda, r, centre).second, count, false});
}

}  // namespace fermi_detail

struct PolishResult {
    ProbeResult count;
    std::vector<PolishedRoot> roots;

    /// Sum of multiplicities; equals count.zero_count by construction when every
    /// sub-rectangle count was consistent.
    int total_multiplicity() const {
        int s = 0;
        for (const auto& r : roots) s += r.multiplicity;
        return s;
    }
    int polished_count() const {
        int s = 0;
        for (const auto& r : roots)
            if (r.polished) s += r.multiplicity;
        return s;
    }
};

/// Locates every zero counted in the probe rectangle: recursive subdivision
/// until one zero per piece, then complex Newton on det. Roots that Newton
/// cannot settle are returned with polished = false.
inline PolishResult polish_zeros(const BlochFamily& fam, double lambda, const ComplexLineProbe& probe) {
    PolishResult res;
    res.count = complex_zero_count(fam, lambda, probe);
    fermi_detail::polish_rect(fam, lambda, res.count.used, res.count.zero_count, 0, res.roots);
    std::sort(res.roots.begin(), res.roots.end(), [](const PolishedRoot& a, const PolishedRoot& b) {
        return a.z.real() != b.z.real() ? a.z.real() < b.z.real() : a.z.imag() < b.z.imag();
    });
    return res;
}

inline PolishResult polish_zeros(const FourierPotential& q, const PlaneWaveBasis& basis, double lambda,
                                 const ComplexLineProbe& probe) {
    return polish_zeros(BlochFamily(basis, q), lambda, probe);
}

// ---- separable cross-check -------------------------------------------------------

struct SeparableCheck {
    double max_residual = 0;
    std::vector<double> residuals;  // per vertex; +inf when no mu branch was found
    int missing_branches = 0;
};

/// For q = q1(x1) + q2(x2) the Fermi curve is {(k1, k2) : D1(mu) = 2cos k1,
/// D2(lambda - mu) = 2cos k2 for some mu}. Each traced vertex is tested against
/// this independent Hill parametrization.
inline SeparableCheck separable_cross_check(const FourierPotential& q1, const FourierPotential& q2, double lambda,
                                            const FermiTrace& trace, double tol = 1e-12) {
    require(q1.dim() == 1 && q2.dim() == 1, "separable_cross_check needs two 1D factors");
    require(trace.dim == 2, "separable_cross_check needs a 2D trace");
    const HillSolver h1(q1), h2(q2);
    const double mu_lo = h1.lower_bound();
    const double mu_hi = lambda - h2.lower_bound();
    SeparableCheck out;
    out.residuals.assign(trace.vertices.size(), std::numeric_limits<double>::infinity());
    if (mu_hi <= mu_lo) {
        out.missing_branches = static_cast<int>(trace.vertices.size());
        out.max_residual = trace.vertices.empty() ? 0 : std::numeric_limits<double>::infinity();
        return out;
    }
    // Shared table of D1 for bracketing.
    std::vector<double> mus, d1;
    const int n_table = std::max(200, static_cast<int>((mu_hi - mu_lo) / 0.01));
    mus.resize(n_table + 1);
    d1.resize(n_table + 1);
    parallel_for(mus.size(), [&](std::size_t i) {
        mus[i] = mu_lo + (mu_hi - mu_lo) * static_cast<double>(i) / n_table;
        d1[i] = h1.discriminant(cplx(mus[i]), tol).real();
    });
    parallel_for(trace.vertices.size(), [&](std::size_t v) {
        const double c1 = 2 * std::cos(trace.vertices[v][0]);
        const double c2 = 2 * std::cos(trace.vertices[v][1]);
        auto f = [&](double mu) { return h1.discriminant(cplx(mu), tol).real() - c1; };
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < mus.size(); ++i) {
            const double fa = d1[i] - c1, fb = d1[i + 1] - c1;
            if ((fa < 0) == (fb < 0) && fa != 0) continue;
            const double mu = hill_detail::bracket_root(f, mus[i], mus[i + 1], fa, fb, 1e-14);
            const double r = std::abs(h2.discriminant(cplx(lambda - mu), tol).real() - c2);
            best = std::min(best, r);
        }
        out.residuals[v] = best;
    });
    for (double r : out.residuals) {
        if (!std::isfinite(r)) ++out.missing_branches;
        out.max_residual = std::max(out.max_residual, r);
    }
    return out;
}

}  // namespace floquet
