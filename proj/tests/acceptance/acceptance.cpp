// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "floquet/cli.hpp"

using namespace floquet;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---- 1 -----------------------------------------------------------------------

Outcome free_exactness() {
    double worst = 0;
    for (int dim : {1, 2})
        for (double c : {0.0, 1.7}) {
            const int M = 4;
            const BlochFamily fam(PlaneWaveBasis(dim, M), constant_potential(dim, c));
            const BrillouinGrid grid(dim, dim == 1 ? 101 : 21);
            const int side = 2 * M + 1;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const RealVec k = grid.node(i);
                std::vector<double> ref;
                for (int f = 0; f < (dim == 1 ? side : side * side); ++f) {
                    double s = c;
                    int rem = f;
                    for (int a = 0; a < dim; ++a) {
                        s += std::pow(k[a] + two_pi * (rem % side - M), 2);
                        rem /= side;
                    }
                    ref.push_back(s);
                }
                std::sort(ref.begin(), ref.end());
                const auto ev = fam.spectrum(k);
                for (std::size_t j = 0; j < ref.size(); ++j)
                    worst = std::max(worst, std::abs(ev(static_cast<Eigen::Index>(j)) - ref[j]));
            }
        }
    return {worst < 1e-10, fmt("max |band - (k+2 pi m)^2 - c| = %.2e over 1D/2D, M = 4", worst)};
}

// ---- 2 -----------------------------------------------------------------------

Outcome dual_method_edges() {
    const auto q = mathieu(1.0);
    const auto bs = extract_bands(band_functions(q, PlaneWaveBasis(1, 8), BrillouinGrid(1, 201), 4), 1e-10);
    const auto hill = bands_1d(q, 160.0);
    double worst = 0;
    for (int j = 0; j < 4; ++j)
        worst = std::max({worst, std::abs(bs.bands[j].lo - hill[j].lo), std::abs(bs.bands[j].hi - hill[j].hi)});
    return {worst < 1e-6, fmt("max edge difference plane-wave vs Hill, bands 1-4: %.2e", worst)};
}

// ---- 3 -----------------------------------------------------------------------

Outcome spectrum_iff_fermi() {
    std::mt19937_64 rng(314159);
    std::uniform_real_distribution<double> u(0, 1);
    int mis = 0, in_band = 0, in_gap = 0;
    std::string where;

    const auto q1 = mathieu(1.0);
    const auto hill = bands_1d(q1, 100.0);
    const auto fam1 = std::make_shared<const BlochFamily>(PlaneWaveBasis(1, 8), q1);
    const BrillouinGrid g1(1, 201);
    std::vector<Interval> gaps1{{hill[0].lo - 3.0, hill[0].lo}};
    for (int j = 0; j < 3; ++j) gaps1.push_back({hill[j].hi, hill[j + 1].lo});
    for (int s = 0; s < 10; ++s) {
        const auto& b = hill[static_cast<std::size_t>(s % 3)];
        const double lb = b.lo + (0.05 + 0.9 * u(rng)) * b.width();
        if (trace_real(fam1, lb, g1).empty()) ++mis, where += fmt(" 1D band %.6g", lb);
        ++in_band;
        const auto& g = gaps1[static_cast<std::size_t>(s % 4)];
        const double lg = g.lo + (0.05 + 0.9 * u(rng)) * g.width();
        if (!trace_real(fam1, lg, g1).empty()) ++mis, where += fmt(" 1D gap %.10g", lg);
        ++in_gap;
    }

    // Mathieu + Mathieu: bands overlap above the bottom, the only gap is below it.
    const auto fam2 = std::make_shared<const BlochFamily>(PlaneWaveBasis(2, 6), tensor_sum({{q1, q1}}));
    const BrillouinGrid g2(2, 61);
    const double bottom = 2 * hill[0].lo;
    for (int s = 0; s < 10; ++s) {
        const double lb = 0.3 + 39.7 * u(rng);
        if (trace_real(fam2, lb, g2).empty()) ++mis, where += fmt(" 2D band %.6g", lb);
        ++in_band;
        const double lg = bottom - 0.01 - 3.0 * u(rng);
        if (!trace_real(fam2, lg, g2).empty()) ++mis, where += fmt(" 2D gap %.6g", lg);
        ++in_gap;
    }
    return {mis == 0, fmt("%d in-band + %d in-gap samples (1D, 2D), misclassified: %d", in_band, in_gap, mis) + where};
}

// ---- 4 -----------------------------------------------------------------------

Outcome separable_cross_validation() {
    const auto q1 = mathieu(1.0);
    const auto q = tensor_sum({{q1, q1}});
    const auto fam = std::make_shared<const BlochFamily>(PlaneWaveBasis(2, 6), q);
    double worst = 0;
    std::size_t vertices = 0;
    int missing = 0;
    for (double lam : {5.0, 20.0}) {
        const auto t = trace_real(fam, lam, BrillouinGrid(2, 121));
        const auto chk = separable_cross_check(q1, q1, lam, t);
        worst = std::max(worst, chk.max_residual);
        vertices += t.vertices.size();
        missing += chk.missing_branches;
    }
    return {worst < 1e-5 && missing == 0 && vertices > 0,
            fmt("%zu vertices at lambda = 5, 20 on 121^2, max Hill residual %.2e, missing branches %d", vertices, worst,
                missing)};
}

// ---- 5 -----------------------------------------------------------------------

Outcome argument_principle() {
    std::mt19937_64 rng(271828);
    std::uniform_real_distribution<double> u(0, 1);
    int probes = 0, agree = 0, free_exact = 0;
    const FourierPotential zero(1);
    const auto q = mathieu(1.0);
    const BlochFamily free_fam(PlaneWaveBasis(1, 8), zero), mat_fam(PlaneWaveBasis(1, 8), q);
    for (int which = 0; which < 2; ++which) {
        const BlochFamily& fam = which == 0 ? free_fam : mat_fam;
        for (int s = 0; s < 50; ++s) {
            const double lam = -4 + 34 * u(rng);
            ComplexLineProbe p;
            p.re0 = -6 + 12 * u(rng);
            p.re1 = p.re0 + 0.3 + 3.7 * u(rng);
            p.im0 = -2 + 3.5 * u(rng);
            p.im1 = p.im0 + 0.2 + 1.8 * u(rng);
            const auto r = polish_zeros(fam, lam, p);
            ++probes;
            if (r.polished_count() == r.count.zero_count && r.total_multiplicity() == r.count.zero_count) ++agree;
            if (which == 0) {
                // Free zeros: z = +-sqrt(lambda) - 2 pi m inside the rectangle actually used.
                const auto& used = r.count.used;
                const cplx root = std::sqrt(cplx(lam));
                int n = 0;
                for (int m = -8; m <= 8; ++m)
                    for (cplx z : {root - two_pi * m, -root - two_pi * m})
                        n += z.real() > used.re0 && z.real() < used.re1 && z.imag() > used.im0 && z.imag() < used.im1;
                free_exact += n == r.count.zero_count;
            }
        }
    }
    // Gap probes: bottom gap and gaps 1-3.
    const auto hill = bands_1d(q, 100.0);
    double gap_err = 0;
    int gap_ok = 0;
    std::vector<double> lambdas{hill[0].lo - 1.0};
    for (int j = 0; j < 3; ++j) lambdas.push_back(0.5 * (hill[j].hi + hill[j + 1].lo));
    for (std::size_t g = 0; g < lambdas.size(); ++g) {
        const double centre = g % 2 == 1 ? pi : 0.0;
        ComplexLineProbe p{RealVec{0, 0, 0}, 0, centre - 0.5, centre + 0.5, 1e-6, 1.5};
        const auto r = polish_zeros(mat_fam, lambdas[g], p);
        const cplx k = floquet_exponent(q, lambdas[g]);
        if (r.count.zero_count == 1 && r.polished_count() == 1) {
            const double e = std::hypot(wrap_pi(r.roots[0].z.real() - k.real()), r.roots[0].z.imag() - k.imag());
            gap_err = std::max(gap_err, e);
            gap_ok += e < 1e-6;
        } else {
            gap_err = std::numeric_limits<double>::infinity();
        }
    }
    const bool pass = agree == probes && probes >= 100 && gap_ok == static_cast<int>(lambdas.size()) &&
                      free_exact == 50;
    return {pass, fmt("winding == polished on %d/%d rectangles (free analytic count %d/50); %d gap roots, max "
                      "|k - floquet_exponent| %.2e",
                      agree, probes, free_exact, static_cast<int>(lambdas.size()), gap_err)};
}

// ---- 6 -----------------------------------------------------------------------

Outcome transform_suite() {
    const auto rows = cli_detail::floquet_checks(12, 32, 1);
    bool pass = true;
    double inv = 0, diag = 0;
    for (const auto& r : rows) {
        if (r.name.rfind("growth", 0) == 0) continue;
        pass = pass && r.pass;
        if (r.name.rfind("diagonalization", 0) == 0)
            diag = std::max(diag, r.measured);
        else
            inv = std::max(inv, r.measured);
    }
    return {pass, fmt("Plancherel / round trip / quasi-periodicity / shift covariance max %.2e; diagonalization "
                      "max %.2e (free, Mathieu, 32 samples/cell)",
                      inv, diag)};
}

// ---- 7 -----------------------------------------------------------------------

Outcome growth_order() {
    CellArray f(1, 12, 32);
    f.fill([](const RealVec& x) { return cplx(std::exp(-x[0] * x[0]), 0); });
    std::vector<double> taus;
    for (double t = 0.5; t <= 6.0 + 1e-9; t += 0.25) taus.push_back(t);
    const double s2 = growth_order_probe(f, {1, 0, 0}, taus).s_hat;

    CellArray g(1, 2, 32);
    g.fill([](const RealVec& x) { return cplx(x[0] >= 0 && x[0] < 1 ? 1.0 : 0.0, 0); });
    std::vector<double> taus1;
    for (double t = 1; t <= 60 + 1e-9; t += 1) taus1.push_back(t);
    const double s1 = growth_order_probe(g, {1, 0, 0}, taus1).s_hat;
    return {std::abs(s2 - 2.0) <= 0.2 && std::abs(s1 - 1.0) <= 0.1,
            fmt("s_hat = %.4f for r = 2 (target 2 +- 0.2), %.4f for single cell (target 1 +- 0.1)", s2, s1)};
}

// ---- 8 -----------------------------------------------------------------------

Outcome embedded_dichotomy() {
    std::string detail;
    bool pass = true;
    // (a) Gaussian impurities on Mathieu backgrounds.
    for (auto [a, amp] : {std::pair{1.0, -2.0}, std::pair{3.0, -3.0}}) {
        BoxProblem p;
        p.background = mathieu(a);
        p.impurity = gaussian_impurity(amp, 1.0);
        const auto bands = bands_1d(p.background, 30.0);
        const auto rep = stability_scan(p, {20, 40, 80}, -8.0, 25.0);
        int interior = 0, gap_ok = 0, eig = 0;
        double p_fit = std::numeric_limits<double>::quiet_NaN();
        for (const auto& c : rep.candidates) {
            if (c.classification != Classification::eigenvalue) continue;
            ++eig;
            bool inside = false;
            for (const auto& b : bands) inside = inside || (c.lambda > b.lo && c.lambda < b.hi);
            if (inside) ++interior;
            else if (std::abs(c.decay.p - 1.0) <= 0.1) ++gap_ok, p_fit = c.decay.p;
        }
        pass = pass && interior == 0 && gap_ok >= 1;
        detail += fmt("(a) mathieu:%g+gaussian(%g,1): %zu candidates, %d eigenvalue, %d in band interiors, %d in gaps "
                      "with p in [0.9,1.1] (p = %.3f); ",
                      a, amp, rep.candidates.size(), eig, interior, gap_ok, p_fit);
    }
    // (b) von Neumann-Wigner potentials.
    for (auto [q, lam] : {std::pair{FourierPotential(1), 1.0}, std::pair{mathieu(1.0), 4.0}}) {
        const auto w = make_wvn(q, lam);
        BoxProblem p;
        p.background = q;
        p.impurity = w.impurity;
        const auto rep = stability_scan(p, {20, 40, 80}, lam - 0.1, lam + 0.1);
        int hits = 0, good = 0;
        for (const auto& c : rep.candidates)
            if (c.classification == Classification::eigenvalue) {
                ++hits;
                good += std::abs(c.lambda - lam) <= 1e-3 && c.residual < 1e-6;
            }
        pass = pass && hits == 1 && good == 1;
        detail += fmt("(b) WvN lambda* = %g on %s: %d eigenvalue-classified, %d at lambda* +- 1e-3; ", lam,
                      q.coeffs().empty() ? "free" : "mathieu:1", hits, good);
    }
    detail.resize(detail.size() - 2);
    return {pass, detail};
}

// ---- 9 -----------------------------------------------------------------------

Outcome shift_relation() {
    std::mt19937_64 rng(161803);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0;
    int mismatched = 0, nonempty = 0;
    for (int s = 0; s < 10; ++s) {
        const int dim = s < 5 ? 1 : 2;
        FourierPotential::CoeffMap m;
        for (int a = -2; a <= 2; ++a)
            for (int b = (dim == 2 ? -2 : 0); b <= (dim == 2 ? 2 : 0); ++b) {
                const LatticeVec v{a, b, 0}, w{-a, -b, 0};
                if (m.count(w) || (a == 0 && b == 0)) continue;
                const cplx c(0.5 * nd(rng), 0.5 * nd(rng));
                m[v] = c;
                m[w] = std::conj(c);
            }
        m[LatticeVec{0, 0, 0}] = nd(rng);
        const FourierPotential q(dim, m);
        const double lam = 1 + 29 * u(rng);
        const PlaneWaveBasis basis(dim, dim == 1 ? 8 : 4);
        const BrillouinGrid grid(dim, dim == 1 ? 201 : 41);
        const auto a = trace_real(q, basis, lam, grid);
        const auto b = trace_real(q.shifted(-lam), basis, 0.0, grid);
        nonempty += !a.empty();
        if (a.points.size() != b.points.size() || a.vertices.size() != b.vertices.size() || a.segments != b.segments) {
            ++mismatched;
            continue;
        }
        for (std::size_t i = 0; i < a.points.size(); ++i) worst = std::max(worst, std::abs(a.points[i] - b.points[i]));
        for (std::size_t i = 0; i < a.vertices.size(); ++i)
            for (int d = 0; d < dim; ++d) worst = std::max(worst, std::abs(a.vertices[i][d] - b.vertices[i][d]));
    }
    return {mismatched == 0 && worst < 1e-8 && nonempty >= 5,
            fmt("10 random potentials (5 1D, 5 2D, %d nonempty): structural mismatches %d, max vertex difference %.2e",
                nonempty, mismatched, worst)};
}

}  // namespace

int main() {
    const std::vector<std::tuple<int, const char*, double, std::function<Outcome()>>> criteria{
        {1, "free-operator exactness", 10, free_exactness},
        {2, "dual-method Mathieu band edges", 60, dual_method_edges},
        {3, "spectrum iff nonempty real Fermi variety", 0, spectrum_iff_fermi},
        {4, "separable cross-validation at 121^2", 300, separable_cross_validation},
        {5, "argument-principle soundness", 0, argument_principle},
        {6, "Floquet transform suite", 0, transform_suite},
        {7, "growth-order correspondence", 0, growth_order},
        {8, "embedded-eigenvalue dichotomy", 600, embedded_dichotomy},
        {9, "spectral shift relation", 0, shift_relation},
    };
    int failed = 0;
    for (const auto& [id, name, limit, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string timing = fmt("%.1f s", secs);
        if (limit > 0) {
            timing += fmt(" / limit %.0f s", limit);
            if (secs > limit) {
                o.pass = false;
                o.detail += "; runtime limit exceeded";
            }
        }
        failed += !o.pass;
        std::printf("%s criterion %d (%s): %s [%s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
                    timing.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
