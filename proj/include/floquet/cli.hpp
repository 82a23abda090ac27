#pragma once

// Command-line orchestration: a fully serializable RunConfig, one run() entry
// point per subcommand, CSV/JSON emission and a manifest that replays the run.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "band_structure.hpp"
#include "common.hpp"
#include "fermi.hpp"
#include "floquet_transform.hpp"
#include "hill.hpp"
#include "perturbed.hpp"
#include "plane_wave.hpp"
#include "potential.hpp"

#ifndef FLOQUET_VERSION
#define FLOQUET_VERSION "0.0.0"
#endif

namespace floquet {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config_error = 2;
inline constexpr int exit_numerical_failure = 3;

struct RunConfig {
    std::string subcommand;  // bands | fermi | hill | scan | floquet-check
    std::string potential = "free";
    int dim = 0;     // 0: 1 for bands/hill, 2 for fermi with "free"/"const", else the preset's
    int cutoff = 0;  // 0: default for the dimension
    int grid = 0;    // 0: default for the dimension
    int nbands = 4;
    double refine_tol = 1e-8;

    // fermi
    double lambda = 1;
    std::vector<std::string> probes;  // "j,re0,re1,im0,im1"

    // hill
    double lambda_min = std::numeric_limits<double>::quiet_NaN();  // NaN: potential lower bound
    double lambda_max = 60;
    double table_step = 0.05;
    double tol = 1e-12;

    // scan
    std::string background = "mathieu:1";
    std::string impurity = "gaussian:-2,1";
    std::vector<double> window{8.9, 10.8};
    std::vector<double> ladder{20, 40, 80};
    double h = 0.02;
    int order = 6;
    bool dump_vectors = false;

    // floquet-check
    int cells = 12;
    int samples = 32;
    std::uint64_t seed = 1;

    std::string output_dir = ".";
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["subcommand"] = c.subcommand;
    j["potential"] = c.potential;
    j["dim"] = c.dim;
    j["cutoff"] = c.cutoff;
    j["grid"] = c.grid;
    j["nbands"] = c.nbands;
    j["refine_tol"] = c.refine_tol;
    j["lambda"] = c.lambda;
    j["probes"] = c.probes;
    j["lambda_min"] = std::isnan(c.lambda_min) ? nlohmann::json(nullptr) : nlohmann::json(c.lambda_min);
    j["lambda_max"] = c.lambda_max;
    j["table_step"] = c.table_step;
    j["tol"] = c.tol;
    j["background"] = c.background;
    j["impurity"] = c.impurity;
    j["window"] = c.window;
    j["ladder"] = c.ladder;
    j["h"] = c.h;
    j["order"] = c.order;
    j["dump_vectors"] = c.dump_vectors;
    j["cells"] = c.cells;
    j["samples"] = c.samples;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        const RunConfig d;
        auto get = [&](const char* key, auto fallback) {
            return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<decltype(fallback)>() : fallback;
        };
        c.subcommand = get("subcommand", d.subcommand);
        c.potential = get("potential", d.potential);
        c.dim = get("dim", d.dim);
        c.cutoff = get("cutoff", d.cutoff);
        c.grid = get("grid", d.grid);
        c.nbands = get("nbands", d.nbands);
        c.refine_tol = get("refine_tol", d.refine_tol);
        c.lambda = get("lambda", d.lambda);
        c.probes = get("probes", d.probes);
        c.lambda_min = get("lambda_min", d.lambda_min);
        c.lambda_max = get("lambda_max", d.lambda_max);
        c.table_step = get("table_step", d.table_step);
        c.tol = get("tol", d.tol);
        c.background = get("background", d.background);
        c.impurity = get("impurity", d.impurity);
        c.window = get("window", d.window);
        c.ladder = get("ladder", d.ladder);
        c.h = get("h", d.h);
        c.order = get("order", d.order);
        c.dump_vectors = get("dump_vectors", d.dump_vectors);
        c.cells = get("cells", d.cells);
        c.samples = get("samples", d.samples);
        c.seed = get("seed", d.seed);
        c.output_dir = get("output_dir", d.output_dir);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed run config: ") + e.what());
    }
    return c;
}

namespace cli_detail {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Emitter {
public:
    explicit Emitter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw InputError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw InputError("cannot write '" + (dir_ / name).string() + "'");
        out << content;
        files_.push_back(name);
    }
    void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

    const std::vector<std::string>& files() const { return files_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

inline int resolved_dim(const RunConfig& c, const std::string& spec) {
    if (c.dim != 0) return c.dim;
    const bool dim_free = spec == "free" || spec.rfind("const:", 0) == 0;
    if (dim_free) return c.subcommand == "fermi" ? 2 : 1;
    return parse_potential_spec(spec, 1).dim();
}

inline nlohmann::json intervals_json(const std::vector<Interval>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& i : v) a.push_back({i.lo, i.hi});
    return a;
}

inline ComplexLineProbe parse_probe(const std::string& text, int dim) {
    const auto nums = detail::parse_number_list(text, "probe '" + text + "'");
    require(nums.size() == 5, "probe must be j,re0,re1,im0,im1");
    ComplexLineProbe p;
    p.axis = static_cast<int>(nums[0]);
    require(p.axis >= 0 && p.axis < dim && p.axis == nums[0], "probe axis out of range");
    p.re0 = nums[1];
    p.re1 = nums[2];
    p.im0 = nums[3];
    p.im1 = nums[4];
    return p;
}

inline Impurity parse_impurity(const std::string& spec, const FourierPotential& background) {
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string tail = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (head == "none") return zero_impurity();
    if (head == "gaussian") {
        const auto nums = detail::parse_number_list(tail, "impurity '" + spec + "'");
        require(nums.size() == 2 || nums.size() == 3, "gaussian impurity is gaussian:A,w[,center]");
        return gaussian_impurity(nums[0], nums[1], nums.size() == 3 ? nums[2] : 0.0);
    }
    if (head == "wvn") {
        const auto nums = detail::parse_number_list(tail, "impurity '" + spec + "'");
        require(nums.size() == 1, "wvn impurity is wvn:lambda_star");
        return make_wvn(background, nums[0]).impurity;
    }
    if (head == "table") {
        std::ifstream in(tail);
        if (!in) throw InputError("cannot open impurity table '" + tail + "'");
        std::vector<double> xs, vs;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto nums = detail::parse_number_list(line, "impurity table row");
            require(nums.size() == 2, "impurity table rows are x,v");
            xs.push_back(nums[0]);
            vs.push_back(nums[1]);
        }
        return tabulated_impurity(std::move(xs), std::move(vs));
    }
    throw InputError("unknown impurity spec '" + spec + "' (expected none, gaussian:A,w[,c], wvn:lambda, table:<path>)");
}

// ---- subcommands ----------------------------------------------------------------------

inline nlohmann::json run_bands(const RunConfig& c, Emitter& out) {
    const int dim = resolved_dim(c, c.potential);
    const auto q = parse_potential_spec(c.potential, dim);
    require(q.dim() == dim, "potential dimension differs from --dim");
    require(c.nbands >= 1, "--nbands must be >= 1");
    const PlaneWaveBasis basis(dim, c.cutoff > 0 ? c.cutoff : default_cutoff(dim));
    const BrillouinGrid grid(dim, c.grid > 0 ? c.grid : default_grid_nodes(dim));
    auto bs = extract_bands(band_functions(q, basis, grid, c.nbands), c.refine_tol);

    std::ostringstream csv;
    const char* names[] = {"k1", "k2", "k3"};
    for (int a = 0; a < dim; ++a) csv << names[a] << ',';
    for (int j = 0; j < c.nbands; ++j) csv << "lambda_" << j + 1 << (j + 1 < c.nbands ? "," : "\n");
    for (std::size_t f = 0; f < grid.size(); ++f) {
        const RealVec k = grid.node(f);
        for (int a = 0; a < dim; ++a) csv << num(k[a]) << ',';
        for (int j = 0; j < c.nbands; ++j)
            csv << num(bs.values[f][static_cast<std::size_t>(j)]) << (j + 1 < c.nbands ? "," : "\n");
    }
    out.write("bands.csv", csv.str());

    nlohmann::json s;
    s["dim"] = dim;
    s["basis_size"] = basis.size();
    s["grid_nodes_per_axis"] = grid.nodes_per_axis();
    s["bands"] = intervals_json(bs.bands);
    s["gaps"] = intervals_json(bs.gaps);
    s["continuity_violations"] = continuity_violations(bs);
    nlohmann::json ext = nlohmann::json::array();
    for (int j = 0; j < c.nbands; ++j) {
        const auto& mn = bs.minima[static_cast<std::size_t>(j)];
        const auto& mx = bs.maxima[static_cast<std::size_t>(j)];
        ext.push_back({{"band", j + 1},
                       {"min", mn.value},
                       {"argmin", std::vector<double>(mn.k.begin(), mn.k.begin() + dim)},
                       {"max", mx.value},
                       {"argmax", std::vector<double>(mx.k.begin(), mx.k.begin() + dim)}});
    }
    s["extrema"] = ext;
    out.write_json("bands_summary.json", s);
    return s;
}

inline nlohmann::json run_fermi(const RunConfig& c, Emitter& out) {
    const int dim = resolved_dim(c, c.potential);
    const auto q = parse_potential_spec(c.potential, dim);
    require(q.dim() == dim, "potential dimension differs from --dim");
    const auto family = std::make_shared<const BlochFamily>(PlaneWaveBasis(dim, c.cutoff > 0 ? c.cutoff : default_cutoff(dim)), q);
    const BrillouinGrid grid(dim, c.grid > 0 ? c.grid : default_grid_nodes(dim));
    std::vector<ComplexLineProbe> probes;
    for (const auto& p : c.probes) probes.push_back(parse_probe(p, dim));

    const auto trace = trace_real(family, c.lambda, grid);
    const auto rep = component_report(trace);

    std::ostringstream csv;
    if (dim == 1) {
        csv << "k1,component_id,residual\n";
        for (std::size_t i = 0; i < trace.points.size(); ++i)
            csv << num(trace.points[i]) << ',' << trace.component_ids[i] << ',' << num(trace.vertex_residuals[i]) << '\n';
    } else {
        std::vector<int> vcomp(trace.vertices.size(), -1);
        for (std::size_t s = 0; s < trace.segments.size(); ++s)
            for (int e : trace.segments[s]) vcomp[static_cast<std::size_t>(e)] = trace.component_ids[s];
        csv << (dim == 2 ? "k1,k2,component_id,residual\n" : "k1,k2,k3,component_id,residual\n");
        for (std::size_t i = 0; i < trace.vertices.size(); ++i) {
            for (int a = 0; a < dim; ++a) csv << num(trace.vertices[i][a]) << ',';
            csv << vcomp[i] << ',' << num(trace.vertex_residuals[i]) << '\n';
        }
        std::ostringstream seg;
        seg << "v0,v1,slice,component_id\n";
        for (std::size_t s = 0; s < trace.segments.size(); ++s)
            seg << trace.segments[s][0] << ',' << trace.segments[s][1] << ',' << trace.segment_slice[s] << ','
                << trace.component_ids[s] << '\n';
        out.write("fermi_segments.csv", seg.str());
    }
    out.write("fermi_trace.csv", csv.str());

    nlohmann::json r;
    r["lambda"] = c.lambda;
    r["dim"] = dim;
    r["empty"] = trace.empty();
    r["n_vertices"] = dim == 1 ? trace.points.size() : trace.vertices.size();
    r["n_segments"] = trace.segments.size();
    r["n_components"] = rep.n_components;
    r["saddle_cells"] = trace.saddle_cells;
    r["unconverged_vertices"] = trace.unconverged_vertices;
    r["max_vertex_residual"] = trace.max_residual();
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& ci : rep.components)
        comps.push_back({{"id", ci.id},
                         {"segments", ci.segments},
                         {"length", ci.length},
                         {"lo", std::vector<double>(ci.lo.begin(), ci.lo.begin() + dim)},
                         {"hi", std::vector<double>(ci.hi.begin(), ci.hi.begin() + dim)}});
    r["components"] = comps;
    nlohmann::json pj = nlohmann::json::array();
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto pr = polish_zeros(*family, c.lambda, probes[i]);
        nlohmann::json roots = nlohmann::json::array();
        for (const auto& z : pr.roots)
            roots.push_back({{"re", z.z.real()},
                             {"im", z.z.imag()},
                             {"newton_residual", z.residual},
                             {"multiplicity", z.multiplicity},
                             {"polished", z.polished}});
        pj.push_back({{"probe", c.probes[i]},
                      {"zero_count", pr.count.zero_count},
                      {"retries", pr.count.retries},
                      {"boundary_samples", pr.count.boundary_samples},
                      {"rectangle", {pr.count.used.re0, pr.count.used.re1, pr.count.used.im0, pr.count.used.im1}},
                      {"roots", roots}});
    }
    r["probes"] = pj;
    out.write_json("fermi_report.json", r);
    return r;
}

inline nlohmann::json run_hill(const RunConfig& c, Emitter& out) {
    const auto q = parse_potential_spec(c.potential, 1);
    require(q.dim() == 1, "hill needs a 1D potential");
    require(c.table_step > 0, "--step must be positive");
    const HillSolver solver(q);
    const double lo = std::isnan(c.lambda_min) ? solver.lower_bound() : c.lambda_min;
    require(c.lambda_max > lo, "--lambda-max must exceed the table start");
    const auto n = static_cast<std::size_t>(std::floor((c.lambda_max - lo) / c.table_step)) + 1;
    require(n <= 10'000'000, "discriminant table too long");
    std::vector<double> d(n);
    parallel_for(n, [&](std::size_t i) {
        d[i] = solver.discriminant(cplx(lo + c.table_step * static_cast<double>(i)), c.tol).real();
    });
    std::ostringstream tab;
    tab << "lambda,D\n";
    for (std::size_t i = 0; i < n; ++i) tab << num(lo + c.table_step * static_cast<double>(i)) << ',' << num(d[i]) << '\n';
    out.write("hill_discriminant.csv", tab.str());

    const auto bands = bands_1d(q, c.lambda_max, c.tol);
    std::ostringstream bcsv;
    bcsv << "band,lo,hi\n";
    for (std::size_t j = 0; j < bands.size(); ++j) bcsv << j + 1 << ',' << num(bands[j].lo) << ',' << num(bands[j].hi) << '\n';
    out.write("hill_bands.csv", bcsv.str());
    nlohmann::json r;
    r["bands"] = intervals_json(bands);
    r["gaps"] = intervals_json(gaps_between(bands));
    r["lambda_max"] = c.lambda_max;
    r["even_potential"] = solver.even();
    out.write_json("hill_summary.json", r);
    return r;
}

inline nlohmann::json decay_json(const DecayFit& d) {
    return {{"c", d.c},
            {"p", d.p},
            {"p_stderr", std::isfinite(d.p_stderr) ? nlohmann::json(d.p_stderr) : nlohmann::json(nullptr)},
            {"fit_rms", d.fit_rms},
            {"trusted_cells", d.trusted_cells},
            {"boundary_ratio", d.boundary_ratio},
            {"reliable", d.reliable},
            {"note", d.note}};
}

inline nlohmann::json run_scan(const RunConfig& c, Emitter& out, bool& failure) {
    require(c.window.size() == 2 && c.window[0] < c.window[1], "--window must be a,b with a < b");
    const int dim = resolved_dim(c, c.background);
    BoxProblem p;
    p.dim = dim;
    p.background = parse_potential_spec(c.background, dim);
    p.impurity = parse_impurity(c.impurity, p.background);
    p.h = c.h;
    p.order = c.order;
    StabilityOptions so;
    so.eig.keep_vectors = c.dump_vectors;
    const auto rep = stability_scan(p, c.ladder, c.window[0], c.window[1], so);

    nlohmann::json r;
    r["window"] = {rep.window_lo, rep.window_hi};
    r["ladder"] = rep.ladder;
    r["partial"] = rep.partial;
    r["impurity"] = {{"kind", p.impurity.describe()},
                     {"violates_decay_hypothesis", p.impurity.violates_decay_hypothesis()},
                     {"decay_r", std::isfinite(p.impurity.decay_r) ? nlohmann::json(p.impurity.decay_r) : nlohmann::json("inf")},
                     {"algebraic_rate", p.impurity.algebraic_rate}};
    nlohmann::json cs = nlohmann::json::array();
    int n_eig = 0;
    for (const auto& cand : rep.candidates) {
        nlohmann::json ladder_vals = nlohmann::json::array();
        for (double v : cand.ladder_values) ladder_vals.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
        if (cand.classification == Classification::eigenvalue) ++n_eig;
        cs.push_back({{"lambda", cand.lambda},
                      {"residual", cand.residual},
                      {"l_stability", std::isfinite(cand.l_stability) ? nlohmann::json(cand.l_stability) : nlohmann::json(nullptr)},
                      {"ladder_values", ladder_vals},
                      {"decay_fit", decay_json(cand.decay)},
                      {"classification", to_string(cand.classification)},
                      {"region", cand.region},
                      {"near_band_edge", cand.near_band_edge},
                      {"converged", cand.converged}});
    }
    r["candidates"] = cs;
    r["n_candidates"] = rep.candidates.size();
    r["n_eigenvalue"] = n_eig;
    out.write_json("eig_report.json", r);
    if (c.dump_vectors && dim == 1) {
        std::ostringstream v;
        v << "x";
        for (std::size_t i = 0; i < rep.candidates.size(); ++i) v << ",u_" << i;
        v << '\n';
        for (std::size_t k = 0; k < rep.axis.size(); ++k) {
            v << num(rep.axis[k]);
            for (const auto& cand : rep.candidates) v << ',' << num(cand.vector[k]);
            v << '\n';
        }
        out.write("eigenvectors.csv", v.str());
    }
    failure = rep.partial;
    return r;
}

struct CheckRow {
    std::string name;
    double measured;
    double threshold;
    bool pass;
};

/// The transform invariant suite on synthetic inputs.
inline std::vector<CheckRow> floquet_checks(int cells, int samples, std::uint64_t seed) {
    require(cells >= 3 && samples >= 4, "floquet-check needs cells >= 3 and samples >= 4");
    std::vector<CheckRow> rows;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };

    for (int dim : {1, 2}) {
        const int cl = dim == 1 ? cells : std::min(cells, 4);
        const int sp = dim == 1 ? std::min(samples, 16) : 4;
        CellArray f(dim, cl, sp);
        for (auto& v : f.values()) v = cplx(nd(rng), nd(rng));
        const auto F = forward(f);
        double sk = 0;
        for (const auto& v : F.values) sk += std::pow(cell_function_norm(v), 2);
        const double planch = rel(sk / static_cast<double>(F.values.size()), f.norm_squared());
        rows.push_back({"plancherel_" + std::to_string(dim) + "d", planch, 1e-12, planch < 1e-12});

        const auto g = inverse(F);
        double rt = 0, mx = 0;
        for (std::size_t i = 0; i < f.values().size(); ++i) {
            rt = std::max(rt, std::abs(g.values()[i] - f.values()[i]));
            mx = std::max(mx, std::abs(f.values()[i]));
        }
        rows.push_back({"round_trip_" + std::to_string(dim) + "d", rt / mx, 1e-12, rt / mx < 1e-12});

        // Quasi-periodicity and shift covariance at random real k.
        RealVec k{0, 0, 0};
        for (int a = 0; a < dim; ++a) k[a] = two_pi * std::uniform_real_distribution<double>(0, 1)(rng);
        const auto fk = forward(f, k);
        double qp = 0, scale = 0;
        for (int j = 0; j < dim; ++j) {
            RealVec k2 = k;
            k2[j] += two_pi;
            const auto fk2 = forward(f, k2);
            for (std::size_t i = 0; i < fk.size(); ++i) {
                const cplx expect = std::polar(1.0, -two_pi * f.offset(i)[j]) * fk[i];
                qp = std::max(qp, std::abs(fk2[i] - expect));
                scale = std::max(scale, std::abs(fk[i]));
            }
        }
        rows.push_back({"quasi_periodicity_" + std::to_string(dim) + "d", qp / scale, 1e-12, qp / scale < 1e-12});

        // Shift covariance on a function supported away from the range edge.
        CellArray inner(dim, cl, sp);
        for (std::size_t cidx = 0; cidx < inner.n_cells(); ++cidx) {
            const LatticeVec l = inner.cell(cidx);
            bool ok = true;
            for (int a = 0; a < dim; ++a) ok = ok && std::abs(l[a]) <= cl - 2;
            if (ok)
                for (std::size_t j = 0; j < inner.n_intra(); ++j) inner.at(cidx, j) = cplx(nd(rng), nd(rng));
        }
        LatticeVec l0{0, 0, 0};
        l0[0] = 1;
        if (dim > 1) l0[1] = -2;
        const auto base = forward(inner, k);
        const auto sh = forward(inner.shifted(l0), k);
        double phase = 0;
        for (int a = 0; a < dim; ++a) phase += k[a] * l0[a];
        double sc = 0, sm = 0;
        for (std::size_t i = 0; i < base.size(); ++i) {
            sc = std::max(sc, std::abs(sh[i] - std::polar(1.0, -phase) * base[i]));
            sm = std::max(sm, std::abs(base[i]));
        }
        rows.push_back({"shift_covariance_" + std::to_string(dim) + "d", sc / sm, 1e-12, sc / sm < 1e-12});
    }

    // Block diagonalization on a band-limited wave packet.
    {
        CellArray f(1, cells, samples);
        f.fill([](const RealVec& x) { return cplx(std::exp(-0.3 * x[0] * x[0]) * std::cos(3 * x[0]), 0); });
        for (const auto& [name, q] : {std::pair<std::string, FourierPotential>{"free", FourierPotential(1)},
                                      {"mathieu", mathieu(1)}}) {
            const auto d = diagonalization_residual(f, q, dual_grid(1, cells));
            rows.push_back({"diagonalization_" + name, d.max_residual, 1e-6, d.max_residual < 1e-6 && d.guard_band_ok});
        }
    }
    // Growth order: r = 2 cell decay and single-cell support.
    {
        CellArray f(1, cells, samples);
        f.fill([](const RealVec& x) { return cplx(std::exp(-x[0] * x[0]), 0); });
        std::vector<double> taus;
        for (double t = 0.5; t <= 6.0 + 1e-9; t += 0.25) taus.push_back(t);
        const auto g = growth_order_probe(f, {1, 0, 0}, taus);
        rows.push_back({"growth_order_r2", g.s_hat, 2.0, std::abs(g.s_hat - 2.0) <= 0.2});
        rows.push_back({"growth_coefficient_r2", g.b, 0.25, std::abs(g.b - 0.25) <= 0.05});
    }
    {
        CellArray f(1, 2, samples);
        f.fill([](const RealVec& x) { return cplx(x[0] >= 0 && x[0] < 1 ? 1.0 : 0.0, 0); });
        std::vector<double> taus;
        for (double t = 1; t <= 60 + 1e-9; t += 1) taus.push_back(t);
        const auto g = growth_order_probe(f, {1, 0, 0}, taus);
        rows.push_back({"growth_order_single_cell", g.s_hat, 1.0, std::abs(g.s_hat - 1.0) <= 0.1});
    }
    return rows;
}

inline nlohmann::json run_floquet_check(const RunConfig& c, Emitter& out, bool& failure) {
    const auto rows = floquet_checks(c.cells, c.samples, c.seed);
    std::ostringstream csv;
    csv << "check,measured,threshold,pass\n";
    nlohmann::json r = nlohmann::json::array();
    failure = false;
    for (const auto& row : rows) {
        csv << row.name << ',' << num(row.measured) << ',' << num(row.threshold) << ',' << (row.pass ? "pass" : "fail") << '\n';
        r.push_back({{"check", row.name}, {"measured", row.measured}, {"threshold", row.threshold}, {"pass", row.pass}});
        failure = failure || !row.pass;
    }
    out.write("floquet_check.csv", csv.str());
    return r;
}

}  // namespace cli_detail

/// Executes one configured run. Writes outputs and manifest.json into
/// config.output_dir; the manifest's "config" block replays the run.
/// Returns 0, 2 (configuration error) or 3 (numerical failure).
inline int run(const RunConfig& config, std::ostream& log = std::cerr) {
    try {
        cli_detail::Emitter out(config.output_dir);
        nlohmann::json result;
        bool failure = false;
        if (config.subcommand == "bands")
            result = cli_detail::run_bands(config, out);
        else if (config.subcommand == "fermi")
            result = cli_detail::run_fermi(config, out);
        else if (config.subcommand == "hill")
            result = cli_detail::run_hill(config, out);
        else if (config.subcommand == "scan")
            result = cli_detail::run_scan(config, out, failure);
        else if (config.subcommand == "floquet-check")
            result = cli_detail::run_floquet_check(config, out, failure);
        else
            throw InputError("unknown subcommand '" + config.subcommand + "'");

        nlohmann::json manifest;
        manifest["tool"] = "floquet_lab";
        manifest["version"] = FLOQUET_VERSION;
        manifest["config"] = to_json(config);
        manifest["outputs"] = out.files();
        manifest["status"] = failure ? "numerical_failure" : "ok";
        out.write_json("manifest.json", manifest);
        if (failure) {
            log << "floquet_lab: numerical failure reported, see outputs in " << out.dir().string() << '\n';
            return exit_numerical_failure;
        }
        return exit_ok;
    } catch (const InputError& e) {
        log << "floquet_lab: configuration error: " << e.what() << '\n';
        return exit_config_error;
    } catch (const NumericalFailure& e) {
        log << "floquet_lab: numerical failure: " << e.what() << '\n';
        return exit_numerical_failure;
    }
}

}  // namespace floquet
