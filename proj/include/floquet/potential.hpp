#pragma once

// Periodic potentials on the unit lattice Z^n, stored as sparse Fourier
// coefficients q(x) = sum_m qhat(m) exp(2 pi i m.x).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace floquet {

class FourierPotential {
public:
    using CoeffMap = std::map<LatticeVec, cplx>;

    FourierPotential() = default;

    /// Zero potential in the given dimension.
    explicit FourierPotential(int dim) : FourierPotential(dim, CoeffMap{}) {}

    /// Validates and symmetrizes. Coefficients whose conjugate mirror differs
    /// by more than symmetry_tol (relative to the largest coefficient) describe
    /// a complex-valued potential and are rejected.
    FourierPotential(int dim, CoeffMap coeffs, double symmetry_tol = 1e-12) : dim_(dim) {
        require(dim >= 1 && dim <= max_dim, "potential dim must be 1, 2 or 3");
        double scale = 1.0;
        for (const auto& [m, c] : coeffs) {
            for (int a = dim; a < max_dim; ++a)
                require(m[a] == 0, "lattice vector has components beyond dim");
            require(std::isfinite(c.real()) && std::isfinite(c.imag()), "non-finite coefficient");
            scale = std::max(scale, std::abs(c));
        }
        for (const auto& [m, c] : coeffs) {
            auto it = coeffs.find(mirror(m));
            const cplx partner = it == coeffs.end() ? cplx(0) : it->second;
            if (std::abs(c - std::conj(partner)) > symmetry_tol * scale)
                throw InputError("potential coefficients are not conjugate-symmetric "
                                 "(complex-valued potentials are not supported)");
        }
        for (const auto& [m, c] : coeffs) {
            auto it = coeffs.find(mirror(m));
            const cplx partner = it == coeffs.end() ? cplx(0) : it->second;
            const cplx sym = 0.5 * (c + std::conj(partner));
            if (sym != cplx(0)) coeffs_[m] = sym;
        }
        for (const auto& [m, c] : coeffs_)
            for (int a = 0; a < dim_; ++a) support_radius_ = std::max(support_radius_, std::abs(m[a]));
    }

    int dim() const { return dim_; }
    const CoeffMap& coeffs() const { return coeffs_; }
    int support_radius() const { return support_radius_; }

    cplx coeff(const LatticeVec& m) const {
        auto it = coeffs_.find(m);
        return it == coeffs_.end() ? cplx(0) : it->second;
    }

    double mean() const { return coeff(LatticeVec{0, 0, 0}).real(); }

    /// Sum of |qhat(m)| over m != 0.
    double oscillation_l1() const {
        double s = 0;
        for (const auto& [m, c] : coeffs_)
            if (m != LatticeVec{0, 0, 0}) s += std::abs(c);
        return s;
    }

    /// True when all coefficients are real, i.e. q(-x) = q(x).
    bool is_even(double tol = 1e-14) const {
        return std::all_of(coeffs_.begin(), coeffs_.end(),
                           [&](const auto& kv) { return std::abs(kv.second.imag()) <= tol; });
    }

    /// q(x) at a point of R^dim; the imaginary roundoff is discarded.
    double evaluate(const RealVec& x) const {
        double sum = 0;
        for (const auto& [m, c] : coeffs_) {
            double phase = 0;
            for (int a = 0; a < dim_; ++a) phase += m[a] * x[a];
            phase *= two_pi;
            sum += c.real() * std::cos(phase) - c.imag() * std::sin(phase);
        }
        return sum;
    }

    double evaluate(double x) const { return evaluate(RealVec{x, 0, 0}); }

    /// q + c (shifts qhat(0)).
    FourierPotential shifted(double c) const {
        CoeffMap m = coeffs_;
        m[LatticeVec{0, 0, 0}] += c;
        return FourierPotential(dim_, std::move(m));
    }

    friend bool operator==(const FourierPotential&, const FourierPotential&) = default;

private:
    static LatticeVec mirror(const LatticeVec& m) { return {-m[0], -m[1], -m[2]}; }

    int dim_ = 1;
    CoeffMap coeffs_;
    int support_radius_ = 0;
};

/// Sum of potentials acting on disjoint coordinate blocks, e.g. q1(x1) + q2(x2, x3).
struct SeparablePotential {
    std::vector<FourierPotential> parts;

    int dim() const {
        int d = 0;
        for (const auto& p : parts) d += p.dim();
        return d;
    }
};

/// q(x) = sum_i q_i(x_block_i) on the full lattice.
inline FourierPotential tensor_sum(const SeparablePotential& sep) {
    require(!sep.parts.empty(), "separable potential needs at least one part");
    const int dim = sep.dim();
    require(dim <= max_dim, "separable potential exceeds 3 dimensions");
    FourierPotential::CoeffMap out;
    cplx constant = 0;
    int offset = 0;
    for (const auto& part : sep.parts) {
        for (const auto& [m, c] : part.coeffs()) {
            if (m == LatticeVec{0, 0, 0}) {
                constant += c;
                continue;
            }
            LatticeVec full{0, 0, 0};
            for (int a = 0; a < part.dim(); ++a) full[offset + a] = m[a];
            out[full] += c;
        }
        offset += part.dim();
    }
    if (constant != cplx(0)) out[LatticeVec{0, 0, 0}] = constant;
    return FourierPotential(dim, std::move(out));
}

namespace detail {

// Recursively expands a DFT index tuple into lattice vectors, splitting the
// Nyquist index of even-length axes evenly between +n/2 and -n/2.
inline void scatter_coeff(int dim, int n, int axis, const std::array<int, max_dim>& idx, LatticeVec m,
                          cplx value, FourierPotential::CoeffMap& out) {
    if (axis == dim) {
        out[m] += value;
        return;
    }
    const int j = idx[axis];
    if (n % 2 == 0 && j == n / 2) {
        m[axis] = n / 2;
        scatter_coeff(dim, n, axis + 1, idx, m, 0.5 * value, out);
        m[axis] = -n / 2;
        scatter_coeff(dim, n, axis + 1, idx, m, 0.5 * value, out);
        return;
    }
    m[axis] = j <= n / 2 ? j : j - n;
    scatter_coeff(dim, n, axis + 1, idx, m, value, out);
}

}  // namespace detail

/// Discrete Fourier coefficients of samples q(j/n) on the uniform grid of the
/// unit cell (row-major, first axis slowest). Samples must be real to within
/// imag_tol; coefficients below prune_tol relative to the largest are dropped.
inline FourierPotential from_samples(std::span<const cplx> samples, int dim, int n_per_axis,
                                     double imag_tol = 1e-12, double prune_tol = 1e-13) {
    require(dim >= 1 && dim <= max_dim, "from_samples: dim must be 1, 2 or 3");
    require(n_per_axis >= 1, "from_samples: empty grid");
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n_per_axis);
    require(samples.size() == total && total > 0, "from_samples: sample count does not match grid");
    double vmax = 0;
    for (const auto& s : samples) vmax = std::max(vmax, std::abs(s));
    for (const auto& s : samples)
        require(std::abs(s.imag()) <= imag_tol * std::max(1.0, vmax),
                "from_samples: samples are not real (complex-valued potential)");

    const int n = n_per_axis;
    std::vector<cplx> data(samples.begin(), samples.end());
    for (auto& s : data) s = cplx(s.real(), 0.0);

    // Separable DFT along each axis.
    std::vector<cplx> twiddle(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) twiddle[j] = std::polar(1.0, -two_pi * j / n);
    std::size_t stride = 1;
    for (int axis = dim - 1; axis >= 0; --axis) {
        const std::size_t block = stride * static_cast<std::size_t>(n);
        std::vector<cplx> line(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
        for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                for (int j = 0; j < n; ++j) line[j] = data[base + off + j * stride];
                for (int f = 0; f < n; ++f) {
                    cplx acc = 0;
                    for (int j = 0; j < n; ++j) acc += line[j] * twiddle[(static_cast<long>(f) * j) % n];
                    out[f] = acc / static_cast<double>(n);
                }
                for (int f = 0; f < n; ++f) data[base + off + f * stride] = out[f];
            }
        }
        stride = block;
    }

    double cmax = 0;
    for (const auto& c : data) cmax = std::max(cmax, std::abs(c));
    FourierPotential::CoeffMap coeffs;
    for (std::size_t flat = 0; flat < total; ++flat) {
        if (std::abs(data[flat]) <= prune_tol * std::max(cmax, 1e-300)) continue;
        std::array<int, max_dim> idx{0, 0, 0};
        std::size_t rem = flat;
        for (int a = dim - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(rem % n);
            rem /= n;
        }
        detail::scatter_coeff(dim, n, 0, idx, LatticeVec{0, 0, 0}, data[flat], coeffs);
    }
    return FourierPotential(dim, std::move(coeffs), 1e-10);
}

inline FourierPotential from_samples(std::span<const double> samples, int dim, int n_per_axis) {
    std::vector<cplx> c(samples.begin(), samples.end());
    return from_samples(std::span<const cplx>(c), dim, n_per_axis);
}

/// Samples of p on the n^dim uniform grid of the unit cell, row-major.
inline std::vector<double> sample_grid(const FourierPotential& p, int n_per_axis) {
    const int dim = p.dim();
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n_per_axis);
    std::vector<double> out(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        RealVec x{0, 0, 0};
        std::size_t rem = flat;
        for (int a = dim - 1; a >= 0; --a) {
            x[a] = static_cast<double>(rem % n_per_axis) / n_per_axis;
            rem /= n_per_axis;
        }
        out[flat] = p.evaluate(x);
    }
    return out;
}

/// q = a * 2 cos(2 pi x).
inline FourierPotential mathieu(double a) {
    if (a == 0) return FourierPotential(1);
    return FourierPotential(1, {{LatticeVec{1, 0, 0}, cplx(a)}, {LatticeVec{-1, 0, 0}, cplx(a)}});
}

inline FourierPotential constant_potential(int dim, double c) {
    if (c == 0) return FourierPotential(dim);
    return FourierPotential(dim, {{LatticeVec{0, 0, 0}, cplx(c)}});
}

// ---- structured text I/O ---------------------------------------------------
// {"dim": n, "entries": [[[m1, ..., mn], re, im], ...]}

inline nlohmann::json to_json(const FourierPotential& p) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [m, c] : p.coeffs()) {
        nlohmann::json idx = nlohmann::json::array();
        for (int a = 0; a < p.dim(); ++a) idx.push_back(m[a]);
        entries.push_back(nlohmann::json::array({idx, c.real(), c.imag()}));
    }
    return {{"dim", p.dim()}, {"entries", entries}};
}

inline FourierPotential potential_from_json(const nlohmann::json& j) {
    try {
        const int dim = j.at("dim").get<int>();
        require(dim >= 1 && dim <= max_dim, "potential file: dim must be 1, 2 or 3");
        FourierPotential::CoeffMap coeffs;
        for (const auto& e : j.at("entries")) {
            require(e.is_array() && e.size() == 3, "potential file: entry must be [[m...], re, im]");
            const auto& idx = e.at(0);
            require(idx.is_array() && static_cast<int>(idx.size()) == dim,
                    "potential file: lattice vector length must equal dim");
            LatticeVec m{0, 0, 0};
            for (int a = 0; a < dim; ++a) m[a] = idx.at(a).get<int>();
            coeffs[m] += cplx(e.at(1).get<double>(), e.at(2).get<double>());
        }
        return FourierPotential(dim, std::move(coeffs));
    } catch (const nlohmann::json::exception& ex) {
        throw InputError(std::string("potential file: ") + ex.what());
    }
}

inline FourierPotential read_potential_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open potential file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw InputError("potential file " + path + ": " + ex.what());
    }
    return potential_from_json(j);
}

namespace detail {

inline std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            require(used == item.size(), "");
        } catch (...) {
            throw InputError("invalid number '" + item + "' in " + what);
        }
    }
    return out;
}

}  // namespace detail

/// Potential presets: "free" (uses default_dim), "const:c", "mathieu:a"
/// (a * 2cos(2 pi x)), "mathieu2d:a,b", "mathieu3d:a,b,c", "file:<path>".
inline FourierPotential parse_potential_spec(const std::string& spec, int default_dim = 1) {
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string tail = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (head == "free" && colon == std::string::npos) return FourierPotential(default_dim);
    if (head == "file") return read_potential_file(tail);
    const auto nums = detail::parse_number_list(tail, "potential spec '" + spec + "'");
    if (head == "const" && nums.size() == 1) return constant_potential(default_dim, nums[0]);
    if (head == "mathieu" && nums.size() == 1) return mathieu(nums[0]);
    if (head == "mathieu2d" && nums.size() == 2)
        return tensor_sum({{mathieu(nums[0]), mathieu(nums[1])}});
    if (head == "mathieu3d" && nums.size() == 3)
        return tensor_sum({{mathieu(nums[0]), mathieu(nums[1]), mathieu(nums[2])}});
    throw InputError("unknown potential spec '" + spec +
                     "' (expected free, const:c, mathieu:a, mathieu2d:a,b, mathieu3d:a,b,c, file:<path>)");
}

}  // namespace floquet
