#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace floquet {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Largest supported spatial dimension.
inline constexpr int max_dim = 3;

/// Lattice vector m in Z^dim; unused trailing components are zero.
using LatticeVec = std::array<int, max_dim>;

/// Point or quasimomentum in R^dim; unused trailing components are zero.
using RealVec = std::array<double, max_dim>;

/// Complex quasimomentum in C^dim.
using ComplexVec = std::array<cplx, max_dim>;

inline ComplexVec to_complex(const RealVec& v) {
    return {cplx(v[0]), cplx(v[1]), cplx(v[2])};
}

// Errors. InputError maps to exit code 2 in the CLI; NumericalFailure and its
// subclasses map to exit code 3.

class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IntegrationFailure : public NumericalFailure {
public:
    IntegrationFailure(const std::string& what, double reached_x)
        : NumericalFailure(what), reached_x_(reached_x) {}
    double reached_x() const { return reached_x_; }

private:
    double reached_x_;
};

class ResolutionFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class ProbeFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class ConstructionFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InputError(msg);
}

/// Reduce x into [0, 2*pi).
inline double wrap_two_pi(double x) {
    double r = std::fmod(x, two_pi);
    if (r < 0) r += two_pi;
    if (r >= two_pi) r -= two_pi;
    return r;
}

/// Reduce x into (-pi, pi].
inline double wrap_pi(double x) {
    double r = wrap_two_pi(x);
    return r > pi ? r - two_pi : r;
}

}  // namespace floquet
