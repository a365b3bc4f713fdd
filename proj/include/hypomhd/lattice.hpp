#pragma once

// Integer lattice geometry on the 2-torus [-pi, pi]^2 and the trigonometric
// divergence-free basis
//
//   e_k^0 = ( k2/|k|, -k1/|k|) cos(k.x),
//   e_k^1 = (-k2/|k|,  k1/|k|) sin(k.x).
//
// The basis is orthogonal with ||e_k^m||_{L2} = sqrt(2 pi^2). All state
// coefficients in this library refer to the unit-normalized fields
// e_hat = e / sqrt(2 pi^2).

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypomhd/error.hpp"

namespace hypomhd {

using Vec2 = std::array<double, 2>;

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

struct WaveVector {
  int k1 = 0;
  int k2 = 0;

  constexpr long norm2() const { return long(k1) * k1 + long(k2) * k2; }
  double norm() const { return std::sqrt(double(norm2())); }
  constexpr bool is_zero() const { return k1 == 0 && k2 == 0; }
  /// Half-lattice representative: k1 > 0, or k1 == 0 and k2 > 0.
  constexpr bool is_canonical() const { return k1 > 0 || (k1 == 0 && k2 > 0); }

  constexpr WaveVector operator-() const { return {-k1, -k2}; }
  friend constexpr WaveVector operator+(WaveVector a, WaveVector b) { return {a.k1 + b.k1, a.k2 + b.k2}; }
  friend constexpr WaveVector operator-(WaveVector a, WaveVector b) { return {a.k1 - b.k1, a.k2 - b.k2}; }
  friend constexpr auto operator<=>(const WaveVector&, const WaveVector&) = default;
};

inline std::string to_string(WaveVector k) {
  return "(" + std::to_string(k.k1) + "," + std::to_string(k.k2) + ")";
}

/// l_perp = (-l2, l1).
constexpr WaveVector perp(WaveVector l) { return {-l.k2, l.k1}; }
constexpr long dot(WaveVector a, WaveVector b) { return long(a.k1) * b.k1 + long(a.k2) * b.k2; }

/// Exact integer <k, l_perp>. Zero iff k and l are collinear.
constexpr long perp_pairing(WaveVector k, WaveVector l) { return dot(k, perp(l)); }

/// a = <k, l_perp> / (|k||l|), in [-1, 1].
inline double pairing_coefficient(WaveVector k, WaveVector l) {
  if (k.is_zero() || l.is_zero()) throw DomainError("pairing_coefficient: zero wavevector");
  return double(perp_pairing(k, l)) / (k.norm() * l.norm());
}

enum class Parity : std::uint8_t { kCos = 0, kSin = 1 };
enum class Slot : std::uint8_t { kVelocity = 0, kMagnetic = 1 };

inline const char* to_string(Parity m) { return m == Parity::kCos ? "cos" : "sin"; }
inline const char* to_string(Slot s) { return s == Slot::kVelocity ? "velocity" : "magnetic"; }

/// Basis element psi_k^m (velocity slot) or sigma_k^m (magnetic slot).
struct Mode {
  Slot slot = Slot::kVelocity;
  WaveVector k;
  Parity m = Parity::kCos;

  friend constexpr auto operator<=>(const Mode&, const Mode&) = default;
};

inline std::string to_string(const Mode& mode) {
  return std::string(mode.slot == Slot::kVelocity ? "psi" : "sigma") + "^" +
         (mode.m == Parity::kCos ? "0" : "1") + "_" + to_string(mode.k);
}

/// L2 norm of an unnormalized basis field on [-pi, pi]^2.
struct NormalizationConvention {
  static constexpr double kScale = std::numbers::sqrt2 * std::numbers::pi;
  static constexpr double kScaleSquared = 2.0 * std::numbers::pi * std::numbers::pi;
};

inline constexpr double kBasisScale = NormalizationConvention::kScale;

struct CanonicalRep {
  WaveVector k;
  int sign = 1;
};

/// e_k^m = sign * e_{k'}^m with k' in {k, -k} canonical.
/// For cosine modes the direction vector flips and cos is even (sign -1);
/// for sine modes both the direction and sin flip (sign +1).
inline CanonicalRep canonical_rep(WaveVector k, Parity m) {
  if (k.is_zero()) throw DomainError("canonical_rep: zero wavevector");
  if (k.is_canonical()) return {k, 1};
  return {-k, m == Parity::kCos ? -1 : 1};
}

/// Direction vector of the unnormalized e_k^m (without the trig factor).
inline Vec2 basis_direction(WaveVector k, Parity m) {
  const double n = k.norm();
  const double s = m == Parity::kCos ? 1.0 : -1.0;
  return {s * k.k2 / n, -s * k.k1 / n};
}

inline double phase(WaveVector k, const Vec2& x) { return k.k1 * x[0] + k.k2 * x[1]; }

/// Unnormalized e_k^m(x) for any nonzero k.
inline Vec2 eval_raw_basis(WaveVector k, Parity m, const Vec2& x) {
  const Vec2 d = basis_direction(k, m);
  const double t = m == Parity::kCos ? std::cos(phase(k, x)) : std::sin(phase(k, x));
  return {d[0] * t, d[1] * t};
}

/// Gradient of the unnormalized e_k^m: grad[i][j] = d_j (e_k^m)_i.
inline std::array<Vec2, 2> eval_raw_basis_gradient(WaveVector k, Parity m, const Vec2& x) {
  const Vec2 d = basis_direction(k, m);
  const double t = m == Parity::kCos ? -std::sin(phase(k, x)) : std::cos(phase(k, x));
  return {{{d[0] * t * k.k1, d[0] * t * k.k2}, {d[1] * t * k.k1, d[1] * t * k.k2}}};
}

/// Unit-normalized field value of `mode` at x (the 2-vector in the mode's slot).
inline Vec2 eval_basis_field(const Mode& mode, const Vec2& x) {
  const Vec2 v = eval_raw_basis(mode.k, mode.m, x);
  return {v[0] / kBasisScale, v[1] / kBasisScale};
}

/// A 2-vector field sampled on the uniform M x M grid x_i = -pi + 2 pi i / M.
struct GridField {
  int resolution = 0;
  std::vector<Vec2> values;  // row-major, index i1 * M + i2

  static Vec2 point(int resolution, int i1, int i2) {
    const double h = 2.0 * std::numbers::pi / resolution;
    return {-std::numbers::pi + h * i1, -std::numbers::pi + h * i2};
  }

  static GridField sample(int resolution, const std::function<Vec2(const Vec2&)>& f) {
    GridField g{resolution, std::vector<Vec2>(std::size_t(resolution) * resolution)};
    for (int i1 = 0; i1 < resolution; ++i1)
      for (int i2 = 0; i2 < resolution; ++i2) g.values[std::size_t(i1) * resolution + i2] = f(point(resolution, i1, i2));
    return g;
  }
};

/// <field, e_hat_mode> by the tensor-product rectangle rule, exact for
/// trigonometric polynomials below the Nyquist limit.
inline double project_onto_mode(const GridField& field, const Mode& mode) {
  const int M = field.resolution;
  const int kmax = std::max(std::abs(mode.k.k1), std::abs(mode.k.k2));
  if (M < 4 || M % 2 != 0 || M < 4 * kmax)
    throw PreconditionError("project_onto_mode: grid resolution " + std::to_string(M) +
                            " under-resolves wavevector " + to_string(mode.k));
  const double h = 2.0 * std::numbers::pi / M;
  double acc = 0.0;
  for (int i1 = 0; i1 < M; ++i1)
    for (int i2 = 0; i2 < M; ++i2)
      acc += dot(field.values[std::size_t(i1) * M + i2], eval_basis_field(mode, GridField::point(M, i1, i2)));
  return acc * h * h;
}

/// Rectangle-rule projections onto every unit mode (slot, q, m) with canonical q
/// and max(|q1|, |q2|) <= reach, via separable sums over the grid axes.
inline std::map<Mode, double> project_onto_box(const GridField& field, Slot slot, int reach) {
  const int M = field.resolution;
  if (M < 4 || M % 2 != 0 || M < 4 * reach)
    throw PreconditionError("project_onto_box: grid resolution " + std::to_string(M) + " under-resolves reach " +
                            std::to_string(reach));
  const double h = 2.0 * std::numbers::pi / M;
  const int nq = 2 * reach + 1;
  std::vector<double> cs(std::size_t(nq) * M), sn(std::size_t(nq) * M);
  for (int q = -reach; q <= reach; ++q)
    for (int i = 0; i < M; ++i) {
      const double x = -std::numbers::pi + h * i;
      cs[std::size_t(q + reach) * M + i] = std::cos(q * x);
      sn[std::size_t(q + reach) * M + i] = std::sin(q * x);
    }
  // partial[q1][i2][comp] = sum_i1 f * {cos, sin}(q1 x1)
  std::vector<double> pc(std::size_t(reach + 1) * M * 2), ps(pc.size());
  for (int q1 = 0; q1 <= reach; ++q1)
    for (int i1 = 0; i1 < M; ++i1) {
      const double c = cs[std::size_t(q1 + reach) * M + i1], s = sn[std::size_t(q1 + reach) * M + i1];
      for (int i2 = 0; i2 < M; ++i2) {
        const Vec2& v = field.values[std::size_t(i1) * M + i2];
        const std::size_t o = (std::size_t(q1) * M + i2) * 2;
        pc[o] += c * v[0];
        pc[o + 1] += c * v[1];
        ps[o] += s * v[0];
        ps[o + 1] += s * v[1];
      }
    }
  std::map<Mode, double> out;
  for (int q1 = 0; q1 <= reach; ++q1)
    for (int q2 = -reach; q2 <= reach; ++q2) {
      const WaveVector q{q1, q2};
      if (!q.is_canonical()) continue;
      Vec2 ic{0, 0}, is{0, 0};  // integrals of f cos(q.x), f sin(q.x)
      for (int i2 = 0; i2 < M; ++i2) {
        const double c2 = cs[std::size_t(q2 + reach) * M + i2], s2 = sn[std::size_t(q2 + reach) * M + i2];
        const std::size_t o = (std::size_t(q1) * M + i2) * 2;
        for (int j = 0; j < 2; ++j) {
          ic[j] += pc[o + j] * c2 - ps[o + j] * s2;
          is[j] += ps[o + j] * c2 + pc[o + j] * s2;
        }
      }
      const Vec2 d = basis_direction(q, Parity::kCos);
      out[Mode{slot, q, Parity::kCos}] = dot(ic, d) * h * h / kBasisScale;
      out[Mode{slot, q, Parity::kSin}] = -dot(is, d) * h * h / kBasisScale;
    }
  return out;
}

/// Galerkin truncation {0 < |k| <= n_cut} x {velocity, magnetic} x {cos, sin}.
/// Mode index = 4 * (wavevector index) + 2 * slot + parity; wavevectors are
/// ordered by |k|^2, then lexicographically.
class Truncation {
 public:
  explicit Truncation(int n_cut) : n_cut_(n_cut) {
    if (n_cut < 1) throw DomainError("Truncation: n_cut must be >= 1");
    for (int k1 = 0; k1 <= n_cut; ++k1)
      for (int k2 = -n_cut; k2 <= n_cut; ++k2) {
        const WaveVector k{k1, k2};
        if (k.is_canonical() && k.norm2() <= long(n_cut) * n_cut) waves_.push_back(k);
      }
    std::stable_sort(waves_.begin(), waves_.end(),
                     [](WaveVector a, WaveVector b) { return a.norm2() < b.norm2(); });
    for (std::size_t i = 0; i < waves_.size(); ++i) lookup_[waves_[i]] = i;
  }

  int n_cut() const { return n_cut_; }
  std::size_t dim() const { return 4 * waves_.size(); }
  std::span<const WaveVector> wavevectors() const { return waves_; }

  static constexpr std::size_t index_of(std::size_t kidx, Slot s, Parity m) {
    return 4 * kidx + 2 * std::size_t(s) + std::size_t(m);
  }

  Mode mode(std::size_t i) const {
    return {Slot((i / 2) % 2), waves_[i / 4], Parity(i % 2)};
  }

  std::optional<std::size_t> wave_index(WaveVector k) const {
    auto it = lookup_.find(k);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> index(const Mode& mode) const {
    auto w = wave_index(mode.k);
    if (!w) return std::nullopt;
    return index_of(*w, mode.slot, mode.m);
  }

  bool contains(WaveVector k) const { return !k.is_zero() && k.norm2() <= long(n_cut_) * n_cut_; }

 private:
  int n_cut_;
  std::vector<WaveVector> waves_;
  std::map<WaveVector, std::size_t> lookup_;
};

}  // namespace hypomhd
