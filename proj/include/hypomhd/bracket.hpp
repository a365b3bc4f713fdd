#pragma once

// Symbolic advection b(u, v) = u . grad v on the unnormalized basis e_k^m,
// Leray projection onto unit-normalized modes, and the constant-field double
// brackets
//
//   J_{k,l}^{m,m'} = B(sigma_k^m, sigma_l^m') + B(sigma_l^m', sigma_k^m)   (velocity slot)
//   Z_{k,l}^{m,m'} = B(psi_k^m,   sigma_l^m') + B(sigma_l^m', psi_k^m)     (magnetic slot)
//
// combined into the four direction generators of each slot. Everything here is
// computed from advect + leray_project; the closed forms are only used for
// reporting the normalization constant.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hypomhd/lattice.hpp"
#include "hypomhd/trig_field.hpp"

namespace hypomhd {

/// Unit-normalized mode coefficients; only |c| > prune are retained.
using DirectionExpansion = std::map<Mode, double>;

/// e_k^m . grad e_l^m' reduced to a trigonometric sum at wavevectors k +- l.
inline TrigVectorField advect(WaveVector k, Parity m, WaveVector l, Parity mp) {
  if (k.is_zero() || l.is_zero()) throw DomainError("advect: zero wavevector");
  TrigVectorField out;
  // v_k . l is proportional to <k, l_perp>; exact zero for collinear pairs.
  const long pairing = perp_pairing(k, l);
  if (pairing == 0) return out;
  const Vec2 vk = basis_direction(k, m);
  const Vec2 vl = basis_direction(l, mp);
  const double vk_dot_l = vk[0] * l.k1 + vk[1] * l.k2;
  // d/dx cos = -sin, d/dx sin = cos.
  const double s = mp == Parity::kCos ? -1.0 : 1.0;
  const Parity dl = mp == Parity::kCos ? Parity::kSin : Parity::kCos;
  out.add_product(m, k, dl, l, {s * vk_dot_l * vl[0], s * vk_dot_l * vl[1]});
  return out;
}

/// Orthogonal projection onto divergence-free, mean-zero fields in `slot`,
/// expressed in unit-normalized modes. Mean (q = 0) terms are dropped.
inline DirectionExpansion leray_project(const TrigVectorField& f, Slot slot, double prune = kPruneTolerance) {
  DirectionExpansion out;
  for (const TrigTerm& t : f.terms(0.0)) {
    if (t.k.is_zero()) continue;
    // <amp trig(q.x), e_hat_q^p> = (amp . d) * ||e||^2 / scale, d the parity-0 direction;
    // the sine basis carries direction -d.
    const Vec2 d = basis_direction(t.k, Parity::kCos);
    const double sgn = t.parity == Parity::kCos ? 1.0 : -1.0;
    const double c = sgn * dot(t.amp, d) * kBasisScale;
    if (std::abs(c) > prune) out[Mode{slot, t.k, t.parity}] += c;
  }
  for (auto it = out.begin(); it != out.end();) it = std::abs(it->second) > prune ? std::next(it) : out.erase(it);
  return out;
}

enum class Combo { kSum01, kDiff01, kSum11_00, kDiff11_00 };

inline const char* to_string(Combo c) {
  switch (c) {
    case Combo::kSum01: return "sum01";
    case Combo::kDiff01: return "diff01";
    case Combo::kSum11_00: return "sum11_00";
    case Combo::kDiff11_00: return "diff11_00";
  }
  return "?";
}

inline constexpr Combo kAllCombos[] = {Combo::kSum01, Combo::kDiff01, Combo::kSum11_00, Combo::kDiff11_00};

enum class Degeneracy { kNone, kParallel, kEqualModuli, kZeroMode };

inline const char* to_string(Degeneracy d) {
  switch (d) {
    case Degeneracy::kNone: return "none";
    case Degeneracy::kParallel: return "degenerate: parallel";
    case Degeneracy::kEqualModuli: return "degenerate: equal moduli";
    case Degeneracy::kZeroMode: return "degenerate: zero mode";
  }
  return "?";
}

struct DirectionResult {
  DirectionExpansion expansion;
  Degeneracy flag = Degeneracy::kNone;
};

/// Raw (pre-projection) velocity row of J_{k,l}^{m,m'}: -(b(e_k, e_l) + b(e_l, e_k)).
inline TrigVectorField velocity_bracket_field(WaveVector k, Parity m, WaveVector l, Parity mp) {
  return -1.0 * (advect(k, m, l, mp) + advect(l, mp, k, m));
}

/// Raw magnetic row of Z_{k,l}^{m,m'}: b(e_k, e_l) - b(e_l, e_k).
inline TrigVectorField magnetic_bracket_field(WaveVector k, Parity m, WaveVector l, Parity mp) {
  return advect(k, m, l, mp) - advect(l, mp, k, m);
}

/// The combination field for one slot before projection.
inline TrigVectorField combo_field(Slot slot, WaveVector k, WaveVector l, Combo combo) {
  constexpr Parity c = Parity::kCos, s = Parity::kSin;
  if (slot == Slot::kVelocity) {
    switch (combo) {
      case Combo::kSum01: return velocity_bracket_field(k, c, l, s) + velocity_bracket_field(l, c, k, s);
      case Combo::kDiff01: return velocity_bracket_field(k, c, l, s) - velocity_bracket_field(l, c, k, s);
      case Combo::kSum11_00: return velocity_bracket_field(k, s, l, s) + velocity_bracket_field(l, c, k, c);
      case Combo::kDiff11_00: return velocity_bracket_field(k, s, l, s) - velocity_bracket_field(l, c, k, c);
    }
  } else {
    switch (combo) {
      case Combo::kSum01: return magnetic_bracket_field(k, c, l, s) + magnetic_bracket_field(l, c, k, s);
      case Combo::kDiff01: return magnetic_bracket_field(k, c, l, s) - magnetic_bracket_field(l, c, k, s);
      case Combo::kSum11_00: return magnetic_bracket_field(k, s, l, s) + magnetic_bracket_field(k, c, l, c);
      case Combo::kDiff11_00: return magnetic_bracket_field(k, s, l, s) - magnetic_bracket_field(k, c, l, c);
    }
  }
  return {};
}

/// Target wavevector (raw, possibly non-canonical) and parity of a combo.
struct ComboTarget {
  WaveVector q;
  Parity m;
};

inline ComboTarget combo_target(Slot slot, WaveVector k, WaveVector l, Combo combo) {
  const bool parity_one = combo == Combo::kSum11_00 || combo == Combo::kDiff11_00;
  bool plus;
  if (slot == Slot::kVelocity)
    plus = combo == Combo::kSum01 || combo == Combo::kDiff11_00;
  else
    plus = combo == Combo::kDiff01 || combo == Combo::kDiff11_00;
  return {plus ? k + l : k - l, parity_one ? Parity::kSin : Parity::kCos};
}

namespace detail {
inline DirectionResult direction(Slot slot, WaveVector k, WaveVector l, Combo combo) {
  if (k.is_zero() || l.is_zero()) throw DomainError("direction: zero wavevector");
  DirectionResult r;
  r.expansion = leray_project(combo_field(slot, k, l, combo), slot);
  if (perp_pairing(k, l) == 0)
    r.flag = Degeneracy::kParallel;
  else if (slot == Slot::kVelocity && k.norm2() == l.norm2())
    r.flag = Degeneracy::kEqualModuli;
  else if (combo_target(slot, k, l, combo).q.is_zero())
    r.flag = Degeneracy::kZeroMode;
  return r;
}
}  // namespace detail

/// Velocity-slot generator built from J brackets (sum01 = J^{0,1}_{k,l} + J^{0,1}_{l,k}, ...).
inline DirectionResult velocity_direction(WaveVector k, WaveVector l, Combo combo) {
  return detail::direction(Slot::kVelocity, k, l, combo);
}

/// Magnetic-slot generator built from Z brackets.
inline DirectionResult magnetic_direction(WaveVector k, WaveVector l, Combo combo) {
  return detail::direction(Slot::kMagnetic, k, l, combo);
}

inline DirectionResult slot_direction(Slot slot, WaveVector k, WaveVector l, Combo combo) {
  return detail::direction(slot, k, l, combo);
}

/// Closed-form coefficient of the combo along the unnormalized e_{k+-l},
/// up to the normalization constant c.
inline double closed_form_value(Slot slot, WaveVector k, WaveVector l, Combo combo) {
  const double a = pairing_coefficient(k, l);
  const ComboTarget t = combo_target(slot, k, l, combo);
  if (t.q.is_zero()) return 0.0;
  const double q = t.q.norm();
  if (slot == Slot::kMagnetic) return a * q;
  const double dk = double(k.norm2()), dl = double(l.norm2());
  return combo == Combo::kDiff01 ? a * (dk - dl) / q : a * (dl - dk) / q;
}

struct VerificationReport {
  WaveVector k, l;
  Combo combo = Combo::kSum01;
  Slot slot = Slot::kVelocity;
  Degeneracy flag = Degeneracy::kNone;
  bool selection_ok = false;
  /// Max |symbolic - quadrature| over all probed modes.
  double max_mismatch = 0.0;
  std::optional<Mode> target;
  double symbolic_coefficient = 0.0;
  double quadrature_coefficient = 0.0;
  /// Quadrature coefficient along the raw e_{k+-l} (unit basis) over the
  /// closed-form value; NaN for degenerate pairs.
  double coefficient_ratio = std::numeric_limits<double>::quiet_NaN();
};

/// Pointwise brute-force evaluation of a combo field from the basis formulas.
inline Vec2 combo_field_pointwise(Slot slot, WaveVector k, WaveVector l, Combo combo, const Vec2& x) {
  auto adv = [&x](WaveVector a, Parity ma, WaveVector b, Parity mb) {
    const Vec2 u = eval_raw_basis(a, ma, x);
    const auto g = eval_raw_basis_gradient(b, mb, x);
    return Vec2{u[0] * g[0][0] + u[1] * g[0][1], u[0] * g[1][0] + u[1] * g[1][1]};
  };
  auto pair = [&](WaveVector a, Parity ma, WaveVector b, Parity mb) {
    const Vec2 ab = adv(a, ma, b, mb), ba = adv(b, mb, a, ma);
    return slot == Slot::kVelocity ? Vec2{-(ab[0] + ba[0]), -(ab[1] + ba[1])} : Vec2{ab[0] - ba[0], ab[1] - ba[1]};
  };
  constexpr Parity c = Parity::kCos, s = Parity::kSin;
  Vec2 p, q;
  double sign = 1.0;
  switch (combo) {
    case Combo::kSum01: p = pair(k, c, l, s); q = pair(l, c, k, s); break;
    case Combo::kDiff01: p = pair(k, c, l, s); q = pair(l, c, k, s); sign = -1.0; break;
    case Combo::kSum11_00:
      p = pair(k, s, l, s);
      q = slot == Slot::kVelocity ? pair(l, c, k, c) : pair(k, c, l, c);
      break;
    case Combo::kDiff11_00:
      p = pair(k, s, l, s);
      q = slot == Slot::kVelocity ? pair(l, c, k, c) : pair(k, c, l, c);
      sign = -1.0;
      break;
  }
  return {p[0] + sign * q[0], p[1] + sign * q[1]};
}

/// Compares the symbolic expansion against quadrature projection of the
/// pointwise field onto every canonical mode with components up to |k|+|l|.
inline VerificationReport verify_bracket_identity(WaveVector k, WaveVector l, Combo combo, Slot slot,
                                                  int resolution = 0, double zero_tol = 1e-10) {
  const int reach = std::max(std::abs(k.k1) + std::abs(l.k1), std::abs(k.k2) + std::abs(l.k2));
  if (resolution == 0) resolution = 4 * reach + 4;
  if (resolution < 4 * reach || resolution % 2 != 0)
    throw PreconditionError("verify_bracket_identity: grid resolution " + std::to_string(resolution) +
                            " under-resolves products at " + std::to_string(reach));
  VerificationReport rep;
  rep.k = k;
  rep.l = l;
  rep.combo = combo;
  rep.slot = slot;
  const DirectionResult sym = slot_direction(slot, k, l, combo);
  rep.flag = sym.flag;

  const GridField grid = GridField::sample(
      resolution, [&](const Vec2& x) { return combo_field_pointwise(slot, k, l, combo, x); });
  DirectionExpansion quad;
  for (const auto& [mode, c] : project_onto_box(grid, slot, reach)) {
    if (std::abs(c) > zero_tol) quad[mode] = c;
    const auto it = sym.expansion.find(mode);
    const double sc = it == sym.expansion.end() ? 0.0 : it->second;
    rep.max_mismatch = std::max(rep.max_mismatch, std::abs(sc - c));
  }
  for (const auto& [mode, c] : sym.expansion) {
    const int r = std::max(std::abs(mode.k.k1), std::abs(mode.k.k2));
    if (r > reach) rep.max_mismatch = std::max(rep.max_mismatch, std::abs(c));
  }

  bool same_support = quad.size() == sym.expansion.size();
  if (same_support)
    for (const auto& [mode, c] : quad) same_support = same_support && sym.expansion.count(mode) == 1;

  if (sym.flag != Degeneracy::kNone) {
    rep.selection_ok = sym.expansion.empty() && quad.empty() && rep.max_mismatch <= zero_tol;
    return rep;
  }
  const ComboTarget t = combo_target(slot, k, l, combo);
  const CanonicalRep cr = canonical_rep(t.q, t.m);
  const Mode target{slot, cr.k, t.m};
  rep.target = target;
  rep.symbolic_coefficient = sym.expansion.count(target) ? sym.expansion.at(target) : 0.0;
  rep.quadrature_coefficient = quad.count(target) ? quad.at(target) : 0.0;
  rep.selection_ok = same_support && quad.size() == 1 && quad.count(target) == 1 && rep.max_mismatch <= zero_tol;
  const double cf = closed_form_value(slot, k, l, combo);
  rep.coefficient_ratio = cr.sign * rep.quadrature_coefficient / cf;
  return rep;
}

struct BracketSweep {
  std::vector<VerificationReport> reports;
  bool all_selection_ok = true;
  /// Spread of |coefficient_ratio| relative to its mean over nondegenerate reports.
  double normalization_constant = 0.0;
  double max_relative_spread = 0.0;
  /// Each (slot, combo) line has one sign for its ratio.
  bool line_signs_consistent = true;
  std::map<std::pair<Slot, Combo>, int> line_sign;
};

/// All k, l with 0 < |k|, |l| <= kmax and <k, l_perp> != 0, all combos, both slots.
inline BracketSweep verify_sweep(int kmax) {
  BracketSweep sweep;
  std::vector<WaveVector> ball;
  for (int a = -kmax; a <= kmax; ++a)
    for (int b = -kmax; b <= kmax; ++b) {
      const WaveVector k{a, b};
      if (!k.is_zero() && k.norm2() <= long(kmax) * kmax) ball.push_back(k);
    }
  double sum_abs = 0.0;
  std::size_t count = 0;
  for (WaveVector k : ball)
    for (WaveVector l : ball) {
      if (perp_pairing(k, l) == 0) continue;
      for (Slot slot : {Slot::kVelocity, Slot::kMagnetic})
        for (Combo combo : kAllCombos) {
          VerificationReport r = verify_bracket_identity(k, l, combo, slot);
          sweep.all_selection_ok = sweep.all_selection_ok && r.selection_ok;
          if (r.flag == Degeneracy::kNone) {
            sum_abs += std::abs(r.coefficient_ratio);
            ++count;
            const int sgn = r.coefficient_ratio > 0 ? 1 : -1;
            auto [it, inserted] = sweep.line_sign.emplace(std::make_pair(slot, combo), sgn);
            if (!inserted && it->second != sgn) sweep.line_signs_consistent = false;
          }
          sweep.reports.push_back(r);
        }
    }
  if (count > 0) {
    sweep.normalization_constant = sum_abs / double(count);
    for (const auto& r : sweep.reports)
      if (r.flag == Degeneracy::kNone)
        sweep.max_relative_spread =
            std::max(sweep.max_relative_spread,
                     std::abs(std::abs(r.coefficient_ratio) - sweep.normalization_constant) / sweep.normalization_constant);
  }
  return sweep;
}

}  // namespace hypomhd
