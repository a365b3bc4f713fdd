#pragma once

// Generation recursion on the integer lattice:
//
//   cZ_0 = Z_0 u (-Z_0),
//   cZ_n = { k + l : k in cZ_{n-1}, l in cZ_0, <k, l_perp> != 0, |k| != |l| },
//
// window-bounded coverage checks of the even/odd unions, and derivation
// certificates. All predicates use exact integer arithmetic.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "hypomhd/lattice.hpp"

namespace hypomhd {

using WaveSet = std::set<WaveVector>;

struct ForcedSet {
  std::vector<WaveVector> z0;
  WaveSet symmetrized;

  static ForcedSet from(std::vector<WaveVector> z0) {
    ForcedSet f;
    for (WaveVector k : z0) {
      if (k.is_zero()) throw DomainError("ForcedSet: zero wavevector in Z_0");
      f.symmetrized.insert(k);
      f.symmetrized.insert(-k);
    }
    f.z0 = std::move(z0);
    return f;
  }

  /// d = 2 |Z_0| (one Brownian motion per wavevector and parity).
  std::size_t noise_dimension() const { return 2 * std::set<WaveVector>(z0.begin(), z0.end()).size(); }

  double max_modulus() const {
    double m = 0.0;
    for (WaveVector l : symmetrized) m = std::max(m, l.norm());
    return m;
  }
};

/// Admissibility of the step k -> k + l.
constexpr bool admissible_step(WaveVector k, WaveVector l) {
  return perp_pairing(k, l) != 0 && k.norm2() != l.norm2() && !(k + l).is_zero();
}

/// Exact next generation; when `limit_norm2` is set, sums outside |k|^2 <= limit are discarded.
inline WaveSet next_generation(const WaveSet& prev, const ForcedSet& forced, std::optional<long> limit_norm2 = {}) {
  WaveSet out;
  for (WaveVector k : prev)
    for (WaveVector l : forced.symmetrized) {
      if (!admissible_step(k, l)) continue;
      const WaveVector s = k + l;
      if (limit_norm2 && s.norm2() > *limit_norm2) continue;
      out.insert(s);
    }
  return out;
}

struct Derivation {
  WaveVector parent;
  WaveVector step;
};

struct GenerationTable {
  std::vector<WaveSet> generations;
  /// parent[n][v] records one admissible derivation of v in generation n >= 1.
  std::vector<std::map<WaveVector, Derivation>> parent;
  double tracking_radius = 0.0;
};

/// Generation slack used to keep excursions outside a reporting window.
inline double tracking_slack(const ForcedSet& forced, int radius, int max_depth) {
  return std::min(2.0 * forced.max_modulus() * max_depth, 4.0 * radius);
}

/// Generations 0..depth, each restricted to |k| <= tracking_radius.
inline GenerationTable build_generations(const ForcedSet& forced, int depth, double tracking_radius) {
  GenerationTable t;
  t.tracking_radius = tracking_radius;
  const long limit = long(std::floor(tracking_radius * tracking_radius + 1e-9));
  t.generations.push_back(forced.symmetrized);
  t.parent.emplace_back();
  for (int n = 1; n <= depth; ++n) {
    const WaveSet& prev = t.generations.back();
    WaveSet next;
    std::map<WaveVector, Derivation> par;
    for (WaveVector k : prev)
      for (WaveVector l : forced.symmetrized) {
        if (!admissible_step(k, l)) continue;
        const WaveVector s = k + l;
        if (s.norm2() > limit) continue;
        if (next.insert(s).second) par[s] = {k, l};
      }
    t.generations.push_back(std::move(next));
    t.parent.push_back(std::move(par));
  }
  return t;
}

struct HypothesisReport {
  int radius = 0;
  bool even_covered = false;
  bool odd_covered = false;
  WaveSet missing_even;
  WaveSet missing_odd;
  int depth_used = 0;
  int max_depth = 0;
  double tracking_radius = 0.0;
};

inline WaveSet lattice_window(int radius) {
  WaveSet w;
  for (int a = -radius; a <= radius; ++a)
    for (int b = -radius; b <= radius; ++b) {
      const WaveVector k{a, b};
      if (!k.is_zero() && k.norm2() <= long(radius) * radius) w.insert(k);
    }
  return w;
}

/// Checks whether both the even and odd generation unions cover 0 < |k| <= radius.
/// max_depth <= 0 selects the default 4 * radius.
inline HypothesisReport check_hypothesis(const ForcedSet& forced, int radius, int max_depth = 0) {
  if (radius < 1) throw DomainError("check_hypothesis: radius must be >= 1");
  if (max_depth <= 0) max_depth = 4 * radius;
  HypothesisReport rep;
  rep.radius = radius;
  rep.max_depth = max_depth;
  rep.tracking_radius = radius + tracking_slack(forced, radius, max_depth);
  const long limit = long(std::floor(rep.tracking_radius * rep.tracking_radius + 1e-9));

  rep.missing_even = lattice_window(radius);
  rep.missing_odd = rep.missing_even;
  WaveSet gen = forced.symmetrized;
  for (WaveVector k : gen) rep.missing_even.erase(k);
  int n = 0;
  while (n < max_depth && !(rep.missing_even.empty() && rep.missing_odd.empty())) {
    ++n;
    gen = next_generation(gen, forced, limit);
    WaveSet& missing = n % 2 == 0 ? rep.missing_even : rep.missing_odd;
    for (WaveVector k : gen) missing.erase(k);
    if (gen.empty()) break;
  }
  rep.depth_used = n;
  rep.even_covered = rep.missing_even.empty();
  rep.odd_covered = rep.missing_odd.empty();
  return rep;
}

enum class ChainParity { kEven, kOdd };

struct Certificate {
  WaveVector start;             // element of cZ_0
  std::vector<WaveVector> steps;  // l_1, ..., l_n in cZ_0
  WaveVector target;
  double tracking_radius = 0.0;

  std::size_t length() const { return steps.size(); }
};

/// Minimal-length derivation of `target` with length of the requested parity,
/// or nullopt if none exists up to max_depth inside the tracking window.
inline std::optional<Certificate> generation_certificate(const ForcedSet& forced, WaveVector target,
                                                         ChainParity parity, int max_depth = 0) {
  if (target.is_zero()) throw DomainError("generation_certificate: zero target");
  const int radius = std::max(1, int(std::ceil(target.norm())));
  if (max_depth <= 0) max_depth = 4 * radius;
  const double tracking = radius + tracking_slack(forced, radius, max_depth);
  const GenerationTable t = build_generations(forced, max_depth, tracking);
  const int want = parity == ChainParity::kEven ? 0 : 1;
  for (int n = want; n <= max_depth; n += 2) {
    if (!t.generations[n].count(target)) continue;
    Certificate c;
    c.target = target;
    c.tracking_radius = tracking;
    WaveVector v = target;
    for (int g = n; g >= 1; --g) {
      const Derivation& d = t.parent[g].at(v);
      c.steps.push_back(d.step);
      v = d.parent;
    }
    std::reverse(c.steps.begin(), c.steps.end());
    c.start = v;
    return c;
  }
  return std::nullopt;
}

/// Replays a certificate through the admissibility predicates.
inline bool certificate_sound(const ForcedSet& forced, const Certificate& c) {
  if (!forced.symmetrized.count(c.start)) return false;
  WaveVector v = c.start;
  for (WaveVector l : c.steps) {
    if (!forced.symmetrized.count(l) || !admissible_step(v, l)) return false;
    v = v + l;
  }
  return v == c.target;
}

}  // namespace hypomhd
