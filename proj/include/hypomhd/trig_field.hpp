#pragma once

// Symbolic finite sums of (constant 2-vector) x {cos, sin}(q.x). Products of
// two trigonometric factors are reduced to sums on insertion, so a stored
// field is always a plain trigonometric polynomial with canonical q (or q = 0
// for the mean).

#include <cmath>
#include <map>
#include <tuple>
#include <vector>

#include "hypomhd/lattice.hpp"

namespace hypomhd {

inline constexpr double kPruneTolerance = 1e-14;

struct TrigTerm {
  Vec2 amp{};
  Parity parity = Parity::kCos;
  WaveVector k;
};

class TrigVectorField {
 public:
  /// Adds amp * trig(q.x). Non-canonical q is folded onto -q; sin(0) is dropped.
  void add(Parity p, WaveVector q, const Vec2& amp) {
    double s = 1.0;
    if (q.is_zero()) {
      if (p == Parity::kSin) return;
    } else if (!q.is_canonical()) {
      q = -q;
      if (p == Parity::kSin) s = -1.0;
    }
    Vec2& slot = terms_[{p, q.k1, q.k2}];
    slot[0] += s * amp[0];
    slot[1] += s * amp[1];
  }

  /// Adds amp * trig_a(a.x) * trig_b(b.x) via product-to-sum identities.
  void add_product(Parity pa, WaveVector a, Parity pb, WaveVector b, const Vec2& amp) {
    const Vec2 h{0.5 * amp[0], 0.5 * amp[1]};
    const Vec2 mh{-h[0], -h[1]};
    const WaveVector sum = a + b;
    const WaveVector diff = a - b;
    if (pa == Parity::kCos && pb == Parity::kCos) {
      add(Parity::kCos, diff, h);
      add(Parity::kCos, sum, h);
    } else if (pa == Parity::kSin && pb == Parity::kSin) {
      add(Parity::kCos, diff, h);
      add(Parity::kCos, sum, mh);
    } else if (pa == Parity::kSin) {  // sin A cos B
      add(Parity::kSin, sum, h);
      add(Parity::kSin, diff, h);
    } else {  // cos A sin B
      add(Parity::kSin, sum, h);
      add(Parity::kSin, diff, mh);
    }
  }

  TrigVectorField& operator+=(const TrigVectorField& o) {
    for (const auto& [key, amp] : o.terms_) {
      Vec2& slot = terms_[key];
      slot[0] += amp[0];
      slot[1] += amp[1];
    }
    return *this;
  }

  TrigVectorField& operator*=(double c) {
    for (auto& [key, amp] : terms_) {
      amp[0] *= c;
      amp[1] *= c;
    }
    return *this;
  }

  friend TrigVectorField operator+(TrigVectorField a, const TrigVectorField& b) { return a += b; }
  friend TrigVectorField operator-(TrigVectorField a, TrigVectorField b) { return a += (b *= -1.0); }
  friend TrigVectorField operator*(double c, TrigVectorField a) { return a *= c; }

  /// Merged terms with amplitude above `prune` (max-norm).
  std::vector<TrigTerm> terms(double prune = kPruneTolerance) const {
    std::vector<TrigTerm> out;
    for (const auto& [key, amp] : terms_) {
      if (std::max(std::abs(amp[0]), std::abs(amp[1])) <= prune) continue;
      out.push_back({amp, std::get<0>(key), {std::get<1>(key), std::get<2>(key)}});
    }
    return out;
  }

  bool empty(double prune = kPruneTolerance) const { return terms(prune).empty(); }

  Vec2 eval(const Vec2& x) const {
    Vec2 v{0.0, 0.0};
    for (const auto& [key, amp] : terms_) {
      const double ph = std::get<1>(key) * x[0] + std::get<2>(key) * x[1];
      const double t = std::get<0>(key) == Parity::kCos ? std::cos(ph) : std::sin(ph);
      v[0] += amp[0] * t;
      v[1] += amp[1] * t;
    }
    return v;
  }

 private:
  std::map<std::tuple<Parity, int, int>, Vec2> terms_;
};

}  // namespace hypomhd
