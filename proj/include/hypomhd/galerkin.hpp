#pragma once

// Galerkin truncation of the stochastic fractional MHD system
//
//   dU + (A U + B(U, U)) dt = Q_b dW,     U = (u, b),
//
// with A = ((-Delta)^alpha, (-Delta)^beta) and
//
//   B(U, V) = ( Pi[u . grad v_u - b . grad v_b],  Pi[u . grad v_b - b . grad v_u] ),
//
// on the modes 0 < |k| <= n_cut, in the unit-normalized cos/sin basis.
// B is available through an exact triad tensor assembled from the symbolic
// advection primitives, and through a dealiased grid transform.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "hypomhd/bracket.hpp"
#include "hypomhd/lattice.hpp"

namespace hypomhd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class BilinearPath { kConvolution, kTransform };

struct EquationParams {
  double alpha = 1.5;
  double beta = 1.5;
  int n_cut = 4;
  double dt = 1e-3;
  bool nonlinearity_enabled = true;
  BilinearPath path = BilinearPath::kTransform;

  void validate() const {
    if (!(alpha > 1.0)) throw DomainError("alpha must exceed 1");
    if (!(beta > 1.0)) throw DomainError("beta must exceed 1");
    if (n_cut < 1) throw DomainError("n_cut must be >= 1");
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
  }
};

/// |k|^{2 alpha} for velocity modes, |k|^{2 beta} for magnetic modes.
inline double dissipation_multiplier(const Mode& mode, const EquationParams& params) {
  if (mode.k.is_zero()) throw DomainError("dissipation_multiplier: zero wavevector");
  const double e = mode.slot == Slot::kVelocity ? params.alpha : params.beta;
  return std::pow(double(mode.k.norm2()), e);
}

struct SpectralState {
  VectorXd coeffs;
  double time = 0.0;

  /// ||U||^2 by Parseval in the unit-normalized basis.
  double energy() const { return coeffs.squaredNorm(); }
};

/// Sparse coefficients of B on basis pairs: B(U, V)[out] += c U[i] V[j].
class TriadTensor {
 public:
  struct Entry {
    std::uint32_t i, j, out;
    double c;
  };

  explicit TriadTensor(const Truncation& trunc) : dim_(trunc.dim()) {
    const auto waves = trunc.wavevectors();
    constexpr double inv_s2 = 1.0 / NormalizationConvention::kScaleSquared;
    for (std::size_t a = 0; a < waves.size(); ++a)
      for (std::size_t b = 0; b < waves.size(); ++b)
        for (Parity m : {Parity::kCos, Parity::kSin})
          for (Parity mp : {Parity::kCos, Parity::kSin}) {
            const DirectionExpansion e = leray_project(advect(waves[a], m, waves[b], mp), Slot::kVelocity);
            for (const auto& [mode, coef] : e) {
              const auto w = trunc.wave_index(mode.k);
              if (!w) continue;
              const double c = coef * inv_s2;
              auto idx = [](std::size_t wi, Slot s, Parity p) { return std::uint32_t(Truncation::index_of(wi, s, p)); };
              constexpr Slot V = Slot::kVelocity, Mg = Slot::kMagnetic;
              entries_.push_back({idx(a, V, m), idx(b, V, mp), idx(*w, V, mode.m), c});
              entries_.push_back({idx(a, Mg, m), idx(b, Mg, mp), idx(*w, V, mode.m), -c});
              entries_.push_back({idx(a, V, m), idx(b, Mg, mp), idx(*w, Mg, mode.m), c});
              entries_.push_back({idx(a, Mg, m), idx(b, V, mp), idx(*w, Mg, mode.m), -c});
            }
          }
  }

  std::size_t dim() const { return dim_; }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  VectorXd apply(const VectorXd& u, const VectorXd& v) const {
    VectorXd out = VectorXd::Zero(Eigen::Index(dim_));
    for (const Entry& e : entries_) out[e.out] += e.c * u[e.i] * v[e.j];
    return out;
  }

  /// xi -> B(u, xi) + B(xi, u).
  VectorXd linearization_apply(const VectorXd& u, const VectorXd& xi) const {
    VectorXd out = VectorXd::Zero(Eigen::Index(dim_));
    for (const Entry& e : entries_) out[e.out] += e.c * (u[e.i] * xi[e.j] + xi[e.i] * u[e.j]);
    return out;
  }

  /// Transpose of linearization_apply.
  VectorXd linearization_transpose_apply(const VectorXd& u, const VectorXd& y) const {
    VectorXd out = VectorXd::Zero(Eigen::Index(dim_));
    for (const Entry& e : entries_) {
      out[e.j] += e.c * u[e.i] * y[e.out];
      out[e.i] += e.c * u[e.j] * y[e.out];
    }
    return out;
  }

  MatrixXd linearization(const VectorXd& u) const {
    MatrixXd L = MatrixXd::Zero(Eigen::Index(dim_), Eigen::Index(dim_));
    for (const Entry& e : entries_) {
      L(e.out, e.j) += e.c * u[e.i];
      L(e.out, e.i) += e.c * u[e.j];
    }
    return L;
  }

 private:
  std::size_t dim_;
  std::vector<Entry> entries_;
};

/// Pseudo-spectral evaluation of B on an M x M grid, M > 3 n_cut so that no
/// quadratic product aliases back onto a retained mode.
class GridTransform {
 public:
  static int default_resolution(int n_cut) { return 3 * n_cut + 2 - (3 * n_cut) % 2; }

  GridTransform(const Truncation& trunc, int resolution = 0) : trunc_(&trunc) {
    const int n = trunc.n_cut();
    M_ = resolution == 0 ? default_resolution(n) : resolution;
    if (M_ <= 3 * n)
      throw PreconditionError("GridTransform: grid " + std::to_string(M_) + " too small for dealiasing n_cut " +
                              std::to_string(n) + " (need > " + std::to_string(3 * n) + ")");
    const int K = 2 * n + 1;
    table_.resize(std::size_t(K) * M_);
    for (int q = -n; q <= n; ++q)
      for (int i = 0; i < M_; ++i)
        table_[std::size_t(q + n) * M_ + i] = std::polar(1.0, q * 2.0 * std::numbers::pi * i / M_);
  }

  int resolution() const { return M_; }

  VectorXd bilinear(const VectorXd& U, const VectorXd& V) const {
    const auto waves = trunc_->wavevectors();
    const std::size_t W = waves.size();
    using C = std::complex<double>;
    const C I(0.0, 1.0);
    // amplitudes per wave of: u1 u2 b1 b2 from U; d_l v_j, d_l w_j from V.
    std::vector<std::vector<C>> amp(12, std::vector<C>(W));
    for (std::size_t w = 0; w < W; ++w) {
      const WaveVector k = waves[w];
      const Vec2 d = basis_direction(k, Parity::kCos);
      auto a = [&](const VectorXd& X, Slot s) {
        return C(X[Truncation::index_of(w, s, Parity::kCos)], X[Truncation::index_of(w, s, Parity::kSin)]) / kBasisScale;
      };
      const C au = a(U, Slot::kVelocity), ab = a(U, Slot::kMagnetic);
      const C av = a(V, Slot::kVelocity), aw = a(V, Slot::kMagnetic);
      const double kk[2] = {double(k.k1), double(k.k2)};
      for (int j = 0; j < 2; ++j) {
        amp[j][w] = au * d[j];
        amp[2 + j][w] = ab * d[j];
        for (int l = 0; l < 2; ++l) {
          amp[4 + 2 * j + l][w] = I * kk[l] * av * d[j];  // d_l v_j
          amp[8 + 2 * j + l][w] = I * kk[l] * aw * d[j];  // d_l w_j
        }
      }
    }
    const std::size_t P = std::size_t(M_) * M_;
    std::vector<std::vector<double>> f(12, std::vector<double>(P));
    for (int q = 0; q < 12; ++q) synthesize(amp[q], f[q]);

    std::vector<double> vel[2] = {std::vector<double>(P), std::vector<double>(P)};
    std::vector<double> mag[2] = {std::vector<double>(P), std::vector<double>(P)};
    for (std::size_t p = 0; p < P; ++p)
      for (int i = 0; i < 2; ++i) {
        double sv = 0.0, sm = 0.0;
        for (int j = 0; j < 2; ++j) {
          const double uj = f[j][p], bj = f[2 + j][p];
          const double dv = f[4 + 2 * i + j][p], dw = f[8 + 2 * i + j][p];  // d_j v_i, d_j w_i
          sv += uj * dv - bj * dw;
          sm += uj * dw - bj * dv;
        }
        vel[i][p] = sv;
        mag[i][p] = sm;
      }

    VectorXd out = VectorXd::Zero(Eigen::Index(trunc_->dim()));
    project(vel, Slot::kVelocity, out);
    project(mag, Slot::kMagnetic, out);
    return out;
  }

 private:
  const std::complex<double>& e(int q, int i) const { return table_[std::size_t(q + trunc_->n_cut()) * M_ + i]; }

  // out(x) = Re sum_w amp_w exp(i k_w . x)
  void synthesize(const std::vector<std::complex<double>>& amp, std::vector<double>& out) const {
    const int n = trunc_->n_cut();
    const auto waves = trunc_->wavevectors();
    std::vector<std::complex<double>> F(std::size_t(n + 1) * M_);
    for (std::size_t w = 0; w < waves.size(); ++w) {
      if (amp[w] == 0.0) continue;
      auto* row = &F[std::size_t(waves[w].k1) * M_];
      for (int i2 = 0; i2 < M_; ++i2) row[i2] += amp[w] * e(waves[w].k2, i2);
    }
    for (int i1 = 0; i1 < M_; ++i1)
      for (int i2 = 0; i2 < M_; ++i2) {
        double s = 0.0;
        for (int k1 = 0; k1 <= n; ++k1) s += (F[std::size_t(k1) * M_ + i2] * e(k1, i1)).real();
        out[std::size_t(i1) * M_ + i2] = s;
      }
  }

  // Galerkin + Leray projection of a physical 2-vector field onto the slot's modes.
  void project(const std::vector<double> (&g)[2], Slot slot, VectorXd& out) const {
    const int n = trunc_->n_cut();
    const auto waves = trunc_->wavevectors();
    using C = std::complex<double>;
    std::vector<C> H[2] = {std::vector<C>(std::size_t(n + 1) * M_), std::vector<C>(std::size_t(n + 1) * M_)};
    for (int c = 0; c < 2; ++c)
      for (int q1 = 0; q1 <= n; ++q1)
        for (int i1 = 0; i1 < M_; ++i1) {
          const C w = std::conj(e(q1, i1));
          for (int i2 = 0; i2 < M_; ++i2) H[c][std::size_t(q1) * M_ + i2] += g[c][std::size_t(i1) * M_ + i2] * w;
        }
    const double norm = 4.0 * std::numbers::pi * std::numbers::pi / (double(M_) * M_ * kBasisScale);
    for (std::size_t w = 0; w < waves.size(); ++w) {
      const WaveVector k = waves[w];
      C G[2] = {0.0, 0.0};
      for (int c = 0; c < 2; ++c)
        for (int i2 = 0; i2 < M_; ++i2) G[c] += H[c][std::size_t(k.k1) * M_ + i2] * std::conj(e(k.k2, i2));
      const Vec2 d = basis_direction(k, Parity::kCos);
      out[Eigen::Index(Truncation::index_of(w, slot, Parity::kCos))] = norm * (d[0] * G[0].real() + d[1] * G[1].real());
      out[Eigen::Index(Truncation::index_of(w, slot, Parity::kSin))] = norm * (d[0] * G[0].imag() + d[1] * G[1].imag());
    }
  }

  const Truncation* trunc_;
  int M_;
  std::vector<std::complex<double>> table_;
};

struct NoiseEntry {
  WaveVector k;
  Parity m = Parity::kCos;
  double amplitude = 1.0;
};

/// Q_b e_{k,m} = amplitude * sigma_hat_k^m (unit-normalized magnetic mode).
struct NoiseSpec {
  std::vector<NoiseEntry> entries;

  std::size_t dimension() const { return entries.size(); }

  /// E_0 = sum of squared amplitudes.
  double energy_E0() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.amplitude * e.amplitude;
    return s;
  }

  /// Both parities with the same amplitude for every k in z0.
  static NoiseSpec uniform(const std::vector<WaveVector>& z0, double amplitude) {
    NoiseSpec n;
    for (WaveVector k : z0)
      for (Parity m : {Parity::kCos, Parity::kSin}) n.entries.push_back({k, m, amplitude});
    return n;
  }

  std::vector<WaveVector> wavevectors() const {
    std::vector<WaveVector> out;
    for (const auto& e : entries)
      if (std::find(out.begin(), out.end(), e.k) == out.end()) out.push_back(e.k);
    return out;
  }
};

class GalerkinModel {
 public:
  explicit GalerkinModel(EquationParams params) : params_(params), trunc_(params.n_cut) {
    params_.validate();
    multipliers_.resize(Eigen::Index(trunc_.dim()));
    for (std::size_t i = 0; i < trunc_.dim(); ++i) multipliers_[Eigen::Index(i)] = dissipation_multiplier(trunc_.mode(i), params_);
    decay_ = (-multipliers_ * params_.dt).array().exp();
  }

  GalerkinModel(const GalerkinModel&) = delete;
  GalerkinModel& operator=(const GalerkinModel&) = delete;

  const EquationParams& params() const { return params_; }
  const Truncation& truncation() const { return trunc_; }
  std::size_t dim() const { return trunc_.dim(); }
  const VectorXd& multipliers() const { return multipliers_; }
  /// Per-mode exp(-lambda dt).
  const VectorXd& decay() const { return decay_; }

  const TriadTensor& tensor() const {
    std::call_once(tensor_once_, [this] { tensor_ = std::make_unique<TriadTensor>(trunc_); });
    return *tensor_;
  }

  const GridTransform& transform() const {
    std::call_once(transform_once_, [this] { transform_ = std::make_unique<GridTransform>(trunc_); });
    return *transform_;
  }

  VectorXd bilinear(const VectorXd& U, const VectorXd& V, BilinearPath path) const {
    return path == BilinearPath::kConvolution ? tensor().apply(U, V) : transform().bilinear(U, V);
  }
  VectorXd bilinear(const VectorXd& U, const VectorXd& V) const { return bilinear(U, V, params_.path); }

  /// F(U) = -A U - B(U, U).
  VectorXd drift(const VectorXd& U) const {
    VectorXd f = -multipliers_.cwiseProduct(U);
    if (params_.nonlinearity_enabled) f -= bilinear(U, U);
    return f;
  }

  /// [F(U), e] = A e + B(e, U) + B(U, e) for a constant direction e.
  VectorXd drift_bracket(const VectorXd& U, const VectorXd& e) const {
    VectorXd y = multipliers_.cwiseProduct(e);
    if (params_.nonlinearity_enabled) y += bilinear(e, U) + bilinear(U, e);
    return y;
  }

  VectorXd zero() const { return VectorXd::Zero(Eigen::Index(dim())); }

  VectorXd unit(const Mode& mode) const {
    const auto i = trunc_.index(mode);
    if (!i) throw DomainError("mode " + to_string(mode) + " outside truncation");
    VectorXd v = zero();
    v[Eigen::Index(*i)] = 1.0;
    return v;
  }

  /// ||Lambda^alpha u||^2 + ||Lambda^beta b||^2 = <A U, U>.
  double dissipation(const VectorXd& U) const { return U.cwiseProduct(multipliers_).dot(U); }

 private:
  EquationParams params_;
  Truncation trunc_;
  VectorXd multipliers_;
  VectorXd decay_;
  mutable std::once_flag tensor_once_, transform_once_;
  mutable std::unique_ptr<TriadTensor> tensor_;
  mutable std::unique_ptr<GridTransform> transform_;
};

/// Noise spec resolved against a truncation: state index, signed amplitude,
/// and the exact one-step stochastic-convolution gain.
class StochasticForcing {
 public:
  StochasticForcing(const GalerkinModel& model, const NoiseSpec& noise) : spec_(noise) {
    const double dt = model.params().dt;
    for (const auto& e : noise.entries) {
      if (e.amplitude == 0.0) throw DomainError("noise amplitude for " + to_string(e.k) + " must be non-zero");
      if (e.k.is_zero()) throw DomainError("noise wavevector must be non-zero");
      const CanonicalRep cr = canonical_rep(e.k, e.m);
      const auto idx = model.truncation().index(Mode{Slot::kMagnetic, cr.k, e.m});
      if (!idx) throw DomainError("noise wavevector " + to_string(e.k) + " outside truncation");
      const double lambda = model.multipliers()[Eigen::Index(*idx)];
      index_.push_back(*idx);
      amplitude_.push_back(cr.sign * e.amplitude);
      // sqrt((1 - e^{-2 lambda dt}) / (2 lambda dt)): variance of the exact OU convolution per unit dW^2.
      gain_.push_back(std::sqrt(-std::expm1(-2.0 * lambda * dt) / (2.0 * lambda * dt)));
    }
  }

  std::size_t dimension() const { return index_.size(); }
  const NoiseSpec& spec() const { return spec_; }
  std::span<const std::size_t> index() const { return index_; }
  /// Amplitude along the canonical mode (sign folded in).
  std::span<const double> amplitude() const { return amplitude_; }
  std::span<const double> gain() const { return gain_; }

  /// <b, Q_b dW>.
  double pairing(const VectorXd& U, std::span<const double> dW) const {
    double s = 0.0;
    for (std::size_t e = 0; e < index_.size(); ++e) s += U[Eigen::Index(index_[e])] * amplitude_[e] * dW[e];
    return s;
  }

 private:
  NoiseSpec spec_;
  std::vector<std::size_t> index_;
  std::vector<double> amplitude_;
  std::vector<double> gain_;
};

/// One exponential Euler-Maruyama step: U' = e^{-A dt}(U - dt B(U, U)) + G dW.
inline VectorXd step(const GalerkinModel& model, const StochasticForcing& forcing, const VectorXd& U,
                     std::span<const double> dW, double time = 0.0) {
  if (dW.size() != forcing.dimension())
    throw PreconditionError("step: noise increment has length " + std::to_string(dW.size()) + ", expected " +
                            std::to_string(forcing.dimension()));
  VectorXd next = U;
  if (model.params().nonlinearity_enabled) next -= model.params().dt * model.bilinear(U, U);
  next = next.cwiseProduct(model.decay());
  const auto idx = forcing.index();
  for (std::size_t e = 0; e < idx.size(); ++e)
    next[Eigen::Index(idx[e])] += forcing.amplitude()[e] * forcing.gain()[e] * dW[e];
  if (!next.allFinite())
    throw IntegrationFailure(time + model.params().dt,
                             "non-finite state at t = " + std::to_string(time + model.params().dt));
  return next;
}

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<VectorXd> states;
  /// Brownian increments per step (length = steps) when stored.
  std::vector<VectorXd> increments;
  int stride = 1;
  double dt = 0.0;
  std::size_t steps = 0;

  bool complete() const { return stride == 1 && states.size() == steps + 1; }
};

inline std::size_t step_count(double horizon, double dt) {
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  return std::size_t(std::llround(horizon / dt));
}

/// Integrates with prescribed Brownian increments (one vector per step).
inline TrajectoryRecord replay(const GalerkinModel& model, const StochasticForcing& forcing, const VectorXd& U0,
                               const std::vector<VectorXd>& increments, int stride = 1, bool store_increments = true) {
  if (stride < 1) throw DomainError("snapshot stride must be >= 1");
  TrajectoryRecord rec;
  rec.stride = stride;
  rec.dt = model.params().dt;
  rec.steps = increments.size();
  rec.times.push_back(0.0);
  rec.states.push_back(U0);
  VectorXd U = U0;
  for (std::size_t n = 0; n < increments.size(); ++n) {
    const double t = double(n) * rec.dt;
    U = step(model, forcing, U, std::span<const double>(increments[n].data(), std::size_t(increments[n].size())), t);
    if ((n + 1) % std::size_t(stride) == 0 || n + 1 == increments.size()) {
      rec.times.push_back(double(n + 1) * rec.dt);
      rec.states.push_back(U);
    }
  }
  if (store_increments) rec.increments = increments;
  return rec;
}

/// Brownian increments N(0, dt) for `steps` steps from a seeded generator.
inline std::vector<VectorXd> brownian_increments(std::size_t dimension, std::size_t steps, double dt, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = std::sqrt(dt);
  std::vector<VectorXd> inc(steps, VectorXd(Eigen::Index(dimension)));
  for (auto& v : inc)
    for (Eigen::Index e = 0; e < v.size(); ++e) v[e] = s * normal(gen);
  return inc;
}

/// Deterministic in (model, noise, U0, horizon, seed, stride).
inline TrajectoryRecord simulate(const GalerkinModel& model, const StochasticForcing& forcing, const VectorXd& U0,
                                 double horizon, std::uint64_t seed, int stride = 1, bool store_increments = false) {
  const std::size_t steps = step_count(horizon, model.params().dt);
  if (!store_increments && stride > 1) {
    // Streamed variant: avoids holding all increments for long runs.
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = std::sqrt(model.params().dt);
    TrajectoryRecord rec;
    rec.stride = stride;
    rec.dt = model.params().dt;
    rec.steps = steps;
    rec.times.push_back(0.0);
    rec.states.push_back(U0);
    VectorXd U = U0;
    std::vector<double> dW(forcing.dimension());
    for (std::size_t n = 0; n < steps; ++n) {
      for (double& w : dW) w = s * normal(gen);
      U = step(model, forcing, U, dW, double(n) * rec.dt);
      if ((n + 1) % std::size_t(stride) == 0 || n + 1 == steps) {
        rec.times.push_back(double(n + 1) * rec.dt);
        rec.states.push_back(U);
      }
    }
    return rec;
  }
  return replay(model, forcing, U0, brownian_increments(forcing.dimension(), steps, model.params().dt, seed), stride,
                store_increments);
}

/// Per-step residual of the discrete energy balance
/// ||U_{n+1}||^2 - ||U_n||^2 + 2 dt <A U_n, U_n> - E_0 dt - 2 <b_n, Q_b dW_n>.
inline std::vector<double> energy_balance_residual(const TrajectoryRecord& rec, const GalerkinModel& model,
                                                   const StochasticForcing& forcing) {
  if (!rec.complete()) throw PreconditionError("energy_balance_residual: record must store every step");
  if (rec.increments.size() != rec.steps) throw PreconditionError("energy_balance_residual: missing noise increments");
  const double dt = rec.dt;
  const double e0 = forcing.spec().energy_E0();
  std::vector<double> r(rec.steps);
  for (std::size_t n = 0; n < rec.steps; ++n) {
    const VectorXd& U = rec.states[n];
    const auto& w = rec.increments[n];
    r[n] = rec.states[n + 1].squaredNorm() - U.squaredNorm() + 2.0 * dt * model.dissipation(U) - e0 * dt -
           2.0 * forcing.pairing(U, std::span<const double>(w.data(), std::size_t(w.size())));
  }
  return r;
}

/// splitmix64 finalizer; derives independent per-trajectory seeds.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace hypomhd
