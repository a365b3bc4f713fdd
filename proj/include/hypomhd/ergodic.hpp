#pragma once

// Empirical diagnostics of ergodic behaviour: time averages, CLT samples,
// ensemble mixing decay, the exponential-moment statistic and an upper bound
// on the weighted path metric rho_r.

#include <Eigen/Dense>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "hypomhd/galerkin.hpp"
#include "hypomhd/parallel.hpp"

namespace hypomhd {

enum class ObservableKind { kConstant, kModeCoefficient, kModeSquare, kTotalEnergy, kBoundedLipschitz };

struct Observable {
  ObservableKind kind = ObservableKind::kTotalEnergy;
  Mode mode{};
  double value = 0.0;  // constant value, or tanh scale for bounded_lipschitz

  static Observable constant(double c) { return {ObservableKind::kConstant, {}, c}; }
  static Observable mode_coefficient(Mode m) { return {ObservableKind::kModeCoefficient, m, 0.0}; }
  static Observable mode_square(Mode m) { return {ObservableKind::kModeSquare, m, 0.0}; }
  static Observable total_energy() { return {ObservableKind::kTotalEnergy, {}, 0.0}; }
  /// x -> tanh(eta * x) of a mode coefficient.
  static Observable bounded_lipschitz(Mode m, double eta = 1.0) { return {ObservableKind::kBoundedLipschitz, m, eta}; }

  bool needs_mode() const {
    return kind == ObservableKind::kModeCoefficient || kind == ObservableKind::kModeSquare ||
           kind == ObservableKind::kBoundedLipschitz;
  }

  std::string name() const {
    switch (kind) {
      case ObservableKind::kConstant: return "constant";
      case ObservableKind::kModeCoefficient: return "mode_coefficient(" + to_string(mode) + ")";
      case ObservableKind::kModeSquare: return "mode_square(" + to_string(mode) + ")";
      case ObservableKind::kTotalEnergy: return "total_energy";
      case ObservableKind::kBoundedLipschitz: return "bounded_lipschitz(" + to_string(mode) + ")";
    }
    return "?";
  }
};

/// An observable resolved against a truncation.
class BoundObservable {
 public:
  BoundObservable(const Observable& obs, const Truncation& trunc) : obs_(obs) {
    if (obs.needs_mode()) {
      const auto i = trunc.index(obs.mode);
      if (!i) throw DomainError("observable mode " + to_string(obs.mode) + " outside truncation");
      index_ = Eigen::Index(*i);
    }
  }

  double operator()(const VectorXd& U) const {
    switch (obs_.kind) {
      case ObservableKind::kConstant: return obs_.value;
      case ObservableKind::kModeCoefficient: return U[index_];
      case ObservableKind::kModeSquare: return U[index_] * U[index_];
      case ObservableKind::kTotalEnergy: return U.squaredNorm();
      case ObservableKind::kBoundedLipschitz: return std::tanh(obs_.value * U[index_]);
    }
    return 0.0;
  }

 private:
  Observable obs_;
  Eigen::Index index_ = 0;
};

struct ErgodicReport {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
};

/// Batch-means standard error of the mean of `x`.
inline double batch_means_error(const std::vector<double>& x, std::size_t batches = 20) {
  if (x.size() < 2 * batches) batches = std::max<std::size_t>(2, x.size() / 2);
  if (x.size() < 2 * batches) return 0.0;
  const std::size_t per = x.size() / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b)
    means[b] = std::accumulate(x.begin() + std::ptrdiff_t(b * per), x.begin() + std::ptrdiff_t((b + 1) * per), 0.0) /
               double(per);
  const double mu = std::accumulate(means.begin(), means.end(), 0.0) / double(batches);
  double v = 0.0;
  for (double m : means) v += (m - mu) * (m - mu);
  v /= double(batches - 1);
  return std::sqrt(v / double(batches));
}

/// Trapezoid average over [burn_in, T] with batch-means error bars.
inline ErgodicReport time_average(const TrajectoryRecord& rec, const BoundObservable& obs, double burn_in,
                                  std::uint64_t seed = 0, std::size_t batches = 20) {
  if (rec.times.empty() || !(burn_in < rec.times.back()))
    throw PreconditionError("time_average: burn-in leaves an empty window");
  std::vector<double> t, v;
  for (std::size_t n = 0; n < rec.times.size(); ++n)
    if (rec.times[n] >= burn_in - 1e-12) {
      t.push_back(rec.times[n]);
      v.push_back(obs(rec.states[n]));
    }
  if (t.size() < 2) throw PreconditionError("time_average: window holds fewer than two snapshots");
  double integral = 0.0;
  for (std::size_t n = 0; n + 1 < t.size(); ++n) integral += 0.5 * (t[n + 1] - t[n]) * (v[n] + v[n + 1]);
  ErgodicReport r;
  r.estimate = integral / (t.back() - t.front());
  r.standard_error = batch_means_error(v, batches);
  r.sample_count = v.size();
  r.seed = seed;
  return r;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Kolmogorov asymptotic survival function Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2).
inline double kolmogorov_survival(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double s = 0.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    s += (j % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// KS test against the normal distribution with fitted mean and variance.
inline KsResult ks_normal_test(std::vector<double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw PreconditionError("ks_normal_test: need at least two samples");
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= double(n - 1);
  if (!(var > 0.0)) throw DomainError("ks_normal_test: degenerate variance");
  const double sd = std::sqrt(var);
  std::sort(x.begin(), x.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double F = 0.5 * std::erfc(-(x[i] - mu) / (sd * std::sqrt(2.0)));
    d = std::max({d, double(i + 1) / double(n) - F, F - double(i) / double(n)});
  }
  const double sn = std::sqrt(double(n));
  return {d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)};
}

inline double sample_variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  double v = 0.0;
  for (double y : x) v += (y - mu) * (y - mu);
  return v / double(x.size() - 1);
}

/// Integrates obs along one trajectory without storing it: returns
/// int_{burn_in}^{burn_in + T} obs dt (trapezoid) and the observable values at snapshot times.
struct StreamedRun {
  double integral = 0.0;
  std::vector<double> samples;  // observable every `stride` steps from t = 0
};

inline StreamedRun stream_observable(const GalerkinModel& model, const StochasticForcing& forcing,
                                     const BoundObservable& obs, VectorXd U, double burn_in, double horizon,
                                     std::uint64_t seed, int stride = 0) {
  const double dt = model.params().dt;
  const std::size_t nb = std::size_t(std::llround(burn_in / dt));
  const std::size_t nt = step_count(horizon, dt);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  const double s = std::sqrt(dt);
  std::vector<double> dW(forcing.dimension());
  StreamedRun out;
  double prev = 0.0;
  for (std::size_t n = 0; n <= nb + nt; ++n) {
    const double f = obs(U);
    if (stride > 0 && n % std::size_t(stride) == 0) out.samples.push_back(f);
    if (n > nb) out.integral += 0.5 * dt * (prev + f);
    prev = f;
    if (n == nb + nt) break;
    for (double& w : dW) w = s * normal(gen);
    U = step(model, forcing, U, dW, double(n) * dt);
  }
  return out;
}

struct CltResult {
  std::vector<double> deviations;
  double pilot_mean = 0.0;
  double sample_variance = 0.0;
  KsResult ks;
};

/// (1/sqrt(T)) int (obs - m_hat) dt per replica, m_hat from a long pilot run.
inline CltResult clt_sample(const GalerkinModel& model, const StochasticForcing& forcing, const BoundObservable& obs,
                            const VectorXd& U0, double horizon, std::size_t replicas, std::uint64_t seed,
                            double pilot_horizon, double burn_in = 0.0, unsigned workers = 1) {
  if (replicas < 50) throw PreconditionError("clt_sample: at least 50 replicas required");
  CltResult r;
  const StreamedRun pilot = stream_observable(model, forcing, obs, U0, burn_in, pilot_horizon, derive_seed(seed, 0));
  r.pilot_mean = pilot.integral / pilot_horizon;
  const double scale = 1.0 / std::sqrt(horizon);
  r.deviations = run_indexed(replicas, workers, [&](std::size_t i) {
    const StreamedRun run = stream_observable(model, forcing, obs, U0, burn_in, horizon, derive_seed(seed, i + 1));
    return scale * (run.integral - r.pilot_mean * horizon);
  });
  r.sample_variance = sample_variance(r.deviations);
  r.ks = ks_normal_test(r.deviations);
  return r;
}

struct MixingReport {
  std::vector<double> times;
  std::vector<double> difference;
  std::vector<double> standard_error;
  std::optional<double> rate;
  double rate_half_width = 0.0;  // 95% band from the weighted fit
  double r_squared = 0.0;
  std::size_t fit_points = 0;
  std::string status;  // "ok" or "rate not identifiable"
};

/// Weighted log-linear fit of |E_a obs - E_b obs| over the points clearly above
/// the Monte Carlo floor (difference > 3 standard errors).
inline MixingReport fit_mixing(std::vector<double> times, std::vector<double> diff, std::vector<double> se) {
  MixingReport r;
  std::vector<double> x, y, w;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (diff[i] > 3.0 * se[i] && diff[i] > 0.0) {
      x.push_back(times[i]);
      y.push_back(std::log(diff[i]));
      w.push_back(se[i] > 0.0 ? (diff[i] / se[i]) * (diff[i] / se[i]) : 1e12);
    }
  r.times = std::move(times);
  r.difference = std::move(diff);
  r.standard_error = std::move(se);
  r.fit_points = x.size();
  if (x.size() < 3) {
    r.status = "rate not identifiable";
    return r;
  }
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sw += w[i], sx += w[i] * x[i], sy += w[i] * y[i];
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
    syy += w[i] * (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) {
    r.status = "rate not identifiable";
    return r;
  }
  const double slope = sxy / sxx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (my + slope * (x[i] - mx));
    sse += w[i] * e * e;
  }
  r.rate = -slope;
  r.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  r.rate_half_width = 1.96 * std::sqrt(sse / double(x.size() - 2) / sxx);
  r.status = "ok";
  return r;
}

/// Two independent ensembles from U0_a and U0_b; observable sampled every
/// `stride` steps on [0, T].
inline MixingReport mixing_decay_estimate(const GalerkinModel& model, const StochasticForcing& forcing,
                                          const BoundObservable& obs, const VectorXd& U0_a, const VectorXd& U0_b,
                                          std::size_t ensemble, double horizon, int stride, std::uint64_t seed,
                                          unsigned workers = 1) {
  if (ensemble < 2) throw PreconditionError("mixing_decay_estimate: ensemble must hold at least two replicas");
  if (stride < 1) throw DomainError("mixing_decay_estimate: stride must be >= 1");
  auto runs = run_indexed(2 * ensemble, workers, [&](std::size_t i) {
    const VectorXd& U0 = i < ensemble ? U0_a : U0_b;
    return stream_observable(model, forcing, obs, U0, 0.0, horizon, derive_seed(seed, i), stride).samples;
  });
  const std::size_t T = runs.front().size();
  std::vector<double> times(T), diff(T), se(T);
  for (std::size_t n = 0; n < T; ++n) {
    double ma = 0, mb = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < ensemble; ++i) ma += runs[i][n], mb += runs[ensemble + i][n];
    ma /= double(ensemble);
    mb /= double(ensemble);
    for (std::size_t i = 0; i < ensemble; ++i) {
      va += (runs[i][n] - ma) * (runs[i][n] - ma);
      vb += (runs[ensemble + i][n] - mb) * (runs[ensemble + i][n] - mb);
    }
    va /= double(ensemble - 1);
    vb /= double(ensemble - 1);
    times[n] = double(n) * double(stride) * model.params().dt;
    diff[n] = std::abs(ma - mb);
    se[n] = std::sqrt(va / double(ensemble) + vb / double(ensemble));
  }
  return fit_mixing(std::move(times), std::move(diff), std::move(se));
}

/// log of exp(eta ||U_t||^2 + (eta/2) e^{-t/2} int_0^t <A U, U> ds) at each snapshot.
inline std::vector<double> exp_moment_probe(const TrajectoryRecord& rec, const GalerkinModel& model, double eta) {
  if (!(eta > 0.0)) throw DomainError("exp_moment_probe: eta must be positive");
  std::vector<double> out(rec.states.size());
  double integral = 0.0;
  double prev = 0.0;
  for (std::size_t n = 0; n < rec.states.size(); ++n) {
    const double d = model.dissipation(rec.states[n]);
    if (n > 0) integral += 0.5 * (rec.times[n] - rec.times[n - 1]) * (prev + d);
    prev = d;
    out[n] = eta * rec.states[n].squaredNorm() + 0.5 * eta * std::exp(-0.5 * rec.times[n]) * integral;
  }
  return out;
}

/// log of the mean of exp(x_i), evaluated without overflow.
inline double log_mean_exp(const std::vector<double>& x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s / double(x.size()));
}

/// int_0^1 exp(eta r ||gamma(t)||^2) ||gamma'(t)|| dt along the straight line from U1 to U2.
inline double rho_upper_bound(const VectorXd& U1, const VectorXd& U2, double eta, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw DomainError("rho_upper_bound: r must lie in (0, 1]");
  if (!(eta >= 0.0)) throw DomainError("rho_upper_bound: eta must be nonnegative");
  const VectorXd d = U2 - U1;
  const double len = d.norm();
  if (len == 0.0) return 0.0;
  const double a = U1.squaredNorm(), b = 2.0 * U1.dot(d), c = d.squaredNorm();
  auto f = [&](double t) { return std::exp(eta * r * (a + t * (b + t * c))) * len; };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-13);
}

}  // namespace hypomhd
