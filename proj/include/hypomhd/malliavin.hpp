#pragma once

// Variational flows along a frozen solver path and the Malliavin matrix
//
//   M_{0,T} = sum_l (alpha_l)^2 int_0^T K_{r,T}^* sigma_l (x) K_{r,T}^* sigma_l dr.
//
// The discrete Jacobian is the exact derivative of one exponential
// Euler-Maruyama step, and the adjoint is its exact transpose.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "hypomhd/galerkin.hpp"
#include "hypomhd/reachability.hpp"

namespace hypomhd {

/// A simulated path with every step stored, plus the model that produced it.
class FrozenPath {
 public:
  FrozenPath(const GalerkinModel& model, const TrajectoryRecord& rec) : model_(&model), rec_(&rec) {
    if (!rec.complete()) throw PreconditionError("FrozenPath: record is strided or incomplete");
    if (std::abs(rec.dt - model.params().dt) > 1e-15 * model.params().dt)
      throw PreconditionError("FrozenPath: record step differs from model step");
  }

  const GalerkinModel& model() const { return *model_; }
  const TrajectoryRecord& record() const { return *rec_; }
  std::size_t steps() const { return rec_->steps; }
  double dt() const { return rec_->dt; }
  double horizon() const { return double(rec_->steps) * rec_->dt; }
  const VectorXd& state(std::size_t n) const { return rec_->states[n]; }

  /// Grid index of time t; t must lie on the step grid.
  std::size_t step_index(double t) const {
    const double x = t / dt();
    const double n = std::round(x);
    if (std::abs(x - n) > 1e-6 || n < 0 || n > double(steps()))
      throw PreconditionError("time " + std::to_string(t) + " is not on the path grid");
    return std::size_t(n);
  }

  bool linear() const { return !model_->params().nonlinearity_enabled; }

  /// xi -> E (xi - dt L_n xi).
  VectorXd propagate(std::size_t n, const VectorXd& xi) const {
    VectorXd y = xi;
    if (!linear()) y -= dt() * model_->tensor().linearization_apply(state(n), xi);
    return y.cwiseProduct(model_->decay());
  }

  /// Transpose of propagate: y -> (I - dt L_n^T)(E y).
  VectorXd propagate_transpose(std::size_t n, const VectorXd& y) const {
    VectorXd z = y.cwiseProduct(model_->decay());
    if (!linear()) z -= dt() * model_->tensor().linearization_transpose_apply(state(n), z);
    return z;
  }

 private:
  const GalerkinModel* model_;
  const TrajectoryRecord* rec_;
};

inline void check_interval(const FrozenPath& path, std::size_t a, std::size_t b) {
  if (a > b) throw PreconditionError("interval end precedes its start");
  (void)path;
}

inline VectorXd jacobian_apply(const FrozenPath& path, const VectorXd& xi, double s, double t) {
  const std::size_t a = path.step_index(s), b = path.step_index(t);
  check_interval(path, a, b);
  VectorXd j = xi;
  for (std::size_t n = a; n < b; ++n) j = path.propagate(n, j);
  return j;
}

/// Second variation with zero initial datum, driven by B(J xi, J xi') + B(J xi', J xi).
inline VectorXd second_variation_apply(const FrozenPath& path, const VectorXd& xi, const VectorXd& xi2, double s,
                                       double t) {
  const std::size_t a = path.step_index(s), b = path.step_index(t);
  check_interval(path, a, b);
  VectorXd rho = VectorXd::Zero(xi.size());
  if (path.linear()) return rho;
  const TriadTensor& B = path.model().tensor();
  VectorXd j1 = xi, j2 = xi2;
  for (std::size_t n = a; n < b; ++n) {
    const VectorXd src = B.apply(j1, j2) + B.apply(j2, j1);
    VectorXd next = rho - path.dt() * (B.linearization_apply(path.state(n), rho) + src);
    rho = next.cwiseProduct(path.model().decay());
    j1 = path.propagate(n, j1);
    j2 = path.propagate(n, j2);
  }
  return rho;
}

/// K_{r,T} phi, the backward adjoint from T down to r.
inline VectorXd adjoint_apply(const FrozenPath& path, const VectorXd& phi, double r, double T) {
  const std::size_t a = path.step_index(r), b = path.step_index(T);
  check_interval(path, a, b);
  VectorXd rho = phi;
  for (std::size_t n = b; n-- > a;) rho = path.propagate_transpose(n, rho);
  return rho;
}

/// Trapezoid weights on a grid of `steps` intervals.
inline std::vector<double> trapezoid_weights(std::size_t steps, double dt) {
  std::vector<double> w(steps + 1, dt);
  w.front() = w.back() = steps == 0 ? 0.0 : 0.5 * dt;
  return w;
}

/// Rows n = 0..steps, columns = noise entries: <sigma_l, K_{r_n,T} phi>.
inline MatrixXd adjoint_profile(const FrozenPath& path, const StochasticForcing& forcing, const VectorXd& phi) {
  const std::size_t N = path.steps();
  MatrixXd prof(Eigen::Index(N + 1), Eigen::Index(forcing.dimension()));
  VectorXd rho = phi;
  const auto idx = forcing.index();
  for (std::size_t n = N + 1; n-- > 0;) {
    for (std::size_t e = 0; e < idx.size(); ++e) {
      // canonical sign folded into the amplitude; the pairing is squared downstream
      prof(Eigen::Index(n), Eigen::Index(e)) = rho[Eigen::Index(idx[e])];
    }
    if (n > 0) rho = path.propagate_transpose(n - 1, rho);
  }
  return prof;
}

/// <M_{0,T} phi, phi> by trapezoid quadrature on the step grid.
inline double malliavin_quadratic_form(const FrozenPath& path, const StochasticForcing& forcing, const VectorXd& phi) {
  const MatrixXd prof = adjoint_profile(path, forcing, phi);
  const auto w = trapezoid_weights(path.steps(), path.dt());
  double s = 0.0;
  for (Eigen::Index n = 0; n < prof.rows(); ++n)
    for (Eigen::Index e = 0; e < prof.cols(); ++e) {
      const double a = forcing.amplitude()[std::size_t(e)];
      s += w[std::size_t(n)] * a * a * prof(n, e) * prof(n, e);
    }
  return s;
}

struct MalliavinMatrix {
  MatrixXd gram;
  std::vector<Mode> basis;
  std::vector<std::size_t> basis_index;
  double horizon = 0.0;
  std::size_t quadrature_steps = 0;
};

/// State indices of all modes with 0 < |k| <= n.
inline std::vector<std::size_t> low_mode_indices(const Truncation& trunc, int n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < trunc.dim(); ++i)
    if (trunc.mode(i).k.norm2() <= long(n) * n) out.push_back(i);
  return out;
}

/// Gram matrix over the given basis indices (all modes when empty). The
/// backward solves for every basis vector run together as one matrix recursion.
inline MalliavinMatrix assemble_malliavin(const FrozenPath& path, const StochasticForcing& forcing,
                                          std::vector<std::size_t> basis = {}) {
  const GalerkinModel& model = path.model();
  const Truncation& trunc = model.truncation();
  if (basis.empty())
    for (std::size_t i = 0; i < trunc.dim(); ++i) basis.push_back(i);
  const Eigen::Index D = Eigen::Index(trunc.dim()), Bn = Eigen::Index(basis.size());
  MatrixXd R = MatrixXd::Zero(D, Bn);
  for (Eigen::Index c = 0; c < Bn; ++c) {
    if (basis[std::size_t(c)] >= trunc.dim()) throw PreconditionError("assemble_malliavin: basis index out of range");
    R(Eigen::Index(basis[std::size_t(c)]), c) = 1.0;
  }
  const auto w = trapezoid_weights(path.steps(), path.dt());
  const auto idx = forcing.index();
  MatrixXd gram = MatrixXd::Zero(Bn, Bn);
  MatrixXd S(Eigen::Index(idx.size()), Bn);
  for (std::size_t n = path.steps() + 1; n-- > 0;) {
    for (std::size_t e = 0; e < idx.size(); ++e) S.row(Eigen::Index(e)) = forcing.amplitude()[e] * R.row(Eigen::Index(idx[e]));
    gram.noalias() += w[n] * S.transpose() * S;
    if (n == 0) break;
    R = model.decay().asDiagonal() * R;
    if (!path.linear()) {
      const MatrixXd L = model.tensor().linearization(path.state(n - 1));
      R -= path.dt() * (L.transpose() * R);
    }
  }
  MalliavinMatrix m;
  m.gram = 0.5 * (gram + gram.transpose());
  for (std::size_t i : basis) m.basis.push_back(trunc.mode(i));
  m.basis_index = std::move(basis);
  m.horizon = path.horizon();
  m.quadrature_steps = path.steps();
  return m;
}

struct SpectrumReport {
  Eigen::VectorXd eigenvalues;  // ascending
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool psd = false;
};

/// PSD up to -tol * ||G||.
inline SpectrumReport spectrum(const MatrixXd& gram, double tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  SpectrumReport r;
  r.eigenvalues = es.eigenvalues();
  r.min_eigenvalue = r.eigenvalues.size() ? r.eigenvalues[0] : 0.0;
  r.max_eigenvalue = r.eigenvalues.size() ? r.eigenvalues[r.eigenvalues.size() - 1] : 0.0;
  const double scale = std::max(std::abs(r.min_eigenvalue), std::abs(r.max_eigenvalue));
  r.psd = r.min_eigenvalue >= -tol * scale;
  return r;
}

struct ConeSpec {
  double alpha = 0.5;
  int n = 1;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("cone alpha must lie in (0, 1]");
    if (n < 1) throw DomainError("cone level n must be >= 1");
  }
};

struct ConeReport {
  double compressed_min_eig = 0.0;
  double sampled_inf = 0.0;
  double dual_lower_bound = 0.0;
  double dual_mu = 0.0;
  std::size_t samples_evaluated = 0;
};

namespace detail {

inline double min_eig(const MatrixXd& m) {
  if (m.rows() == 0) return std::numeric_limits<double>::infinity();
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()[0];
}

}  // namespace detail

/// Cone probe over {phi : ||P phi||^2 >= alpha ||phi||^2}, where `in_p[i]`
/// marks the coordinates spanned by P.
inline ConeReport cone_infimum(const MatrixXd& G, const std::vector<bool>& in_p, double alpha, int samples,
                               std::uint64_t seed = 0) {
  ConeSpec{alpha, 1}.validate();
  const Eigen::Index D = G.rows();
  if (G.cols() != D || Eigen::Index(in_p.size()) != D) throw PreconditionError("cone_infimum: dimension mismatch");
  std::vector<Eigen::Index> pi, qi;
  for (Eigen::Index i = 0; i < D; ++i) (in_p[std::size_t(i)] ? pi : qi).push_back(i);
  if (pi.empty()) throw PreconditionError("cone_infimum: projection selects no coordinates");

  ConeReport rep;
  MatrixXd Gpp(Eigen::Index(pi.size()), Eigen::Index(pi.size()));
  for (std::size_t a = 0; a < pi.size(); ++a)
    for (std::size_t b = 0; b < pi.size(); ++b) Gpp(Eigen::Index(a), Eigen::Index(b)) = G(pi[a], pi[b]);
  Eigen::SelfAdjointEigenSolver<MatrixXd> comp(Gpp);
  rep.compressed_min_eig = comp.eigenvalues()[0];

  VectorXd shift(D);  // diagonal of P - alpha I
  for (Eigen::Index i = 0; i < D; ++i) shift[i] = (in_p[std::size_t(i)] ? 1.0 : 0.0) - alpha;

  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](VectorXd v) {
    double p2 = 0.0, q2 = 0.0;
    for (Eigen::Index i : pi) p2 += v[i] * v[i];
    for (Eigen::Index i : qi) q2 += v[i] * v[i];
    if (p2 <= 0.0) return;
    if (p2 < alpha * (p2 + q2)) {
      // pull onto the cone boundary, keeping both directions
      const double cp = std::sqrt(alpha / p2), cq = q2 > 0.0 ? std::sqrt((1.0 - alpha) / q2) : 0.0;
      for (Eigen::Index i : pi) v[i] *= cp;
      for (Eigen::Index i : qi) v[i] *= cq;
    }
    const double nn = v.squaredNorm();
    if (nn <= 0.0) return;
    best = std::min(best, v.dot(G * v) / nn);
    ++rep.samples_evaluated;
  };

  // Weak-duality bound: the dual function is concave in mu >= 0.
  auto dual = [&](double mu) { return detail::min_eig(G - mu * MatrixXd(shift.asDiagonal())); };
  const double scale = std::max(G.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  std::vector<double> grid{0.0};
  for (int e = -140; e <= 40; ++e) grid.push_back(scale * std::pow(10.0, e / 10.0));
  std::size_t arg = 0;
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    vals[i] = dual(grid[i]);
    if (vals[i] > vals[arg]) arg = i;
  }
  double lo = grid[arg == 0 ? 0 : arg - 1], hi = grid[std::min(arg + 1, grid.size() - 1)];
  double mu_best = grid[arg], f_best = vals[arg];
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = dual(x1), f2 = dual(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = dual(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = dual(x1);
    }
  }
  for (auto [x, f] : {std::pair{x1, f1}, std::pair{x2, f2}})
    if (f > f_best) f_best = f, mu_best = x;
  rep.dual_lower_bound = f_best;
  rep.dual_mu = mu_best;

  // Structured candidates: lifted compressed eigenvectors, eigenvectors of G
  // and of the shifted dual operators, each moved onto the cone if needed.
  for (Eigen::Index c = 0; c < Gpp.cols(); ++c) {
    VectorXd v = VectorXd::Zero(D);
    for (std::size_t a = 0; a < pi.size(); ++a) v[pi[a]] = comp.eigenvectors()(Eigen::Index(a), c);
    consider(v);
  }
  for (double mu : {0.0, mu_best, grid[arg]}) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(G - mu * MatrixXd(shift.asDiagonal()));
    const MatrixXd& V = es.eigenvectors();
    for (Eigen::Index c = 0; c < D; ++c) consider(V.col(c));
    // At the dual optimum the minimiser sits in the bottom eigenspace on the
    // cone boundary; try boundary combinations of the lowest pairs.
    const Eigen::Index low = std::min<Eigen::Index>(D, 4);
    for (Eigen::Index i = 0; i < low; ++i)
      for (Eigen::Index j = i + 1; j < low; ++j) {
        const VectorXd v1 = V.col(i), v2 = V.col(j);
        const double a = v1.dot(shift.cwiseProduct(v1)), b = v1.dot(shift.cwiseProduct(v2)),
                     c = v2.dot(shift.cwiseProduct(v2));
        // c t^2 + 2 b t + a = 0 with v = v1 + t v2
        if (std::abs(c) < 1e-300) continue;
        const double disc = b * b - a * c;
        if (disc < 0.0) continue;
        for (double sgn : {-1.0, 1.0}) consider(v1 + ((-b + sgn * std::sqrt(disc)) / c) * v2);
      }
  }

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(alpha, 1.0);
  for (int s = 0; s < samples; ++s) {
    VectorXd p = VectorXd::Zero(D), q = VectorXd::Zero(D);
    for (Eigen::Index i : pi) p[i] = normal(gen);
    for (Eigen::Index i : qi) q[i] = normal(gen);
    const double a2 = qi.empty() ? 1.0 : unif(gen);
    VectorXd v = std::sqrt(a2) * p / p.norm();
    if (!qi.empty()) v += std::sqrt(1.0 - a2) * q / q.norm();
    consider(v);
  }
  rep.sampled_inf = best;
  return rep;
}

inline ConeReport cone_infimum(const MalliavinMatrix& m, const ConeSpec& cone, int samples, std::uint64_t seed = 0) {
  cone.validate();
  if (m.gram.rows() != Eigen::Index(m.basis.size())) throw PreconditionError("cone_infimum: dimension mismatch");
  std::vector<bool> in_p(m.basis.size());
  for (std::size_t i = 0; i < m.basis.size(); ++i) in_p[i] = m.basis[i].k.norm2() <= long(cone.n) * cone.n;
  return cone_infimum(m.gram, in_p, cone.alpha, samples, seed);
}

/// Modes counted by the unstable quadratic form at level N: magnetic modes on
/// even generations up to 2N and velocity modes on odd generations up to 2N+1,
/// each canonical mode counted once.
inline std::vector<std::size_t> unstable_mode_indices(const Truncation& trunc, const ForcedSet& forced, int N) {
  if (N < 0) throw DomainError("unstable_mode_indices: N must be >= 0");
  const int depth = 2 * N + 1;
  const GenerationTable t = build_generations(forced, depth, forced.max_modulus() * (depth + 1));
  std::set<std::size_t> out;
  for (int g = 0; g <= depth; ++g) {
    const Slot slot = g % 2 == 0 ? Slot::kMagnetic : Slot::kVelocity;
    for (WaveVector k : t.generations[std::size_t(g)]) {
      const WaveVector c = k.is_canonical() ? k : -k;
      const auto w = trunc.wave_index(c);
      if (!w) continue;
      for (Parity m : {Parity::kCos, Parity::kSin}) out.insert(Truncation::index_of(*w, slot, m));
    }
  }
  return {out.begin(), out.end()};
}

inline double unstable_quadratic_form(const VectorXd& phi, const std::vector<std::size_t>& modes) {
  double s = 0.0;
  for (std::size_t i : modes) s += phi[Eigen::Index(i)] * phi[Eigen::Index(i)];
  return s;
}

inline double unstable_quadratic_form(const VectorXd& phi, const Truncation& trunc, const ForcedSet& forced, int N) {
  return unstable_quadratic_form(phi, unstable_mode_indices(trunc, forced, N));
}

/// True when the generation unions up to 2N (magnetic) and 2N+1 (velocity)
/// contain every 0 < |k| <= N.
inline bool generations_span_low_modes(const ForcedSet& forced, int N) {
  const int depth = 2 * N + 1;
  const GenerationTable t = build_generations(forced, depth, forced.max_modulus() * (depth + 1));
  WaveSet even, odd;
  for (int g = 0; g <= depth; ++g) (g % 2 == 0 ? even : odd).insert(t.generations[std::size_t(g)].begin(),
                                                                      t.generations[std::size_t(g)].end());
  for (WaveVector k : lattice_window(N))
    if (!even.count(k) || !odd.count(k)) return false;
  return true;
}

}  // namespace hypomhd
