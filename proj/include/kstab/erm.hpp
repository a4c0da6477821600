#ifndef KSTAB_ERM_HPP
#define KSTAB_ERM_HPP

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "kstab/distribution.hpp"
#include "kstab/metrics.hpp"

namespace kstab {

struct ErmConfig {
  KernelSpec kernel;
  LossSpec loss;
  double lambda = 0.1;     // Tikhonov weight
  double beta = 10.0;      // RKHS ball radius
  double grad_tol = 1e-10;
  int max_iter = 20000;

  void validate() const {
    kernel.validate();
    loss.validate();
    if (lambda < 0.0) throw std::invalid_argument("erm: lambda must be >= 0");
    // beta = 0 is the degenerate ball {0}; negative is meaningless
    if (beta < 0.0) throw std::invalid_argument("erm: beta must be >= 0");
  }
};

// Representer-form solution f(x) = sum_j alpha_j k(x_j, x).
struct ErmSolution {
  std::vector<Vector> anchors;
  Vector alpha;
  double rkhs_norm = 0.0;
  double objective = 0.0;
  double risk_term = 0.0;
  double reg_term = 0.0;   // ||f||_k^2
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = true;

  double eval(const KernelSpec& k, const Vector& x) const {
    return function_eval(k, anchors, alpha, x);
  }
};

namespace detail {

// Atoms grouped by distinct input x. The squared-loss data term splits
// into a weighted fit against per-anchor mean targets plus a constant
// within-anchor variance term, so empirical measures over a finite ground
// truth collapse to a handful of anchors regardless of N.
struct Aggregate {
  std::vector<Vector> anchors;
  Vector weight;     // total weight per anchor
  Vector ymean;      // weighted mean target per anchor
  double base = 0.0; // sum_i w_i * (y_i - ymean)^2 / 2
};

inline Aggregate aggregate_by_x(const DiscreteDistribution& dist) {
  struct Cmp {
    bool operator()(const Vector& a, const Vector& b) const {
      if (a.size() != b.size()) return a.size() < b.size();
      for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a(i) != b(i)) return a(i) < b(i);
      return false;
    }
  };
  std::map<Vector, std::size_t, Cmp> index;
  Aggregate agg;
  std::vector<double> w, wy;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const Point& z = dist.atoms()[i];
    auto [it, fresh] = index.try_emplace(z.x, agg.anchors.size());
    if (fresh) {
      agg.anchors.push_back(z.x);
      w.push_back(0.0);
      wy.push_back(0.0);
    }
    w[it->second] += dist.weights()[i];
    wy[it->second] += dist.weights()[i] * z.y;
  }
  const Eigen::Index m = static_cast<Eigen::Index>(agg.anchors.size());
  agg.weight = Eigen::Map<Vector>(w.data(), m);
  agg.ymean = Eigen::Map<Vector>(wy.data(), m).cwiseQuotient(agg.weight);
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const Point& z = dist.atoms()[i];
    const double r = z.y - agg.ymean(static_cast<Eigen::Index>(index[z.x]));
    agg.base += dist.weights()[i] * 0.5 * r * r;
  }
  return agg;
}

inline double weighted_risk(const DiscreteDistribution& dist,
                            const LossSpec& loss, const KernelSpec& kernel,
                            const std::vector<Vector>& anchors,
                            const Vector& alpha) {
  double s = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const Point& z = dist.atoms()[i];
    s += dist.weights()[i] *
         loss_eval(loss, z.y, function_eval(kernel, anchors, alpha, z.x));
  }
  return s;
}

}  // namespace detail

ErmSolution solve_convex(const DiscreteDistribution& dist, const ErmConfig& cfg);

// Closed-form Tikhonov solve for the squared loss. If the unconstrained
// minimizer leaves the ball ||f||_k <= beta, defers to solve_convex.
inline ErmSolution solve_ridge(const DiscreteDistribution& dist,
                               const ErmConfig& cfg) {
  cfg.validate();
  if (cfg.loss.family != LossFamily::squared)
    throw std::invalid_argument("solve_ridge: squared loss required");
  if (!cfg.kernel.positive_definite())
    throw std::invalid_argument("solve_ridge: PDS kernel required");

  const detail::Aggregate agg = detail::aggregate_by_x(dist);
  const Eigen::Index m = static_cast<Eigen::Index>(agg.anchors.size());
  Matrix K = gram_matrix(cfg.kernel, agg.anchors);

  // stationarity of sum_j W_j (ybar_j - (K a)_j)^2 / 2 + lambda a'Ka:
  // (W^1/2 K W^1/2 + 2 lambda I) b = W^1/2 ybar,  a = W^1/2 b
  const Vector sw = agg.weight.cwiseSqrt();
  Matrix A = sw.asDiagonal() * K * sw.asDiagonal();
  A.diagonal().array() += 2.0 * cfg.lambda;
  if (cfg.lambda == 0.0) {
    // ridge jitter against rank deficiency from near-duplicate anchors
    A.diagonal().array() += 1e-10 * K.trace();
  }
  Eigen::LDLT<Matrix> ldlt(A);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("solve_ridge: ill-conditioned system");
  const Vector alpha = sw.asDiagonal() * ldlt.solve(sw.cwiseProduct(agg.ymean));

  ErmSolution sol;
  sol.anchors = agg.anchors;
  sol.alpha = alpha;
  const Vector v = K * alpha;
  sol.reg_term = alpha.dot(v);
  sol.rkhs_norm = std::sqrt(std::max(sol.reg_term, 0.0));
  double fit = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double r = agg.ymean(j) - v(j);
    fit += agg.weight(j) * 0.5 * r * r;
  }
  sol.risk_term = agg.base + fit;
  sol.objective = sol.risk_term + cfg.lambda * sol.reg_term;
  const Vector grad = K * (agg.weight.cwiseProduct(v - agg.ymean) +
                           2.0 * cfg.lambda * alpha);
  sol.grad_norm = grad.norm();
  sol.iterations = 0;

  if (cfg.lambda == 0.0 && sol.grad_norm > 1e-6)
    throw std::runtime_error(
        "solve_ridge: singular system with lambda = 0 (ill-conditioned)");

  if (sol.rkhs_norm > cfg.beta + 1e-9) return solve_convex(dist, cfg);
  return sol;
}

// Iterative solver for convex losses over the ball ||f||_k <= beta.
// Smooth losses use accelerated projected gradient with backtracking;
// nonsmooth ones use projected subgradient steps with deterministic
// restarts, keeping the best iterate.
inline ErmSolution solve_convex(const DiscreteDistribution& dist,
                                const ErmConfig& cfg) {
  cfg.validate();
  if (!cfg.loss.convex())
    throw std::invalid_argument("solve_convex: non-convex loss rejected");
  if (!cfg.kernel.positive_definite())
    throw std::invalid_argument("solve_convex: PDS kernel required");

  // group identical atoms only; general losses cannot merge targets
  std::vector<Vector> anchors;
  std::vector<double> ys, ws;
  {
    for (std::size_t i = 0; i < dist.size(); ++i) {
      const Point& z = dist.atoms()[i];
      bool found = false;
      for (std::size_t j = 0; j < anchors.size(); ++j)
        if (anchors[j] == z.x && ys[j] == z.y) {
          ws[j] += dist.weights()[i];
          found = true;
          break;
        }
      if (!found) {
        anchors.push_back(z.x);
        ys.push_back(z.y);
        ws.push_back(dist.weights()[i]);
      }
    }
  }
  // distinct anchor positions for the expansion
  std::vector<Vector> xs;
  std::vector<std::size_t> xof(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    bool found = false;
    for (std::size_t j = 0; j < xs.size(); ++j)
      if (xs[j] == anchors[i]) { xof[i] = j; found = true; break; }
    if (!found) { xof[i] = xs.size(); xs.push_back(anchors[i]); }
  }
  const Eigen::Index m = static_cast<Eigen::Index>(xs.size());
  const Matrix K = gram_matrix(cfg.kernel, xs);

  const auto fvals = [&](const Vector& a) { return Vector(K * a); };
  const auto objective = [&](const Vector& a) {
    const Vector v = fvals(a);
    double s = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i)
      s += ws[i] * loss_eval(cfg.loss, ys[i],
                             v(static_cast<Eigen::Index>(xof[i])));
    return s + cfg.lambda * a.dot(v);
  };
  const auto gradient = [&](const Vector& a) {
    const Vector v = fvals(a);
    Vector g = Vector::Zero(m);
    for (std::size_t i = 0; i < anchors.size(); ++i)
      g(static_cast<Eigen::Index>(xof[i])) +=
          ws[i] * loss_subgradient(cfg.loss, ys[i],
                                   v(static_cast<Eigen::Index>(xof[i])));
    return Vector(K * (g + 2.0 * cfg.lambda * a));
  };
  const auto project = [&](Vector a) {
    const double q = a.dot(K * a);
    if (q > cfg.beta * cfg.beta) a *= cfg.beta / std::sqrt(q);
    return a;
  };

  const bool smooth = cfg.loss.family == LossFamily::squared ||
                      cfg.loss.family == LossFamily::log_loss;

  ErmSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  int total_iters = 0;

  for (std::uint64_t restart : {0ull, 1ull, 2ull}) {
    Vector a = Vector::Zero(m);
    if (restart > 0)
      for (Eigen::Index j = 0; j < m; ++j)
        a(j) = 0.1 * (2.0 * rng::uniform(restart, 7, static_cast<std::uint64_t>(j)) - 1.0);
    a = project(a);

    if (smooth) {
      // FISTA with backtracking and restart-on-increase
      double L = std::max(K.operatorNorm() * (1.0 + 2.0 * cfg.lambda), 1e-8);
      Vector y = a, a_prev = a;
      double t = 1.0;
      double fa = objective(a);
      for (int it = 0; it < cfg.max_iter; ++it, ++total_iters) {
        const Vector g = gradient(y);
        Vector a_new;
        double f_new;
        for (int bt = 0;; ++bt) {
          a_new = project(y - g / L);
          f_new = objective(a_new);
          const Vector d = a_new - y;
          if (f_new <= objective(y) + g.dot(d) + 0.5 * L * d.squaredNorm() + 1e-15)
            break;
          L *= 2.0;
          if (bt > 60) break;
        }
        if (f_new > fa) {  // restart momentum
          y = a;
          t = 1.0;
          const Vector g2 = gradient(y);
          a_new = project(y - g2 / L);
          f_new = objective(a_new);
          if (f_new > fa) {
            if ((a_new - a).norm() < 1e-16) break;
            a_new = a;
            f_new = fa;
          }
        }
        const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = a_new + ((t - 1.0) / t_new) * (a_new - a);
        a_prev = a;
        const double delta = std::abs(fa - f_new);
        a = a_new;
        fa = f_new;
        t = t_new;
        if (delta < 1e-16 * std::max(1.0, std::abs(fa)) && it > 50) break;
      }
    } else {
      // projected subgradient, step c/sqrt(t); warm up c so the first
      // step moves a fixed fraction of the ball radius
      const Vector g0 = gradient(a);
      double c = g0.norm() > 1e-12 ? 0.1 * cfg.beta / g0.norm() : 1.0;
      Vector best_a = a;
      double best_f = objective(a);
      for (int it = 1; it <= cfg.max_iter; ++it, ++total_iters) {
        const Vector g = gradient(a);
        a = project(a - (c / std::sqrt(static_cast<double>(it))) * g);
        const double f = objective(a);
        if (f < best_f) { best_f = f; best_a = a; }
      }
      a = best_a;
    }

    const double fa = objective(a);
    if (fa < best.objective) {
      best.anchors = xs;
      best.alpha = a;
      best.objective = fa;
    }
  }

  const Vector v = K * best.alpha;
  best.reg_term = best.alpha.dot(v);
  best.rkhs_norm = std::sqrt(std::max(best.reg_term, 0.0));
  best.risk_term = best.objective - cfg.lambda * best.reg_term;
  best.grad_norm = gradient(best.alpha).norm();
  best.iterations = total_iters;
  best.converged = true;
  return best;
}

// Exact population risk E_P[c(z, f(x))] of a fitted solution (no
// regularization term).
inline double risk_true(const DiscreteDistribution& dist,
                        const ErmSolution& sol, const LossSpec& loss,
                        const KernelSpec& kernel) {
  return detail::weighted_risk(dist, loss, kernel, sol.anchors, sol.alpha);
}

inline ErmSolution solve(const DiscreteDistribution& dist,
                         const ErmConfig& cfg) {
  if (cfg.loss.family == LossFamily::squared) return solve_ridge(dist, cfg);
  return solve_convex(dist, cfg);
}

inline double optimal_value(const DiscreteDistribution& dist,
                            const ErmConfig& cfg) {
  return solve(dist, cfg).objective;
}

// RKHS norm of the difference of two expansions, over the joint anchor set.
inline double solution_distance(const ErmSolution& a, const ErmSolution& b,
                                const KernelSpec& kernel) {
  std::vector<Vector> joint = a.anchors;
  joint.insert(joint.end(), b.anchors.begin(), b.anchors.end());
  Vector coeff(a.alpha.size() + b.alpha.size());
  coeff.head(a.alpha.size()) = a.alpha;
  coeff.tail(b.alpha.size()) = -b.alpha;
  return rkhs_norm(kernel, joint, coeff);
}

}  // namespace kstab

#endif  // KSTAB_ERM_HPP
