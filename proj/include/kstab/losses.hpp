#ifndef KSTAB_LOSSES_HPP
#define KSTAB_LOSSES_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include "kstab/kernels.hpp"

namespace kstab {

enum class LossFamily { squared, eps_insensitive, hinge, log_loss, zero_one };

inline const char* to_string(LossFamily f) {
  switch (f) {
    case LossFamily::squared: return "squared";
    case LossFamily::eps_insensitive: return "eps_insensitive";
    case LossFamily::hinge: return "hinge";
    case LossFamily::log_loss: return "log_loss";
    case LossFamily::zero_one: return "zero_one";
  }
  return "?";
}

inline LossFamily loss_family_from_string(const std::string& s) {
  if (s == "squared") return LossFamily::squared;
  if (s == "eps_insensitive") return LossFamily::eps_insensitive;
  if (s == "hinge") return LossFamily::hinge;
  if (s == "log_loss") return LossFamily::log_loss;
  if (s == "zero_one") return LossFamily::zero_one;
  throw std::invalid_argument("unknown loss family: " + s);
}

// Cost c(z, f(x)) = L(f(x) - y) in the regression families.
struct LossSpec {
  LossFamily family = LossFamily::squared;
  double epsilon = 0.0;  // eps_insensitive tube half-width

  void validate() const {
    if (epsilon < 0.0) throw std::invalid_argument("loss: epsilon must be >= 0");
  }
  // zero_one is evaluation-only: non-convex, rejected by the solvers.
  bool convex() const { return family != LossFamily::zero_one; }
};

inline double loss_eval(const LossSpec& loss, double y, double fx) {
  if (!std::isfinite(y) || !std::isfinite(fx))
    throw std::invalid_argument("loss_eval: non-finite input");
  const double t = y - fx;
  switch (loss.family) {
    case LossFamily::squared:
      return 0.5 * t * t;
    case LossFamily::eps_insensitive:
      return std::max(0.0, std::abs(t) - loss.epsilon);
    case LossFamily::hinge:
      return std::max(0.0, 1.0 - t);
    case LossFamily::log_loss:
      // log(1 + e^-t), stable for large |t|
      return t > 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
    case LossFamily::zero_one:
      return t != 0.0 ? 1.0 : 0.0;
  }
  throw std::logic_error("loss_eval: unreachable");
}

// Subgradient in the prediction argument fx; midpoint of the
// subdifferential interval at kinks.
inline double loss_subgradient(const LossSpec& loss, double y, double fx) {
  if (!std::isfinite(y) || !std::isfinite(fx))
    throw std::invalid_argument("loss_subgradient: non-finite input");
  const double t = y - fx;
  switch (loss.family) {
    case LossFamily::squared:
      return fx - y;
    case LossFamily::eps_insensitive: {
      const double a = std::abs(t);
      if (a > loss.epsilon) return t > 0.0 ? -1.0 : 1.0;
      if (a < loss.epsilon) return 0.0;
      // at the kink |t| = eps: interval between 0 and sign(fx - y)
      if (loss.epsilon == 0.0) return 0.0;  // interval [-1,1]
      return t > 0.0 ? -0.5 : 0.5;
    }
    case LossFamily::hinge:
      if (t < 1.0) return 1.0;
      if (t > 1.0) return 0.0;
      return 0.5;
    case LossFamily::log_loss:
      // sigma(-t)
      return 1.0 / (1.0 + std::exp(t));
    case LossFamily::zero_one:
      throw std::invalid_argument("loss_subgradient: zero_one loss is "
                                  "evaluation-only");
  }
  throw std::logic_error("loss_subgradient: unreachable");
}

// Gauge function phi dominating c(z, f(x)) over the ball ||f||_k <= beta.
struct GaugeSpec {
  LossSpec loss;
  KernelSpec kernel;
  double beta = 10.0;

  void validate() const {
    if (beta <= 0.0) throw std::invalid_argument("gauge: beta must be > 0");
    loss.validate();
    kernel.validate();
  }
};

namespace detail {
// k(x,x) for the gauge bounds; scalar laws carry an empty x.
inline double kernel_diag(const KernelSpec& k, const Vector& x) {
  const double x2 = x.squaredNorm();
  switch (k.family) {
    case KernelFamily::linear: return x2;
    case KernelFamily::gaussian:
    case KernelFamily::laplacian: return 1.0;
    case KernelFamily::polynomial:
      return std::pow(k.gamma * x2 + 1.0, k.degree);
    case KernelFamily::sigmoid:
      return std::tanh(k.a * x2 + k.b);
  }
  throw std::logic_error("kernel_diag: unreachable");
}
}  // namespace detail

// For the squared loss: phi(z) = y^2 + beta^2 * k(x,x), using
// |f(x)| <= beta * sqrt(k(x,x)) and (y - f)^2/2 <= y^2 + f^2.
// For the 1-Lipschitz-in-residual families: phi(z) = 1 + |y| + beta*sqrt(k(x,x)).
inline double gauge_phi(const GaugeSpec& g, const Vector& x, double y) {
  const double diag = detail::kernel_diag(g.kernel, x);
  switch (g.loss.family) {
    case LossFamily::squared:
      return y * y + g.beta * g.beta * diag;
    case LossFamily::eps_insensitive:
    case LossFamily::hinge:
    case LossFamily::log_loss:
      return 1.0 + std::abs(y) + g.beta * std::sqrt(diag);
    case LossFamily::zero_one:
      return 1.0;
  }
  throw std::logic_error("gauge_phi: unreachable");
}

// Order p and constant of the local Lipschitz bound
// |c(z,f(x)) - c(z',f(x'))| <= constant * c_p(z,z') ||z - z'||.
struct LipschitzProfile {
  double order = 2.0;      // p
  double constant = 1.0;
  std::string note;
};

inline LipschitzProfile lipschitz_profile(const LossSpec& loss,
                                          const KernelSpec& kernel,
                                          double beta) {
  if (loss.family != LossFamily::squared)
    throw std::invalid_argument(
        "lipschitz_profile: only the squared loss has a derived profile");
  LipschitzProfile p;
  switch (kernel.family) {
    case KernelFamily::linear:
      p.order = 2.0;
      p.constant = std::pow(std::max(1.0, beta), 2);
      return p;
    case KernelFamily::gaussian:
      p.order = 2.0;
      p.constant = std::max(std::sqrt(2.0 * kernel.gamma), 1.0);
      return p;
    case KernelFamily::polynomial: {
      const double d = static_cast<double>(kernel.degree);
      const double gm = kernel.gamma;
      const double lead = 1.0 + beta * std::pow(gm + 1.0, d / 2.0);
      if (kernel.degree % 2 == 0) {
        p.order = 2.0 * d;
        p.constant =
            lead * std::max({beta * std::pow((1.0 + gm) / 2.0, d / 2.0),
                             beta, 1.0});
        p.note = "degree even";
      } else {
        p.order = 3.0 * d + 1.0;
        p.constant =
            lead * std::max({2.0 * beta * std::pow((1.0 + gm) / 2.0, d / 2.0),
                             4.0 * beta, 4.0 * beta * std::pow(gm, d), 1.0});
        p.note = "degree odd";
      }
      return p;
    }
    default:
      throw std::invalid_argument(
          "lipschitz_profile: unsupported (loss, kernel) combination");
  }
}

}  // namespace kstab

#endif  // KSTAB_LOSSES_HPP
