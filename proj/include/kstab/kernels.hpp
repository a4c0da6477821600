#ifndef KSTAB_KERNELS_HPP
#define KSTAB_KERNELS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kstab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class KernelFamily { linear, gaussian, laplacian, polynomial, sigmoid };

inline const char* to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::linear: return "linear";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::laplacian: return "laplacian";
    case KernelFamily::polynomial: return "polynomial";
    case KernelFamily::sigmoid: return "sigmoid";
  }
  return "?";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "linear") return KernelFamily::linear;
  if (s == "gaussian") return KernelFamily::gaussian;
  if (s == "laplacian") return KernelFamily::laplacian;
  if (s == "polynomial") return KernelFamily::polynomial;
  if (s == "sigmoid") return KernelFamily::sigmoid;
  throw std::invalid_argument("unknown kernel family: " + s);
}

// Kernel family plus parameters. Distances inside the exponent use the
// 2-norm, except the laplacian which uses the 1-norm.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double gamma = 1.0;      // gaussian/laplacian/polynomial scale
  int degree = 1;          // polynomial only
  double a = 1.0;          // sigmoid only
  double b = 1.0;          // sigmoid only
  int input_dim = 1;

  void validate() const {
    if (gamma <= 0.0) throw std::invalid_argument("kernel: gamma must be > 0");
    if (degree < 1) throw std::invalid_argument("kernel: degree must be >= 1");
    if (input_dim < 1) throw std::invalid_argument("kernel: input_dim must be >= 1");
    if (family == KernelFamily::sigmoid && (a <= 0.0 || b <= 0.0))
      throw std::invalid_argument("kernel: sigmoid a,b must be > 0");
  }

  // sigmoid is evaluation-only: not PDS in general, excluded from ERM
  // and from the PSD invariants.
  bool positive_definite() const { return family != KernelFamily::sigmoid; }
};

enum class GrowthKind { linear_rate, sqrt_rate, piecewise, uncalm };

// Growth function g for the calmness bound
// sqrt(k(x,x) - 2k(x,x') + k(x',x')) <= g(||x - x'||_2).
struct GrowthProfile {
  GrowthKind kind = GrowthKind::linear_rate;
  double rate = 0.0;           // slope for linear_rate; scale for sqrt branch
  double breakpoint = 0.0;     // piecewise only
  std::string note;
};

namespace detail {
inline void check_dim(const KernelSpec& spec, const Vector& v, const char* what) {
  if (v.size() != spec.input_dim)
    throw std::invalid_argument(std::string(what) +
                                ": dimension mismatch, expected " +
                                std::to_string(spec.input_dim) + " got " +
                                std::to_string(v.size()));
}
}  // namespace detail

inline double kernel_eval(const KernelSpec& spec, const Vector& x1,
                          const Vector& x2) {
  detail::check_dim(spec, x1, "kernel_eval x1");
  detail::check_dim(spec, x2, "kernel_eval x2");
  switch (spec.family) {
    case KernelFamily::linear:
      return x1.dot(x2);
    case KernelFamily::gaussian:
      return std::exp(-spec.gamma * (x1 - x2).squaredNorm());
    case KernelFamily::laplacian:
      return std::exp(-spec.gamma * (x1 - x2).lpNorm<1>());
    case KernelFamily::polynomial:
      return std::pow(spec.gamma * x1.dot(x2) + 1.0, spec.degree);
    case KernelFamily::sigmoid:
      return std::tanh(spec.a * x1.dot(x2) + spec.b);
  }
  throw std::logic_error("kernel_eval: unreachable");
}

inline Matrix gram_matrix(const KernelSpec& spec,
                          const std::vector<Vector>& points) {
  if (points.empty())
    throw std::invalid_argument("gram_matrix: empty point list");
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = kernel_eval(spec, points[i], points[j]);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

inline GrowthProfile growth_profile(
    const KernelSpec& spec,
    std::optional<double> domain_radius = std::nullopt) {
  GrowthProfile g;
  const double n = static_cast<double>(spec.input_dim);
  switch (spec.family) {
    case KernelFamily::linear:
      g.kind = GrowthKind::linear_rate;
      g.rate = 1.0;
      return g;
    case KernelFamily::gaussian:
      g.kind = GrowthKind::linear_rate;
      g.rate = std::max(std::sqrt(2.0 * spec.gamma), 1.0);
      return g;
    case KernelFamily::laplacian:
      // sqrt(2*gamma*sqrt(n)*t) up to the breakpoint, then t + gamma*sqrt(n)/2
      g.kind = GrowthKind::piecewise;
      g.rate = 2.0 * spec.gamma * std::sqrt(n);
      g.breakpoint = spec.gamma * std::sqrt(n) / 2.0;
      return g;
    case KernelFamily::polynomial: {
      if (spec.degree == 1) {
        g.kind = GrowthKind::linear_rate;
        g.rate = std::max(std::sqrt(spec.gamma), 1.0);
        return g;
      }
      if (!domain_radius) {
        g.kind = GrowthKind::uncalm;
        g.note = "polynomial with degree > 1 on an unbounded domain grows "
                 "superlinearly; supply a domain radius";
        return g;
      }
      const double R = *domain_radius;
      if (R <= 0.0)
        throw std::invalid_argument("growth_profile: radius must be > 0");
      // Lipschitz constant of the feature map on the ball ||x|| <= R:
      // sup ||DPhi|| with L^2 = d*gamma*(gamma R^2+1)^(d-1)
      //                       + d(d-1)*gamma^2 R^2 (gamma R^2+1)^(d-2).
      const double d = static_cast<double>(spec.degree);
      const double s = spec.gamma * R * R + 1.0;
      const double L2 = d * spec.gamma * std::pow(s, d - 1.0) +
                        d * (d - 1.0) * spec.gamma * spec.gamma * R * R *
                            std::pow(s, d - 2.0);
      g.kind = GrowthKind::linear_rate;
      g.rate = std::max(std::sqrt(L2), 1.0);
      g.note = "valid on ||x||_2 <= " + std::to_string(R);
      return g;
    }
    case KernelFamily::sigmoid:
      g.kind = GrowthKind::uncalm;
      g.note = "sigmoid kernel is evaluation-only";
      return g;
  }
  throw std::logic_error("growth_profile: unreachable");
}

inline double growth_function(
    const KernelSpec& spec, double t,
    std::optional<double> domain_radius = std::nullopt) {
  if (t < 0.0) throw std::invalid_argument("growth_function: t must be >= 0");
  const GrowthProfile g = growth_profile(spec, domain_radius);
  switch (g.kind) {
    case GrowthKind::linear_rate:
      return g.rate * t;
    case GrowthKind::sqrt_rate:
      return std::sqrt(g.rate * t);
    case GrowthKind::piecewise:
      if (t <= g.breakpoint) return std::sqrt(g.rate * t);
      return t + g.breakpoint;
    case GrowthKind::uncalm:
      return std::numeric_limits<double>::infinity();
  }
  throw std::logic_error("growth_function: unreachable");
}

// sqrt(alpha' K alpha) over the anchor Gram, with tiny negative quadratic
// forms clamped to zero.
inline double rkhs_norm(const KernelSpec& spec,
                        const std::vector<Vector>& anchors,
                        const Vector& coefficients) {
  if (static_cast<Eigen::Index>(anchors.size()) != coefficients.size())
    throw std::invalid_argument("rkhs_norm: anchors/coefficients length mismatch");
  if (anchors.empty()) return 0.0;
  const Matrix K = gram_matrix(spec, anchors);
  const double q = coefficients.dot(K * coefficients);
  if (q >= 0.0) return std::sqrt(q);
  const double scale = coefficients.squaredNorm() * K.trace();
  if (q >= -1e-10 * std::max(scale, 1e-300)) return 0.0;
  if (spec.positive_definite())
    throw std::logic_error("rkhs_norm: materially negative quadratic form "
                           "for a PDS kernel");
  return 0.0;
}

inline double function_eval(const KernelSpec& spec,
                            const std::vector<Vector>& anchors,
                            const Vector& coefficients, const Vector& x) {
  if (static_cast<Eigen::Index>(anchors.size()) != coefficients.size())
    throw std::invalid_argument("function_eval: anchors/coefficients length mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < anchors.size(); ++j)
    s += coefficients(static_cast<Eigen::Index>(j)) *
         kernel_eval(spec, anchors[j], x);
  return s;
}

}  // namespace kstab

#endif  // KSTAB_KERNELS_HPP
