#ifndef KSTAB_DISTRIBUTION_HPP
#define KSTAB_DISTRIBUTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kstab/losses.hpp"
#include "kstab/rng.hpp"

namespace kstab {

// One observation z = (x, y). Scalar laws (e.g. estimator values) use an
// empty x and carry the value in y.
struct Point {
  Vector x;
  double y = 0.0;

  Point() = default;
  Point(Vector x_, double y_) : x(std::move(x_)), y(y_) {}
  explicit Point(double y_) : x(0), y(y_) {}

  // concatenated (x, y) vector, the ambient Z coordinates
  Vector z() const {
    Vector v(x.size() + 1);
    v.head(x.size()) = x;
    v(x.size()) = y;
    return v;
  }
  double znorm() const { return std::sqrt(x.squaredNorm() + y * y); }
};

inline double point_distance(const Point& a, const Point& b) {
  if (a.x.size() != b.x.size())
    throw std::invalid_argument("point_distance: dimension mismatch");
  return std::sqrt((a.x - b.x).squaredNorm() + (a.y - b.y) * (a.y - b.y));
}

// Finite-support probability measure on Z. Atoms may repeat; weights are
// positive and sum to one.
class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;
  DiscreteDistribution(std::vector<Point> atoms, std::vector<double> weights)
      : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    validate();
    build_cdf();
  }

  static DiscreteDistribution dirac(Point z) {
    return DiscreteDistribution({std::move(z)}, {1.0});
  }

  const std::vector<Point>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return atoms_.size(); }
  int dim() const { return atoms_.empty() ? 0 : static_cast<int>(atoms_[0].x.size()); }

  void validate() const {
    if (atoms_.empty())
      throw std::invalid_argument("distribution: no atoms");
    if (atoms_.size() != weights_.size())
      throw std::invalid_argument("distribution: atom/weight length mismatch");
    double s = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0)) throw std::invalid_argument("distribution: weights must be > 0");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("distribution: weights must sum to 1");
    for (const Point& p : atoms_) {
      if (!p.x.allFinite() || !std::isfinite(p.y))
        throw std::invalid_argument("distribution: non-finite atom");
      if (p.x.size() != atoms_[0].x.size())
        throw std::invalid_argument("distribution: inconsistent atom dimension");
    }
  }

  // index of the atom hit by uniform variate u in [0,1)
  std::size_t pick(double u) const {
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
    return std::min(i, atoms_.size() - 1);
  }

 private:
  void build_cdf() {
    cdf_.resize(weights_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      acc += weights_[i];
      cdf_[i] = acc;
    }
    cdf_.back() = 1.0;
  }

  std::vector<Point> atoms_;
  std::vector<double> weights_;
  std::vector<double> cdf_;
};

// n i.i.d. draws; draw i depends only on (seed, stream, i), so the stream
// is reproducible and order-independent.
inline std::vector<Point> sample(const DiscreteDistribution& dist, std::size_t n,
                                 std::uint64_t seed, std::uint64_t stream = 0) {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(dist.atoms()[dist.pick(rng::uniform(seed, stream, i))]);
  return out;
}

inline DiscreteDistribution empirical(const std::vector<Point>& samples) {
  if (samples.empty()) throw std::invalid_argument("empirical: empty sample");
  const double w = 1.0 / static_cast<double>(samples.size());
  return DiscreteDistribution(samples,
                              std::vector<double>(samples.size(), w));
}

// integral of phi(z)^p
inline double moment(const DiscreteDistribution& dist, const GaugeSpec& g,
                     double p) {
  if (p < 1.0) throw std::invalid_argument("moment: p must be >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const Point& z = dist.atoms()[i];
    s += dist.weights()[i] * std::pow(gauge_phi(g, z.x, z.y), p);
  }
  return s;
}

inline bool membership(const DiscreteDistribution& dist, const GaugeSpec& g,
                       double p, double kappa) {
  return moment(dist, g, p) <= kappa;
}

// (1-t) P + t H
inline DiscreteDistribution mix(const DiscreteDistribution& P,
                                const DiscreteDistribution& H, double t) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("mix: t must be in [0,1]");
  if (P.dim() != H.dim()) throw std::invalid_argument("mix: dimension mismatch");
  std::vector<Point> atoms;
  std::vector<double> weights;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double w = (1.0 - t) * P.weights()[i];
    if (w > 0.0) { atoms.push_back(P.atoms()[i]); weights.push_back(w); }
  }
  for (std::size_t i = 0; i < H.size(); ++i) {
    const double w = t * H.weights()[i];
    if (w > 0.0) { atoms.push_back(H.atoms()[i]); weights.push_back(w); }
  }
  return DiscreteDistribution(std::move(atoms), std::move(weights));
}

enum class PerturbMode { shift_y, shift_x, quantize };

inline PerturbMode perturb_mode_from_string(const std::string& s) {
  if (s == "shift_y") return PerturbMode::shift_y;
  if (s == "shift_x") return PerturbMode::shift_x;
  if (s == "quantize") return PerturbMode::quantize;
  throw std::invalid_argument("unknown perturb mode: " + s);
}

namespace detail {
// round toward zero at step boundaries
inline double quantize_value(double v, double step) {
  if (step <= 0.0) return v;
  return std::trunc(v / step) * step;
}
}  // namespace detail

// Deterministic, seeded contamination of the atom coordinates; weights
// are untouched and magnitude 0 is the identity.
inline DiscreteDistribution perturb(const DiscreteDistribution& P,
                                    PerturbMode mode, double magnitude,
                                    std::uint64_t seed) {
  if (magnitude < 0.0)
    throw std::invalid_argument("perturb: magnitude must be >= 0");
  std::vector<Point> atoms = P.atoms();
  if (magnitude > 0.0) {
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      switch (mode) {
        case PerturbMode::shift_y:
          atoms[i].y += magnitude * (2.0 * rng::uniform(seed, i, 0) - 1.0);
          break;
        case PerturbMode::shift_x:
          for (Eigen::Index j = 0; j < atoms[i].x.size(); ++j)
            atoms[i].x(j) += magnitude *
                (2.0 * rng::uniform(seed, i, static_cast<std::uint64_t>(j) + 1) - 1.0);
          break;
        case PerturbMode::quantize:
          for (Eigen::Index j = 0; j < atoms[i].x.size(); ++j)
            atoms[i].x(j) = detail::quantize_value(atoms[i].x(j), magnitude);
          atoms[i].y = detail::quantize_value(atoms[i].y, magnitude);
          break;
      }
    }
  }
  return DiscreteDistribution(std::move(atoms),
                              std::vector<double>(P.weights()));
}

// --- CSV interface: header x_0,...,x_{d-1},y,weight ---

inline void save_csv(const DiscreteDistribution& dist, std::ostream& os) {
  const int d = dist.dim();
  for (int j = 0; j < d; ++j) os << "x_" << j << ",";
  os << "y,weight\n";
  char buf[64];
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const Point& p = dist.atoms()[i];
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,", p.x(j));
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.y, dist.weights()[i]);
    os << buf;
  }
}

inline void save_csv(const DiscreteDistribution& dist, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  save_csv(dist, f);
}

inline DiscreteDistribution load_csv(std::istream& is,
                                     std::ostream* warn = nullptr) {
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("distribution csv: empty file");
  // count columns from the header
  int cols = 1;
  for (char c : line) if (c == ',') ++cols;
  const int d = cols - 2;
  if (d < 0) throw std::runtime_error("distribution csv: bad header");
  std::vector<Point> atoms;
  std::vector<double> weights;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != cols)
      throw std::runtime_error("distribution csv: line " +
                               std::to_string(lineno) + ": expected " +
                               std::to_string(cols) + " fields");
    Vector x(d);
    for (int j = 0; j < d; ++j) x(j) = vals[static_cast<std::size_t>(j)];
    atoms.emplace_back(std::move(x), vals[static_cast<std::size_t>(d)]);
    weights.push_back(vals[static_cast<std::size_t>(d) + 1]);
  }
  if (atoms.empty()) throw std::runtime_error("distribution csv: no atoms");
  double s = 0.0;
  for (double w : weights) s += w;
  if (std::abs(s - 1.0) > 1e-9 && warn)
    *warn << "warning: weights sum to " << s << ", renormalizing\n";
  for (double& w : weights) w /= s;
  return DiscreteDistribution(std::move(atoms), std::move(weights));
}

inline DiscreteDistribution load_csv(const std::string& path,
                                     std::ostream* warn = nullptr) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return load_csv(f, warn);
}

}  // namespace kstab

#endif  // KSTAB_DISTRIBUTION_HPP
