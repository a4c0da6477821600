#ifndef KSTAB_METRICS_HPP
#define KSTAB_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kstab/distribution.hpp"

namespace kstab {

// ---------------------------------------------------------------------------
// Kantorovich / Wasserstein-1 between scalar laws, exact via the area
// between the step CDFs.
// ---------------------------------------------------------------------------

inline double wasserstein1_1d(const DiscreteDistribution& P,
                              const DiscreteDistribution& Q) {
  if (P.dim() != 0 || Q.dim() != 0)
    throw std::invalid_argument("wasserstein1_1d: scalar atoms required");
  struct Ev { double t, dw; };
  std::vector<Ev> ev;
  ev.reserve(P.size() + Q.size());
  for (std::size_t i = 0; i < P.size(); ++i)
    ev.push_back({P.atoms()[i].y, P.weights()[i]});
  for (std::size_t i = 0; i < Q.size(); ++i)
    ev.push_back({Q.atoms()[i].y, -Q.weights()[i]});
  std::sort(ev.begin(), ev.end(),
            [](const Ev& a, const Ev& b) { return a.t < b.t; });
  double w1 = 0.0, cdf_diff = 0.0;
  for (std::size_t i = 0; i + 1 <= ev.size(); ++i) {
    cdf_diff += ev[i].dw;
    if (i + 1 < ev.size())
      w1 += std::abs(cdf_diff) * (ev[i + 1].t - ev[i].t);
  }
  return w1;
}

// ---------------------------------------------------------------------------
// Exact discrete optimal transport (successive shortest paths with dual
// potentials). Deterministic; returns the plan and a dual certificate.
// ---------------------------------------------------------------------------

struct TransportPlan {
  Matrix plan;               // flows, n x m
  double value = 0.0;        // sum(plan .* cost)
  std::vector<double> row_marginals;
  std::vector<double> col_marginals;
  std::vector<double> dual_u;  // source potentials
  std::vector<double> dual_v;  // sink potentials
};

inline TransportPlan discrete_ot(const Matrix& cost,
                                 const std::vector<double>& w_src,
                                 const std::vector<double>& w_dst) {
  const std::size_t n = w_src.size(), m = w_dst.size();
  if (cost.rows() != static_cast<Eigen::Index>(n) ||
      cost.cols() != static_cast<Eigen::Index>(m))
    throw std::invalid_argument("discrete_ot: cost shape mismatch");
  double sa = 0.0, sb = 0.0;
  for (double w : w_src) sa += w;
  for (double w : w_dst) sb += w;
  if (std::abs(sa - sb) > 1e-9)
    throw std::invalid_argument("discrete_ot: marginal mass mismatch");
  if (cost.minCoeff() < 0.0)
    throw std::invalid_argument("discrete_ot: negative cost");

  TransportPlan out;
  out.plan = Matrix::Zero(static_cast<Eigen::Index>(n),
                          static_cast<Eigen::Index>(m));
  std::vector<double> supply = w_src, demand = w_dst;
  std::vector<double> u(n, 0.0), v(m, 0.0);

  const double inf = std::numeric_limits<double>::infinity();
  const double mass_eps = 1e-14;

  double remaining = sa;
  long iter_cap = 10 * static_cast<long>((n + m) * (n + m)) + 1000;
  while (remaining > 1e-12) {
    if (--iter_cap < 0)
      throw std::logic_error("discrete_ot: iteration cap exceeded");
    // Dijkstra over the bipartite residual graph, sources first.
    const std::size_t V = n + m;
    std::vector<double> dist(V, inf);
    std::vector<int> prev(V, -1);  // node we came from
    std::vector<bool> done(V, false);
    using QE = std::pair<double, std::size_t>;
    std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
    for (std::size_t i = 0; i < n; ++i)
      if (supply[i] > mass_eps) { dist[i] = 0.0; pq.push({0.0, i}); }
    while (!pq.empty()) {
      auto [d0, a] = pq.top();
      pq.pop();
      if (done[a]) continue;
      done[a] = true;
      if (a < n) {
        for (std::size_t j = 0; j < m; ++j) {
          const double rc = std::max(0.0, cost(static_cast<Eigen::Index>(a),
                                               static_cast<Eigen::Index>(j)) -
                                              u[a] - v[j]);
          const std::size_t b = n + j;
          if (d0 + rc < dist[b]) {
            dist[b] = d0 + rc;
            prev[b] = static_cast<int>(a);
            pq.push({dist[b], b});
          }
        }
      } else {
        const std::size_t j = a - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (out.plan(static_cast<Eigen::Index>(i),
                       static_cast<Eigen::Index>(j)) > mass_eps) {
            const double rc = std::max(0.0, u[i] + v[j] -
                                                cost(static_cast<Eigen::Index>(i),
                                                     static_cast<Eigen::Index>(j)));
            if (d0 + rc < dist[i]) {
              dist[i] = d0 + rc;
              prev[i] = static_cast<int>(a);
              pq.push({dist[i], i});
            }
          }
        }
      }
    }
    // nearest sink with remaining demand
    std::size_t best = V;
    double bestd = inf;
    for (std::size_t j = 0; j < m; ++j)
      if (demand[j] > mass_eps && dist[n + j] < bestd) {
        bestd = dist[n + j];
        best = n + j;
      }
    if (best == V)
      throw std::logic_error("discrete_ot: no augmenting path");
    // bottleneck along the path
    double amount = demand[best - n];
    for (std::size_t a = best; prev[a] != -1; a = static_cast<std::size_t>(prev[a])) {
      const std::size_t pa = static_cast<std::size_t>(prev[a]);
      if (a >= n) {  // forward edge pa -> sink a, unlimited capacity
        if (prev[pa] == -1) amount = std::min(amount, supply[pa]);
      } else {       // reverse edge: sink pa -> source a, capacity plan(a, pa-n)
        amount = std::min(amount, out.plan(static_cast<Eigen::Index>(a),
                                           static_cast<Eigen::Index>(pa - n)));
      }
    }
    // apply
    for (std::size_t a = best; prev[a] != -1; a = static_cast<std::size_t>(prev[a])) {
      const std::size_t pa = static_cast<std::size_t>(prev[a]);
      if (a >= n)
        out.plan(static_cast<Eigen::Index>(pa),
                 static_cast<Eigen::Index>(a - n)) += amount;
      else
        out.plan(static_cast<Eigen::Index>(a),
                 static_cast<Eigen::Index>(pa - n)) -= amount;
    }
    {
      std::size_t a = best;
      while (prev[a] != -1) a = static_cast<std::size_t>(prev[a]);
      supply[a] -= amount;
    }
    demand[best - n] -= amount;
    remaining -= amount;
    // potential update with distances capped at the target distance, so
    // unreached nodes keep their potential and reduced costs stay >= 0
    for (std::size_t i = 0; i < n; ++i)
      u[i] += bestd - std::min(dist[i], bestd);
    for (std::size_t j = 0; j < m; ++j)
      v[j] += std::min(dist[n + j], bestd) - bestd;
  }

  out.value = 0.0;
  out.row_marginals.assign(n, 0.0);
  out.col_marginals.assign(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double f = out.plan(static_cast<Eigen::Index>(i),
                                static_cast<Eigen::Index>(j));
      out.value += f * cost(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(j));
      out.row_marginals[i] += f;
      out.col_marginals[j] += f;
    }
  out.dual_u = std::move(u);
  out.dual_v = std::move(v);
  return out;
}

// ---------------------------------------------------------------------------
// Prokhorov metric via Strassen: eps is feasible iff a coupling puts mass
// >= 1 - eps on atom pairs within distance eps. Feasibility is a max-flow
// problem on the bipartite graph of atoms; bisection over eps in [0,1].
// ---------------------------------------------------------------------------

namespace detail {

// max-flow (Edmonds-Karp) on the bipartite graph with edges where
// d(i,j) <= eps; returns the maximum mass that can be coupled.
inline double bipartite_coupled_mass(const Matrix& d, const std::vector<double>& a,
                                     const std::vector<double>& b, double eps) {
  const std::size_t n = a.size(), m = b.size();
  const std::size_t S = n + m, T = n + m + 1, V = n + m + 2;
  // dense capacity matrix is fine at these sizes
  std::vector<std::vector<double>> cap(V, std::vector<double>(V, 0.0));
  for (std::size_t i = 0; i < n; ++i) cap[S][i] = a[i];
  for (std::size_t j = 0; j < m; ++j) cap[n + j][T] = b[j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <=
          eps + 1e-12)
        cap[i][n + j] = 2.0;  // effectively unbounded (mass <= 1)
  double flow = 0.0;
  while (true) {
    std::vector<int> par(V, -1);
    par[S] = static_cast<int>(S);
    std::queue<std::size_t> q;
    q.push(S);
    while (!q.empty() && par[T] == -1) {
      std::size_t c = q.front();
      q.pop();
      for (std::size_t w = 0; w < V; ++w)
        if (par[w] == -1 && cap[c][w] > 1e-13) {
          par[w] = static_cast<int>(c);
          q.push(w);
        }
    }
    if (par[T] == -1) break;
    double aug = std::numeric_limits<double>::infinity();
    for (std::size_t w = T; w != S; w = static_cast<std::size_t>(par[w]))
      aug = std::min(aug, cap[static_cast<std::size_t>(par[w])][w]);
    for (std::size_t w = T; w != S; w = static_cast<std::size_t>(par[w])) {
      cap[static_cast<std::size_t>(par[w])][w] -= aug;
      cap[w][static_cast<std::size_t>(par[w])] += aug;
    }
    flow += aug;
  }
  return flow;
}

inline Matrix pairwise_distances(const DiscreteDistribution& P,
                                 const DiscreteDistribution& Q) {
  Matrix d(static_cast<Eigen::Index>(P.size()),
           static_cast<Eigen::Index>(Q.size()));
  for (std::size_t i = 0; i < P.size(); ++i)
    for (std::size_t j = 0; j < Q.size(); ++j)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          point_distance(P.atoms()[i], Q.atoms()[j]);
  return d;
}

}  // namespace detail

inline double prokhorov(const DiscreteDistribution& P,
                        const DiscreteDistribution& Q, double tol = 1e-9) {
  if (P.dim() != Q.dim())
    throw std::invalid_argument("prokhorov: dimension mismatch");
  if (tol <= 0.0) throw std::invalid_argument("prokhorov: tol must be > 0");
  const Matrix d = detail::pairwise_distances(P, Q);
  const auto feasible = [&](double eps) {
    return detail::bipartite_coupled_mass(d, P.weights(), Q.weights(), eps) >=
           1.0 - eps - 1e-9;
  };
  if (feasible(0.0)) return 0.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

// d_phi = Prokhorov + difference of phi^power moments
inline double d_phi(const DiscreteDistribution& P, const DiscreteDistribution& Q,
                    const GaugeSpec& g, double power, double tol = 1e-9) {
  return prokhorov(P, Q, tol) +
         std::abs(moment(P, g, power) - moment(Q, g, power));
}

// ---------------------------------------------------------------------------
// Fortet-Mourier metric zeta_p: exact where provably so (scalar laws via
// monotone pushforward; supports inside the unit ball), bracketing bounds
// everywhere else.
// ---------------------------------------------------------------------------

struct ZetaEstimate {
  std::optional<double> exact;
  double upper_ot = 0.0;       // OT with direct cost c_p(z,z')||z-z'||
  double upper_product = 0.0;  // product-coupling estimate
  double lower_testfn = 0.0;   // best admissible test function found
  const char* exact_channel = "";

  double best_upper() const { return upper_ot; }
  double best_lower() const {
    return exact ? *exact : lower_testfn;
  }
};

// local Lipschitz growth weight of the Fortet-Mourier class
inline double fm_cost_weight(const Point& a, const Point& b, double p) {
  return std::pow(std::max({1.0, a.znorm(), b.znorm()}), p - 1.0);
}

namespace detail {

// antisymmetric pushforward map with h'(t) = max(1,|t|)^{p-1}
inline double fm_pushforward(double t, double p) {
  const double a = std::abs(t);
  const double h = a <= 1.0 ? a : 1.0 + (std::pow(a, p) - 1.0) / p;
  return t < 0.0 ? -h : h;
}

inline DiscreteDistribution map_scalar(const DiscreteDistribution& P, double p) {
  std::vector<Point> atoms;
  atoms.reserve(P.size());
  for (const Point& z : P.atoms())
    atoms.emplace_back(fm_pushforward(z.y, p));
  return DiscreteDistribution(std::move(atoms),
                              std::vector<double>(P.weights()));
}

inline double testfn_gap(const DiscreteDistribution& P,
                         const DiscreteDistribution& Q,
                         const std::function<double(const Point&)>& psi) {
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i)
    s += P.weights()[i] * psi(P.atoms()[i]);
  for (std::size_t j = 0; j < Q.size(); ++j)
    s -= Q.weights()[j] * psi(Q.atoms()[j]);
  return std::abs(s);
}

}  // namespace detail

inline ZetaEstimate zeta_p(const DiscreteDistribution& P,
                           const DiscreteDistribution& Q, double p) {
  if (p < 1.0) throw std::invalid_argument("zeta_p: p must be >= 1");
  if (P.dim() != Q.dim())
    throw std::invalid_argument("zeta_p: dimension mismatch");
  ZetaEstimate est;

  const Matrix d = detail::pairwise_distances(P, Q);
  Matrix direct(d.rows(), d.cols());
  est.upper_product = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i)
    for (std::size_t j = 0; j < Q.size(); ++j) {
      const double c = fm_cost_weight(P.atoms()[i], Q.atoms()[j], p) *
                       d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      direct(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
      est.upper_product += P.weights()[i] * Q.weights()[j] * c;
    }
  est.upper_ot = discrete_ot(direct, P.weights(), Q.weights()).value;

  // exact channels
  if (P.dim() == 0) {
    est.exact = wasserstein1_1d(detail::map_scalar(P, p),
                                detail::map_scalar(Q, p));
    est.exact_channel = "scalar_pushforward";
  } else {
    double maxnorm = 0.0;
    for (const Point& z : P.atoms()) maxnorm = std::max(maxnorm, z.znorm());
    for (const Point& z : Q.atoms()) maxnorm = std::max(maxnorm, z.znorm());
    if (maxnorm <= 1.0 + 1e-12) {
      est.exact = discrete_ot(d, P.weights(), Q.weights()).value;
      est.exact_channel = "unit_ball";
    }
  }

  // lower bound: best gap over a built-in family of admissible functions
  double lower = 0.0;
  const int zdim = P.dim() + 1;
  for (int l = 0; l < zdim; ++l) {
    lower = std::max(lower, detail::testfn_gap(P, Q, [&](const Point& z) {
      const double c = l < P.dim() ? z.x(l) : z.y;
      return detail::fm_pushforward(c, p);
    }));
  }
  lower = std::max(lower, detail::testfn_gap(P, Q, [&](const Point& z) {
    return detail::fm_pushforward(z.znorm(), p);
  }));
  for (double r : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    lower = std::max(lower, detail::testfn_gap(P, Q, [&](const Point& z) {
      return std::min(z.znorm(), r);
    }));
  }
  est.lower_testfn = lower;
  return est;
}

}  // namespace kstab

#endif  // KSTAB_METRICS_HPP
