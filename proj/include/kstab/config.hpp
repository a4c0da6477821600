#ifndef KSTAB_CONFIG_HPP
#define KSTAB_CONFIG_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kstab/robustness.hpp"

namespace kstab {

using json = nlohmann::json;

// A distribution field is either a CSV path (resolved against the config
// file's directory) or an inline {"atoms": [[x..., y], ...], "weights": [...]}.
inline DiscreteDistribution load_distribution(const json& j,
                                              const std::filesystem::path& base) {
  if (j.is_string()) {
    std::filesystem::path p = j.get<std::string>();
    if (p.is_relative()) p = base / p;
    return load_csv(p.string(), &std::cerr);
  }
  if (!j.is_object() || !j.contains("atoms") || !j.contains("weights"))
    throw std::runtime_error(
        "config: distribution must be a csv path or {atoms, weights}");
  std::vector<Point> atoms;
  for (const auto& row : j.at("atoms")) {
    std::vector<double> v = row.get<std::vector<double>>();
    if (v.empty()) throw std::runtime_error("config: empty atom row");
    Vector x(static_cast<Eigen::Index>(v.size()) - 1);
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
      x(static_cast<Eigen::Index>(i)) = v[i];
    atoms.emplace_back(std::move(x), v.back());
  }
  return DiscreteDistribution(std::move(atoms),
                              j.at("weights").get<std::vector<double>>());
}

inline KernelSpec load_kernel(const json& j) {
  KernelSpec k;
  k.family = kernel_family_from_string(j.at("family").get<std::string>());
  k.gamma = j.value("gamma", 1.0);
  k.degree = j.value("degree", 1);
  k.a = j.value("a", 1.0);
  k.b = j.value("b", 1.0);
  k.input_dim = j.value("input_dim", 1);
  k.validate();
  return k;
}

inline LossSpec load_loss(const json& j) {
  LossSpec l;
  l.family = loss_family_from_string(j.at("family").get<std::string>());
  l.epsilon = j.value("epsilon", 0.0);
  l.validate();
  return l;
}

// Full experiment description: the shared ExperimentConfig plus the
// per-kind extras (mixture H, thresholds, t grid, uniform family).
struct ExperimentSpec {
  std::string kind;  // quantitative | qualitative | stability | consistency |
                     // consistency_uniform | solution
  ExperimentConfig cfg;
  std::optional<DiscreteDistribution> mixture;  // H for stability
  std::vector<DiscreteDistribution> family;     // uniform consistency
  std::vector<double> t_grid;
  double delta = 0.05;
  double eps = 0.1;
};

inline ExperimentSpec load_experiment(const json& j,
                                      const std::filesystem::path& base) {
  ExperimentSpec spec;
  spec.kind = j.at("experiment").get<std::string>();
  ExperimentConfig& c = spec.cfg;
  c.ground_truth = load_distribution(j.at("ground_truth"), base);
  if (j.contains("contamination")) {
    const json& cj = j.at("contamination");
    if (cj.is_string() || cj.contains("atoms")) {
      c.contaminated = load_distribution(cj, base);
    } else if (cj.contains("csv")) {
      c.contaminated = load_distribution(cj.at("csv"), base);
    } else {
      c.mode = perturb_mode_from_string(cj.at("mode").get<std::string>());
      c.magnitude = cj.at("magnitude").get<double>();
    }
  }
  c.erm.kernel = load_kernel(j.at("kernel"));
  c.erm.loss = load_loss(j.at("loss"));
  c.erm.lambda = j.value("lambda", 0.1);
  c.erm.beta = j.value("beta", 10.0);
  if (j.contains("n_grid"))
    c.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
  else
    c.n_grid = {j.value("n", std::size_t{20})};
  c.replications = j.value("replications", std::size_t{100});
  if (j.contains("lambda_schedule")) {
    c.use_schedule = true;
    c.sched_c = j.at("lambda_schedule").value("c", 0.5);
    c.sched_power = j.at("lambda_schedule").value("power", -0.5);
  }
  c.seed = j.value("seed", std::uint64_t{1});
  c.p = j.value("p", 2.0);
  c.validate();

  if (j.contains("mixture")) spec.mixture = load_distribution(j.at("mixture"), base);
  if (j.contains("t_grid")) spec.t_grid = j.at("t_grid").get<std::vector<double>>();
  spec.delta = j.value("delta", 0.05);
  spec.eps = j.value("eps", 0.1);
  if (j.contains("family"))
    for (const auto& fj : j.at("family"))
      spec.family.push_back(load_distribution(fj, base));

  if (spec.kind == "stability" && !spec.mixture)
    throw std::runtime_error("config: stability experiment needs a mixture");
  if (spec.kind == "consistency_uniform" && spec.family.empty())
    throw std::runtime_error("config: consistency_uniform needs a family");
  return spec;
}

inline ExperimentSpec load_experiment_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config parse error: ") + e.what());
  }
  return load_experiment(j, std::filesystem::path(path).parent_path());
}

}  // namespace kstab

#endif  // KSTAB_CONFIG_HPP
