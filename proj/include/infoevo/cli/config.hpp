#pragma once

// Experiment configuration: a JSON document mirroring RunConfig, with
// command-line flags patched on top. Unknown keys and ill-typed values are
// rejected with the dotted path of the offending field.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "infoevo/error.hpp"
#include "infoevo/evolve.hpp"

namespace infoevo::cli {

using nlohmann::json;

struct ProblemConfig {
  std::string name = "onemax";
  std::size_t bits = 50;
  std::size_t block = 5;
  std::size_t dim = 10;
  std::optional<double> target;  // unset: the problem's default
  int max_depth = 5;
  std::string dataset;  // CSV path; empty selects the built-in x^2 + x data
  std::string behavior_metric = "euclidean";
};

enum class RunMode { info_evo, baseline, paired };

struct RunConfig {
  ProblemConfig problem;
  std::size_t budget = 20000;
  std::optional<std::uint64_t> seed;
  RunMode mode = RunMode::info_evo;
  LoopConfig loop;
  std::size_t demes = 1;
  std::optional<std::size_t> subdemes_per_deme;  // unset: step.ray_count

  std::size_t subdemes() const { return subdemes_per_deme.value_or(loop.step.ray_count); }
  std::uint64_t seed_value() const {
    if (!seed) throw ConfigError("seed", "a seed is required");
    return *seed;
  }
  void validate() const;
};

inline const char* run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::info_evo: return "info_evo";
    case RunMode::baseline: return "baseline";
    case RunMode::paired: return "paired";
  }
  return "info_evo";
}

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{"onemax", "trap", "sphere", "rosenbrock", "symreg"};
  return names;
}

inline void RunConfig::validate() const {
  const auto& names = problem_names();
  if (std::find(names.begin(), names.end(), problem.name) == names.end())
    throw ConfigError("problem.name", "unknown problem '" + problem.name + "'");
  if (problem.behavior_metric != "euclidean" && problem.behavior_metric != "fisher")
    throw ConfigError("problem.behavior_metric", "must be 'euclidean' or 'fisher'");
  if (budget == 0) throw ConfigError("budget", "must be positive");
  if (demes == 0) throw ConfigError("demes", "must be positive");
  if (subdemes() == 0) throw ConfigError("subdemes_per_deme", "must be positive");
  if (budget / demes < loop.initial_population)
    throw ConfigError("budget", "per-deme budget is smaller than the initial population");
  seed_value();
  loop.validate();
}

// ---------------------------------------------------------------------------
// JSON reading

namespace detail {

/// Reads the members of one JSON object, remembering which keys were consumed
/// so that leftovers can be reported as unknown fields.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_unsigned_v<T>) {
        // signed storage is fine as long as the value is nonnegative
        const bool ok = v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0);
        if (!ok) throw ConfigError(field(key), "expected a nonnegative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError(field(key), "expected a boolean");
      }
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    if (const json* v = find(key); v && !v->is_null()) {
      T tmp{};
      used_.erase(key);
      get(key, tmp);
      out = tmp;
    }
  }

  template <class F>
  void object(const std::string& key, F&& read) {
    if (const json* v = find(key)) {
      ObjectReader sub(*v, field(key));
      read(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class E>
E parse_enum(const std::string& field, const std::string& text,
             std::initializer_list<std::pair<const char*, E>> options) {
  std::string allowed;
  for (const auto& [name, value] : options) {
    if (text == name) return value;
    allowed += allowed.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError(field, "unknown value '" + text + "' (expected one of: " + allowed + ")");
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  RunConfig c;
  detail::ObjectReader r(j, "");
  r.object("problem", [&](detail::ObjectReader& p) {
    p.get("name", c.problem.name);
    p.get("bits", c.problem.bits);
    p.get("block", c.problem.block);
    p.get("dim", c.problem.dim);
    p.get("target", c.problem.target);
    p.get("max_depth", c.problem.max_depth);
    p.get("dataset", c.problem.dataset);
    p.get("behavior_metric", c.problem.behavior_metric);
  });
  r.get("budget", c.budget);
  r.get("seed", c.seed);
  std::string mode = run_mode_name(c.mode);
  r.get("mode", mode);
  c.mode = detail::parse_enum<RunMode>(
      "mode", mode,
      {{"info_evo", RunMode::info_evo}, {"baseline", RunMode::baseline}, {"paired", RunMode::paired}});

  auto& L = c.loop;
  r.object("promise", [&](detail::ObjectReader& p) {
    p.get("w_zeta", L.promise.w_zeta);
    p.get("w_lm", L.promise.w_lm);
    p.get("w_gm", L.promise.w_gm);
    p.get("k_local", L.promise.k_local);
    p.get("sharpness", L.promise.sharpness);
  });
  r.object("step", [&](detail::ObjectReader& s) {
    s.get("gamma", L.step.gamma);
    s.get("ray_count", L.step.ray_count);
    s.get("resolution", L.step.grid_resolution);
    s.get("refinement_levels", L.step.refinement_levels);
    s.get("relaxation_sweeps", L.step.relaxation_sweeps);
    s.get("chart_dim", L.step.chart_dim);
    if (const json* v = s.find("exact_rays")) {
      if (v->is_boolean())
        L.step.ray_mode = v->get<bool>() ? RayMode::exact : RayMode::grid;
      else if (v->is_string() && v->get<std::string>() == "auto")
        L.step.ray_mode = RayMode::automatic;
      else
        throw ConfigError(s.field("exact_rays"), "expected true, false or \"auto\"");
    }
  });
  r.object("evolution", [&](detail::ObjectReader& e) {
    e.get("subpop_size", L.evolution.subpop_size);
    e.get("generations_per_round", L.evolution.generations_per_round);
    e.get("mutation_rate", L.evolution.mutation_rate);
    e.get("crossover_rate", L.evolution.crossover_rate);
    e.get("elitism", L.evolution.elitism);
    e.get("eda_fraction", L.evolution.eda_fraction);
    e.get("tournament_size", L.evolution.tournament_size);
  });
  r.object("filter", [&](detail::ObjectReader& f) {
    f.get("k", L.filter.k);
    f.get("threshold_quantile", L.filter.threshold_quantile);
    std::string metric = "blended";
    double lambda = L.filter.metric.lambda;
    f.get("metric", metric);
    f.get("lambda", lambda);
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("filter.lambda", "must lie in [0, 1]");
    L.filter.metric = {detail::parse_enum<MetricKind>("filter.metric", metric,
                                                      {{"genotypic", MetricKind::genotypic},
                                                       {"phenotypic", MetricKind::phenotypic},
                                                       {"blended", MetricKind::blended}}),
                       lambda};
  });
  r.object("omega", [&](detail::ObjectReader& o) {
    std::string kind = "knn_mass";
    o.get("kind", kind);
    L.omega.kind = detail::parse_enum<OmegaKind>(
        "omega.kind", kind, {{"knn_mass", OmegaKind::knn_mass}, {"projection", OmegaKind::projection}});
    o.get("k", L.omega.k);
  });
  r.object("h", [&](detail::ObjectReader& h) {
    std::string kind = "product";
    h.get("kind", kind);
    L.h.kind = detail::parse_enum<HKind>("h.kind", kind,
                                         {{"product", HKind::product}, {"weighted_sum", HKind::weighted_sum}});
    h.get("alpha", L.h.alpha);
    h.get("omega0", L.h.omega0);
  });
  r.get("initial_population", L.initial_population);
  r.get("population_cap", L.population_cap);
  r.get("max_rounds", L.max_rounds);
  r.get("stall_rounds", L.stall_rounds);
  r.get("demes", c.demes);
  r.get("subdemes_per_deme", c.subdemes_per_deme);
  r.finish();
  return c;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON in '") + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Flag overrides

enum class FlagType { string, unsigned_integer, real, ray_mode };

struct FlagSpec {
  const char* flag;     // long option without dashes
  const char* pointer;  // JSON pointer into the config document
  FlagType type;
  const char* help;
};

inline const std::vector<FlagSpec>& run_flags() {
  static const std::vector<FlagSpec> flags{
      {"problem", "/problem/name", FlagType::string, "onemax | trap | sphere | rosenbrock | symreg"},
      {"bits", "/problem/bits", FlagType::unsigned_integer, "bitstring length"},
      {"block", "/problem/block", FlagType::unsigned_integer, "trap block size"},
      {"dim", "/problem/dim", FlagType::unsigned_integer, "real-vector dimension"},
      {"target", "/problem/target", FlagType::real, "success threshold on the score"},
      {"max-depth", "/problem/max_depth", FlagType::unsigned_integer, "expression tree depth bound"},
      {"dataset", "/problem/dataset", FlagType::string, "symbolic regression CSV (header, output last)"},
      {"behavior-metric", "/problem/behavior_metric", FlagType::string, "euclidean | fisher"},
      {"budget", "/budget", FlagType::unsigned_integer, "total evaluation budget"},
      {"mode", "/mode", FlagType::string, "info_evo | baseline | paired"},
      {"w-zeta", "/promise/w_zeta", FlagType::real, "promise weight of the normalized score"},
      {"w-lm", "/promise/w_lm", FlagType::real, "promise weight of the local-maximum term"},
      {"w-gm", "/promise/w_gm", FlagType::real, "promise weight of the global-maximum term"},
      {"k-local", "/promise/k_local", FlagType::unsigned_integer, "neighbors for the local-maximum term"},
      {"sharpness", "/promise/sharpness", FlagType::real, "exponent on the max-ratio terms"},
      {"gamma", "/step/gamma", FlagType::real, "step size along geodesic rays"},
      {"rays", "/step/ray_count", FlagType::unsigned_integer, "rays per round"},
      {"resolution", "/step/resolution", FlagType::unsigned_integer, "Dijkstra lattice resolution"},
      {"levels", "/step/refinement_levels", FlagType::unsigned_integer, "polyline refinement levels"},
      {"chart-dim", "/step/chart_dim", FlagType::unsigned_integer, "chart dimension (1-3)"},
      {"exact-rays", "/step/exact_rays", FlagType::ray_mode, "auto | true | false"},
      {"subpop", "/evolution/subpop_size", FlagType::unsigned_integer, "sub-population size m"},
      {"generations", "/evolution/generations_per_round", FlagType::unsigned_integer, "generations per sub-deme round"},
      {"mutation-rate", "/evolution/mutation_rate", FlagType::real, "per-locus mutation rate"},
      {"crossover-rate", "/evolution/crossover_rate", FlagType::real, "crossover probability"},
      {"elitism", "/evolution/elitism", FlagType::unsigned_integer, "elite parents kept by raw score"},
      {"eda-fraction", "/evolution/eda_fraction", FlagType::real, "share of offspring sampled from marginals"},
      {"tournament", "/evolution/tournament_size", FlagType::unsigned_integer, "tournament size"},
      {"filter-k", "/filter/k", FlagType::unsigned_integer, "neighbors for fitness estimation"},
      {"quantile", "/filter/threshold_quantile", FlagType::real, "skip threshold quantile in [0, 1)"},
      {"metric", "/filter/metric", FlagType::string, "genotypic | phenotypic | blended"},
      {"lambda", "/filter/lambda", FlagType::real, "genotypic weight of the blended metric"},
      {"omega", "/omega/kind", FlagType::string, "knn_mass | projection"},
      {"omega-k", "/omega/k", FlagType::unsigned_integer, "neighbors for omega"},
      {"h-form", "/h/kind", FlagType::string, "product | weighted_sum"},
      {"alpha", "/h/alpha", FlagType::real, "score weight of the weighted sum"},
      {"omega0", "/h/omega0", FlagType::real, "omega baseline in the product form"},
      {"initial-population", "/initial_population", FlagType::unsigned_integer, "random initial samples"},
      {"population-cap", "/population_cap", FlagType::unsigned_integer, "size of the working population"},
      {"max-rounds", "/max_rounds", FlagType::unsigned_integer, "loop iterations per deme (0: unlimited)"},
      {"demes", "/demes", FlagType::unsigned_integer, "number of demes"},
      {"subdemes", "/subdemes_per_deme", FlagType::unsigned_integer, "sub-demes (rays) per deme"},
  };
  return flags;
}

/// Dotted config field for a JSON pointer, e.g. "/step/gamma" -> "step.gamma".
inline std::string field_of(const std::string& pointer) {
  std::string out = pointer.substr(1);
  std::replace(out.begin(), out.end(), '/', '.');
  return out;
}

inline json flag_value(const FlagSpec& spec, const std::string& text) {
  const std::string field = field_of(spec.pointer);
  switch (spec.type) {
    case FlagType::string:
      return text;
    case FlagType::unsigned_integer: {
      std::uint64_t v = 0;
      const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || end != text.data() + text.size())
        throw ConfigError(field, "expected a nonnegative integer, got '" + text + "'");
      return v;
    }
    case FlagType::real: {
      double v = 0.0;
      const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || end != text.data() + text.size())
        throw ConfigError(field, "expected a number, got '" + text + "'");
      return v;
    }
    case FlagType::ray_mode:
      if (text == "auto") return "auto";
      if (text == "true") return true;
      if (text == "false") return false;
      throw ConfigError(field, "expected auto, true or false");
  }
  return text;
}

/// Applies flag values onto a config document; flags win over file values.
inline void apply_flags(json& doc, const std::vector<std::pair<const FlagSpec*, std::string>>& given) {
  for (const auto& [spec, text] : given) doc[json::json_pointer(spec->pointer)] = flag_value(*spec, text);
}

// ---------------------------------------------------------------------------
// Normalized snapshot

inline json to_json(const RunConfig& c) {
  const auto& L = c.loop;
  json problem = {{"name", c.problem.name}};
  if (c.problem.name == "onemax") problem["bits"] = c.problem.bits;
  if (c.problem.name == "trap") {
    problem["bits"] = c.problem.bits;
    problem["block"] = c.problem.block;
  }
  if (c.problem.name == "sphere" || c.problem.name == "rosenbrock") problem["dim"] = c.problem.dim;
  if (c.problem.name == "symreg") {
    problem["max_depth"] = c.problem.max_depth;
    problem["dataset"] = c.problem.dataset;
    problem["behavior_metric"] = c.problem.behavior_metric;
  }
  problem["target"] = c.problem.target ? json(*c.problem.target) : json(nullptr);
  const char* metric = L.filter.metric.kind == MetricKind::genotypic    ? "genotypic"
                       : L.filter.metric.kind == MetricKind::phenotypic ? "phenotypic"
                                                                        : "blended";
  json exact = L.step.ray_mode == RayMode::automatic ? json("auto") : json(L.step.ray_mode == RayMode::exact);
  return {
      {"problem", problem},
      {"budget", c.budget},
      {"seed", c.seed ? json(*c.seed) : json(nullptr)},
      {"mode", run_mode_name(c.mode)},
      {"promise",
       {{"w_zeta", L.promise.w_zeta},
        {"w_lm", L.promise.w_lm},
        {"w_gm", L.promise.w_gm},
        {"k_local", L.promise.k_local},
        {"sharpness", L.promise.sharpness}}},
      {"step",
       {{"gamma", L.step.gamma},
        {"ray_count", L.step.ray_count},
        {"resolution", L.step.grid_resolution},
        {"refinement_levels", L.step.refinement_levels},
        {"relaxation_sweeps", L.step.relaxation_sweeps},
        {"chart_dim", L.step.chart_dim},
        {"exact_rays", exact}}},
      {"evolution",
       {{"subpop_size", L.evolution.subpop_size},
        {"generations_per_round", L.evolution.generations_per_round},
        {"mutation_rate", L.evolution.mutation_rate},
        {"crossover_rate", L.evolution.crossover_rate},
        {"elitism", L.evolution.elitism},
        {"eda_fraction", L.evolution.eda_fraction},
        {"tournament_size", L.evolution.tournament_size}}},
      {"filter",
       {{"k", L.filter.k},
        {"threshold_quantile", L.filter.threshold_quantile},
        {"metric", metric},
        {"lambda", L.filter.metric.lambda}}},
      {"omega", {{"kind", L.omega.kind == OmegaKind::knn_mass ? "knn_mass" : "projection"}, {"k", L.omega.k}}},
      {"h",
       {{"kind", L.h.kind == HKind::product ? "product" : "weighted_sum"},
        {"alpha", L.h.alpha},
        {"omega0", L.h.omega0}}},
      {"initial_population", L.initial_population},
      {"population_cap", L.population_cap},
      {"max_rounds", L.max_rounds},
      {"stall_rounds", L.stall_rounds},
      {"demes", c.demes},
      {"subdemes_per_deme", c.subdemes()},
  };
}

}  // namespace infoevo::cli
