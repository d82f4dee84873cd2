// infoevo: run guided and baseline searches, compare them over seeds, and
// check the geodesic search against the closed-form distance.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "infoevo/cli/commands.hpp"

namespace {

using infoevo::cli::json;

struct CommonOptions {
  std::string config;
  std::string out = ".";
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config, "JSON configuration file");
  cmd->add_option("--out", common.out, "output directory");
  cmd->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", common.seed, "random seed");
}

void add_run_flags(CLI::App* cmd, std::map<std::string, std::string>& values) {
  for (const auto& spec : infoevo::cli::run_flags())
    cmd->add_option(std::string("--") + spec.flag, values[spec.flag], spec.help);
}

infoevo::cli::RunConfig build_config(const CLI::App* cmd, const CommonOptions& common,
                                     const std::map<std::string, std::string>& values) {
  json doc = common.config.empty() ? json::object() : infoevo::cli::load_json_file(common.config);
  std::vector<std::pair<const infoevo::cli::FlagSpec*, std::string>> given;
  for (const auto& spec : infoevo::cli::run_flags())
    if (cmd->count(std::string("--") + spec.flag) > 0) given.emplace_back(&spec, values.at(spec.flag));
  if (!doc.is_object()) throw infoevo::ConfigError("config", "expected a JSON object");
  infoevo::cli::apply_flags(doc, given);
  if (common.seed) doc["seed"] = *common.seed;
  return infoevo::cli::parse_config(doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided evolutionary search over the Fisher-Rao geometry of sample distributions"};
  app.require_subcommand(1);

  CommonOptions common;
  std::map<std::string, std::string> run_values, compare_values;
  std::size_t repeats = 5;
  infoevo::cli::GeodesicCheckOptions geo;

  auto* run = app.add_subcommand("run", "run one experiment; writes run.json and trace.jsonl");
  add_common(run, common);
  add_run_flags(run, run_values);

  auto* compare = app.add_subcommand("compare", "paired info_evo/baseline runs over seeds; writes compare.csv");
  add_common(compare, common);
  add_run_flags(compare, compare_values);
  compare->add_option("--repeats", repeats, "number of seeds")->capture_default_str();

  auto* check = app.add_subcommand("geodesic-check", "compare lattice geodesics with closed-form distances");
  add_common(check, common);
  check->add_option("--n", geo.ns, "simplex sizes (repeatable or comma separated)")->delimiter(',');
  check->add_option("--trials", geo.trials, "trials per size")->capture_default_str();
  check->add_option("--resolution", geo.resolution, "lattice resolution")->capture_default_str();
  check->add_option("--levels", geo.levels, "refinement levels")->capture_default_str();
  check->add_option("--chart-dim", geo.chart_dim, "chart dimension")->capture_default_str();

  auto* list = app.add_subcommand("list-problems", "list the available problems");
  add_common(list, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return infoevo::cli::kExitConfig;
  }

  infoevo::cli::Context ctx;
  ctx.out_dir = common.out;
  ctx.threads = common.threads;
  ctx.out = &std::cout;
  ctx.err = &std::cerr;
  try {
    if (*run) return infoevo::cli::cmd_run(build_config(run, common, run_values), ctx);
    if (*compare) return infoevo::cli::cmd_compare(build_config(compare, common, compare_values), repeats, ctx);
    if (*check) {
      if (common.seed) geo.seed = *common.seed;
      return infoevo::cli::cmd_geodesic_check(geo, ctx);
    }
    return infoevo::cli::cmd_list_problems(ctx);
  } catch (const infoevo::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return infoevo::cli::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
