// deps: trajectory runs, phase portraits, continuous-limit tables, and
// invariant reports for the discrete Suslov top and Chaplygin sleigh.
#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "deps/harness.hpp"

namespace {

int finish(const deps::RunOutcome& out) {
  for (const std::string& f : out.files_written) std::printf("wrote %s\n", f.c_str());
  if (!out.message.empty()) std::fprintf(stderr, "%s\n", out.message.c_str());
  return out.exit_code;
}

deps::SimConfig load(const std::string& config_path, const std::vector<std::string>& overrides,
                     const std::string& out, const std::string& format,
                     const std::string& policy, long steps) {
  deps::SimConfig cfg = deps::parse_config_file(config_path);
  if (!out.empty()) deps::apply_override(cfg, "out=" + out);
  if (!format.empty()) deps::apply_override(cfg, "format=" + format);
  if (!policy.empty()) deps::apply_override(cfg, "policy=" + policy);
  if (steps >= 0) deps::apply_override(cfg, "steps=" + std::to_string(steps));
  for (const std::string& o : overrides) deps::apply_override(cfg, o);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonholonomic variational integrators on SO(3) and SE(2)"};
  app.require_subcommand(1);

  std::string config_path, out, format, policy, grid_spec, eps_list, report_path;
  std::vector<std::string> overrides;
  long steps = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "configuration file")->required();
    cmd->add_option("--out", out, "output path (overrides config)");
    cmd->add_option("--format", format, "csv or json");
    cmd->add_option("--policy", policy, "continuity, smallest or largest");
    cmd->add_option("--steps", steps, "step count (overrides config)");
    cmd->add_option("--seed-override", overrides, "key=value config overrides");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run one trajectory (or a sweep)");
  add_common(run_cmd);

  CLI::App* portrait_cmd = app.add_subcommand("portrait", "sample orbits over a grid");
  add_common(portrait_cmd);
  portrait_cmd->add_option("--grid", grid_spec, "name=lo:hi:count,name=lo:hi:count")->required();

  CLI::App* limit_cmd = app.add_subcommand("limit", "discrete-vs-continuous convergence table");
  add_common(limit_cmd);
  limit_cmd->add_option("--eps", eps_list, "comma-separated epsilons, each half the previous")
      ->required();

  CLI::App* report_cmd = app.add_subcommand("report", "invariant drift report of a trajectory");
  report_cmd->add_option("trajectory", report_path, "trajectory file produced by run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return finish(deps::run(load(config_path, overrides, out, format, policy, steps)));
    }
    if (portrait_cmd->parsed()) {
      const deps::SimConfig cfg = load(config_path, overrides, out, format, policy, steps);
      return finish(deps::phase_portrait(cfg, deps::parse_grid_spec(grid_spec)));
    }
    if (limit_cmd->parsed()) {
      const deps::SimConfig cfg = load(config_path, overrides, out, format, policy, steps);
      std::vector<double> eps;
      std::stringstream ss(eps_list);
      std::string item;
      while (std::getline(ss, item, ',')) eps.push_back(std::stod(item));
      const deps::LimitOutcome res = deps::compare_limit(cfg, eps);
      std::printf("eps,deviation,order\n");
      for (const deps::LimitRow& row : res.rows) {
        std::printf("%.17g,%.17g,%.17g\n", row.eps, row.deviation, row.order);
      }
      std::printf("order_ok,%s\n", res.order_ok ? "true" : "false");
      if (!res.message.empty()) std::fprintf(stderr, "%s\n", res.message.c_str());
      return res.exit_code;
    }
    if (report_cmd->parsed()) {
      const auto reports = deps::invariant_report(report_path);
      std::printf("invariant,initial,max_abs_drift,max_rel_drift,step_of_max\n");
      for (const deps::InvariantReport& rep : reports) {
        std::printf("%s,%.17g,%.17g,%.17g,%ld\n", rep.name.c_str(), rep.initial,
                    rep.max_abs_drift, rep.max_rel_drift, rep.step_of_max);
      }
      return 0;
    }
  } catch (const deps::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
