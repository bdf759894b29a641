// fedcure: command-line runner for coalition formation and scheduling runs.
//
//   fedcure run      [--config PATH] [overrides] [--skip-formation] [--out DIR]
//   fedcure form     [--config PATH] [overrides] [--out DIR]
//   fedcure sweep    --param NAME --values V1,V2,... [--config PATH] [overrides]
//   fedcure validate [--config PATH] [overrides]
//
// Every config field can be overridden with --<field> VALUE. The output
// directory defaults to $FEDCURE_OUT_DIR, then ./fedcure_out.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedcure/fedcure.hpp"

namespace fs = std::filesystem;
using namespace fedcure;

namespace {

struct CommonOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::string scheduler;
  std::string rounds;
  std::string out_dir;
  bool skip_formation = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_output) {
  cmd->add_option("--config", opts.config_path, "JSON config file")->check(CLI::ExistingFile);
  for (const auto& f : config_fields()) {
    cmd->add_option("--" + f.name, opts.overrides[f.name], "override " + f.section + "." + f.name);
  }
  cmd->add_option("--scheduler", opts.scheduler, "fedcure, greedy or fair (alias of --scheduler_kind)");
  cmd->add_option("--rounds", opts.rounds, "global rounds (alias of --tau_g)");
  if (with_output) {
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_flag("--skip-formation", opts.skip_formation, "simulate the initial partition as-is");
  }
}

ExperimentConfig resolve_config(const CommonOptions& opts) {
  ExperimentConfig config = opts.config_path.empty() ? ExperimentConfig{} : load_config(opts.config_path);
  for (const auto& f : config_fields()) {
    auto it = opts.overrides.find(f.name);
    if (it != opts.overrides.end() && !it->second.empty()) f.from_text(config, it->second);
  }
  if (!opts.scheduler.empty()) set_field(config, "scheduler_kind", opts.scheduler);
  if (!opts.rounds.empty()) set_field(config, "tau_g", opts.rounds);
  config.validate();
  return config;
}

fs::path output_dir(const CommonOptions& opts) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (const char* env = std::getenv("FEDCURE_OUT_DIR"); env && *env) return env;
  return "fedcure_out";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_artifacts(const fs::path& dir, const ExperimentConfig& config, const RunMetrics& m) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "rounds.csv");
    write_rounds_csv(out, m.rounds, m.n_coalitions);
  }
  {
    auto out = open_out(dir / "formation.csv");
    write_formation_csv(out, m.formation);
  }
  {
    auto out = open_out(dir / "allocations.csv");
    write_allocations_csv(out, m.allocations);
  }
  {
    auto out = open_out(dir / "summary.json");
    out << summary_to_json(m).dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "config.json");
    out << config_to_json(config).dump(2) << '\n';
  }
}

void print_summary(const RunMetrics& m) {
  const RunSummary& s = m.summary;
  std::printf("scheduler        %s\n", s.scheduler.c_str());
  std::printf("rounds           %ld\n", s.rounds);
  std::printf("avg-JS           %s -> %s (%zu switches, converged=%s)\n", format_real(s.initial_avg_js).c_str(),
              format_real(s.final_avg_js).c_str(), m.formation.switches.size(),
              m.formation.converged ? "yes" : "no");
  std::printf("latency COV      %s\n", format_real(s.cov).c_str());
  std::printf("max queue        %s\n", format_real(s.max_queue).c_str());
  std::printf("final loss/acc   %s / %s\n", format_real(s.final_loss).c_str(), format_real(s.final_accuracy).c_str());
  std::printf("%-10s %-12s %-12s %-12s\n", "coalition", "delta", "particip.", "mean rate");
  for (std::size_t k = 0; k < s.participation.size(); ++k)
    std::printf("%-10zu %-12s %-12s %-12s\n", k, format_real(s.delta[k]).c_str(),
                format_real(s.participation[k]).c_str(), format_real(s.mean_rate[k]).c_str());
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    if (cell.empty()) continue;
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size())
      throw Error(ErrorCode::ConfigError, "cannot parse sweep value '" + cell + "'");
    values.push_back(v);
  }
  return values;
}

int cmd_run(const CommonOptions& opts) {
  ExperimentConfig config = resolve_config(opts);
  ExperimentResult r = run_experiment(config, opts.skip_formation);
  fs::path dir = output_dir(opts);
  write_artifacts(dir, config, r.metrics);
  print_summary(r.metrics);
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int cmd_form(const CommonOptions& opts) {
  ExperimentConfig config = resolve_config(opts);
  ExperimentSetup setup = build_setup(config);
  FormationResult f = form_coalitions(config, setup);
  fs::path dir = output_dir(opts);
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "formation.csv");
    write_formation_csv(out, f.trace);
  }
  {
    auto out = open_out(dir / "partition.csv");
    out << "client,coalition\n";
    for (std::size_t n = 0; n < f.partition.n_clients(); ++n) out << n << ',' << f.partition.coalition_of(n) << '\n';
  }
  std::printf("avg-JS %s -> %s after %zu iterations, %zu switches, converged=%s, stable=%s\n",
              format_real(f.trace.initial_avg_js).c_str(), format_real(f.trace.final_avg_js()).c_str(),
              f.trace.iterations, f.trace.switches.size(), f.trace.converged ? "yes" : "no",
              is_stable(f.partition, setup.clients) ? "yes" : "no");
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int cmd_sweep(const CommonOptions& opts, const std::string& param, const std::string& values_text) {
  ExperimentConfig config = resolve_config(opts);
  std::vector<double> values = parse_values(values_text);
  if (!find_field(param) || !find_field(param)->numeric)
    throw Error(ErrorCode::ConfigError, "'" + param + "' is not a numeric config field");
  fs::path dir = output_dir(opts);
  if (values.empty()) {
    std::printf("no sweep values given; nothing to run\n");
    return 0;
  }
  auto points = sweep(config, param, values, opts.skip_formation);
  fs::create_directories(dir);
  auto out = open_out(dir / "sweep.csv");
  out << param << ",cov,max_queue,max_mean_rate,min_participation_margin,final_loss,final_accuracy\n";
  std::printf("%-12s %-12s %-12s %-14s %-12s\n", param.c_str(), "cov", "max_queue", "max_mean_rate", "min_margin");
  for (const auto& p : points) {
    ExperimentConfig c = config;
    set_field(c, param, format_sweep_value(p.value));
    write_artifacts(dir / (param + "=" + format_real(p.value)), c, p.metrics);
    const RunSummary& s = p.metrics.summary;
    double max_rate = 0.0, margin = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < s.mean_rate.size(); ++m) {
      max_rate = std::max(max_rate, s.mean_rate[m]);
      margin = std::min(margin, s.participation[m] - s.delta[m]);
    }
    out << format_real(p.value) << ',' << format_real(s.cov) << ',' << format_real(s.max_queue) << ','
        << format_real(max_rate) << ',' << format_real(margin) << ',' << format_real(s.final_loss) << ','
        << format_real(s.final_accuracy) << '\n';
    std::printf("%-12s %-12s %-12s %-14s %-12s\n", format_real(p.value).c_str(), format_real(s.cov).c_str(),
                format_real(s.max_queue).c_str(), format_real(max_rate).c_str(), format_real(margin).c_str());
  }
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int cmd_validate(const CommonOptions& opts) {
  ExperimentConfig config = resolve_config(opts);
  std::printf("%s\nconfig OK\n", config_to_json(config).dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coalition formation and participation-balanced scheduling simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts, form_opts, sweep_opts, validate_opts;
  std::string sweep_param, sweep_values;

  auto* run = app.add_subcommand("run", "form coalitions, then simulate training");
  add_common(run, run_opts, true);
  auto* form = app.add_subcommand("form", "coalition formation only");
  add_common(form, form_opts, true);
  auto* sw = app.add_subcommand("sweep", "independent runs over values of one numeric field");
  add_common(sw, sweep_opts, true);
  sw->add_option("--param", sweep_param, "config field to sweep")->required();
  sw->add_option("--values", sweep_values, "comma-separated values");
  auto* validate = app.add_subcommand("validate", "check a config and print the resolved values");
  add_common(validate, validate_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opts);
    if (*form) return cmd_form(form_opts);
    if (*sw) return cmd_sweep(sweep_opts, sweep_param, sweep_values);
    if (*validate) return cmd_validate(validate_opts);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
