#pragma once

// Experiment configuration: defaults, validation, a field registry that
// drives JSON ingestion, CLI overrides and parameter sweeps.

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fedcure/core.hpp"

namespace fedcure {

enum class SchedulerKind { FedCure, Greedy, Fair };

inline std::string_view to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::FedCure: return "fedcure";
    case SchedulerKind::Greedy: return "greedy";
    case SchedulerKind::Fair: return "fair";
  }
  return "fedcure";
}

inline SchedulerKind parse_scheduler_kind(std::string_view s) {
  if (s == "fedcure") return SchedulerKind::FedCure;
  if (s == "greedy") return SchedulerKind::Greedy;
  if (s == "fair") return SchedulerKind::Fair;
  throw Error(ErrorCode::ConfigError, "unknown scheduler '" + std::string(s) + "' (expected fedcure, greedy or fair)");
}

struct ExperimentConfig {
  // system
  int n_clients = 50;
  int n_edges = 5;
  int n_classes = 10;
  std::uint64_t seed = 0;

  // training
  int tau_c = 5;
  int tau_e = 12;
  int tau_g = 200;
  double ell = 0.2;
  double kpen = 0.9;
  bool learner = true;
  double lr = 0.2;
  int batch_size = 16;
  int eval_every = 10;

  // scheduling
  SchedulerKind scheduler_kind = SchedulerKind::FedCure;
  double beta = 0.5;
  double kappa = 1.0;

  // resource allocation
  double alpha = 1.0;
  double gamma = 1.0;
  double varsigma = 2.0;
  bool allocate_frequency = true;

  // coalition formation
  int max_game_iters = 20000;
  int labels_per_coalition = 2;

  // latency model
  double noise_sigma = 0.1;
  double comp_load_min = 0.5;
  double comp_load_max = 1.5;
  double f_max_min = 0.5;
  double f_max_max = 2.0;
  double comm_delay_max = 2.0;
  double edge_delay_median = 100.0;  // lognormal edge-cloud delay per edge
  double edge_delay_spread = 1.0;    // log-space std

  // synthetic data
  int dim = 20;
  double class_sep = 3.0;
  int train_per_class = 200;
  int test_per_class = 100;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
    if (n_edges < 2) fail("n_edges must be >= 2");
    if (n_clients < n_edges) fail("n_clients must be >= n_edges");
    if (n_classes < 1) fail("n_classes must be >= 1");
    if (tau_c < 1 || tau_e < 1 || tau_g < 1) fail("tau_c, tau_e and tau_g must be >= 1");
    if (!(ell > 0.0 && ell < 1.0)) fail("ell must lie in (0, 1)");
    if (!(kpen > 0.0 && kpen < 1.0)) fail("kpen must lie in (0, 1)");
    if (!(beta > 0.0)) fail("beta must be > 0");
    if (!(kappa >= 0.0 && kappa <= 1.0)) fail("kappa must lie in [0, 1]");
    if (!(alpha > 0.0)) fail("alpha must be > 0");
    if (!(gamma > 0.0)) fail("gamma must be > 0");
    if (!(varsigma >= 1.0)) fail("varsigma must be >= 1");
    if (max_game_iters < 0) fail("max_game_iters must be >= 0");
    if (labels_per_coalition < 1) fail("labels_per_coalition must be >= 1");
    if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
    if (!(comp_load_min > 0.0 && comp_load_max >= comp_load_min)) fail("comp_load range invalid");
    if (!(f_max_min > 0.0 && f_max_max >= f_max_min)) fail("f_max range invalid");
    if (!(comm_delay_max >= 0.0)) fail("comm_delay_max must be >= 0");
    if (!(edge_delay_median >= 0.0) || !(edge_delay_spread >= 0.0)) fail("edge delay median and spread must be >= 0");
    if (!(lr >= 0.0)) fail("lr must be >= 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (eval_every < 1) fail("eval_every must be >= 1");
    if (dim < 1) fail("dim must be >= 1");
    if (!(class_sep >= 0.0)) fail("class_sep must be >= 0");
    if (train_per_class < 1 || test_per_class < 1) fail("per-class sample counts must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Field registry

struct ConfigField {
  std::string name;
  std::string section;
  bool numeric = true;
  std::function<void(ExperimentConfig&, const nlohmann::json&)> from_json;
  std::function<nlohmann::json(const ExperimentConfig&)> to_json;
  std::function<void(ExperimentConfig&, const std::string&)> from_text;
};

namespace detail {

template <typename T>
T parse_text(const std::string& name, const std::string& text) {
  std::istringstream in(text);
  T value{};
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw Error(ErrorCode::ConfigError, name + ": expected true/false, got '" + text + "'");
  } else {
    in >> value;
    if (in.fail() || !in.eof())
      throw Error(ErrorCode::ConfigError, name + ": cannot parse '" + text + "'");
  }
  return value;
}

template <typename T>
ConfigField make_field(std::string name, std::string section, T ExperimentConfig::*member) {
  ConfigField f;
  f.numeric = !std::is_same_v<T, bool>;
  f.from_json = [member, name](ExperimentConfig& c, const nlohmann::json& j) {
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!j.is_boolean()) throw Error(ErrorCode::ConfigError, name + ": expected a boolean");
      } else {
        if (!j.is_number()) throw Error(ErrorCode::ConfigError, name + ": expected a number");
        if constexpr (std::is_integral_v<T>)
          if (!j.is_number_integer() && !j.is_number_unsigned())
            throw Error(ErrorCode::ConfigError, name + ": expected an integer");
      }
      c.*member = j.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigError, name + ": " + e.what());
    }
  };
  f.to_json = [member](const ExperimentConfig& c) { return nlohmann::json(c.*member); };
  f.from_text = [member, name](ExperimentConfig& c, const std::string& text) {
    c.*member = parse_text<T>(name, text);
  };
  f.name = std::move(name);
  f.section = std::move(section);
  return f;
}

}  // namespace detail

inline const std::vector<ConfigField>& config_fields() {
  using detail::make_field;
  using C = ExperimentConfig;
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> v;
    v.push_back(make_field("n_clients", "system", &C::n_clients));
    v.push_back(make_field("n_edges", "system", &C::n_edges));
    v.push_back(make_field("n_classes", "system", &C::n_classes));
    v.push_back(make_field("seed", "system", &C::seed));
    v.push_back(make_field("tau_c", "training", &C::tau_c));
    v.push_back(make_field("tau_e", "training", &C::tau_e));
    v.push_back(make_field("tau_g", "training", &C::tau_g));
    v.push_back(make_field("ell", "training", &C::ell));
    v.push_back(make_field("kpen", "training", &C::kpen));
    v.push_back(make_field("learner", "training", &C::learner));
    v.push_back(make_field("lr", "training", &C::lr));
    v.push_back(make_field("batch_size", "training", &C::batch_size));
    v.push_back(make_field("eval_every", "training", &C::eval_every));

    ConfigField sched;
    sched.name = "scheduler_kind";
    sched.section = "scheduler";
    sched.numeric = false;
    sched.from_json = [](C& c, const nlohmann::json& j) {
      if (!j.is_string()) throw Error(ErrorCode::ConfigError, "scheduler_kind: expected a string");
      c.scheduler_kind = parse_scheduler_kind(j.get<std::string>());
    };
    sched.to_json = [](const C& c) { return nlohmann::json(std::string(to_string(c.scheduler_kind))); };
    sched.from_text = [](C& c, const std::string& s) { c.scheduler_kind = parse_scheduler_kind(s); };
    v.push_back(std::move(sched));

    v.push_back(make_field("beta", "scheduler", &C::beta));
    v.push_back(make_field("kappa", "scheduler", &C::kappa));
    v.push_back(make_field("alpha", "utility", &C::alpha));
    v.push_back(make_field("gamma", "utility", &C::gamma));
    v.push_back(make_field("varsigma", "utility", &C::varsigma));
    v.push_back(make_field("allocate_frequency", "utility", &C::allocate_frequency));
    v.push_back(make_field("max_game_iters", "formation", &C::max_game_iters));
    v.push_back(make_field("labels_per_coalition", "formation", &C::labels_per_coalition));
    v.push_back(make_field("noise_sigma", "latency", &C::noise_sigma));
    v.push_back(make_field("comp_load_min", "latency", &C::comp_load_min));
    v.push_back(make_field("comp_load_max", "latency", &C::comp_load_max));
    v.push_back(make_field("f_max_min", "latency", &C::f_max_min));
    v.push_back(make_field("f_max_max", "latency", &C::f_max_max));
    v.push_back(make_field("comm_delay_max", "latency", &C::comm_delay_max));
    v.push_back(make_field("edge_delay_median", "latency", &C::edge_delay_median));
    v.push_back(make_field("edge_delay_spread", "latency", &C::edge_delay_spread));
    v.push_back(make_field("dim", "data", &C::dim));
    v.push_back(make_field("class_sep", "data", &C::class_sep));
    v.push_back(make_field("train_per_class", "data", &C::train_per_class));
    v.push_back(make_field("test_per_class", "data", &C::test_per_class));
    return v;
  }();
  return fields;
}

inline const ConfigField* find_field(std::string_view name) {
  for (const auto& f : config_fields())
    if (f.name == name) return &f;
  return nullptr;
}

inline void set_field(ExperimentConfig& config, std::string_view name, const std::string& text) {
  const ConfigField* f = find_field(name);
  if (!f) throw Error(ErrorCode::ConfigError, "unknown config field '" + std::string(name) + "'");
  f->from_text(config, text);
}

/// Nested JSON document: {"system": {"n_clients": 50, ...}, "training": {...}, ...}.
/// Unknown sections or keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& doc) {
  ExperimentConfig config;
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config root must be an object");
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object())
      throw Error(ErrorCode::ConfigError, "section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      const ConfigField* f = find_field(key);
      if (!f || f->section != section)
        throw Error(ErrorCode::ConfigError, "unknown config key '" + section + "." + key + "'");
      f->from_json(config, value);
    }
  }
  return config;
}

inline nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& f : config_fields()) doc[f.section][f.name] = f.to_json(config);
  return doc;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace fedcure
