#pragma once

// Run metrics: per-round rows, formation trace, allocation log and the
// derived summary, with the delimited-text and JSON formats used on disk.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedcure/coalition.hpp"
#include "fedcure/core.hpp"

namespace fedcure {

struct RoundRow {
  long t = 0;
  double clock = 0.0;
  long chosen = -1;  // -1 at round 0, where every coalition is dispatched
  long phi = 0;
  double xi = 0.0;
  double latency = 0.0;
  std::vector<double> lambda;
  std::vector<double> t_hat;
  std::string available;  // one '0'/'1' per coalition
  double loss = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct AllocationRow {
  long t = 0;
  std::size_t coalition = 0;
  std::size_t member = 0;
  double freq = 0.0;
  bool clamped = false;
};

struct RunSummary {
  std::string scheduler;
  long rounds = 0;
  double cov = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> participation;
  std::vector<double> delta;
  std::vector<double> mean_rate;
  double max_queue = 0.0;
  double interval = std::numeric_limits<double>::quiet_NaN();
  double initial_avg_js = std::numeric_limits<double>::quiet_NaN();
  double final_avg_js = std::numeric_limits<double>::quiet_NaN();
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double final_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct RunMetrics {
  std::size_t n_coalitions = 0;
  std::vector<RoundRow> rounds;
  GameTrace formation;
  std::vector<AllocationRow> allocations;
  RunSummary summary;
};

/// Coefficient of variation: population standard deviation over mean.
inline double cov(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::Undefined, "coefficient of variation of an empty list");
  double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  if (!(mean > 0.0)) throw Error(ErrorCode::Undefined, "coefficient of variation needs a positive mean");
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / n) / mean;
}

inline double cov(const std::vector<double>& values) { return cov(std::span<const double>(values)); }

/// Realized latency of every round t >= 1.
inline std::vector<double> round_latencies(const RunMetrics& m) {
  std::vector<double> out;
  for (const auto& r : m.rounds)
    if (r.t >= 1) out.push_back(r.latency);
  return out;
}

/// Fraction of rounds t >= 1 in which each coalition was scheduled.
inline std::vector<double> participation_from_rows(const std::vector<RoundRow>& rows, std::size_t n_coalitions) {
  std::vector<double> counts(n_coalitions, 0.0);
  double total = 0.0;
  for (const auto& r : rows) {
    if (r.t < 1) continue;
    counts.at(static_cast<std::size_t>(r.chosen)) += 1.0;
    total += 1.0;
  }
  if (total > 0.0)
    for (double& c : counts) c /= total;
  return counts;
}

inline double max_queue_from_rows(const std::vector<RoundRow>& rows) {
  double mx = 0.0;
  for (const auto& r : rows)
    for (double l : r.lambda) mx = std::max(mx, l);
  return mx;
}

// ---------------------------------------------------------------------------
// Delimited text

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_real(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw Error(ErrorCode::InvalidArgument, "malformed number '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s) {
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    throw Error(ErrorCode::InvalidArgument, "malformed integer '" + s + "'");
  return v;
}

inline nlohmann::json real_json(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double json_real(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline void write_rounds_csv(std::ostream& out, const std::vector<RoundRow>& rows, std::size_t n_coalitions) {
  out << "t,clock,chosen,phi,xi,latency";
  for (std::size_t m = 0; m < n_coalitions; ++m) out << ",lambda_" << m;
  for (std::size_t m = 0; m < n_coalitions; ++m) out << ",t_hat_" << m;
  out << ",available,loss,accuracy\n";
  for (const auto& r : rows) {
    out << r.t << ',' << format_real(r.clock) << ',' << r.chosen << ',' << r.phi << ',' << format_real(r.xi) << ','
        << format_real(r.latency);
    for (double v : r.lambda) out << ',' << format_real(v);
    for (double v : r.t_hat) out << ',' << format_real(v);
    out << ',' << r.available << ',' << format_real(r.loss) << ',' << format_real(r.accuracy) << '\n';
  }
}

/// Returns the rows and sets n_coalitions from the header.
inline std::vector<RoundRow> read_rounds_csv(std::istream& in, std::size_t& n_coalitions) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidArgument, "rounds file is empty");
  auto header = detail::split_csv(line);
  if (header.size() < 9 || (header.size() - 9) % 2 != 0)
    throw Error(ErrorCode::InvalidArgument, "unexpected rounds header");
  n_coalitions = (header.size() - 9) / 2;
  std::vector<RoundRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c = detail::split_csv(line);
    if (c.size() != header.size()) throw Error(ErrorCode::InvalidArgument, "rounds row has wrong width");
    RoundRow r;
    std::size_t i = 0;
    r.t = detail::parse_long(c[i++]);
    r.clock = detail::parse_real(c[i++]);
    r.chosen = detail::parse_long(c[i++]);
    r.phi = detail::parse_long(c[i++]);
    r.xi = detail::parse_real(c[i++]);
    r.latency = detail::parse_real(c[i++]);
    for (std::size_t m = 0; m < n_coalitions; ++m) r.lambda.push_back(detail::parse_real(c[i++]));
    for (std::size_t m = 0; m < n_coalitions; ++m) r.t_hat.push_back(detail::parse_real(c[i++]));
    r.available = c[i++];
    r.loss = detail::parse_real(c[i++]);
    r.accuracy = detail::parse_real(c[i++]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_formation_csv(std::ostream& out, const GameTrace& trace) {
  out << "iteration,client,from,to,avg_js\n";
  for (std::size_t i = 0; i < trace.switches.size(); ++i) {
    const auto& s = trace.switches[i];
    out << s.iteration << ',' << s.client << ',' << s.from << ',' << s.to << ',' << format_real(trace.js_history[i])
        << '\n';
  }
}

/// Recovers the accepted switches and js_history; iteration totals live in the summary.
inline GameTrace read_formation_csv(std::istream& in) {
  GameTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidArgument, "formation file is empty");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c = detail::split_csv(line);
    if (c.size() != 5) throw Error(ErrorCode::InvalidArgument, "formation row has wrong width");
    SwitchProposal s;
    s.iteration = static_cast<std::size_t>(detail::parse_long(c[0]));
    s.client = static_cast<std::size_t>(detail::parse_long(c[1]));
    s.from = static_cast<std::size_t>(detail::parse_long(c[2]));
    s.to = static_cast<std::size_t>(detail::parse_long(c[3]));
    trace.js_history.push_back(detail::parse_real(c[4]));
    trace.switches.push_back(s);
  }
  return trace;
}

inline void write_allocations_csv(std::ostream& out, const std::vector<AllocationRow>& rows) {
  out << "t,coalition,member,freq,clamped\n";
  for (const auto& a : rows)
    out << a.t << ',' << a.coalition << ',' << a.member << ',' << format_real(a.freq) << ',' << (a.clamped ? 1 : 0)
        << '\n';
}

inline std::vector<AllocationRow> read_allocations_csv(std::istream& in) {
  std::vector<AllocationRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidArgument, "allocation file is empty");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c = detail::split_csv(line);
    if (c.size() != 5) throw Error(ErrorCode::InvalidArgument, "allocation row has wrong width");
    AllocationRow a;
    a.t = detail::parse_long(c[0]);
    a.coalition = static_cast<std::size_t>(detail::parse_long(c[1]));
    a.member = static_cast<std::size_t>(detail::parse_long(c[2]));
    a.freq = detail::parse_real(c[3]);
    a.clamped = detail::parse_long(c[4]) != 0;
    rows.push_back(a);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Summary document

inline nlohmann::json summary_to_json(const RunMetrics& m) {
  using detail::real_json;
  const RunSummary& s = m.summary;
  auto reals = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(real_json(x));
    return a;
  };
  nlohmann::json j;
  j["scheduler"] = s.scheduler;
  j["n_coalitions"] = m.n_coalitions;
  j["rounds"] = s.rounds;
  j["cov"] = real_json(s.cov);
  j["participation"] = reals(s.participation);
  j["delta"] = reals(s.delta);
  j["mean_rate"] = reals(s.mean_rate);
  j["max_queue"] = real_json(s.max_queue);
  j["interval"] = real_json(s.interval);
  j["initial_avg_js"] = real_json(s.initial_avg_js);
  j["final_avg_js"] = real_json(s.final_avg_js);
  j["final_loss"] = real_json(s.final_loss);
  j["final_accuracy"] = real_json(s.final_accuracy);
  j["formation"] = {{"iterations", m.formation.iterations},
                    {"converged", m.formation.converged},
                    {"accepted_switches", m.formation.switches.size()}};
  return j;
}

inline RunSummary summary_from_json(const nlohmann::json& j, std::size_t& n_coalitions, GameTrace* trace = nullptr) {
  using detail::json_real;
  auto reals = [](const nlohmann::json& a) {
    std::vector<double> v;
    for (const auto& x : a) v.push_back(json_real(x));
    return v;
  };
  RunSummary s;
  try {
    s.scheduler = j.at("scheduler").get<std::string>();
    n_coalitions = j.at("n_coalitions").get<std::size_t>();
    s.rounds = j.at("rounds").get<long>();
    s.cov = json_real(j.at("cov"));
    s.participation = reals(j.at("participation"));
    s.delta = reals(j.at("delta"));
    s.mean_rate = reals(j.at("mean_rate"));
    s.max_queue = json_real(j.at("max_queue"));
    s.interval = json_real(j.at("interval"));
    s.initial_avg_js = json_real(j.at("initial_avg_js"));
    s.final_avg_js = json_real(j.at("final_avg_js"));
    s.final_loss = json_real(j.at("final_loss"));
    s.final_accuracy = json_real(j.at("final_accuracy"));
    if (trace) {
      trace->iterations = j.at("formation").at("iterations").get<std::size_t>();
      trace->converged = j.at("formation").at("converged").get<bool>();
      trace->initial_avg_js = s.initial_avg_js;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed summary: ") + e.what());
  }
  return s;
}

}  // namespace fedcure
