#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfr/metrics.hpp"
#include "sfr/objective.hpp"
#include "sfr/optimize.hpp"
#include "sfr/room.hpp"

namespace sfr {

inline const std::vector<std::string> kAllMethods{"ori", "fd", "cvx", "nn", "spmnet", "spmnet3"};

/// Desk-scale defaults: L_h = 512, L_c = 1024, 12 sources at 30 degree steps.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "run";
  std::vector<std::string> methods = kAllMethods;
  std::vector<std::string> positions{"LL", "L", "O", "R", "RR"};
  std::vector<double> source_azimuths_deg;  // empty: `source_count` uniform azimuths
  std::size_t source_count = 12;
  double source_distance_m = 1.0;
  std::size_t filter_len = 512;
  SimulationOptions sim;
  LossConfig loss;
  DeepOptions deep;
  CvxOptions cvx;
  FdOptions fd;
  std::size_t jobs = 1;
  std::string design_position = "O";

  std::vector<double> sources() const;
  std::size_t response_len() const { return sim.ir_len + filter_len - 1; }
  double gross_delay() const { return static_cast<double>(filter_len / 2); }
  void validate() const;
};

/// Reads a key = value config with [experiment], [loss], [deep], [cvx], [fd] sections.
/// Unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);
/// Canonical text form; parse_config(to_ini(c)) reproduces c.
std::string to_ini(const ExperimentConfig& c);

std::vector<std::string> split_list(const std::string& s);

/// Head-relative target, identical at every listening position.
TargetResponse make_target(const ExperimentConfig& c, double azimuth_deg);

struct JobRecord {
  std::string method;
  double source_azimuth_deg = 0.0;
  double wall_seconds = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
  bool aborted = false;
  bool failed = false;
  std::string message;
};

struct DesignReport {
  std::vector<JobRecord> jobs;
  bool any_failed() const;
};

struct MetricRow {
  std::string method;
  double source_azimuth_deg = 0.0;
  std::string position;
  ResponseMetrics metrics;
};

struct DominanceRow {
  std::string method;
  std::string position;
  double dominance_15 = 0.0;
  double dominance_10 = 0.0;
};

struct LossRow {
  std::string method;
  double source_azimuth_deg = 0.0;
  LossBreakdown eq4;  // convex objective (l-inf terms, lambda5 = 0)
  LossBreakdown eq8;  // SPMnet objective
};

struct RunReport {
  std::vector<MetricRow> metrics;
  std::vector<DominanceRow> dominance;
  std::vector<LossRow> losses;
  std::vector<std::string> failures;
};

/// Writes ir/<position>/chNN.wav and manifest.json for every configured position.
void cmd_simulate(const ExperimentConfig& c);
/// One bank per (method, source) under filters/<method>/, training logs under logs/<method>/.
DesignReport cmd_design(const ExperimentConfig& c);
/// Metrics, SSPMs and losses under eval/.
RunReport cmd_evaluate(const ExperimentConfig& c);
/// Markdown summary built from eval/; also written to report.md.
std::string cmd_report(const ExperimentConfig& c);

std::string metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);
std::string render_report(const std::vector<std::string>& methods, const std::vector<MetricRow>& rows,
                          const std::vector<DominanceRow>& dominance, const std::vector<std::string>& failures,
                          const std::string& design_position = "O");

}  // namespace sfr
