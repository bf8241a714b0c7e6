#include "sfr/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "sfr/beamforming.hpp"
#include "sfr/io.hpp"

namespace sfr {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string join(const std::vector<std::string>& v, const std::string& sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

template <typename T>
std::string join_num(const T& v) {
  std::vector<std::string> s;
  for (double x : v) s.push_back(fmt(x));
  return join(s);
}

std::vector<double> parse_doubles(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument("config: '" + key + "' expects numbers, got '" + s + "'");
    }
  }
  return out;
}

double parse_double(const std::string& s, const std::string& key) {
  const auto v = parse_doubles(s, key);
  if (v.size() != 1) throw std::invalid_argument("config: '" + key + "' expects one number");
  return v.front();
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    if (!s.empty() && s.front() == '-') throw std::invalid_argument(s);
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + s + "'");
  }
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw std::invalid_argument("config: '" + key + "' expects a boolean, got '" + s + "'");
}

std::string az_name(double az) {
  char buf[32];
  if (az == std::round(az)) {
    std::snprintf(buf, sizeof buf, "az%03d", static_cast<int>(az));
  } else {
    std::snprintf(buf, sizeof buf, "az%07.3f", az);
  }
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::size_t method_index(const std::string& m) {
  return static_cast<std::size_t>(std::find(kAllMethods.begin(), kAllMethods.end(), m) - kAllMethods.begin());
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

json position_json(const Position& p) { return json::array({p.x(), p.y(), p.z()}); }

fs::path ir_dir(const ExperimentConfig& c, const std::string& pos) { return c.out_dir / "ir" / pos; }
fs::path bank_path(const ExperimentConfig& c, const std::string& m, double az) {
  return c.out_dir / "filters" / m / (az_name(az) + ".wav");
}

ImpulseResponseSet load_position(const ExperimentConfig& c, const std::string& pos) {
  const fs::path dir = ir_dir(c, pos);
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw std::runtime_error(mpath.string() + ": missing; run 'simulate' first");
  const json m = json::parse(read_text(mpath));
  if (m.at("seed").get<std::uint64_t>() != c.seed || m.at("ir_len").get<std::size_t>() != c.sim.ir_len ||
      m.at("max_order").get<int>() != c.sim.max_order) {
    throw std::runtime_error(dir.string() + ": dataset was simulated with a different seed or shape; rerun 'simulate'");
  }
  return load_channels(dir, m.at("l_count").get<std::size_t>());
}

std::vector<std::string> training_positions(const ExperimentConfig& c, const std::string& method) {
  if (method == "spmnet3") return {"LL", "O", "RR"};
  if (method == "ori") return {};
  return {c.design_position};
}

}  // namespace

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> ExperimentConfig::sources() const {
  if (!source_azimuths_deg.empty()) return source_azimuths_deg;
  std::vector<double> out;
  for (std::size_t i = 0; i < source_count; ++i) out.push_back(360.0 * static_cast<double>(i) / static_cast<double>(source_count));
  return out;
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw std::invalid_argument("config: method list is empty");
  if (positions.empty()) throw std::invalid_argument("config: position list is empty");
  if (sources().empty()) throw std::invalid_argument("config: source list is empty");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (std::find(kAllMethods.begin(), kAllMethods.end(), m) == kAllMethods.end()) {
      throw std::invalid_argument("config: unknown method '" + m + "'");
    }
    if (!seen.insert(m).second) throw std::invalid_argument("config: duplicate method '" + m + "'");
  }
  const PositionSet std_set = PositionSet::standard();
  std::set<std::string> pos_seen;
  for (const auto& p : positions) {
    if (!std_set.has(p)) throw std::invalid_argument("config: unknown position '" + p + "'");
    if (!pos_seen.insert(p).second) throw std::invalid_argument("config: duplicate position '" + p + "'");
  }
  if (!pos_seen.count(design_position)) {
    throw std::invalid_argument("config: design position '" + design_position + "' is not in the position list");
  }
  if (seen.count("spmnet3")) {
    for (const char* p : {"LL", "O", "RR"}) {
      if (!pos_seen.count(p)) throw std::invalid_argument("config: spmnet3 requires positions LL, O and RR");
    }
  }
  for (double az : sources()) VirtualSource{az, 0.0, source_distance_m}.validate();
  if (filter_len < 2) throw std::invalid_argument("config: filter_len must be >= 2");
  if (sim.ir_len < 1) throw std::invalid_argument("config: ir_len must be >= 1");
  if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
  if (fd.beta_rel < 0.0) throw std::invalid_argument("config: fd beta_rel must be >= 0");
  if (deep.max_iter < 1 || deep.patience < 1) throw std::invalid_argument("config: deep max_iter and patience must be >= 1");
  loss.validate();
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  std::size_t grid_b = c.loss.grid.b_count(), grid_f = c.loss.grid.f_count();
  double grid_lo = c.loss.grid.freqs_hz.front(), grid_hi = c.loss.grid.freqs_hz.back();
  for (const auto& [section, node] : tree) {
    if (node.empty()) throw std::invalid_argument("config: key '" + section + "' outside a section");
    for (const auto& [key, leaf] : node) {
      const std::string v = leaf.data();
      const std::string k = section + "." + key;
      if (k == "experiment.seed") c.seed = parse_u64(v, k);
      else if (k == "experiment.out") c.out_dir = v;
      else if (k == "experiment.methods") c.methods = split_list(v);
      else if (k == "experiment.positions") c.positions = split_list(v);
      else if (k == "experiment.sources") c.source_count = parse_u64(v, k);
      else if (k == "experiment.source_azimuths") c.source_azimuths_deg = parse_doubles(v, k);
      else if (k == "experiment.source_distance") c.source_distance_m = parse_double(v, k);
      else if (k == "experiment.filter_len") c.filter_len = parse_u64(v, k);
      else if (k == "experiment.ir_len") c.sim.ir_len = parse_u64(v, k);
      else if (k == "experiment.max_order") c.sim.max_order = static_cast<int>(parse_u64(v, k));
      else if (k == "experiment.jobs") c.jobs = parse_u64(v, k);
      else if (k == "experiment.design_position") c.design_position = v;
      else if (k == "loss.lambda") {
        const auto l = parse_doubles(v, k);
        if (l.size() != 5) throw std::invalid_argument("config: loss.lambda expects 5 values");
        std::copy(l.begin(), l.end(), c.loss.lambda.begin());
      }
      else if (k == "loss.p") c.loss.p = parse_double(v, k);
      else if (k == "loss.band_lo") c.loss.band_lo = parse_double(v, k);
      else if (k == "loss.band_hi") c.loss.band_hi = parse_double(v, k);
      else if (k == "loss.band_transition_hz") c.loss.band_transition_hz = parse_double(v, k);
      else if (k == "loss.flat_weight") c.loss.flat_weight = parse_double(v, k);
      else if (k == "loss.spm_normalize") c.loss.spm_normalize = parse_bool(v, k);
      else if (k == "loss.std_pooled") c.loss.std_pooled = parse_bool(v, k);
      else if (k == "loss.magnitude_floor") c.loss.magnitude_floor = parse_double(v, k);
      else if (k == "loss.grid_azimuths") grid_b = parse_u64(v, k);
      else if (k == "loss.grid_freqs") grid_f = parse_u64(v, k);
      else if (k == "loss.grid_f_lo") grid_lo = parse_double(v, k);
      else if (k == "loss.grid_f_hi") grid_hi = parse_double(v, k);
      else if (k == "loss.window_desired_len") c.loss.windows.desired_len = parse_u64(v, k);
      else if (k == "loss.window_guard") c.loss.windows.guard = parse_u64(v, k);
      else if (k == "loss.envelope_start_db") c.loss.windows.envelope_start_db = parse_double(v, k);
      else if (k == "loss.envelope_floor_db") c.loss.windows.envelope_floor_db = parse_double(v, k);
      else if (k == "loss.pre_decay_db_per_ms") c.loss.windows.pre_decay_db_per_ms = parse_double(v, k);
      else if (k == "loss.post_decay_db_per_ms") c.loss.windows.post_decay_db_per_ms = parse_double(v, k);
      else if (k == "deep.learning_rate") c.deep.learning_rate = parse_double(v, k);
      else if (k == "deep.max_iter") c.deep.max_iter = parse_u64(v, k);
      else if (k == "deep.patience") c.deep.patience = parse_u64(v, k);
      else if (k == "deep.log_every") c.deep.log_every = parse_u64(v, k);
      else if (k == "deep.input_dim") c.deep.net.input_dim = parse_u64(v, k);
      else if (k == "deep.hidden") {
        c.deep.net.hidden.clear();
        for (double w : parse_doubles(v, k)) c.deep.net.hidden.push_back(static_cast<std::size_t>(w));
      }
      else if (k == "deep.output_scale") c.deep.net.output_scale = parse_double(v, k);
      else if (k == "cvx.max_iter") c.cvx.max_iter = parse_u64(v, k);
      else if (k == "cvx.rel_tol") c.cvx.rel_tol = parse_double(v, k);
      else if (k == "cvx.stall_window") c.cvx.stall_window = parse_u64(v, k);
      else if (k == "cvx.log_every") c.cvx.log_every = parse_u64(v, k);
      else if (k == "cvx.dual_scale") c.cvx.dual_scale = parse_double(v, k);
      else if (k == "fd.beta_rel") c.fd.beta_rel = parse_double(v, k);
      else throw std::invalid_argument("config: unknown key '" + k + "'");
    }
  }
  c.loss.grid = SteeringGrid::uniform(grid_b, grid_f, grid_lo, grid_hi);
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  try {
    return parse_config(read_text(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto& g = c.loss.grid;
  os << "[experiment]\n"
     << "seed = " << c.seed << "\n"
     << "out = " << c.out_dir.string() << "\n"
     << "methods = " << join(c.methods) << "\n"
     << "positions = " << join(c.positions) << "\n"
     << "source_azimuths = " << join_num(c.sources()) << "\n"
     << "source_distance = " << fmt(c.source_distance_m) << "\n"
     << "filter_len = " << c.filter_len << "\n"
     << "ir_len = " << c.sim.ir_len << "\n"
     << "max_order = " << c.sim.max_order << "\n"
     << "jobs = " << c.jobs << "\n"
     << "design_position = " << c.design_position << "\n"
     << "\n[loss]\n"
     << "lambda = " << join_num(c.loss.lambda) << "\n"
     << "p = " << fmt(c.loss.p) << "\n"
     << "band_lo = " << fmt(c.loss.band_lo) << "\n"
     << "band_hi = " << fmt(c.loss.band_hi) << "\n"
     << "band_transition_hz = " << fmt(c.loss.band_transition_hz) << "\n"
     << "flat_weight = " << fmt(c.loss.flat_weight) << "\n"
     << "spm_normalize = " << (c.loss.spm_normalize ? "true" : "false") << "\n"
     << "std_pooled = " << (c.loss.std_pooled ? "true" : "false") << "\n"
     << "magnitude_floor = " << fmt(c.loss.magnitude_floor) << "\n"
     << "grid_azimuths = " << g.b_count() << "\n"
     << "grid_freqs = " << g.f_count() << "\n"
     << "grid_f_lo = " << fmt(g.freqs_hz.front()) << "\n"
     << "grid_f_hi = " << fmt(g.freqs_hz.back()) << "\n"
     << "window_desired_len = " << c.loss.windows.desired_len << "\n"
     << "window_guard = " << c.loss.windows.guard << "\n"
     << "envelope_start_db = " << fmt(c.loss.windows.envelope_start_db) << "\n"
     << "envelope_floor_db = " << fmt(c.loss.windows.envelope_floor_db) << "\n"
     << "pre_decay_db_per_ms = " << fmt(c.loss.windows.pre_decay_db_per_ms) << "\n"
     << "post_decay_db_per_ms = " << fmt(c.loss.windows.post_decay_db_per_ms) << "\n"
     << "\n[deep]\n"
     << "learning_rate = " << fmt(c.deep.learning_rate) << "\n"
     << "max_iter = " << c.deep.max_iter << "\n"
     << "patience = " << c.deep.patience << "\n"
     << "log_every = " << c.deep.log_every << "\n"
     << "input_dim = " << c.deep.net.input_dim << "\n"
     << "hidden = ";
  for (std::size_t i = 0; i < c.deep.net.hidden.size(); ++i) os << (i ? "," : "") << c.deep.net.hidden[i];
  os << "\n"
     << "output_scale = " << fmt(c.deep.net.output_scale) << "\n"
     << "\n[cvx]\n"
     << "max_iter = " << c.cvx.max_iter << "\n"
     << "rel_tol = " << fmt(c.cvx.rel_tol) << "\n"
     << "stall_window = " << c.cvx.stall_window << "\n"
     << "log_every = " << c.cvx.log_every << "\n"
     << "dual_scale = " << fmt(c.cvx.dual_scale) << "\n"
     << "\n[fd]\n"
     << "beta_rel = " << fmt(c.fd.beta_rel) << "\n";
  return os.str();
}

TargetResponse make_target(const ExperimentConfig& c, double azimuth_deg) {
  TargetOptions opts;
  opts.length = c.response_len();
  opts.sample_rate = c.sim.sample_rate;
  opts.band_lo = c.sim.band_lo;
  opts.band_hi = c.sim.band_hi;
  return free_field_target(VirtualSource{azimuth_deg, 0.0, c.source_distance_m}, default_geometry(), c.gross_delay(), opts);
}

bool DesignReport::any_failed() const {
  return std::any_of(jobs.begin(), jobs.end(), [](const JobRecord& j) { return j.failed; });
}

void cmd_simulate(const ExperimentConfig& c) {
  c.validate();
  const Room room = default_cabin(c.seed);
  const ArrayGeometry geometry = default_geometry();
  geometry.validate(room);
  const PositionSet set = PositionSet::standard();
  std::vector<ImpulseResponseSet> sets(c.positions.size());
  parallel_for(c.positions.size(), c.jobs, [&](std::size_t i) {
    sets[i] = simulate_channels(room, geometry, set.offset(c.positions[i]), c.sim);
  });
  for (std::size_t i = 0; i < c.positions.size(); ++i) {
    const std::string& pos = c.positions[i];
    const double offset = set.offset(pos);
    const ArrayGeometry moved = geometry.translated_array(kLateralAxis * offset);
    save_channels(ir_dir(c, pos), sets[i]);
    json m;
    m["position"] = pos;
    m["offset_m"] = offset;
    m["lateral_axis"] = position_json(kLateralAxis);
    m["seed"] = c.seed;
    m["sample_rate"] = c.sim.sample_rate;
    m["band_hz"] = json::array({c.sim.band_lo, c.sim.band_hi});
    m["ir_len"] = c.sim.ir_len;
    m["max_order"] = c.sim.max_order;
    m["q_count"] = sets[i].q_count;
    m["l_count"] = sets[i].l_count;
    m["room"] = {{"dimensions_m", position_json(room.dimensions)},
                 {"absorption", room.absorption},
                 {"wall_order", "x0,x1,y0,y1,z0,z1"},
                 {"speed_of_sound", room.speed_of_sound}};
    json spk = json::array(), mics = json::array();
    for (const auto& p : moved.loudspeakers) spk.push_back(position_json(p));
    for (const auto& p : moved.microphones) mics.push_back(position_json(p));
    m["loudspeakers_m"] = spk;
    m["microphones_m"] = mics;
    m["array_center_m"] = position_json(moved.array_center);
    m["microphone_model"] = "open sphere (free field), no scattering";
    m["target_model"] = "free-field point source, head-relative";
    m["format"] = "chNN.wav = loudspeaker channel NN, one audio channel per microphone, float32";
    write_text(ir_dir(c, pos) / "manifest.json", m.dump(2) + "\n");
  }
}

DesignReport cmd_design(const ExperimentConfig& c) {
  c.validate();
  const ArrayGeometry geometry = default_geometry();
  const auto sources = c.sources();
  const std::string cfg_digest = digest(to_ini(c));

  std::map<std::string, ImpulseResponseSet> channels;
  for (const auto& m : c.methods) {
    for (const auto& p : training_positions(c, m)) {
      if (!channels.count(p)) channels.emplace(p, load_position(c, p));
    }
  }

  struct Item {
    std::string method;
    std::size_t source_idx;
  };
  std::vector<Item> items;
  for (const auto& m : c.methods) {
    for (std::size_t s = 0; s < sources.size(); ++s) items.push_back({m, s});
  }
  DesignReport report;
  report.jobs.resize(items.size());
  const std::size_t n_fft = next_pow2(c.response_len());

  parallel_for(items.size(), c.jobs, [&](std::size_t i) {
    const Item& item = items[i];
    const double az = sources[item.source_idx];
    JobRecord& rec = report.jobs[i];
    rec.method = item.method;
    rec.source_azimuth_deg = az;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const VirtualSource src{az, 0.0, c.source_distance_m};
      DesignResult res;
      std::uint64_t seed = splitmix64(c.seed ^ (static_cast<std::uint64_t>(method_index(item.method)) << 32) ^ item.source_idx);
      if (item.method == "ori") {
        res.bank = ori_bank(src, geometry, c.filter_len);
        res.diagnostic = "nearest-loudspeaker routing";
      } else {
        DesignJob job;
        job.source = src;
        job.geometry = geometry;
        job.config = c.loss;
        job.filter_len = c.filter_len;
        job.seed = seed;
        job.deep = c.deep;
        job.cvx = c.cvx;
        job.fd = c.fd;
        job.solver = item.method == "spmnet3" ? Solver::spmnet : parse_solver(item.method);
        const TargetResponse target = make_target(c, az);
        for (const auto& p : training_positions(c, item.method)) job.positions.push_back({p, channels.at(p), target});
        res = design(job);
      }
      save_bank(bank_path(c, item.method, az), res.bank);
      json m;
      m["method"] = item.method;
      m["source"] = {{"azimuth_deg", az}, {"elevation_deg", 0.0}, {"distance_m", c.source_distance_m}};
      m["seed"] = seed;
      m["config_digest"] = cfg_digest;
      m["fft_size"] = n_fft;
      m["filter_len"] = c.filter_len;
      m["l_count"] = res.bank.l_count;
      m["training_positions"] = training_positions(c, item.method);
      m["iterations"] = res.iterations;
      m["converged"] = res.converged;
      m["aborted"] = res.aborted;
      m["diagnostic"] = res.diagnostic;
      m["final_loss"] = {{"terms", res.final_loss.terms}, {"total", res.final_loss.total}};
      write_text(bank_path(c, item.method, az).replace_extension(".json"), m.dump(2) + "\n");
      if (!res.log.empty()) {
        std::ostringstream log;
        log << "iteration,position,term1,term2,term3,term4,term5,total\n";
        char buf[256];
        for (const auto& row : res.log) {
          const auto& t = row.loss.terms;
          std::snprintf(buf, sizeof buf, "%zu,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", row.iteration, row.position.c_str(), t[0],
                        t[1], t[2], t[3], t[4], row.loss.total);
          log << buf;
        }
        write_text(c.out_dir / "logs" / item.method / (az_name(az) + ".csv"), log.str());
      }
      rec.iterations = res.iterations;
      rec.converged = res.converged;
      rec.aborted = res.aborted;
      rec.message = res.diagnostic;
      if (res.aborted) rec.failed = true;
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.message = e.what();
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  json summary = json::array();
  for (const auto& r : report.jobs) {
    summary.push_back({{"method", r.method},
                       {"source_azimuth_deg", r.source_azimuth_deg},
                       {"wall_seconds", r.wall_seconds},
                       {"iterations", r.iterations},
                       {"converged", r.converged},
                       {"aborted", r.aborted},
                       {"failed", r.failed},
                       {"message", r.message}});
  }
  write_text(c.out_dir / "design_summary.json", summary.dump(2) + "\n");
  return report;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "method,source_azimuth,position,nprq_pre,nprq_post,sd_band1,sd_band2,sd_band3,sd_band4,sd_band5,sd_band6,sd_avg5,"
        "sd_avg6\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    os << r.method << ',' << fmt(r.source_azimuth_deg) << ',' << r.position << ',' << fixed(m.nprq.pre) << ','
       << fixed(m.nprq.post);
    for (double b : m.sd.band) os << ',' << fixed(b);
    os << ',' << fixed(m.sd.avg5) << ',' << fixed(m.sd.avg6) << '\n';
  }
  return os.str();
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::vector<MetricRow> rows;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 13) throw std::runtime_error("metrics csv: malformed row '" + line + "'");
    MetricRow r;
    r.method = f[0];
    r.source_azimuth_deg = std::stod(f[1]);
    r.position = f[2];
    r.metrics.nprq.pre = std::stod(f[3]);
    r.metrics.nprq.post = std::stod(f[4]);
    for (std::size_t b = 0; b < 6; ++b) r.metrics.sd.band[b] = std::stod(f[5 + b]);
    r.metrics.sd.avg5 = std::stod(f[11]);
    r.metrics.sd.avg6 = std::stod(f[12]);
    rows.push_back(r);
  }
  return rows;
}

RunReport cmd_evaluate(const ExperimentConfig& c) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const ArrayGeometry geometry = default_geometry();
  const auto sources = c.sources();
  RunReport report;

  std::map<std::string, ImpulseResponseSet> channels;
  for (const auto& p : c.positions) {
    try {
      channels.emplace(p, load_position(c, p));
    } catch (const std::exception& e) {
      report.failures.push_back(e.what());
    }
  }
  std::vector<TargetResponse> targets;
  for (double az : sources) targets.push_back(make_target(c, az));

  // banks[m][s], empty l_count when missing
  std::vector<std::vector<ControlFilterBank>> banks(c.methods.size(), std::vector<ControlFilterBank>(sources.size()));
  for (std::size_t mi = 0; mi < c.methods.size(); ++mi) {
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const fs::path p = bank_path(c, c.methods[mi], sources[s]);
      try {
        if (!fs::exists(p)) throw std::runtime_error(p.string() + ": missing filter bank");
        banks[mi][s] = load_bank(p);
        if (banks[mi][s].filter_len != c.filter_len) throw std::runtime_error(p.string() + ": filter length differs from config");
      } catch (const std::exception& e) {
        banks[mi][s] = ControlFilterBank();
        report.failures.push_back(e.what());
      }
    }
  }

  struct Cell {
    std::vector<MetricRow> rows;
    std::vector<std::vector<Fir>> responses;  // per source
    bool complete = true;
  };
  const std::size_t np = c.positions.size();
  std::vector<Cell> cells(c.methods.size() * np);
  std::mutex fail_mutex;
  parallel_for(cells.size(), c.jobs, [&](std::size_t idx) {
    const std::size_t mi = idx / np;
    const std::string& pos = c.positions[idx % np];
    Cell& cell = cells[idx];
    if (!channels.count(pos)) {
      cell.complete = false;
      return;
    }
    for (std::size_t s = 0; s < sources.size(); ++s) {
      if (banks[mi][s].l_count == 0) {
        cell.complete = false;
        continue;
      }
      try {
        auto g = reproduce(banks[mi][s], channels.at(pos));
        cell.rows.push_back({c.methods[mi], sources[s], pos, evaluate_response(g, targets[s], c.loss.windows)});
        cell.responses.push_back(std::move(g));
      } catch (const std::exception& e) {
        cell.complete = false;
        std::lock_guard<std::mutex> lock(fail_mutex);
        report.failures.push_back(c.methods[mi] + " " + az_name(sources[s]) + " at " + pos + ": " + e.what());
      }
    }
  });

  auto write_sspm = [&](const std::string& name, const StackedSpm& map) {
    std::ostringstream os;
    os << "source_azimuth";
    for (double b : map.steering_azimuths_deg) os << ',' << fmt(b);
    os << '\n';
    for (Eigen::Index r = 0; r < map.db.rows(); ++r) {
      os << fmt(map.source_azimuths_deg[static_cast<std::size_t>(r)]);
      for (Eigen::Index b = 0; b < map.db.cols(); ++b) os << ',' << fixed(map.db(r, b));
      os << '\n';
    }
    write_text(c.out_dir / "eval" / "sspm" / (name + ".csv"), os.str());
    write_pgm(c.out_dir / "eval" / "sspm" / (name + ".pgm"), map.db, std::min(map.db.minCoeff(), -1e-3), 0.0);
  };

  // Target reference: the desired responses are their own optimum.
  {
    std::vector<std::vector<Fir>> tr;
    for (const auto& t : targets) tr.push_back(t.mics);
    const StackedSpm map = sspm(tr, sources, geometry, c.loss.grid);
    write_sspm("target", map);
    report.dominance.push_back({"target", "-", diag_dominance(map, 15.0), diag_dominance(map, 10.0)});
  }
  for (std::size_t mi = 0; mi < c.methods.size(); ++mi) {
    for (std::size_t pi = 0; pi < np; ++pi) {
      Cell& cell = cells[mi * np + pi];
      report.metrics.insert(report.metrics.end(), cell.rows.begin(), cell.rows.end());
      if (!cell.complete) {
        report.failures.push_back("sspm " + c.methods[mi] + " at " + c.positions[pi] + ": incomplete response set");
        continue;
      }
      try {
        const StackedSpm map = sspm(cell.responses, sources, geometry, c.loss.grid);
        write_sspm(c.methods[mi] + "_" + c.positions[pi], map);
        report.dominance.push_back({c.methods[mi], c.positions[pi], diag_dominance(map, 15.0), diag_dominance(map, 10.0)});
      } catch (const std::exception& e) {
        report.failures.push_back("sspm " + c.methods[mi] + " at " + c.positions[pi] + ": " + e.what());
      }
    }
  }

  // Objective values of every bank at the design position.
  if (channels.count(c.design_position)) {
    std::vector<std::vector<LossRow>> per_source(sources.size());
    parallel_for(sources.size(), c.jobs, [&](std::size_t s) {
      Problem prob(channels.at(c.design_position), targets[s], geometry, c.loss, c.filter_len);
      for (std::size_t mi = 0; mi < c.methods.size(); ++mi) {
        if (banks[mi][s].l_count == 0) continue;
        LossRow row;
        row.method = c.methods[mi];
        row.source_azimuth_deg = sources[s];
        row.eq4 = prob.loss(banks[mi][s].coeffs, Mode::cvx);
        row.eq8 = prob.loss(banks[mi][s].coeffs, Mode::spmnet);
        per_source[s].push_back(row);
      }
    });
    for (std::size_t mi = 0; mi < c.methods.size(); ++mi) {
      for (const auto& rows : per_source) {
        for (const auto& r : rows) {
          if (r.method == c.methods[mi]) report.losses.push_back(r);
        }
      }
    }
  }

  write_text(c.out_dir / "eval" / "metrics.csv", metrics_csv(report.metrics));
  {
    std::ostringstream os;
    os << "method,position,diag_dominance_15,diag_dominance_10\n";
    for (const auto& d : report.dominance) {
      os << d.method << ',' << d.position << ',' << fixed(d.dominance_15) << ',' << fixed(d.dominance_10) << '\n';
    }
    write_text(c.out_dir / "eval" / "dominance.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "method,source_azimuth,position,eq4_term1,eq4_term2,eq4_term3,eq4_term4,eq4_total,eq8_term1,eq8_term2,eq8_term3,"
          "eq8_term4,eq8_term5,eq8_total\n";
    char buf[512];
    for (const auto& r : report.losses) {
      const auto& a = r.eq4.terms;
      const auto& b = r.eq8.terms;
      std::snprintf(buf, sizeof buf, "%s,%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.method.c_str(),
                    fmt(r.source_azimuth_deg).c_str(), c.design_position.c_str(), a[0], a[1], a[2], a[3], r.eq4.total,
                    b[0], b[1], b[2], b[3], b[4], r.eq8.total);
      os << buf;
    }
    write_text(c.out_dir / "eval" / "losses.csv", os.str());
  }
  {
    std::string text;
    for (const auto& f : report.failures) text += f + "\n";
    write_text(c.out_dir / "eval" / "failures.txt", text);
  }
  json timing = {{"evaluate_wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  write_text(c.out_dir / "eval" / "timings.json", timing.dump(2) + "\n");
  return report;
}

std::string render_report(const std::vector<std::string>& methods, const std::vector<MetricRow>& rows,
                          const std::vector<DominanceRow>& dominance, const std::vector<std::string>& failures,
                          const std::string& design_position) {
  std::ostringstream os;
  os << "# Campaign summary\n\n";
  os << "Metrics are averaged over sources; \"avg\" also averages over every evaluated position.\n\n";
  os << "| Method | nPRQ pre (pos " << design_position << ") | nPRQ pre (avg) | nPRQ post (pos " << design_position
     << ") | nPRQ post (avg) | SD 11.3kHz (pos " << design_position << ") | SD 11.3kHz (avg) | SD 5.65kHz (pos "
     << design_position << ") | SD 5.65kHz (avg) |\n";
  os << "|---|---|---|---|---|---|---|---|---|\n";

  std::vector<std::array<double, 8>> table;
  std::vector<std::array<bool, 8>> present;
  for (const auto& m : methods) {
    std::array<double, 8> sum{};
    std::array<std::size_t, 8> cnt{};
    for (const auto& r : rows) {
      if (r.method != m) continue;
      const std::array<double, 4> v{r.metrics.nprq.pre, r.metrics.nprq.post, r.metrics.sd.avg6, r.metrics.sd.avg5};
      for (std::size_t k = 0; k < 4; ++k) {
        if (r.position == design_position) {
          sum[2 * k] += v[k];
          ++cnt[2 * k];
        }
        sum[2 * k + 1] += v[k];
        ++cnt[2 * k + 1];
      }
    }
    std::array<double, 8> avg{};
    std::array<bool, 8> has{};
    for (std::size_t k = 0; k < 8; ++k) {
      has[k] = cnt[k] > 0;
      avg[k] = has[k] ? sum[k] / static_cast<double>(cnt[k]) : 0.0;
    }
    table.push_back(avg);
    present.push_back(has);
  }
  std::array<double, 8> best;
  best.fill(std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t k = 0; k < 8; ++k) {
      if (present[i][k]) best[k] = std::min(best[k], std::round(table[i][k] * 100.0) / 100.0);
    }
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    os << "| " << methods[i];
    for (std::size_t k = 0; k < 8; ++k) {
      if (!present[i][k]) {
        os << " | n/a";
        continue;
      }
      const double v = std::round(table[i][k] * 100.0) / 100.0;
      const std::string s = fixed(v, 2);
      os << " | " << (v == best[k] ? "**" + s + "**" : s);
    }
    os << " |\n";
  }

  std::vector<std::string> positions;
  for (const auto& d : dominance) {
    if (d.position != "-" && std::find(positions.begin(), positions.end(), d.position) == positions.end()) {
      positions.push_back(d.position);
    }
  }
  os << "\n## SSPM diagonal dominance (tolerance 15 deg)\n\n| Method |";
  for (const auto& p : positions) os << ' ' << p << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < positions.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& d : dominance) {
    if (d.position != "-") continue;
    os << "| " << d.method << " (reference) |";
    for (std::size_t i = 0; i < positions.size(); ++i) os << ' ' << fixed(d.dominance_15, 3) << " |";
    os << '\n';
  }
  for (const auto& m : methods) {
    os << "| " << m << " |";
    for (const auto& p : positions) {
      auto it = std::find_if(dominance.begin(), dominance.end(), [&](const DominanceRow& d) { return d.method == m && d.position == p; });
      os << ' ' << (it == dominance.end() ? std::string("n/a") : fixed(it->dominance_15, 3)) << " |";
    }
    os << '\n';
  }
  os << "\n## Failures\n\n";
  if (failures.empty()) os << "none\n";
  for (const auto& f : failures) os << "- " << f << '\n';
  return os.str();
}

std::string cmd_report(const ExperimentConfig& c) {
  c.validate();
  const fs::path eval = c.out_dir / "eval";
  const auto rows = parse_metrics_csv(read_text(eval / "metrics.csv"));
  std::vector<DominanceRow> dom;
  {
    std::istringstream is(read_text(eval / "dominance.csv"));
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      const auto f = split_list(line);
      if (f.size() != 4) continue;
      dom.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3])});
    }
  }
  std::vector<std::string> failures;
  if (fs::exists(c.out_dir / "design_summary.json")) {
    for (const auto& j : json::parse(read_text(c.out_dir / "design_summary.json"))) {
      if (j.at("failed").get<bool>()) {
        failures.push_back("design " + j.at("method").get<std::string>() + " " +
                           az_name(j.at("source_azimuth_deg").get<double>()) + ": " + j.at("message").get<std::string>());
      }
    }
  }
  if (fs::exists(eval / "failures.txt")) {
    std::istringstream is(read_text(eval / "failures.txt"));
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty()) failures.push_back(line);
    }
  }
  const std::string text = render_report(c.methods, rows, dom, failures, c.design_position);
  write_text(c.out_dir / "report.md", text);
  return text;
}

}  // namespace sfr
