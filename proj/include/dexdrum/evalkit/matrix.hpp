#pragma once

// Experiment matrix: seeded rollouts per cell, CSV rows and a grouped summary.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dexdrum/evalkit/metrics.hpp"
#include "dexdrum/learner/train.hpp"

namespace dexdrum::eval {

struct Experiment {
  std::string name;
  std::string group;  // summary heading, e.g. "grasp" or "bpm_sweep"
  std::shared_ptr<const learn::Task> task;
  std::string checkpoint;                        // loaded when policy is null
  std::shared_ptr<const learn::Agent> policy;    // preloaded alternative
  learn::RolloutMode mode = learn::RolloutMode::kClosedLoop;
  learn::ControlConfig control;                  // what the policy was trained with
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  long global_step = learn::kAfterCurriculum;
  // Open-loop replay records one closed-loop run in the unrandomized world
  // with this seed, then replays it under every evaluation seed.
  std::uint64_t record_seed = 0;
};

struct MatrixRow {
  std::string experiment;
  std::uint64_t seed = 0;
  EpisodeMetrics metrics;
};

inline constexpr const char* kMatrixCsvHeader =
    "experiment,seed,f1,precision,recall,hold_ratio,traj_error_m,energy";

inline std::string to_csv(const MatrixRow& r) {
  std::ostringstream os;
  os << std::setprecision(10) << r.experiment << ',' << r.seed << ',' << r.metrics.f1 << ','
     << r.metrics.precision << ',' << r.metrics.recall << ',' << r.metrics.hold_ratio << ','
     << r.metrics.trajectory_error << ',' << r.metrics.energy;
  return os.str();
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// NaN entries (no held samples) are skipped.
inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  int n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      m.mean += x;
      ++n;
    }
  }
  if (n == 0) return {std::nan(""), std::nan("")};
  m.mean /= n;
  for (double x : v) {
    if (std::isfinite(x)) m.std += (x - m.mean) * (x - m.mean);
  }
  m.std = std::sqrt(m.std / n);
  return m;
}

struct CellSummary {
  std::string experiment, group;
  MeanStd f1, precision, recall, hold_ratio, trajectory_error, energy;
};

struct MatrixReport {
  std::vector<MatrixRow> rows;
  std::vector<CellSummary> cells;

  const CellSummary& cell(const std::string& name) const {
    for (const auto& c : cells) {
      if (c.experiment == name) return c;
    }
    throw Error(ErrorKind::kBadConfig, "no experiment named " + name);
  }
};

inline std::vector<MatrixRow> run_experiment(const Experiment& ex) {
  if (!ex.task) throw Error(ErrorKind::kBadConfig, "experiment " + ex.name + " has no task");
  const bool needs_policy = ex.mode != learn::RolloutMode::kPlanOnly;
  std::shared_ptr<const learn::Agent> policy = ex.policy;
  if (needs_policy && !policy) {
    if (ex.checkpoint.empty()) {
      throw Error(ErrorKind::kMissingCheckpoint, "experiment " + ex.name + " needs a checkpoint");
    }
    if (!std::filesystem::exists(ex.checkpoint)) {
      throw Error(ErrorKind::kMissingCheckpoint, "checkpoint not found: " + ex.checkpoint);
    }
    policy = std::make_shared<learn::Agent>(learn::load_checkpoint<float>(ex.checkpoint));
  }

  std::vector<world::Action> recording;
  if (ex.mode == learn::RolloutMode::kOpenLoopReplay) {
    learn::Task clean = *ex.task;
    clean.cfg.world.randomize = false;
    learn::RolloutOptions rec;
    rec.seed = ex.record_seed;
    rec.global_step = ex.global_step;
    recording = learn::rollout(policy.get(), clean, ex.control, rec).applied;
  }

  std::vector<MatrixRow> rows;
  for (auto seed : ex.seeds) {
    learn::RolloutOptions opt;
    opt.mode = ex.mode;
    opt.seed = seed;
    opt.global_step = ex.global_step;
    if (!recording.empty()) opt.recording = &recording;
    const auto r = learn::rollout(policy.get(), *ex.task, ex.control, opt);
    rows.push_back({ex.name, seed, compute_metrics(r.trace, ex.task->sched, ex.task->ref)});
  }
  return rows;
}

inline CellSummary summarize(const Experiment& ex, const std::vector<MatrixRow>& rows) {
  CellSummary c{ex.name, ex.group, {}, {}, {}, {}, {}, {}};
  auto col = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(get(r.metrics));
    return mean_std(v);
  };
  c.f1 = col([](const EpisodeMetrics& m) { return m.f1; });
  c.precision = col([](const EpisodeMetrics& m) { return m.precision; });
  c.recall = col([](const EpisodeMetrics& m) { return m.recall; });
  c.hold_ratio = col([](const EpisodeMetrics& m) { return m.hold_ratio; });
  c.trajectory_error = col([](const EpisodeMetrics& m) { return m.trajectory_error; });
  c.energy = col([](const EpisodeMetrics& m) { return m.energy; });
  return c;
}

// Cells run in order; each cell's seeds run in parallel up to `threads`.
inline MatrixReport run_matrix(const std::vector<Experiment>& experiments, int threads = 1) {
  MatrixReport rep;
  for (const auto& ex : experiments) {
    std::vector<std::vector<MatrixRow>> per_seed(ex.seeds.size());
    learn::detail::parallel_for(static_cast<int>(ex.seeds.size()), threads, [&](int i) {
      Experiment one = ex;
      one.seeds = {ex.seeds[static_cast<std::size_t>(i)]};
      per_seed[static_cast<std::size_t>(i)] = run_experiment(one);
    });
    std::vector<MatrixRow> rows;
    for (auto& v : per_seed) rows.insert(rows.end(), v.begin(), v.end());
    rep.cells.push_back(summarize(ex, rows));
    rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
  }
  return rep;
}

inline std::string matrix_csv(const MatrixReport& rep) {
  std::string out = std::string(kMatrixCsvHeader) + "\n";
  for (const auto& r : rep.rows) out += to_csv(r) + "\n";
  return out;
}

inline std::string matrix_summary(const MatrixReport& rep) {
  std::ostringstream os;
  os << std::fixed;
  std::string group = "\x01";
  auto ms = [&](const MeanStd& m, int prec) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << m.mean << " +- " << m.std;
    return s.str();
  };
  for (const auto& c : rep.cells) {
    if (c.group != group) {
      group = c.group;
      os << "\n== " << (group.empty() ? "experiments" : group) << " ==\n";
      os << std::left << std::setw(28) << "experiment" << std::setw(18) << "f1" << std::setw(18)
         << "hold_ratio" << std::setw(22) << "traj_error_m" << "energy\n";
    }
    os << std::left << std::setw(28) << c.experiment << std::setw(18) << ms(c.f1, 3)
       << std::setw(18) << ms(c.hold_ratio, 3) << std::setw(22) << ms(c.trajectory_error, 4)
       << ms(c.energy, 1) << "\n";
  }
  return os.str();
}

inline void write_matrix(const MatrixReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "matrix.csv");
  std::ofstream txt(dir / "summary.txt");
  if (!csv || !txt) throw Error(ErrorKind::kIo, "cannot write report into " + dir.string());
  csv << matrix_csv(rep);
  txt << matrix_summary(rep);
}

}  // namespace dexdrum::eval
