#pragma once

// Subcommand dispatch for the `dexdrum` executable. Exit codes: 0 success,
// 1 usage or config error, 2 runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dexdrum/choreography/planner.hpp"
#include "dexdrum/cli/config.hpp"
#include "dexdrum/cli/selftest.hpp"
#include "dexdrum/evalkit/matrix.hpp"

namespace dexdrum::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// ---------------------------------------------------------------------------
// Applied-action recordings for open-loop replay: one line per (step, hand),
// "step hand dx dy dz c0 c1 c2 c3 c4".

inline std::string actions_to_text(const std::vector<world::Action>& actions) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < actions.size(); ++k) {
    for (std::size_t h = 0; h < actions[k].hands.size(); ++h) {
      const auto& a = actions[k].hands[h];
      os << k << ' ' << h << ' ' << a.wrist_delta.x() << ' ' << a.wrist_delta.y() << ' '
         << a.wrist_delta.z();
      for (double c : a.closure_targets) os << ' ' << c;
      os << '\n';
    }
  }
  return os.str();
}

inline std::vector<world::Action> actions_from_text(const std::string& text) {
  std::vector<world::Action> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::size_t k = 0, h = 0;
    world::HandAction a;
    ls >> k >> h >> a.wrist_delta.x() >> a.wrist_delta.y() >> a.wrist_delta.z();
    for (double& c : a.closure_targets) ls >> c;
    if (!ls) {
      throw Error(ErrorKind::kConfigError, "recording line " + std::to_string(lineno) + ": malformed");
    }
    if (k >= out.size()) out.resize(k + 1);
    if (h >= out[k].hands.size()) out[k].hands.resize(h + 1);
    out[k].hands[h] = a;
  }
  return out;
}

inline std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  os << text;
}

// ---------------------------------------------------------------------------

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;  // key=value overrides
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
  bool seed_given = false, threads_given = false;
};

// Config file (or DEXDRUM_CONFIG), then --set overrides, then explicit flags.
inline RunConfig load_run_config(const CommonFlags& f) {
  RunConfig c;
  ConfigBinder bind(c);
  std::string path = f.config;
  if (path.empty()) {
    if (const char* env = std::getenv("DEXDRUM_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) bind.apply(load_config_file(path));
  int n = 0;
  for (const auto& s : f.sets) {
    ++n;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfigError, "--set " + s + ": expected key=value");
    }
    bind.apply(ConfigEntry{trim(s.substr(0, eq)), trim(s.substr(eq + 1)), "--set", n});
  }
  if (f.seed_given) c.seed = f.seed;
  if (f.threads_given) c.threads = f.threads;
  if (!f.out.empty()) c.out_dir = f.out;
  c.train.seed = c.seed;
  c.train.threads = c.threads;
  return c;
}

inline int cmd_score(const RunConfig& c, std::ostream& out) {
  out << score::to_text(build_score(c));
  return kExitOk;
}

inline int cmd_plan(const RunConfig& c, bool to_file, std::ostream& out) {
  const auto task = build_task(c);
  const auto dump = choreo::to_dump(task.ref);
  if (to_file) {
    const auto path = std::filesystem::path(c.out_dir) / "plan.txt";
    spit(path, dump);
    out << "wrote " << path.string() << "\n";
  } else {
    out << dump;
  }
  return kExitOk;
}

inline int cmd_train(RunConfig c, std::ostream& out) {
  const auto task = build_task(c);
  c.train.out_dir = c.out_dir;
  std::unique_ptr<learn::Agent> resume;
  long start = 0;
  if (!c.checkpoint.empty()) {
    resume = std::make_unique<learn::Agent>(learn::load_checkpoint<float>(c.checkpoint));
    const auto log = std::filesystem::path(c.out_dir) / "train_log.csv";
    if (std::filesystem::exists(log)) {
      std::ifstream is(log);
      std::string line;
      while (std::getline(is, line)) ++start;
      start = std::max(0L, start - 1);
    }
  }
  const auto res = learn::train(task, c.train, resume.get(), start,
                                [&](const learn::TrainLogRow& row, const learn::Agent&) {
                                  out << "iter " << row.iteration << "  steps " << row.env_steps
                                      << "  return " << row.mean_return << "  f1 " << row.f1_eval
                                      << "  hold " << row.hold_ratio << "\n";
                                  return true;
                                });
  out << "trained " << res.env_steps << " env steps; checkpoint in " << c.out_dir << "\n";
  return kExitOk;
}

inline std::vector<world::Action> record_closed_loop(const learn::Agent* policy,
                                                     const learn::Task& task,
                                                     const learn::ControlConfig& ctl,
                                                     std::uint64_t seed) {
  learn::Task clean = task;
  clean.cfg.world.randomize = false;
  learn::RolloutOptions rec;
  rec.seed = seed;
  return learn::rollout(policy, clean, ctl, rec).applied;
}

inline int cmd_rollout(const RunConfig& c, std::ostream& out) {
  const auto task = build_task(c);
  std::unique_ptr<learn::Agent> policy;
  if (!c.checkpoint.empty()) {
    policy = std::make_unique<learn::Agent>(learn::load_checkpoint<float>(c.checkpoint));
  }
  learn::RolloutOptions opt;
  opt.mode = c.mode;
  opt.seed = c.seed;
  std::vector<world::Action> recording;
  if (c.mode == learn::RolloutMode::kOpenLoopReplay) {
    if (!c.recording.empty()) {
      recording = actions_from_text(slurp(c.recording));
    } else {
      if (!policy) throw Error(ErrorKind::kMissingCheckpoint, "open-loop replay needs a recording or a checkpoint");
      recording = record_closed_loop(policy.get(), task, c.train.control, c.seed);
    }
    opt.recording = &recording;
  }
  const auto r = learn::rollout(policy.get(), task, c.train.control, opt);
  const auto m = eval::compute_metrics(r.trace, task.sched, task.ref);
  const auto dir = std::filesystem::path(c.out_dir);
  spit(dir / "trace.txt", eval::to_text(r.trace));
  spit(dir / "actions.txt", actions_to_text(r.applied));
  eval::MatrixRow row{std::string(learn::mode_name(c.mode)), c.seed, m};
  spit(dir / "metrics.csv", std::string(eval::kMatrixCsvHeader) + "\n" + eval::to_csv(row) + "\n");
  out << std::setprecision(4) << "mode " << learn::mode_name(c.mode) << "  f1 " << m.f1
      << "  precision " << m.precision << "  recall " << m.recall << "  hold " << m.hold_ratio
      << "  traj_error " << m.trajectory_error << "  energy " << m.energy << "\n";
  return kExitOk;
}

inline int cmd_eval(const RunConfig& c, const std::vector<std::string>& modes, std::ostream& out) {
  auto task = std::make_shared<const learn::Task>(build_task(c));
  std::shared_ptr<const learn::Agent> policy;
  std::vector<eval::Experiment> exps;
  for (const auto& name : modes) {
    const auto m = learn::mode_from_name(name);
    if (!m) throw Error(ErrorKind::kConfigError, "unknown rollout mode " + name);
    eval::Experiment e;
    e.name = name;
    e.group = "modes";
    e.task = task;
    e.mode = *m;
    e.checkpoint = c.checkpoint;
    e.control = c.train.control;
    e.seeds.clear();
    for (int s = 0; s < c.eval_seeds; ++s) e.seeds.push_back(c.seed + static_cast<std::uint64_t>(s));
    e.record_seed = c.seed;
    exps.push_back(std::move(e));
  }
  const auto rep = eval::run_matrix(exps, c.threads);
  eval::write_matrix(rep, c.out_dir);
  out << eval::matrix_summary(rep);
  return kExitOk;
}

// argv-style entry point; args excludes the program name.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"dexdrum: drum score to dexterous stick control", "dexdrum"};
  app.require_subcommand(1, 1);
  CommonFlags f;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "config file (default: $DEXDRUM_CONFIG)");
    sub->add_option("--set", f.sets, "override a config key, key=value (repeatable)");
    sub->add_option("--seed", f.seed, "random seed")->each([&](const std::string&) { f.seed_given = true; });
    sub->add_option("--threads", f.threads, "worker threads (1 = reproducible)")
        ->check(CLI::PositiveNumber)
        ->each([&](const std::string&) { f.threads_given = true; });
    sub->add_option("--out", f.out, "output directory");
  };

  // Flags that mirror config keys; applied as --set entries.
  std::vector<std::pair<std::string, std::string>> mirrored;
  auto mirror = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                    const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&mirrored, key](const std::string& v) { mirrored.push_back({key, v}); }, help);
  };

  auto* score = app.add_subcommand("score", "parse, remap and retime a score, print its events");
  add_common(score);
  std::string layout;
  mirror(score, "--midi", "score.midi", "MIDI file");
  mirror(score, "--slowdown", "score.slowdown", "retiming factor");
  mirror(score, "--bpm", "score.bpm", "exercise tempo");
  score->add_option("--layout", layout, "full_kit or two_drum")
      ->check(CLI::IsMember({"full_kit", "two_drum"}));

  auto* plan = app.add_subcommand("plan", "emit the reference trajectory dump");
  add_common(plan);
  mirror(plan, "--midi", "score.midi", "MIDI file");
  mirror(plan, "--slowdown", "score.slowdown", "retiming factor");
  mirror(plan, "--bpm", "score.bpm", "exercise tempo");
  mirror(plan, "--scenario", "scenario", "exercise | sequence | two_drum | bimanual_song");

  auto* train = app.add_subcommand("train", "train a residual policy");
  add_common(train);
  mirror(train, "--total-steps", "train.total_steps", "environment steps");
  mirror(train, "--n-envs", "train.n_envs", "parallel environments");
  mirror(train, "--checkpoint", "paths.checkpoint", "resume from this checkpoint");
  mirror(train, "--scenario", "scenario", "exercise | sequence | two_drum | bimanual_song");
  mirror(train, "--bpm", "score.bpm", "exercise tempo");

  auto* rollout = app.add_subcommand("rollout", "run one episode, write trace and metrics");
  add_common(rollout);
  mirror(rollout, "--mode", "mode", "closed_loop | open_loop_replay | plan_only | fixed_grasp | arm_driven");
  mirror(rollout, "--checkpoint", "paths.checkpoint", "trained policy");
  mirror(rollout, "--recording", "paths.recording", "actions file for open_loop_replay");
  mirror(rollout, "--scenario", "scenario", "exercise | sequence | two_drum | bimanual_song");
  mirror(rollout, "--bpm", "score.bpm", "exercise tempo");

  auto* evalc = app.add_subcommand("eval", "run the experiment matrix");
  add_common(evalc);
  std::vector<std::string> modes{"closed_loop", "open_loop_replay", "plan_only"};
  mirror(evalc, "--checkpoint", "paths.checkpoint", "trained policy");
  mirror(evalc, "--seeds", "eval_seeds", "evaluation seeds per cell");
  mirror(evalc, "--scenario", "scenario", "exercise | sequence | two_drum | bimanual_song");
  evalc->add_option("--modes", modes, "rollout modes to compare");

  auto* self = app.add_subcommand("selftest", "run the formula and oracle suite");

  if (!args.empty() && !args.front().empty() && args.front()[0] != '-') {
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == args.front();
    if (!known) {
      err << to_string(ErrorKind::kUnknownSubcommand) << ": " << args.front() << "\n" << app.help();
      return kExitUsage;
    }
  }
  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (args.empty()) {
      err << app.help();
    } else {
      err << e.what() << "\n";
    }
    return kExitUsage;
  }

  try {
    if (self->parsed()) return run_selftest(out) == 0 ? kExitOk : kExitRuntime;
    for (const auto& [k, v] : mirrored) f.sets.push_back(k + "=" + v);
    RunConfig c;
    try {
      c = load_run_config(f);
      if (score->parsed() && layout == "two_drum") {
        c.scenario = Scenario::kTwoDrum;
      } else if (score->parsed() && !c.midi.empty() && c.scenario == Scenario::kExercise) {
        c.scenario = Scenario::kBimanualSong;
      }
      validate_paths(c);
    } catch (const Error& e) {
      err << e.what() << "\n";
      return kExitUsage;
    }
    if (score->parsed()) return cmd_score(c, out);
    if (plan->parsed()) return cmd_plan(c, !f.out.empty(), out);
    if (train->parsed()) return cmd_train(c, out);
    if (rollout->parsed()) return cmd_rollout(c, out);
    if (evalc->parsed()) return cmd_eval(c, modes, out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.kind() == ErrorKind::kConfigError ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace dexdrum::cli
