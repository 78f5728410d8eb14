#pragma once

// Rollouts, vectorized collection and the PPO training loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dexdrum/evalkit/metrics.hpp"
#include "dexdrum/learner/env.hpp"
#include "dexdrum/learner/policy.hpp"
#include "dexdrum/learner/ppo.hpp"

namespace dexdrum::learn {

using Agent = ActorCritic<float>;

// ---------------------------------------------------------------------------
// Single episode

struct RolloutOptions {
  RolloutMode mode = RolloutMode::kClosedLoop;
  std::uint64_t seed = 0;
  long global_step = kAfterCurriculum;
  const std::vector<world::Action>* recording = nullptr;  // open-loop replay
  bool stochastic = false;                                 // sample instead of the mean
  std::uint64_t sample_seed = 0;
};

struct RolloutResult {
  eval::EpisodeTrace trace;
  std::vector<world::Action> applied;
  double total_reward = 0.0;
  long drum_contacts = 0;
};

template <typename Scalar>
RolloutResult rollout(const ActorCritic<Scalar>* policy, const Task& task, const ControlConfig& trained,
                      const RolloutOptions& opt) {
  const ControlConfig ctl = control_for(opt.mode, trained);
  const int T = task.n_steps();
  const bool needs_policy = opt.mode == RolloutMode::kClosedLoop ||
                            opt.mode == RolloutMode::kFixedGrasp ||
                            opt.mode == RolloutMode::kArmDriven;
  if (needs_policy && policy == nullptr) {
    throw Error(ErrorKind::kMissingCheckpoint,
                std::string(mode_name(opt.mode)) + " rollout needs a trained policy");
  }
  if (opt.mode == RolloutMode::kOpenLoopReplay &&
      (opt.recording == nullptr || static_cast<int>(opt.recording->size()) < T)) {
    throw Error(ErrorKind::kRecordingLengthMismatch,
                "recording has " +
                    std::to_string(opt.recording ? opt.recording->size() : 0) +
                    " actions, episode needs " + std::to_string(T));
  }
  DrumEnv env(task, ctl);
  auto obs = env.reset(opt.seed, opt.global_step);
  std::mt19937_64 rng(opt.sample_seed);
  RolloutResult res;
  const std::vector<double> zeros(static_cast<std::size_t>(env.act_dim()), 0.0);
  while (!env.done()) {
    EnvStep s;
    if (opt.mode == RolloutMode::kOpenLoopReplay) {
      s = env.step_applied((*opt.recording)[static_cast<std::size_t>(env.step_index())]);
    } else if (opt.mode == RolloutMode::kPlanOnly || policy == nullptr) {
      s = env.step(zeros);
    } else {
      const auto out = policy->forward({obs});
      std::vector<double> mean(static_cast<std::size_t>(out.mean.rows()));
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] = static_cast<double>(out.mean(static_cast<Eigen::Index>(j), 0));
      if (opt.stochastic) {
        std::vector<double> ls(mean.size());
        for (std::size_t j = 0; j < ls.size(); ++j) ls[j] = static_cast<double>(out.logstd(static_cast<Eigen::Index>(j)));
        s = env.step(sample_action<double>(mean, ls, rng).action);
      } else {
        s = env.step(mean);
      }
    }
    res.applied.push_back(s.applied);
    res.total_reward += s.reward;
    obs = std::move(s.obs);
  }
  res.trace = env.trace();
  res.drum_contacts = env.trace().drum_contacts;
  return res;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double gamma = 0.8;
  double gae_lambda = 0.9;
  int n_envs = 1024;
  long total_steps = 40'000'000;
  int horizon = 200;
  PpoConfig ppo;
  int hidden_layers = 3;
  int hidden_width = 512;
  double init_logstd = -0.5;
  std::uint64_t seed = 0;
  int threads = 1;
  int eval_every = 1;
  int eval_episodes = 1;
  int checkpoint_every = 0;  // iterations; 0 = only the final one
  std::string out_dir;       // empty: nothing is written
  ControlConfig control;

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorKind::kBadConfig, m); };
    if (!(gamma > 0.0 && gamma < 1.0)) bad("gamma must lie in (0,1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) bad("gae_lambda must lie in [0,1]");
    if (!(control.residual_scale > 0.0)) bad("residual_scale must be > 0");
    if (n_envs < 1 || horizon < 1 || total_steps < 1) bad("n_envs, horizon, total_steps >= 1");
    if (hidden_layers < 0 || hidden_width < 1) bad("hidden shape");
    if (threads < 1) bad("threads must be >= 1");
    if (eval_every < 1 || eval_episodes < 0) bad("eval cadence");
    control.validate();
  }

  long steps_per_iteration() const { return static_cast<long>(n_envs) * horizon; }
  long iterations() const {
    return std::max(1L, (total_steps + steps_per_iteration() - 1) / steps_per_iteration());
  }
};

struct TrainLogRow {
  long iteration = 0;
  long env_steps = 0;
  double mean_return = 0.0;
  double f1_eval = 0.0;
  double hold_ratio = 0.0;
  double loss_pi = 0.0;
  double loss_v = 0.0;
  double entropy = 0.0;
};

inline constexpr const char* kTrainLogHeader =
    "iteration,env_steps,mean_return,f1_eval,hold_ratio,loss_pi,loss_v,entropy";

inline std::string to_csv(const TrainLogRow& r) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << r.iteration << ','
     << r.env_steps << ',' << r.mean_return << ',' << r.f1_eval << ',' << r.hold_ratio << ','
     << r.loss_pi << ',' << r.loss_v << ',' << r.entropy;
  return os.str();
}

struct TrainResult {
  Agent policy;
  std::vector<TrainLogRow> log;
  long env_steps = 0;
  long global_step = 0;  // per-env vectorized steps taken
};

namespace detail {

template <typename F>
void parallel_for(int n, int threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  const int t = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t));
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += t) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

struct EvalSummary {
  double f1 = 0.0;
  double hold_ratio = 0.0;
  long drum_contacts = 0;
};

inline EvalSummary evaluate_policy(const Agent& agent, const Task& task, const ControlConfig& ctl,
                                   int episodes, std::uint64_t seed, long global_step) {
  EvalSummary s;
  if (episodes <= 0) return s;
  for (int e = 0; e < episodes; ++e) {
    RolloutOptions opt;
    opt.seed = derive_seed(seed, 0xE7A1, static_cast<std::uint64_t>(e));
    opt.global_step = global_step;
    const auto r = rollout(&agent, task, ctl, opt);
    const auto f = eval::f1_score(r.trace.hits, task.sched, task.sched.window_halfwidth_steps);
    s.f1 += f.f1;
    s.hold_ratio += eval::hold_ratio(r.trace);
    s.drum_contacts += r.drum_contacts;
  }
  s.f1 /= episodes;
  s.hold_ratio /= episodes;
  return s;
}

// Called after each iteration with the row just logged; returning false stops
// training early.
using TrainCallback = std::function<bool(const TrainLogRow&, const Agent&)>;

inline TrainResult train(const Task& task, const TrainConfig& cfg, const Agent* resume = nullptr,
                         long start_iteration = 0, const TrainCallback& callback = {}) {
  cfg.validate();
  const int E = cfg.n_envs;
  const int H = cfg.horizon;

  std::vector<DrumEnv> envs;
  envs.reserve(static_cast<std::size_t>(E));
  for (int e = 0; e < E; ++e) envs.emplace_back(task, cfg.control);
  const int obs_dim = envs[0].obs_dim();
  const int act_dim = envs[0].act_dim();

  TrainResult result;
  std::mt19937_64 rng(derive_seed(cfg.seed, 0xA11CE));
  if (resume) {
    if (resume->shape().obs_dim != obs_dim || resume->shape().act_dim != act_dim) {
      throw Error(ErrorKind::kDimensionMismatch, "checkpoint does not fit this task");
    }
    result.policy = *resume;
  } else {
    NetworkShape shape{obs_dim, act_dim, cfg.hidden_layers, cfg.hidden_width};
    result.policy = Agent(shape, cfg.init_logstd);
    result.policy.init(rng);
  }
  Agent& ac = result.policy;
  Adam<float> adam(ac.n_params(), cfg.ppo.adam_beta1, cfg.ppo.adam_beta2, cfg.ppo.adam_eps);

  std::ofstream log_file;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    const auto path = std::filesystem::path(cfg.out_dir) / "train_log.csv";
    const bool fresh = start_iteration == 0 || !std::filesystem::exists(path);
    log_file.open(path, fresh ? std::ios::trunc : std::ios::app);
    if (!log_file) throw Error(ErrorKind::kIo, "cannot write " + path.string());
    if (fresh) log_file << kTrainLogHeader << '\n';
  }

  long global_step = start_iteration * H;
  std::vector<std::vector<double>> obs(static_cast<std::size_t>(E));
  std::vector<std::uint64_t> episode_count(static_cast<std::size_t>(E), 0);
  for (int e = 0; e < E; ++e) {
    obs[e] = envs[e].reset(derive_seed(cfg.seed, static_cast<std::uint64_t>(e), 0), global_step);
  }

  const std::size_t N = static_cast<std::size_t>(E) * static_cast<std::size_t>(H);
  double last_return = 0.0;
  const long iterations = cfg.iterations();
  for (long it = start_iteration; it < start_iteration + iterations; ++it) {
    PpoBatch<float> batch;
    batch.obs.resize(obs_dim, static_cast<Eigen::Index>(N));
    batch.actions.resize(act_dim, static_cast<Eigen::Index>(N));
    batch.log_prob.assign(N, 0.0);
    std::vector<std::vector<double>> rewards(E, std::vector<double>(H)),
        values(E, std::vector<double>(H));
    std::vector<std::vector<bool>> dones(E, std::vector<bool>(H));
    double return_sum = 0.0;
    int finished = 0;

    for (int t = 0; t < H; ++t) {
      ac.normalizer().update(obs);
      const auto x = ac.normalize(obs);
      const auto out = ac.forward_normalized(x);
      std::vector<double> ls(static_cast<std::size_t>(act_dim));
      for (int j = 0; j < act_dim; ++j) ls[j] = out.logstd(j);
      std::vector<std::vector<double>> actions(static_cast<std::size_t>(E));
      for (int e = 0; e < E; ++e) {
        std::vector<double> mean(static_cast<std::size_t>(act_dim));
        for (int j = 0; j < act_dim; ++j) mean[j] = out.mean(j, e);
        auto smp = sample_action<double>(mean, ls, rng);
        const auto col = static_cast<Eigen::Index>(static_cast<std::size_t>(e) * H + t);
        batch.obs.col(col) = x.col(e);
        for (int j = 0; j < act_dim; ++j) batch.actions(j, col) = smp.action[j];
        batch.log_prob[static_cast<std::size_t>(col)] = smp.log_prob;
        values[e][t] = out.value(0, e);
        actions[e] = std::move(smp.action);
      }
      ++global_step;
      std::vector<EnvStep> steps(static_cast<std::size_t>(E));
      detail::parallel_for(E, cfg.threads, [&](int e) {
        envs[e].set_global_step(global_step);
        steps[e] = envs[e].step(actions[e]);
      });
      for (int e = 0; e < E; ++e) {
        rewards[e][t] = steps[e].reward;
        dones[e][t] = steps[e].done;
        if (steps[e].done) {
          return_sum += envs[e].episode_return();
          ++finished;
          ++episode_count[e];
          obs[e] = envs[e].reset(
              derive_seed(cfg.seed, static_cast<std::uint64_t>(e), episode_count[e]), global_step);
        } else {
          obs[e] = std::move(steps[e].obs);
        }
      }
    }

    // Bootstrap from the value of the state the segment ends in.
    const auto tail = ac.forward(obs);
    batch.advantages.assign(N, 0.0);
    batch.returns.assign(N, 0.0);
    for (int e = 0; e < E; ++e) {
      const auto g = compute_gae(rewards[e], values[e], dones[e], tail.value(0, e), cfg.gamma,
                                 cfg.gae_lambda);
      std::copy(g.advantages.begin(), g.advantages.end(),
                batch.advantages.begin() + static_cast<long>(e) * H);
      std::copy(g.returns.begin(), g.returns.end(), batch.returns.begin() + static_cast<long>(e) * H);
    }
    const auto stats = ppo_update(ac, adam, batch, cfg.ppo, rng);

    TrainLogRow row;
    row.iteration = it;
    row.env_steps = (it + 1) * cfg.steps_per_iteration();
    if (finished > 0) last_return = return_sum / finished;
    row.mean_return = last_return;
    if (cfg.eval_episodes > 0 && ((it + 1) % cfg.eval_every == 0 || it + 1 == start_iteration + iterations)) {
      const auto ev = evaluate_policy(ac, task, cfg.control, cfg.eval_episodes, cfg.seed, global_step);
      row.f1_eval = ev.f1;
      row.hold_ratio = ev.hold_ratio;
    } else if (!result.log.empty()) {
      row.f1_eval = result.log.back().f1_eval;
      row.hold_ratio = result.log.back().hold_ratio;
    }
    row.loss_pi = stats.loss_pi;
    row.loss_v = stats.loss_v;
    row.entropy = stats.entropy;
    result.log.push_back(row);
    if (log_file.is_open()) log_file << to_csv(row) << '\n' << std::flush;
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(ac, std::filesystem::path(cfg.out_dir) /
                              ("checkpoint_" + std::to_string(it + 1) + ".bin"));
    }
    if (callback && !callback(row, ac)) break;
  }
  result.env_steps = static_cast<long>(result.log.size()) * cfg.steps_per_iteration();
  result.global_step = global_step;
  if (!cfg.out_dir.empty()) {
    save_checkpoint(ac, std::filesystem::path(cfg.out_dir) / "checkpoint_final.bin");
  }
  return result;
}

}  // namespace dexdrum::learn
