#pragma once

// Independent reference computations for the learner numerics: an explicit
// n-step form of GAE, central finite differences of the PPO loss, and a
// contextual-bandit task with a known optimum. Shared by the unit tests, the
// acceptance binary and `dexdrum selftest`.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dexdrum/learner/ppo.hpp"

namespace dexdrum::learn::oracle {

// GAE as the lambda-weighted mixture of n-step advantages
//   A_t = sum_{n>=1} (1 - lambda) lambda^(n-1) A_t^(n),
// where every n-step estimate past the last available sample (or past a
// terminal) equals the longest one, so the tail weight lambda^(N-1) lands on it.
inline std::vector<double> gae_nstep(const std::vector<double>& rewards,
                                     const std::vector<double>& values,
                                     const std::vector<bool>& dones, double bootstrap,
                                     double gamma, double lambda) {
  const std::size_t T = rewards.size();
  std::vector<double> adv(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    // N = number of distinct n-step estimates from t.
    std::size_t N = T - t;
    for (std::size_t k = t; k < T; ++k) {
      if (dones[k]) {
        N = k - t + 1;
        break;
      }
    }
    auto nstep = [&](std::size_t n) {
      double g = 0.0;
      for (std::size_t k = 0; k < n; ++k) g += std::pow(gamma, static_cast<double>(k)) * rewards[t + k];
      const std::size_t end = t + n;
      const bool terminal = dones[end - 1];
      const double v_end = end < T ? values[end] : bootstrap;
      if (!terminal) g += std::pow(gamma, static_cast<double>(n)) * v_end;
      return g - values[t];
    };
    double a = 0.0;
    for (std::size_t n = 1; n < N; ++n) {
      a += (1.0 - lambda) * std::pow(lambda, static_cast<double>(n - 1)) * nstep(n);
    }
    a += std::pow(lambda, static_cast<double>(N - 1)) * nstep(N);
    adv[t] = a;
  }
  return adv;
}

// Largest |gae - oracle| over random sequences of length 1..max_len.
inline double gae_max_error(int trials, int max_len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0), g(0.05, 0.99), l(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int T = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_len));
    std::vector<double> r(T), v(T);
    std::vector<bool> d(T);
    for (int i = 0; i < T; ++i) {
      r[i] = u(rng);
      v[i] = u(rng);
      d[i] = rng() % 4 == 0;
    }
    const double gamma = g(rng);
    // Hit both endpoints of lambda now and then.
    const double lambda = trial % 7 == 0 ? 0.0 : trial % 7 == 1 ? 1.0 : l(rng);
    const double boot = u(rng);
    const auto fast = compute_gae(r, v, d, boot, gamma, lambda);
    const auto slow = gae_nstep(r, v, d, boot, gamma, lambda);
    for (int i = 0; i < T; ++i) {
      worst = std::max(worst, std::abs(fast.advantages[i] - slow[i]));
      worst = std::max(worst, std::abs(fast.returns[i] - (slow[i] + v[i])));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Finite differences

struct ToyProblem {
  ActorCritic<double> net;
  Matrix<double> obs;
  Matrix<double> actions;
  std::vector<double> logp_old, adv, ret;
};

// A random actor-critic with at most max_params parameters and a batch whose
// ratios sit away from the clip kinks, so central differences stay valid.
inline ToyProblem random_toy_problem(std::mt19937_64& rng, std::size_t max_params = 100) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  NetworkShape shape;
  ActorCritic<double> net;
  do {
    shape.obs_dim = 1 + static_cast<int>(rng() % 3);
    shape.act_dim = 1 + static_cast<int>(rng() % 2);
    shape.hidden_layers = static_cast<int>(rng() % 3);
    shape.hidden_width = 1 + static_cast<int>(rng() % 4);
    net = ActorCritic<double>(shape);
  } while (net.n_params() > max_params);
  auto p = get_flat_params(net);
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = u(rng);
  // Keep logstd inside its clamp range so the gradient is defined.
  for (int j = 0; j < shape.act_dim; ++j) p[net.actor().params().size() + j] = -0.5 + 0.5 * u(rng);
  set_flat_params(net, p);

  const int B = 2 + static_cast<int>(rng() % 4);
  ToyProblem tp{net, Matrix<double>(shape.obs_dim, B), Matrix<double>(shape.act_dim, B), {}, {}, {}};
  for (Eigen::Index i = 0; i < tp.obs.size(); ++i) tp.obs.data()[i] = u(rng);
  const auto out = net.forward_normalized(tp.obs);
  for (int b = 0; b < B; ++b) {
    std::vector<double> mean(static_cast<std::size_t>(shape.act_dim)), ls(mean.size()),
        a(mean.size());
    for (int j = 0; j < shape.act_dim; ++j) {
      mean[j] = out.mean(j, b);
      ls[j] = out.logstd(j);
      a[j] = mean[j] + std::exp(ls[j]) * u(rng);
      tp.actions(j, b) = a[j];
    }
    const double lp = gaussian_log_prob(a, mean, ls);
    // Ratio either well inside [0.85, 1.15] or well outside the 0.2 clip.
    const int region = static_cast<int>(rng() % 3);
    const double shift = region == 0 ? 0.15 * u(rng) : region == 1 ? 0.6 : -0.6;
    tp.logp_old.push_back(lp - shift);
    tp.adv.push_back(u(rng));
    tp.ret.push_back(u(rng));
  }
  return tp;
}

inline double toy_loss(const ToyProblem& tp, const Vector<double>& params, const PpoConfig& cfg) {
  ActorCritic<double> net = tp.net;
  set_flat_params(net, params);
  return ppo_loss_and_grad(net, tp.obs, tp.actions, tp.logp_old, tp.adv, tp.ret, cfg).total;
}

// max_i |g_i - fd_i| / max(|g_i|, |fd_i|, floor) for central differences with step h.
inline double ppo_gradient_rel_error(const ToyProblem& tp, const PpoConfig& cfg, double h = 1e-5,
                                     double floor = 1e-6) {
  const auto g = ppo_loss_and_grad(tp.net, tp.obs, tp.actions, tp.logp_old, tp.adv, tp.ret, cfg).grad;
  auto p = get_flat_params(tp.net);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = toy_loss(tp, p, cfg);
    p[i] = keep - h;
    const double down = toy_loss(tp, p, cfg);
    p[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(g[i]), std::abs(fd), floor});
    worst = std::max(worst, std::abs(g[i] - fd) / denom);
  }
  return worst;
}

inline double ppo_gradient_max_error(int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PpoConfig cfg;
  cfg.entropy_coef = 0.01;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) worst = std::max(worst, ppo_gradient_rel_error(random_toy_problem(rng), cfg));
  return worst;
}

// ---------------------------------------------------------------------------
// Contextual bandit: context c in {-1, +1} is the observation, the action is
// the sign of the sampled scalar, reward 1 when it matches c. The optimum is 1.

struct BanditResult {
  int updates = 0;         // updates taken until the target was met (or the budget)
  double expected = 0.0;   // exact expected reward of the stochastic policy
  bool reached = false;
};

// Exact expected reward under the Gaussian policy: P(sign(a) == c).
inline double bandit_expected_reward(const ActorCritic<double>& ac) {
  double total = 0.0;
  for (double c : {-1.0, 1.0}) {
    const auto out = ac.forward({{c}});
    const double mu = out.mean(0, 0);
    const double sd = std::exp(out.logstd(0));
    const double p_pos = 0.5 * std::erfc(-mu / (sd * std::sqrt(2.0)));
    total += 0.5 * (c > 0 ? p_pos : 1.0 - p_pos);
  }
  return total;
}

inline BanditResult run_bandit(std::uint64_t seed, int max_updates = 200, double target = 0.95,
                               int batch_size = 256) {
  std::mt19937_64 rng(seed);
  ActorCritic<double> ac(NetworkShape{1, 1, 1, 16}, 0.0);
  ac.init(rng);
  ac.normalizer().set_frozen(true);  // contexts are already unit scale
  Adam<double> adam(ac.n_params());
  PpoConfig cfg;
  cfg.lr = 3e-4;
  cfg.minibatches = 4;
  cfg.entropy_coef = 0.0;

  BanditResult res;
  for (int u = 0; u < max_updates; ++u) {
    res.expected = bandit_expected_reward(ac);
    if (res.expected >= target) {
      res.reached = true;
      res.updates = u;
      return res;
    }
    PpoBatch<double> batch;
    batch.obs.resize(1, batch_size);
    batch.actions.resize(1, batch_size);
    std::vector<std::vector<double>> ctx(static_cast<std::size_t>(batch_size));
    for (int b = 0; b < batch_size; ++b) ctx[b] = {rng() % 2 ? 1.0 : -1.0};
    const auto x = ac.normalize(ctx);
    const auto out = ac.forward_normalized(x);
    const std::vector<double> ls{out.logstd(0)};
    for (int b = 0; b < batch_size; ++b) {
      const std::vector<double> mean{out.mean(0, b)};
      const auto s = sample_action<double>(mean, ls, rng);
      const double r = (s.action[0] > 0.0) == (ctx[b][0] > 0.0) ? 1.0 : 0.0;
      // One-step episodes: the GAE advantage reduces to r - v.
      const auto g = compute_gae({r}, {out.value(0, b)}, {true}, 0.0, 0.8, 0.9);
      batch.obs.col(b) = x.col(b);
      batch.actions(0, b) = s.action[0];
      batch.log_prob.push_back(s.log_prob);
      batch.advantages.push_back(g.advantages[0]);
      batch.returns.push_back(g.returns[0]);
    }
    ppo_update(ac, adam, batch, cfg, rng);
  }
  res.expected = bandit_expected_reward(ac);
  res.reached = res.expected >= target;
  res.updates = max_updates;
  return res;
}

}  // namespace dexdrum::learn::oracle
