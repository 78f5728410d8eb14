#pragma once

// Generalized advantage estimation, Adam, and the clipped-surrogate update.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "dexdrum/common/error.hpp"
#include "dexdrum/learner/policy.hpp"

namespace dexdrum::learn {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// One env's sequence. delta_t = r_t + gamma v_{t+1} (1 - done_t) - v_t, with
// v_T = bootstrap; A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}.
inline GaeResult compute_gae(const std::vector<double>& rewards,
                             const std::vector<double>& values,
                             const std::vector<bool>& dones, double bootstrap, double gamma,
                             double lambda) {
  if (rewards.size() != values.size() || rewards.size() != dones.size()) {
    throw Error(ErrorKind::kLengthMismatch, "rewards, values and dones differ in length");
  }
  if (!(gamma > 0.0 && gamma < 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorKind::kBadConfig, "gamma must lie in (0,1) and lambda in [0,1]");
  }
  const std::size_t n = rewards.size();
  GaeResult g;
  g.advantages.assign(n, 0.0);
  g.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double notdone = dones[i] ? 0.0 : 1.0;
    const double next_v = i + 1 < n ? values[i + 1] : bootstrap;
    const double delta = rewards[i] + gamma * next_v * notdone - values[i];
    next_adv = delta + gamma * lambda * notdone * next_adv;
    g.advantages[i] = next_adv;
    g.returns[i] = next_adv + values[i];
  }
  return g;
}

struct PpoConfig {
  double clip_eps = 0.2;
  double lr = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 4;
  int minibatches = 8;
  double entropy_coef = 0.003;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;  // <= 0 disables global norm clipping
  bool normalize_advantages = true;
};

// Flat view: actor params, logstd, critic params.
template <typename Scalar>
Vector<Scalar> get_flat_params(const ActorCritic<Scalar>& ac) {
  Vector<Scalar> v(static_cast<Eigen::Index>(ac.n_params()));
  const auto na = ac.actor().params().size();
  const auto nl = ac.logstd().size();
  v.head(na) = ac.actor().params();
  v.segment(na, nl) = ac.logstd();
  v.tail(ac.critic().params().size()) = ac.critic().params();
  return v;
}

template <typename Scalar>
void set_flat_params(ActorCritic<Scalar>& ac, const Vector<Scalar>& v) {
  const auto na = ac.actor().params().size();
  const auto nl = ac.logstd().size();
  ac.actor().params() = v.head(na);
  ac.logstd() = v.segment(na, nl);
  ac.critic().params() = v.tail(ac.critic().params().size());
}

template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(Vector<Scalar>::Zero(static_cast<Eigen::Index>(n))),
        v_(Vector<Scalar>::Zero(static_cast<Eigen::Index>(n))),
        b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(Vector<Scalar>& params, const Vector<Scalar>& grad, double lr) {
    ++t_;
    const auto b1 = static_cast<Scalar>(b1_);
    const auto b2 = static_cast<Scalar>(b2_);
    m_ = b1 * m_ + (Scalar(1) - b1) * grad;
    v_ = b2 * v_ + (Scalar(1) - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    const auto step_size = static_cast<Scalar>(lr / c1);
    const auto root_c2 = static_cast<Scalar>(std::sqrt(c2));
    params.array() -= step_size * m_.array() /
                      (v_.array().sqrt() / root_c2 + static_cast<Scalar>(eps_));
  }

  long steps() const { return t_; }

 private:
  Vector<Scalar> m_, v_;
  double b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

template <typename Scalar>
struct PpoBatch {
  Matrix<Scalar> obs;            // normalized, obs_dim x N
  Matrix<double> actions;        // act_dim x N, raw Gaussian samples
  std::vector<double> log_prob;  // at collection time
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return log_prob.size(); }
};

template <typename Scalar>
struct LossAndGrad {
  double total = 0.0;
  double loss_pi = 0.0;
  double loss_v = 0.0;  // mean squared error, before the coefficient
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  Vector<Scalar> grad;  // flat, same layout as get_flat_params
};

// Total loss L = L_clip + c_v E[(v - R)^2] - c_e H over the given columns,
// with its exact gradient.
template <typename Scalar>
LossAndGrad<Scalar> ppo_loss_and_grad(const ActorCritic<Scalar>& ac,
                                      const Matrix<Scalar>& obs,
                                      const Matrix<double>& actions,
                                      const std::vector<double>& logp_old,
                                      const std::vector<double>& adv,
                                      const std::vector<double>& ret, const PpoConfig& cfg) {
  const auto B = obs.cols();
  const auto A = static_cast<Eigen::Index>(ac.shape().act_dim);
  if (actions.rows() != A || actions.cols() != B ||
      static_cast<Eigen::Index>(logp_old.size()) != B ||
      static_cast<Eigen::Index>(adv.size()) != B || static_cast<Eigen::Index>(ret.size()) != B) {
    throw Error(ErrorKind::kLengthMismatch, "PPO batch fields disagree in size");
  }
  typename Mlp<Scalar>::Cache ca, cc;
  const Matrix<Scalar> mu = ac.actor().forward(obs, &ca);
  const Matrix<Scalar> v = ac.critic().forward(obs, &cc);

  std::vector<double> ls(static_cast<std::size_t>(A)), inv_var(static_cast<std::size_t>(A));
  for (Eigen::Index j = 0; j < A; ++j) {
    ls[j] = clamp_logstd(static_cast<double>(ac.logstd()[j]));
    inv_var[j] = std::exp(-2.0 * ls[j]);
  }

  LossAndGrad<Scalar> out;
  const double inv_b = 1.0 / static_cast<double>(B);
  Matrix<Scalar> d_mu(A, B);
  Matrix<Scalar> d_v(1, B);
  std::vector<double> d_ls(static_cast<std::size_t>(A), 0.0);
  const double lo = 1.0 - cfg.clip_eps;
  const double hi = 1.0 + cfg.clip_eps;

  for (Eigen::Index b = 0; b < B; ++b) {
    double lp = 0.0;
    for (Eigen::Index j = 0; j < A; ++j) {
      const double diff = actions(j, b) - static_cast<double>(mu(j, b));
      lp += -0.5 * diff * diff * inv_var[j] - ls[j] - kHalfLog2Pi;
    }
    const double log_ratio = lp - logp_old[b];
    const double ratio = std::exp(log_ratio);
    const double a = adv[b];
    const double s1 = ratio * a;
    const double s2 = std::clamp(ratio, lo, hi) * a;
    out.loss_pi -= std::min(s1, s2) * inv_b;
    out.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;
    if (ratio < lo || ratio > hi) out.clip_fraction += inv_b;

    // dL/dlogp for this sample: zero when the clipped branch is the minimum
    // and the ratio sits outside the trust region.
    double g = 0.0;
    if (s1 <= s2 || (ratio >= lo && ratio <= hi)) g = -ratio * a * inv_b;
    for (Eigen::Index j = 0; j < A; ++j) {
      const double diff = actions(j, b) - static_cast<double>(mu(j, b));
      d_mu(j, b) = static_cast<Scalar>(g * diff * inv_var[j]);
      d_ls[j] += g * (diff * diff * inv_var[j] - 1.0);
    }
    const double err = static_cast<double>(v(0, b)) - ret[b];
    out.loss_v += err * err * inv_b;
    d_v(0, b) = static_cast<Scalar>(2.0 * cfg.value_coef * err * inv_b);
  }
  for (Eigen::Index j = 0; j < A; ++j) out.entropy += ls[j] + 0.5 + kHalfLog2Pi;
  out.total = out.loss_pi + cfg.value_coef * out.loss_v - cfg.entropy_coef * out.entropy;

  out.grad = Vector<Scalar>::Zero(static_cast<Eigen::Index>(ac.n_params()));
  const auto na = ac.actor().params().size();
  Vector<Scalar> ga = Vector<Scalar>::Zero(na);
  ac.actor().backward(ca, d_mu, ga);
  Vector<Scalar> gc = Vector<Scalar>::Zero(ac.critic().params().size());
  ac.critic().backward(cc, d_v, gc);
  out.grad.head(na) = ga;
  for (Eigen::Index j = 0; j < A; ++j) {
    const double raw = static_cast<double>(ac.logstd()[j]);
    const bool inside = raw >= kLogStdMin && raw <= kLogStdMax;
    out.grad[na + j] = inside ? static_cast<Scalar>(d_ls[j] - cfg.entropy_coef) : Scalar(0);
  }
  out.grad.tail(gc.size()) = gc;
  return out;
}

struct PpoStats {
  double loss_pi = 0.0;
  double loss_v = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  int n_minibatches = 0;
};

template <typename Scalar>
std::vector<double> normalized_advantages(const std::vector<double>& adv) {
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::max(std::sqrt(var / n), 1e-8);
  std::vector<double> out(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) out[i] = (adv[i] - mean) / sd;
  return out;
}

// Epochs of shuffled minibatch Adam steps. A non-finite loss or gradient
// restores the parameters and optimizer state and throws NonFiniteLoss.
template <typename Scalar, typename Rng>
PpoStats ppo_update(ActorCritic<Scalar>& ac, Adam<Scalar>& adam, const PpoBatch<Scalar>& batch,
                    const PpoConfig& cfg, Rng& rng) {
  const std::size_t n = batch.size();
  if (n == 0) return {};
  const auto saved_params = get_flat_params(ac);
  const Adam<Scalar> saved_adam = adam;
  const auto adv = cfg.normalize_advantages ? normalized_advantages<Scalar>(batch.advantages)
                                            : batch.advantages;

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t n_mb = static_cast<std::size_t>(std::max(1, cfg.minibatches));
  const std::size_t mb = std::max<std::size_t>(1, n / n_mb);

  PpoStats stats;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t start = 0; start + mb <= n; start += mb) {
      const auto B = static_cast<Eigen::Index>(mb);
      Matrix<Scalar> obs(batch.obs.rows(), B);
      Matrix<double> act(batch.actions.rows(), B);
      std::vector<double> lp(mb), a(mb), r(mb);
      for (std::size_t k = 0; k < mb; ++k) {
        const auto i = idx[start + k];
        obs.col(static_cast<Eigen::Index>(k)) = batch.obs.col(static_cast<Eigen::Index>(i));
        act.col(static_cast<Eigen::Index>(k)) = batch.actions.col(static_cast<Eigen::Index>(i));
        lp[k] = batch.log_prob[i];
        a[k] = adv[i];
        r[k] = batch.returns[i];
      }
      auto lg = ppo_loss_and_grad(ac, obs, act, lp, a, r, cfg);
      if (!std::isfinite(lg.total) || !lg.grad.allFinite()) {
        set_flat_params(ac, saved_params);
        adam = saved_adam;
        throw Error(ErrorKind::kNonFiniteLoss, "PPO loss or gradient is not finite");
      }
      if (cfg.max_grad_norm > 0.0) {
        const double norm = static_cast<double>(lg.grad.norm());
        if (norm > cfg.max_grad_norm) lg.grad *= static_cast<Scalar>(cfg.max_grad_norm / norm);
      }
      auto params = get_flat_params(ac);
      adam.step(params, lg.grad, cfg.lr);
      set_flat_params(ac, params);
      stats.loss_pi += lg.loss_pi;
      stats.loss_v += lg.loss_v;
      stats.entropy += lg.entropy;
      stats.approx_kl += lg.approx_kl;
      stats.clip_fraction += lg.clip_fraction;
      ++stats.n_minibatches;
    }
  }
  if (stats.n_minibatches > 0) {
    const double k = stats.n_minibatches;
    stats.loss_pi /= k;
    stats.loss_v /= k;
    stats.entropy /= k;
    stats.approx_kl /= k;
    stats.clip_fraction /= k;
  }
  if (!get_flat_params(ac).allFinite()) {
    set_flat_params(ac, saved_params);
    adam = saved_adam;
    throw Error(ErrorKind::kNonFiniteLoss, "parameters became non-finite");
  }
  return stats;
}

}  // namespace dexdrum::learn
