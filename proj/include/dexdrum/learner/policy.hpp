#pragma once

// Diagonal-Gaussian actor with a separate value network, running observation
// normalization, and the binary checkpoint format.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dexdrum/common/error.hpp"
#include "dexdrum/learner/mlp.hpp"

namespace dexdrum::learn {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 ln(2 pi)

template <typename Scalar>
Scalar clamp_logstd(Scalar v) {
  return std::clamp(v, Scalar(kLogStdMin), Scalar(kLogStdMax));
}

// Log density of a diagonal Gaussian.
inline double gaussian_log_prob(std::span<const double> x, std::span<const double> mean,
                                std::span<const double> logstd) {
  double lp = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double ls = clamp_logstd(logstd[j]);
    const double z = (x[j] - mean[j]) / std::exp(ls);
    lp += -0.5 * z * z - ls - kHalfLog2Pi;
  }
  return lp;
}

struct ActionSample {
  std::vector<double> action;
  double log_prob = 0.0;
};

template <typename Scalar, typename Rng>
ActionSample sample_action(std::span<const Scalar> mean, std::span<const Scalar> logstd,
                           Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  ActionSample s;
  s.action.resize(mean.size());
  for (std::size_t j = 0; j < mean.size(); ++j) {
    const double ls = clamp_logstd(static_cast<double>(logstd[j]));
    s.action[j] = static_cast<double>(mean[j]) + std::exp(ls) * n01(rng);
    const double z = (s.action[j] - static_cast<double>(mean[j])) / std::exp(ls);
    s.log_prob += -0.5 * z * z - ls - kHalfLog2Pi;
  }
  return s;
}

inline double gaussian_entropy(std::span<const double> logstd) {
  double h = 0.0;
  for (double ls : logstd) h += clamp_logstd(ls) + 0.5 + kHalfLog2Pi;
  return h;
}

// Welford-style running mean / variance over observation columns.
class ObsNormalizer {
 public:
  ObsNormalizer() = default;
  explicit ObsNormalizer(std::size_t dim, double clip = 10.0)
      : mean_(dim, 0.0), var_(dim, 1.0), clip_(clip) {}

  std::size_t dim() const { return mean_.size(); }
  double count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& var() const { return var_; }
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  void set_stats(double count, std::vector<double> mean, std::vector<double> var) {
    count_ = count;
    mean_ = std::move(mean);
    var_ = std::move(var);
  }

  // Merges a batch (rows = samples) into the running statistics.
  void update(const std::vector<std::vector<double>>& batch) {
    if (frozen_ || batch.empty()) return;
    const double n = static_cast<double>(batch.size());
    for (std::size_t i = 0; i < mean_.size(); ++i) {
      double m = 0.0;
      for (const auto& row : batch) m += row[i];
      m /= n;
      double v = 0.0;
      for (const auto& row : batch) v += (row[i] - m) * (row[i] - m);
      v /= n;
      const double total = count_ + n;
      const double delta = m - mean_[i];
      const double new_mean = mean_[i] + delta * n / total;
      const double m2 = var_[i] * count_ + v * n + delta * delta * count_ * n / total;
      mean_[i] = new_mean;
      var_[i] = m2 / total;
    }
    count_ += n;
  }

  template <typename Scalar>
  void normalize_into(std::span<const double> obs, Scalar* out) const {
    if (obs.size() != mean_.size()) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "observation has " + std::to_string(obs.size()) + " entries, expected " +
                      std::to_string(mean_.size()));
    }
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const double z = (obs[i] - mean_[i]) / std::sqrt(var_[i] + 1e-8);
      out[i] = static_cast<Scalar>(std::clamp(z, -clip_, clip_));
    }
  }

 private:
  std::vector<double> mean_, var_;
  double count_ = 0.0;
  double clip_ = 10.0;
  bool frozen_ = false;
};

struct NetworkShape {
  int obs_dim = 0;
  int act_dim = 0;
  int hidden_layers = 3;
  int hidden_width = 512;

  std::vector<int> sizes(int out) const {
    std::vector<int> s{obs_dim};
    for (int i = 0; i < hidden_layers; ++i) s.push_back(hidden_width);
    s.push_back(out);
    return s;
  }
  bool operator==(const NetworkShape&) const = default;
};

template <typename Scalar>
struct PolicyOutput {
  Matrix<Scalar> mean;    // act_dim x batch
  Vector<Scalar> logstd;  // act_dim, clamped
  Matrix<Scalar> value;   // 1 x batch
};

template <typename Scalar>
class ActorCritic {
 public:
  using Mat = Matrix<Scalar>;
  using Vec = Vector<Scalar>;

  ActorCritic() = default;
  explicit ActorCritic(const NetworkShape& shape, double init_logstd = -0.5)
      : shape_(shape),
        actor_(shape.sizes(shape.act_dim)),
        critic_(shape.sizes(1)),
        logstd_(Vec::Constant(shape.act_dim, static_cast<Scalar>(init_logstd))),
        norm_(static_cast<std::size_t>(shape.obs_dim)) {}

  template <typename Rng>
  void init(Rng& rng) {
    actor_.init(rng, 0.01);
    critic_.init(rng, 1.0);
  }

  const NetworkShape& shape() const { return shape_; }
  Mlp<Scalar>& actor() { return actor_; }
  const Mlp<Scalar>& actor() const { return actor_; }
  Mlp<Scalar>& critic() { return critic_; }
  const Mlp<Scalar>& critic() const { return critic_; }
  Vec& logstd() { return logstd_; }
  const Vec& logstd() const { return logstd_; }
  ObsNormalizer& normalizer() { return norm_; }
  const ObsNormalizer& normalizer() const { return norm_; }

  std::size_t n_params() const {
    return static_cast<std::size_t>(actor_.params().size() + logstd_.size() +
                                    critic_.params().size());
  }

  // Columns of already-normalized observations.
  PolicyOutput<Scalar> forward_normalized(const Mat& x) const {
    PolicyOutput<Scalar> out;
    out.mean = actor_.forward(x);
    out.value = critic_.forward(x);
    out.logstd = logstd_.unaryExpr([](Scalar v) { return clamp_logstd(v); });
    return out;
  }

  Mat normalize(const std::vector<std::vector<double>>& obs) const {
    Mat x(shape_.obs_dim, static_cast<Eigen::Index>(obs.size()));
    for (std::size_t b = 0; b < obs.size(); ++b) {
      norm_.normalize_into<Scalar>(obs[b], x.col(static_cast<Eigen::Index>(b)).data());
    }
    return x;
  }

  PolicyOutput<Scalar> forward(const std::vector<std::vector<double>>& obs) const {
    return forward_normalized(normalize(obs));
  }

 private:
  NetworkShape shape_;
  Mlp<Scalar> actor_, critic_;
  Vec logstd_;
  ObsNormalizer norm_;
};

struct PolicyStep {
  std::vector<double> mean, logstd;
  double value = 0.0;
};

// Single-observation convenience form.
template <typename Scalar>
PolicyStep forward_policy(const ActorCritic<Scalar>& ac, std::span<const double> obs) {
  if (static_cast<int>(obs.size()) != ac.shape().obs_dim) {
    throw Error(ErrorKind::kDimensionMismatch,
                "observation has " + std::to_string(obs.size()) + " entries, network expects " +
                    std::to_string(ac.shape().obs_dim));
  }
  auto out = ac.forward({std::vector<double>(obs.begin(), obs.end())});
  PolicyStep s;
  for (Eigen::Index j = 0; j < out.mean.rows(); ++j) {
    s.mean.push_back(static_cast<double>(out.mean(j, 0)));
    s.logstd.push_back(static_cast<double>(out.logstd(j)));
  }
  s.value = static_cast<double>(out.value(0, 0));
  return s;
}

// ---------------------------------------------------------------------------
// Checkpoint: "DXDRCKPT", u32 version, u32 obs/act/layers/width, then f32
// actor params, f32 logstd, f32 critic params, f64 count, f64 mean[obs],
// f64 var[obs]. Everything little-endian.

inline constexpr char kCheckpointMagic[8] = {'D', 'X', 'D', 'R', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) {
    throw Error(ErrorKind::kBadCheckpoint, "checkpoint truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(const ActorCritic<Scalar>& ac, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  const auto& s = ac.shape();
  for (int v : {s.obs_dim, s.act_dim, s.hidden_layers, s.hidden_width}) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  }
  auto put_vec = [&](const auto& vec) {
    for (Eigen::Index i = 0; i < vec.size(); ++i) {
      detail::put_le<float>(os, static_cast<float>(vec[i]));
    }
  };
  put_vec(ac.actor().params());
  put_vec(ac.logstd());
  put_vec(ac.critic().params());
  const auto& n = ac.normalizer();
  detail::put_le<double>(os, n.count());
  for (double m : n.mean()) detail::put_le<double>(os, m);
  for (double v : n.var()) detail::put_le<double>(os, v);
  if (!os) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

template <typename Scalar>
ActorCritic<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kMissingCheckpoint, "cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw Error(ErrorKind::kBadCheckpoint, path.string() + " is not a checkpoint");
  }
  if (detail::get_le<std::uint32_t>(is) != kCheckpointVersion) {
    throw Error(ErrorKind::kBadCheckpoint, "unsupported checkpoint version");
  }
  NetworkShape s;
  s.obs_dim = static_cast<int>(detail::get_le<std::uint32_t>(is));
  s.act_dim = static_cast<int>(detail::get_le<std::uint32_t>(is));
  s.hidden_layers = static_cast<int>(detail::get_le<std::uint32_t>(is));
  s.hidden_width = static_cast<int>(detail::get_le<std::uint32_t>(is));
  if (s.obs_dim <= 0 || s.act_dim <= 0 || s.hidden_layers < 0 || s.hidden_width <= 0 ||
      s.obs_dim > (1 << 20) || s.hidden_width > (1 << 16) || s.hidden_layers > 64) {
    throw Error(ErrorKind::kBadCheckpoint, "implausible network shape");
  }
  ActorCritic<Scalar> ac(s);
  auto get_vec = [&](auto& vec) {
    for (Eigen::Index i = 0; i < vec.size(); ++i) {
      vec[i] = static_cast<Scalar>(detail::get_le<float>(is));
    }
  };
  get_vec(ac.actor().params());
  get_vec(ac.logstd());
  get_vec(ac.critic().params());
  const double count = detail::get_le<double>(is);
  std::vector<double> mean(static_cast<std::size_t>(s.obs_dim));
  std::vector<double> var(static_cast<std::size_t>(s.obs_dim));
  for (auto& m : mean) m = detail::get_le<double>(is);
  for (auto& v : var) v = detail::get_le<double>(is);
  ac.normalizer().set_stats(count, std::move(mean), std::move(var));
  return ac;
}

}  // namespace dexdrum::learn
