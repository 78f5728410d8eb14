#pragma once

// Fully connected tanh network with linear output and exact reverse-mode
// gradients. Samples are columns. Parameters live in one flat vector so
// optimizers, checkpoints and finite-difference checks see a single buffer.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "dexdrum/common/error.hpp"

namespace dexdrum::learn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
class Mlp {
 public:
  using Mat = Matrix<Scalar>;
  using Vec = Vector<Scalar>;

  struct Cache {
    std::vector<Mat> activations;  // input, then each layer's output
  };

  Mlp() = default;

  // sizes = {in, hidden..., out}
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw Error(ErrorKind::kBadConfig, "MLP needs >= 2 sizes");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      w_offset_.push_back(n);
      n += static_cast<std::size_t>(sizes_[l] * sizes_[l + 1]);
      b_offset_.push_back(n);
      n += static_cast<std::size_t>(sizes_[l + 1]);
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(n));
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t n_layers() const { return sizes_.size() - 1; }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  Eigen::Map<Mat> weight(std::size_t l) {
    return {params_.data() + w_offset_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<const Mat> weight(std::size_t l) const {
    return {params_.data() + w_offset_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Vec> bias(std::size_t l) {
    return {params_.data() + b_offset_[l], sizes_[l + 1]};
  }
  Eigen::Map<const Vec> bias(std::size_t l) const {
    return {params_.data() + b_offset_[l], sizes_[l + 1]};
  }

  // Scaled-uniform init; the last layer is shrunk by output_gain.
  template <typename Rng>
  void init(Rng& rng, double output_gain = 1.0) {
    for (std::size_t l = 0; l < n_layers(); ++l) {
      const double limit = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1])) *
                           (l + 1 == n_layers() ? output_gain : 1.0);
      std::uniform_real_distribution<double> u(-limit, limit);
      auto w = weight(l);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(u(rng));
      bias(l).setZero();
    }
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    if (x.rows() != input_size()) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "network expects " + std::to_string(input_size()) + " inputs, got " +
                      std::to_string(x.rows()));
    }
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(x);
    }
    Mat a = x;
    for (std::size_t l = 0; l < n_layers(); ++l) {
      Mat z = weight(l) * a;
      z.colwise() += bias(l);
      if (l + 1 < n_layers()) z = z.array().tanh().matrix();
      a = std::move(z);
      if (cache) cache->activations.push_back(a);
    }
    return a;
  }

  // Accumulates dLoss/dparams into grad given dLoss/doutput.
  void backward(const Cache& cache, const Mat& d_out, Vec& grad) const {
    if (grad.size() != params_.size()) grad = Vec::Zero(params_.size());
    Mat delta = d_out;
    for (std::size_t l = n_layers(); l-- > 0;) {
      const Mat& input = cache.activations[l];
      Eigen::Map<Mat> gw(grad.data() + w_offset_[l], sizes_[l + 1], sizes_[l]);
      Eigen::Map<Vec> gb(grad.data() + b_offset_[l], sizes_[l + 1]);
      gw.noalias() += delta * input.transpose();
      gb += delta.rowwise().sum();
      if (l == 0) break;
      Mat back = weight(l).transpose() * delta;
      // input is tanh output of layer l-1: d tanh = 1 - a^2
      delta = (back.array() * (Scalar(1) - input.array().square())).matrix();
    }
  }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> w_offset_, b_offset_;
  Vec params_;
};

}  // namespace dexdrum::learn
