#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dexdrum/choreography/planner.hpp"
#include "dexdrum/common/error.hpp"
#include "dexdrum/evalkit/trace.hpp"
#include "dexdrum/score_io/score.hpp"

namespace dexdrum::eval {

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int true_pos = 0;
  int false_pos = 0;
  int false_neg = 0;
};

inline double f1_from(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// One-to-one matching per (hand, drum) within +-window. Both lists are walked
// in time order and each played hit takes the earliest scheduled hit it can
// still reach; for equal-width windows on a line this attains the maximum
// number of matches.
inline F1Result f1_score(const std::vector<PlayedHit>& played,
                         const score::ScheduledScore& sched, int window) {
  if (window < 0) throw Error(ErrorKind::kBadConfig, "window must be >= 0");
  F1Result r;
  int n_sched = 0;
  for (const auto& hand : sched.hands) n_sched += static_cast<int>(hand.size());
  for (std::size_t h = 0; h < sched.hands.size(); ++h) {
    for (std::size_t d = 0; d < score::kNumDrumIds; ++d) {
      const auto drum = static_cast<DrumId>(d);
      std::vector<int> s, p;
      for (const auto& x : sched.hands[h]) {
        if (x.drum == drum) s.push_back(x.step);
      }
      for (const auto& x : played) {
        if (x.hand == static_cast<int>(h) && x.drum == drum) p.push_back(x.step);
      }
      std::sort(s.begin(), s.end());
      std::sort(p.begin(), p.end());
      std::size_t i = 0;
      for (int step : p) {
        while (i < s.size() && s[i] < step - window) ++i;
        if (i < s.size() && s[i] <= step + window) {
          ++r.true_pos;
          ++i;
        }
      }
    }
  }
  r.false_pos = static_cast<int>(played.size()) - r.true_pos;
  r.false_neg = n_sched - r.true_pos;
  r.precision = played.empty() ? 0.0 : static_cast<double>(r.true_pos) / played.size();
  r.recall = n_sched == 0 ? 0.0 : static_cast<double>(r.true_pos) / n_sched;
  r.f1 = f1_from(r.precision, r.recall);
  return r;
}

inline std::vector<double> hold_ratio_per_hand(const EpisodeTrace& tr) {
  if (tr.steps.empty()) throw Error(ErrorKind::kEmptyTrace, "trace has no steps");
  std::vector<double> out(static_cast<std::size_t>(tr.n_hands), 0.0);
  for (const auto& row : tr.steps) {
    for (std::size_t h = 0; h < row.size() && h < out.size(); ++h) {
      out[h] += row[h].held ? 1.0 : 0.0;
    }
  }
  for (auto& v : out) v /= static_cast<double>(tr.steps.size());
  return out;
}

inline double hold_ratio(const EpisodeTrace& tr) {
  const auto per = hold_ratio_per_hand(tr);
  double m = 0.0;
  for (double v : per) m += v;
  return m / static_cast<double>(per.size());
}

// Mean over held (step, hand) samples of the mean head and tail error. NaN
// when no sample is held.
inline double trajectory_error(const EpisodeTrace& tr, const choreo::ReferenceTrajectory& ref) {
  if (tr.n_steps() != ref.n_steps()) {
    throw Error(ErrorKind::kLengthMismatch,
                "trace has " + std::to_string(tr.n_steps()) + " steps, reference " +
                    std::to_string(ref.n_steps()));
  }
  double sum = 0.0;
  long n = 0;
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    for (std::size_t h = 0; h < tr.steps[k].size() && h < ref.hands.size(); ++h) {
      const auto& s = tr.steps[k][h];
      if (!s.held) continue;
      sum += 0.5 * ((s.head - ref.hands[h].head[k]).norm() +
                    (s.tail - ref.hands[h].tail[k]).norm());
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

// Sum over steps and hands of |tau| + |v|.
inline double energy(const EpisodeTrace& tr) {
  double e = 0.0;
  for (const auto& row : tr.steps) {
    for (const auto& s : row) e += s.tau_norm + s.v_norm;
  }
  return e;
}

struct EpisodeMetrics {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double hold_ratio = 0.0;
  std::vector<double> hold_ratio_per_hand;
  double trajectory_error = 0.0;
  double energy = 0.0;
  int n_true_pos = 0;
  int n_false_pos = 0;
  int n_false_neg = 0;
};

inline EpisodeMetrics compute_metrics(const EpisodeTrace& tr, const score::ScheduledScore& sched,
                                      const choreo::ReferenceTrajectory& ref) {
  EpisodeMetrics m;
  const auto f = f1_score(tr.hits, sched, sched.window_halfwidth_steps);
  m.f1 = f.f1;
  m.precision = f.precision;
  m.recall = f.recall;
  m.n_true_pos = f.true_pos;
  m.n_false_pos = f.false_pos;
  m.n_false_neg = f.false_neg;
  m.hold_ratio_per_hand = hold_ratio_per_hand(tr);
  m.hold_ratio = hold_ratio(tr);
  m.trajectory_error = trajectory_error(tr, ref);
  m.energy = energy(tr);
  return m;
}

}  // namespace dexdrum::eval
