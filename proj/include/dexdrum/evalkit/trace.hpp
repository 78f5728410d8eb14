#pragma once

// Per-step, per-hand episode record and its text dump:
//
//   # dexdrum-trace v1
//   # n_hands N
//   S step hand held hx hy hz tx ty tz wx wy wz pitch grip tau_norm v_norm c0 c1 c2 c3 c4
//   H step hand drum
//
// Doubles are written with max_digits10 so a reloaded trace re-evaluates to
// identical metrics.

#include <array>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dexdrum/common/error.hpp"
#include "dexdrum/common/geometry.hpp"
#include "dexdrum/score_io/drum.hpp"

namespace dexdrum::eval {

using score::DrumId;

struct HandSample {
  bool held = true;
  Vec3 head = Vec3::Zero();
  Vec3 tail = Vec3::Zero();
  Vec3 wrist = Vec3::Zero();
  double pitch = 0.0;
  double grip = 1.0;
  double tau_norm = 0.0;  // |arm torque proxy|
  double v_norm = 0.0;    // |wrist velocity|
  std::array<double, 5> closure{};

  bool operator==(const HandSample&) const = default;
};

struct PlayedHit {
  int step = 0;
  int hand = 0;
  DrumId drum = DrumId::kSnare;

  bool operator==(const PlayedHit&) const = default;
};

struct EpisodeTrace {
  int n_hands = 1;
  // steps[k][h] is the state after k policy steps; row 0 is the reset state.
  std::vector<std::vector<HandSample>> steps;
  std::vector<PlayedHit> hits;
  long drum_contacts = 0;  // contact records of any speed

  int n_steps() const { return static_cast<int>(steps.size()); }
  bool operator==(const EpisodeTrace&) const = default;
};

inline std::string to_text(const EpisodeTrace& tr) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# dexdrum-trace v1\n# n_hands " << tr.n_hands << "\n";
  auto v3 = [&](const Vec3& v) { os << ' ' << v.x() << ' ' << v.y() << ' ' << v.z(); };
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    for (std::size_t h = 0; h < tr.steps[k].size(); ++h) {
      const auto& s = tr.steps[k][h];
      os << "S " << k << ' ' << h << ' ' << (s.held ? 1 : 0);
      v3(s.head);
      v3(s.tail);
      v3(s.wrist);
      os << ' ' << s.pitch << ' ' << s.grip << ' ' << s.tau_norm << ' ' << s.v_norm;
      for (double c : s.closure) os << ' ' << c;
      os << '\n';
    }
  }
  for (const auto& h : tr.hits) {
    os << "H " << h.step << ' ' << h.hand << ' ' << score::name_of(h.drum) << '\n';
  }
  return os.str();
}

inline EpisodeTrace trace_from_text(const std::string& text) {
  EpisodeTrace tr;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::kConfigError, "trace line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "#") {
      std::string key;
      if (ls >> key && key == "n_hands") ls >> tr.n_hands;
      continue;
    }
    if (tag == "S") {
      std::size_t k = 0, h = 0;
      int held = 0;
      HandSample s;
      ls >> k >> h >> held >> s.head.x() >> s.head.y() >> s.head.z() >> s.tail.x() >>
          s.tail.y() >> s.tail.z() >> s.wrist.x() >> s.wrist.y() >> s.wrist.z() >> s.pitch >>
          s.grip >> s.tau_norm >> s.v_norm;
      for (double& c : s.closure) ls >> c;
      if (!ls) fail("malformed sample");
      s.held = held != 0;
      if (k >= tr.steps.size()) tr.steps.resize(k + 1);
      if (h >= tr.steps[k].size()) tr.steps[k].resize(h + 1);
      tr.steps[k][h] = s;
    } else if (tag == "H") {
      PlayedHit p;
      std::string drum;
      ls >> p.step >> p.hand >> drum;
      if (!ls) fail("malformed hit");
      auto d = score::drum_from_name(drum);
      if (!d) fail("unknown drum " + drum);
      p.drum = *d;
      tr.hits.push_back(p);
    } else {
      fail("unknown record " + tag);
    }
  }
  return tr;
}

inline void write_trace(const EpisodeTrace& tr, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path);
  os << to_text(tr);
}

inline EpisodeTrace read_trace(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return trace_from_text(ss.str());
}

}  // namespace dexdrum::eval
