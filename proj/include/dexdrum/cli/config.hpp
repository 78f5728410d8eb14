#pragma once

// Run configuration: a line-oriented `key = value` file with `[section]`
// headers and `#` comments. Every key maps onto one field; unknown keys and
// unparsable values are reported with file and line.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dexdrum/common/error.hpp"
#include "dexdrum/learner/train.hpp"
#include "dexdrum/score_io/smf.hpp"

namespace dexdrum::cli {

struct ConfigEntry {
  std::string key;  // "section.name", or "name" outside any section
  std::string value;
  std::string file;
  int line = 0;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<ConfigEntry> parse_config_text(const std::string& text,
                                                  const std::string& file = "<config>") {
  std::vector<ConfigEntry> out;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    auto where = [&] { return file + ":" + std::to_string(lineno) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw Error(ErrorKind::kConfigError, where() + "malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfigError, where() + "expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::kConfigError, where() + "empty key");
    out.push_back({section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)), file,
                   lineno});
  }
  return out;
}

inline std::vector<ConfigEntry> load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kConfigError, path + ": cannot open config file");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), path);
}

enum class Scenario { kExercise, kSequence, kTwoDrum, kBimanualSong };

struct RunConfig {
  Scenario scenario = Scenario::kExercise;
  // Score source.
  std::string midi;  // required by two_drum / bimanual_song
  double slowdown = 1.0;
  double bpm = 60.0;
  int n_hits = 20;
  score::DrumId drum = score::DrumId::kSnare;
  std::string pattern = "ccdd";  // c = hihat, d = snare
  double interval_s = 1.0;
  double lead_in_s = 1.0;
  // Paths.
  std::string checkpoint;
  std::string out_dir = "out";
  std::string recording;  // applied-action file for open-loop replay
  // Modules.
  learn::TaskConfig task;
  learn::TrainConfig train;
  learn::RolloutMode mode = learn::RolloutMode::kClosedLoop;
  std::uint64_t seed = 0;
  int threads = 1;
  int eval_seeds = 5;
};

namespace detail {

template <typename T>
T parse_number(const ConfigEntry& e) {
  T v{};
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end) {
    throw Error(ErrorKind::kConfigError, e.file + ":" + std::to_string(e.line) + ": '" +
                                             e.value + "' is not a valid number for " + e.key);
  }
  return v;
}

inline bool parse_bool(const ConfigEntry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes" || e.value == "on") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no" || e.value == "off") return false;
  throw Error(ErrorKind::kConfigError,
              e.file + ":" + std::to_string(e.line) + ": '" + e.value + "' is not a boolean");
}

[[noreturn]] inline void bad_value(const ConfigEntry& e, const std::string& what) {
  throw Error(ErrorKind::kConfigError, e.file + ":" + std::to_string(e.line) + ": " + what);
}

}  // namespace detail

// Key -> setter table over a RunConfig.
class ConfigBinder {
 public:
  using Setter = std::function<void(const ConfigEntry&)>;

  explicit ConfigBinder(RunConfig& c) {
    using detail::parse_bool;
    using detail::parse_number;
    auto num = [this](const std::string& k, double& ref) {
      set_[k] = [&ref](const ConfigEntry& e) { ref = parse_number<double>(e); };
    };
    auto integer = [this](const std::string& k, int& ref) {
      set_[k] = [&ref](const ConfigEntry& e) { ref = parse_number<int>(e); };
    };
    auto long_int = [this](const std::string& k, long& ref) {
      set_[k] = [&ref](const ConfigEntry& e) { ref = parse_number<long>(e); };
    };
    auto flag = [this](const std::string& k, bool& ref) {
      set_[k] = [&ref](const ConfigEntry& e) { ref = parse_bool(e); };
    };
    auto text = [this](const std::string& k, std::string& ref) {
      set_[k] = [&ref](const ConfigEntry& e) { ref = e.value; };
    };

    set_["scenario"] = [&c](const ConfigEntry& e) {
      if (e.value == "exercise") c.scenario = Scenario::kExercise;
      else if (e.value == "sequence") c.scenario = Scenario::kSequence;
      else if (e.value == "two_drum") c.scenario = Scenario::kTwoDrum;
      else if (e.value == "bimanual_song") c.scenario = Scenario::kBimanualSong;
      else detail::bad_value(e, "unknown scenario " + e.value);
    };
    set_["seed"] = [&c](const ConfigEntry& e) { c.seed = parse_number<std::uint64_t>(e); };
    integer("threads", c.threads);
    integer("eval_seeds", c.eval_seeds);
    set_["mode"] = [&c](const ConfigEntry& e) {
      auto m = learn::mode_from_name(e.value);
      if (!m) detail::bad_value(e, "unknown rollout mode " + e.value);
      c.mode = *m;
    };

    text("score.midi", c.midi);
    num("score.slowdown", c.slowdown);
    num("score.bpm", c.bpm);
    integer("score.n_hits", c.n_hits);
    set_["score.drum"] = [&c](const ConfigEntry& e) {
      auto d = score::drum_from_name(e.value);
      if (!d || !score::is_playable(*d)) detail::bad_value(e, "unknown drum " + e.value);
      c.drum = *d;
    };
    text("score.pattern", c.pattern);
    num("score.interval_s", c.interval_s);
    num("score.lead_in_s", c.lead_in_s);

    text("paths.checkpoint", c.checkpoint);
    text("paths.out_dir", c.out_dir);
    text("paths.recording", c.recording);

    auto& w = c.task.world;
    num("world.policy_hz", w.policy_hz);
    integer("world.pd_substeps", w.pd_substeps);
    integer("world.physics_substeps", w.physics_substeps);
    num("world.stick_length", w.stick_length);
    num("world.stick_mass", w.stick_mass);
    num("world.grasp_fraction", w.grasp_fraction);
    num("world.pitch_min", w.pitch_min);
    num("world.pitch_max", w.pitch_max);
    num("world.pitch_damping", w.pitch_damping);
    num("world.wrist_mass", w.wrist_mass);
    num("world.wrist_kp", w.wrist_kp);
    num("world.wrist_kd", w.wrist_kd);
    num("world.action_clip", w.action_clip);
    num("world.closure_time_constant", w.closure_time_constant);
    num("world.finger_stiffness", w.finger_stiffness);
    num("world.finger_damping", w.finger_damping);
    num("world.pitch_open", w.pitch_open);
    num("world.pitch_closed", w.pitch_closed);
    num("world.fingertip_open_offset", w.fingertip_open_offset);
    num("world.touch_closure", w.touch_closure);
    num("world.contact_stiffness", w.contact_stiffness);
    num("world.contact_damping", w.contact_damping);
    num("world.hit_speed_threshold", w.hit_speed_threshold);
    num("world.k_slip", w.k_slip);
    num("world.k_recover", w.k_recover);
    num("world.grip_nominal_closure", w.grip_nominal_closure);
    num("world.grip_drop_threshold", w.grip_drop_threshold);
    num("world.initial_closure", w.initial_closure);
    num("world.release_closure", w.release_closure);
    num("world.k_release", w.k_release);
    num("world.base_friction", w.base_friction);
    flag("world.randomize", w.randomize);
    num("world.obs_noise_std", w.obs_noise_std);
    num("world.friction_noise", w.friction_noise);
    num("world.gain_scale_min", w.gain_scale_min);
    num("world.gain_scale_max", w.gain_scale_max);
    long_int("world.curriculum_steps", w.curriculum_steps);
    num("world.gravity", w.gravity);

    auto& p = c.task.planner;
    num("planner.apex_height", p.primitive.apex_height);
    num("planner.strike_halfwidth_s", p.primitive.strike_halfwidth_s);
    num("planner.approach_pitch", p.primitive.approach_pitch);
    num("planner.rest_hover", p.primitive.rest_hover);
    num("planner.transition_hover", p.primitive.transition_hover);
    num("planner.lead_in_s", p.primitive.lead_in_s);
    num("planner.transition_speed", p.primitive.transition_speed);
    num("planner.v_max", p.v_max);

    auto& r = c.task.reward;
    num("reward.w_fingertip", r.weights.fingertip);
    num("reward.w_fulcrum", r.weights.fulcrum);
    num("reward.w_arm", r.weights.arm);
    num("reward.w_trajectory", r.weights.trajectory);
    num("reward.w_hit", r.weights.hit);
    num("reward.sigma_fulcrum", r.sigma_fulcrum);
    num("reward.sigma_trajectory", r.sigma_trajectory);
    num("reward.fingertip_epsilon", r.fingertip_epsilon);

    integer("obs.d_arm", c.task.obs.d_arm);
    integer("obs.d_hand", c.task.obs.d_hand);
    integer("obs.lookahead", c.task.obs.lookahead);
    num("obs.time_horizon_s", c.task.obs.time_horizon_s);

    num("task.grasp_closure", c.task.grasp_closure);
    integer("task.episode_steps", c.task.episode_steps);
    integer("task.hit_window_steps", c.task.hit_window_steps);

    auto& t = c.train;
    num("train.gamma", t.gamma);
    num("train.gae_lambda", t.gae_lambda);
    integer("train.n_envs", t.n_envs);
    long_int("train.total_steps", t.total_steps);
    integer("train.horizon", t.horizon);
    integer("train.hidden_layers", t.hidden_layers);
    integer("train.hidden_width", t.hidden_width);
    num("train.init_logstd", t.init_logstd);
    integer("train.eval_every", t.eval_every);
    integer("train.eval_episodes", t.eval_episodes);
    integer("train.checkpoint_every", t.checkpoint_every);
    num("train.clip_eps", t.ppo.clip_eps);
    num("train.lr", t.ppo.lr);
    integer("train.epochs", t.ppo.epochs);
    integer("train.minibatches", t.ppo.minibatches);
    num("train.entropy_coef", t.ppo.entropy_coef);
    num("train.value_coef", t.ppo.value_coef);
    num("train.max_grad_norm", t.ppo.max_grad_norm);

    auto& k = c.train.control;
    set_["control.style"] = [&k](const ConfigEntry& e) {
      if (e.value == "finger") k.style = choreo::StrokeStyle::kFinger;
      else if (e.value == "arm") k.style = choreo::StrokeStyle::kArm;
      else detail::bad_value(e, "style must be finger or arm");
    };
    set_["control.plan"] = [&k](const ConfigEntry& e) {
      if (e.value == "planned") k.plan = learn::PlanSource::kPlanned;
      else if (e.value == "none") k.plan = learn::PlanSource::kNone;
      else detail::bad_value(e, "plan must be planned or none");
    };
    flag("control.freeze_closures", k.freeze_closures);
    flag("control.residual_wrist", k.residual_wrist);
    flag("control.residual_closure", k.residual_closure);
    num("control.residual_scale", k.residual_scale);
    flag("control.arm_penalty", k.arm_penalty);
    flag("control.curriculum", k.curriculum);
  }

  bool knows(const std::string& key) const { return set_.count(key) > 0; }

  void apply(const ConfigEntry& e) {
    auto it = set_.find(e.key);
    if (it == set_.end()) {
      throw Error(ErrorKind::kConfigError,
                  e.file + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
    it->second(e);
  }

  void apply(const std::vector<ConfigEntry>& entries) {
    for (const auto& e : entries) apply(e);
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> k;
    for (const auto& [name, _] : set_) k.push_back(name);
    return k;
  }

 private:
  std::map<std::string, Setter> set_;
};

// Two hands: left on the hi-hat side, right on the snare.
inline void make_bimanual(learn::TaskConfig& t) {
  t.world.hands = {world::HandRest{{-0.32, 0.18, 0.84}, 0.0, std::numbers::pi / 2.0},
                   world::HandRest{{0.08, 0.18, 0.74}, 0.0, std::numbers::pi / 2.0}};
  t.planner.hands = {choreo::HandPlanSetup{std::numbers::pi / 2.0, score::DrumId::kHiHat},
                     choreo::HandPlanSetup{std::numbers::pi / 2.0, score::DrumId::kSnare}};
}

inline void validate_paths(const RunConfig& c) {
  const bool needs_midi =
      c.scenario == Scenario::kTwoDrum || c.scenario == Scenario::kBimanualSong;
  if (needs_midi) {
    if (c.midi.empty()) throw Error(ErrorKind::kConfigError, "score.midi is required");
    if (!std::filesystem::exists(c.midi)) {
      throw Error(ErrorKind::kConfigError, "score.midi does not exist: " + c.midi);
    }
  }
  if (!c.recording.empty() && !std::filesystem::exists(c.recording)) {
    throw Error(ErrorKind::kConfigError, "paths.recording does not exist: " + c.recording);
  }
}

inline score::DrumScore build_score(const RunConfig& c) {
  score::DrumScore s;
  switch (c.scenario) {
    case Scenario::kExercise:
      s = score::generate_exercise(c.bpm, c.n_hits, c.drum, c.lead_in_s);
      break;
    case Scenario::kSequence:
      s = score::sequence_score(c.pattern, {{'c', score::DrumId::kHiHat}, {'d', score::DrumId::kSnare}},
                                c.interval_s, c.lead_in_s);
      break;
    case Scenario::kTwoDrum: {
      const auto bytes = score::read_file_bytes(c.midi);
      s = score::parse_smf(bytes, score::KitProfile::kTwoDrum);
      break;
    }
    case Scenario::kBimanualSong: {
      const auto bytes = score::read_file_bytes(c.midi);
      s = score::parse_smf(bytes, score::KitProfile::kFullKit);
      break;
    }
  }
  if (c.slowdown != 1.0) s = score::retime(s, c.slowdown);
  return s;
}

inline learn::Task build_task(const RunConfig& c) {
  validate_paths(c);
  learn::TaskConfig t = c.task;
  if (c.scenario == Scenario::kTwoDrum) t.world.layout = choreo::two_drum_layout();
  if (c.scenario == Scenario::kBimanualSong) make_bimanual(t);
  return learn::make_task(t, build_score(c));
}

}  // namespace dexdrum::cli
