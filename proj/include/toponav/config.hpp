#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toponav/errors.hpp"
#include "toponav/mdn.hpp"
#include "toponav/sim.hpp"
#include "toponav/util.hpp"
#include "toponav/worldgen.hpp"

namespace toponav {

enum class Experiment { calibration, localization, confusion, matching, drive };

inline Experiment parse_experiment(const std::string& s) {
  if (s == "calibration") return Experiment::calibration;
  if (s == "localization") return Experiment::localization;
  if (s == "confusion") return Experiment::confusion;
  if (s == "matching") return Experiment::matching;
  if (s == "drive") return Experiment::drive;
  throw ConfigError("unknown experiment '" + s +
                    "' (expected one of calibration, localization, confusion, "
                    "matching, drive)");
}

inline std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::calibration: return "calibration";
    case Experiment::localization: return "localization";
    case Experiment::confusion: return "confusion";
    case Experiment::matching: return "matching";
    case Experiment::drive: return "drive";
  }
  throw std::invalid_argument("bad experiment enum");
}

// Everything an experiment run needs, in one value. Defaults live on the
// member initializers of this struct and the structs it embeds; the JSON
// form may omit anything except "experiment" and "world.kind".
struct ExperimentConfig {
  Experiment experiment = Experiment::calibration;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string checkpoint;  // path to a trained model; empty = train in-run
  WorldSpec world;
  SimConfig sim;
  ObsNoise obs_noise;
  ModelConfig model;
  TrainConfig train;
  int train_samples = 10000;  // curriculum size when training in-run
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                const std::vector<std::string>& known,
                                const std::string& prefix) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const auto& k : known)
      if (item.key() == k) { ok = true; break; }
    if (!ok)
      throw ConfigError("unknown config key '" + prefix + item.key() + "'");
  }
}

inline double get_num(const nlohmann::json& obj, const char* key,
                      const std::string& prefix, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number())
    throw ConfigError("config key '" + prefix + key + "' must be a number");
  return v.get<double>();
}

inline int get_int(const nlohmann::json& obj, const char* key,
                   const std::string& prefix, int fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer())
    throw ConfigError("config key '" + prefix + key + "' must be an integer");
  return v.get<int>();
}

inline std::uint64_t get_seed(const nlohmann::json& obj, const char* key,
                              const std::string& prefix,
                              std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer())
    throw ConfigError("config key '" + prefix + key +
                      "' must be a non-negative integer");
  if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)
    throw ConfigError("config key '" + prefix + key +
                      "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::string get_str(const nlohmann::json& obj, const char* key,
                           const std::string& prefix,
                           const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string())
    throw ConfigError("config key '" + prefix + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

// Range checks for a fully assembled config. Collects every violation so a
// bad file is fixed in one pass, then throws a single ConfigError naming all
// offending fields.
inline void validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> bad;
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) bad.push_back(msg);
  };

  require(cfg.world.extents > 0.0, "world.extents must be > 0");
  require(cfg.world.block_size > 0.0, "world.block_size must be > 0");

  require(cfg.sim.speed > 0.0, "sim.speed must be > 0");
  require(cfg.sim.dt > 0.0, "sim.dt must be > 0");
  require(cfg.sim.lookahead > 0.0, "sim.lookahead must be > 0");
  require(cfg.sim.kappa_max > 0.0, "sim.kappa_max must be > 0");
  require(cfg.sim.corridor > 0.0, "sim.corridor must be > 0");
  require(cfg.sim.gps_sigma_xy >= 0.0, "sim.gps_sigma_xy must be >= 0");
  require(cfg.sim.gps_sigma_alpha >= 0.0, "sim.gps_sigma_alpha must be >= 0");
  require(cfg.obs_noise.sigma_lat >= 0.0, "sim.obs_sigma_lat must be >= 0");
  require(cfg.obs_noise.sigma_head >= 0.0, "sim.obs_sigma_head must be >= 0");
  require(cfg.obs_noise.dropout >= 0.0 && cfg.obs_noise.dropout < 1.0,
          "sim.obs_dropout must be in [0, 1)");

  const ModelConfig& m = cfg.model;
  require(m.obs_size >= 8 && m.obs_size % 8 == 0,
          "model.obs_size must be a positive multiple of 8");
  require(m.map_size >= 8 && m.map_size % 8 == 0,
          "model.map_size must be a positive multiple of 8");
  require(m.obs_resolution > 0.0, "model.obs_resolution must be > 0");
  require(m.map_resolution > 0.0, "model.map_resolution must be > 0");
  require(m.K >= 1, "model.K must be >= 1");
  require(m.kappa_max > 0.0, "model.kappa_max must be > 0");
  require(m.sigma_min > 0.0, "model.sigma_min must be > 0");
  require(m.sigma_max > m.sigma_min,
          "model.sigma_max must be > model.sigma_min");
  require(m.lambda_phi >= 0.0, "model.lambda_phi must be >= 0");
  require(m.lambda_sigma >= 0.0, "model.lambda_sigma must be >= 0");
  require(m.phi_eps > 0.0, "model.phi_eps must be > 0");
  require(m.obs_c1 >= 1, "model.obs_c1 must be >= 1");
  require(m.obs_c2 >= 1, "model.obs_c2 must be >= 1");
  require(m.map_c >= 1, "model.map_c must be >= 1");
  require(m.route_c >= 1, "model.route_c must be >= 1");
  require(m.trunk1 >= 1, "model.trunk1 must be >= 1");
  require(m.trunk2 >= 1, "model.trunk2 must be >= 1");
  require(m.det_hidden >= 1, "model.det_hidden must be >= 1");

  const TrainConfig& t = cfg.train;
  require(t.learning_rate > 0.0, "train.learning_rate must be > 0");
  require(t.lr_decay > 0.0 && t.lr_decay <= 1.0,
          "train.lr_decay must be in (0, 1]");
  require(t.momentum >= 0.0 && t.momentum < 1.0,
          "train.momentum must be in [0, 1)");
  require(t.epochs >= 0, "train.epochs must be >= 0");
  require(t.batch_size >= 1, "train.batch_size must be >= 1");
  require(cfg.train_samples >= 1, "train.samples must be >= 1");

  if (!bad.empty()) {
    std::string msg = "invalid config: " + bad[0];
    for (std::size_t i = 1; i < bad.size(); ++i) msg += "; " + bad[i];
    throw ConfigError(msg);
  }
}

// Strict JSON reader. Unknown keys are errors (named with their dotted
// path), wrong types are errors, and only "experiment" and "world.kind"
// are required; every other field falls back to its struct default.
inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  detail::reject_unknown_keys(
      j,
      {"experiment", "seed", "output_dir", "checkpoint", "world", "sim",
       "model", "train"},
      "");

  ExperimentConfig cfg;

  if (!j.contains("experiment"))
    throw ConfigError("config key 'experiment' is required");
  if (!j.at("experiment").is_string())
    throw ConfigError("config key 'experiment' must be a string");
  cfg.experiment = parse_experiment(j.at("experiment").get<std::string>());

  cfg.seed = detail::get_seed(j, "seed", "", cfg.seed);
  cfg.output_dir = detail::get_str(j, "output_dir", "", cfg.output_dir);
  cfg.checkpoint = detail::get_str(j, "checkpoint", "", cfg.checkpoint);

  if (!j.contains("world"))
    throw ConfigError("config key 'world' is required");
  {
    const auto& w = j.at("world");
    if (!w.is_object()) throw ConfigError("config key 'world' must be an object");
    detail::reject_unknown_keys(w, {"kind", "extents", "block_size", "seed"},
                                "world.");
    if (!w.contains("kind"))
      throw ConfigError("config key 'world.kind' is required");
    if (!w.at("kind").is_string())
      throw ConfigError("config key 'world.kind' must be a string");
    cfg.world.kind = parse_world_kind(w.at("kind").get<std::string>());
    cfg.world.extents =
        detail::get_num(w, "extents", "world.", cfg.world.extents);
    cfg.world.block_size =
        detail::get_num(w, "block_size", "world.", cfg.world.block_size);
    cfg.world.seed = detail::get_seed(w, "seed", "world.", cfg.world.seed);
  }

  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    if (!s.is_object()) throw ConfigError("config key 'sim' must be an object");
    detail::reject_unknown_keys(
        s,
        {"speed", "dt", "lookahead", "kappa_max", "corridor", "gps_sigma_xy",
         "gps_sigma_alpha", "obs_sigma_lat", "obs_sigma_head", "obs_dropout"},
        "sim.");
    cfg.sim.speed = detail::get_num(s, "speed", "sim.", cfg.sim.speed);
    cfg.sim.dt = detail::get_num(s, "dt", "sim.", cfg.sim.dt);
    cfg.sim.lookahead =
        detail::get_num(s, "lookahead", "sim.", cfg.sim.lookahead);
    cfg.sim.kappa_max =
        detail::get_num(s, "kappa_max", "sim.", cfg.sim.kappa_max);
    cfg.sim.corridor = detail::get_num(s, "corridor", "sim.", cfg.sim.corridor);
    cfg.sim.gps_sigma_xy =
        detail::get_num(s, "gps_sigma_xy", "sim.", cfg.sim.gps_sigma_xy);
    cfg.sim.gps_sigma_alpha =
        detail::get_num(s, "gps_sigma_alpha", "sim.", cfg.sim.gps_sigma_alpha);
    cfg.obs_noise.sigma_lat =
        detail::get_num(s, "obs_sigma_lat", "sim.", cfg.obs_noise.sigma_lat);
    cfg.obs_noise.sigma_head =
        detail::get_num(s, "obs_sigma_head", "sim.", cfg.obs_noise.sigma_head);
    cfg.obs_noise.dropout =
        detail::get_num(s, "obs_dropout", "sim.", cfg.obs_noise.dropout);
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (!m.is_object())
      throw ConfigError("config key 'model' must be an object");
    detail::reject_unknown_keys(
        m,
        {"obs_size", "obs_resolution", "map_size", "map_resolution", "K",
         "kappa_max", "sigma_min", "sigma_max", "sigma_bias",
         "log_sigma_center", "lambda_phi", "lambda_sigma", "phi_eps", "obs_c1",
         "obs_c2", "map_c", "route_c", "trunk1", "trunk2", "det_hidden"},
        "model.");
    ModelConfig& mc = cfg.model;
    mc.obs_size = detail::get_int(m, "obs_size", "model.", mc.obs_size);
    mc.obs_resolution =
        detail::get_num(m, "obs_resolution", "model.", mc.obs_resolution);
    mc.map_size = detail::get_int(m, "map_size", "model.", mc.map_size);
    mc.map_resolution =
        detail::get_num(m, "map_resolution", "model.", mc.map_resolution);
    mc.K = detail::get_int(m, "K", "model.", mc.K);
    mc.kappa_max = detail::get_num(m, "kappa_max", "model.", mc.kappa_max);
    mc.sigma_min = detail::get_num(m, "sigma_min", "model.", mc.sigma_min);
    mc.sigma_max = detail::get_num(m, "sigma_max", "model.", mc.sigma_max);
    mc.sigma_bias = detail::get_num(m, "sigma_bias", "model.", mc.sigma_bias);
    mc.log_sigma_center = detail::get_num(m, "log_sigma_center", "model.",
                                          mc.log_sigma_center);
    mc.lambda_phi = detail::get_num(m, "lambda_phi", "model.", mc.lambda_phi);
    mc.lambda_sigma =
        detail::get_num(m, "lambda_sigma", "model.", mc.lambda_sigma);
    mc.phi_eps = detail::get_num(m, "phi_eps", "model.", mc.phi_eps);
    mc.obs_c1 = detail::get_int(m, "obs_c1", "model.", mc.obs_c1);
    mc.obs_c2 = detail::get_int(m, "obs_c2", "model.", mc.obs_c2);
    mc.map_c = detail::get_int(m, "map_c", "model.", mc.map_c);
    mc.route_c = detail::get_int(m, "route_c", "model.", mc.route_c);
    mc.trunk1 = detail::get_int(m, "trunk1", "model.", mc.trunk1);
    mc.trunk2 = detail::get_int(m, "trunk2", "model.", mc.trunk2);
    mc.det_hidden = detail::get_int(m, "det_hidden", "model.", mc.det_hidden);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (!t.is_object())
      throw ConfigError("config key 'train' must be an object");
    detail::reject_unknown_keys(t,
                                {"learning_rate", "lr_decay", "momentum",
                                 "grad_clip", "epochs", "batch_size", "seed",
                                 "samples"},
                                "train.");
    TrainConfig& tc = cfg.train;
    tc.learning_rate =
        detail::get_num(t, "learning_rate", "train.", tc.learning_rate);
    tc.lr_decay = detail::get_num(t, "lr_decay", "train.", tc.lr_decay);
    tc.momentum = detail::get_num(t, "momentum", "train.", tc.momentum);
    tc.grad_clip = detail::get_num(t, "grad_clip", "train.", tc.grad_clip);
    tc.epochs = detail::get_int(t, "epochs", "train.", tc.epochs);
    tc.batch_size = detail::get_int(t, "batch_size", "train.", tc.batch_size);
    tc.seed = detail::get_seed(t, "seed", "train.", tc.seed);
    cfg.train_samples =
        detail::get_int(t, "samples", "train.", cfg.train_samples);
  }

  validate_config(cfg);
  return cfg;
}

// Full canonical form: every field spelled out, keys sorted (nlohmann
// objects iterate alphabetically), compact separators. parse(serialize(c))
// reproduces c exactly, and equal configs serialize to equal bytes.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = experiment_name(cfg.experiment);
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["checkpoint"] = cfg.checkpoint;
  j["world"] = {{"kind", world_kind_name(cfg.world.kind)},
                {"extents", cfg.world.extents},
                {"block_size", cfg.world.block_size},
                {"seed", cfg.world.seed}};
  j["sim"] = {{"speed", cfg.sim.speed},
              {"dt", cfg.sim.dt},
              {"lookahead", cfg.sim.lookahead},
              {"kappa_max", cfg.sim.kappa_max},
              {"corridor", cfg.sim.corridor},
              {"gps_sigma_xy", cfg.sim.gps_sigma_xy},
              {"gps_sigma_alpha", cfg.sim.gps_sigma_alpha},
              {"obs_sigma_lat", cfg.obs_noise.sigma_lat},
              {"obs_sigma_head", cfg.obs_noise.sigma_head},
              {"obs_dropout", cfg.obs_noise.dropout}};
  j["model"] = {{"obs_size", cfg.model.obs_size},
                {"obs_resolution", cfg.model.obs_resolution},
                {"map_size", cfg.model.map_size},
                {"map_resolution", cfg.model.map_resolution},
                {"K", cfg.model.K},
                {"kappa_max", cfg.model.kappa_max},
                {"sigma_min", cfg.model.sigma_min},
                {"sigma_max", cfg.model.sigma_max},
                {"sigma_bias", cfg.model.sigma_bias},
                {"log_sigma_center", cfg.model.log_sigma_center},
                {"lambda_phi", cfg.model.lambda_phi},
                {"lambda_sigma", cfg.model.lambda_sigma},
                {"phi_eps", cfg.model.phi_eps},
                {"obs_c1", cfg.model.obs_c1},
                {"obs_c2", cfg.model.obs_c2},
                {"map_c", cfg.model.map_c},
                {"route_c", cfg.model.route_c},
                {"trunk1", cfg.model.trunk1},
                {"trunk2", cfg.model.trunk2},
                {"det_hidden", cfg.model.det_hidden}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"lr_decay", cfg.train.lr_decay},
                {"momentum", cfg.train.momentum},
                {"grad_clip", cfg.train.grad_clip},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"seed", cfg.train.seed},
                {"samples", cfg.train_samples}};
  return j.dump(2) + "\n";
}

// FNV-1a over the canonical serialization with output_dir blanked: moving
// the artifacts directory never changes the hash, any semantic field does.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.output_dir.clear();
  return fnv1a64(serialize_config(c));
}

}  // namespace toponav
