// Copyright 2026 The lbcem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "core/scenario.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "core/errors.h"

namespace lbcem {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Reads one YAML mapping and remembers which keys were consumed so that
// leftovers can be reported by their full dotted path.
class Section {
 public:
  Section(YAML::Node node, std::string path)
      : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      throw ConfigError("'" + Label() + "' must be a mapping");
    }
  }

  bool Has(const std::string& key) const {
    return node_ && node_.IsMap() && node_[key] && !node_[key].IsNull();
  }

  std::string Path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  T Scalar(const std::string& key, T fallback) {
    used_.insert(key);
    if (!Has(key)) return fallback;
    return As<T>(node_[key], Path(key));
  }

  Eigen::Vector3d Vec3(const std::string& key, Eigen::Vector3d fallback) {
    used_.insert(key);
    if (!Has(key)) return fallback;
    return ToVec3(node_[key], Path(key));
  }

  // Scalar or length-n sequence.
  Eigen::VectorXd Vector(const std::string& key, Eigen::VectorXd fallback) {
    used_.insert(key);
    if (!Has(key)) return fallback;
    const YAML::Node n = node_[key];
    if (n.IsScalar()) {
      return Eigen::VectorXd::Constant(fallback.size(),
                                       As<double>(n, Path(key)));
    }
    if (!n.IsSequence() || n.size() != static_cast<size_t>(fallback.size())) {
      throw ConfigError("'" + Path(key) + "' must be a number or a list of " +
                        std::to_string(fallback.size()) + " numbers");
    }
    Eigen::VectorXd out(fallback.size());
    for (size_t i = 0; i < n.size(); ++i) {
      out(i) = As<double>(n[i], Path(key));
    }
    return out;
  }

  Section Child(const std::string& key) {
    used_.insert(key);
    return Section(Has(key) ? node_[key] : YAML::Node(), Path(key));
  }

  YAML::Node Raw(const std::string& key) {
    used_.insert(key);
    return Has(key) ? node_[key] : YAML::Node();
  }

  void Finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!used_.count(key)) {
        throw ConfigError("unknown key '" + Path(key) + "'");
      }
    }
  }

  template <typename T>
  static T As(const YAML::Node& n, const std::string& path) {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("'" + path + "' has an invalid value");
    }
  }

  static Eigen::Vector3d ToVec3(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence() || n.size() != 3) {
      throw ConfigError("'" + path + "' must be a list of 3 numbers");
    }
    return {As<double>(n[0], path), As<double>(n[1], path),
            As<double>(n[2], path)};
  }

 private:
  std::string Label() const { return path_.empty() ? "<root>" : path_; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

Eigen::Vector3d Vec3Or(Section& s, const std::string& key, double fallback) {
  const Eigen::VectorXd v =
      s.Vector(key, Eigen::VectorXd::Constant(3, fallback));
  return v;
}

ScenarioConfig Build(const YAML::Node& root_node) {
  ScenarioConfig cfg;
  Section root(root_node, "");
  cfg.name = root.Scalar<std::string>("name", cfg.name);
  cfg.duration = root.Scalar<double>("duration", cfg.duration);
  cfg.frequency = root.Scalar<double>("frequency", cfg.frequency);
  cfg.sensing_range = root.Scalar<double>("sensing_range", cfg.sensing_range);
  cfg.plant_substeps = root.Scalar<int>("plant_substeps", cfg.plant_substeps);
  cfg.seed = root.Scalar<std::uint64_t>("seed", cfg.seed);
  cfg.abort_on_collision =
      root.Scalar<bool>("abort_on_collision", cfg.abort_on_collision);

  {
    Section s = root.Child("controller");
    cfg.variant = ParseVariant(
        s.Scalar<std::string>("variant", ToString(cfg.variant)));
    s.Finish();
  }
  {
    Section s = root.Child("reference");
    const std::string type = s.Scalar<std::string>("type", "spiral");
    if (type != "spiral") {
      throw ConfigError("'reference.type' must be 'spiral', got '" + type +
                        "'");
    }
    cfg.reference.radius = s.Scalar<double>("radius", cfg.reference.radius);
    cfg.reference.angular_rate =
        s.Scalar<double>("angular_rate", cfg.reference.angular_rate);
    cfg.reference.climb_rate =
        s.Scalar<double>("climb_rate", cfg.reference.climb_rate);
    s.Finish();
  }
  {
    const YAML::Node list = root.Raw("obstacles");
    if (!list.IsNull() && !list.IsSequence()) {
      throw ConfigError("'obstacles' must be a list");
    }
    for (size_t i = 0; list.IsSequence() && i < list.size(); ++i) {
      Section s(list[i], "obstacles[" + std::to_string(i) + "]");
      if (!s.Has("center")) {
        throw ConfigError("missing key '" + s.Path("center") + "'");
      }
      Obstacle o;
      o.center = s.Vec3("center", o.center);
      o.radius = s.Scalar<double>("radius", o.radius);
      o.velocity = s.Vec3("velocity", o.velocity);
      s.Finish();
      cfg.obstacles.push_back(o);
    }
  }
  {
    Section s = root.Child("wind");
    if (s.Has("level") && s.Has("speed")) {
      throw ConfigError("'wind.level' and 'wind.speed' are exclusive");
    }
    if (s.Has("level")) {
      cfg.wind.label = s.Scalar<std::string>("level", "none");
      cfg.wind.speed = WindLevelSpeed(cfg.wind.label);
    } else {
      s.Scalar<std::string>("level", "");
      cfg.wind.speed = s.Scalar<double>("speed", cfg.wind.speed);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", cfg.wind.speed);
      cfg.wind.label = cfg.wind.speed == 0.0 ? "none" : buf;
    }
    cfg.wind.direction = s.Vec3("direction", cfg.wind.direction);
    if (s.Has("turbulence_intensity")) {
      cfg.wind.turbulence_intensity =
          s.Scalar<double>("turbulence_intensity", 0.0);
    } else {
      s.Scalar<double>("turbulence_intensity", 0.0);
    }
    cfg.wind.correlation_time =
        s.Scalar<double>("correlation_time", cfg.wind.correlation_time);
    s.Finish();
  }
  {
    Section s = root.Child("cem");
    cfg.cem.iterations = s.Scalar<int>("iterations", cfg.cem.iterations);
    cfg.cem.samples = s.Scalar<int>("samples", cfg.cem.samples);
    cfg.cem.elite = s.Scalar<int>("elite", cfg.cem.elite);
    cfg.cem.min_variance =
        s.Scalar<double>("min_variance", cfg.cem.min_variance);
    cfg.cem.smoothing = s.Scalar<double>("smoothing", cfg.cem.smoothing);
    const bool has_steps = s.Has("horizon_steps");
    const bool has_time = s.Has("horizon_time");
    cfg.cem.horizon = s.Scalar<int>("horizon_steps", cfg.cem.horizon);
    const double horizon_time = s.Scalar<double>("horizon_time", 0.0);
    if (has_steps && has_time) {
      throw ConfigError(
          "'cem.horizon_steps' and 'cem.horizon_time' are exclusive");
    }
    if (has_time) {
      if (!(horizon_time > 0.0)) {
        throw ConfigError("'cem.horizon_time' must be positive");
      }
      if (!(cfg.frequency > 0.0)) {
        throw ConfigError("'frequency' must be positive");
      }
      cfg.cem.horizon =
          static_cast<int>(std::lround(horizon_time * cfg.frequency));
    }
    s.Finish();
  }
  cfg.cem.dt = cfg.frequency > 0.0 ? 1.0 / cfg.frequency : 0.0;
  {
    Section s = root.Child("cost");
    const Eigen::Vector3d qp = Vec3Or(s, "q_position", 8.5);
    const Eigen::Vector3d qv = Vec3Or(s, "q_velocity", 1.5);
    cfg.cost.q.setZero();
    cfg.cost.q.diagonal() << qp, qv;
    const Eigen::VectorXd r =
        s.Vector("r_u", Eigen::VectorXd::Zero(4));
    cfg.cost.r_u = r.asDiagonal();
    cfg.cost.obstacle_weight =
        s.Scalar<double>("obstacle_weight", cfg.cost.obstacle_weight);
    cfg.cost.activation_radius =
        s.Scalar<double>("activation_radius", cfg.cost.activation_radius);
    cfg.cost.terminal_multiplier =
        s.Scalar<double>("terminal_multiplier", cfg.cost.terminal_multiplier);
    cfg.cost.min_distance =
        s.Scalar<double>("min_distance", cfg.cost.min_distance);
    s.Finish();
  }
  {
    Section s = root.Child("safety");
    safety::SafetySpec& sp = cfg.safety;
    sp.kappa = s.Scalar<double>("kappa", sp.kappa);
    sp.alpha = s.Scalar<double>("alpha", sp.alpha);
    sp.gamma = s.Scalar<double>("gamma", sp.gamma);
    sp.q_p = Vec3Or(s, "q_p", sp.q_p.x());
    sp.q_v = Vec3Or(s, "q_v", sp.q_v.x());
    sp.c_delta = s.Scalar<double>("c_delta", sp.c_delta);
    sp.lambda_eps = s.Scalar<double>("lambda_eps", sp.lambda_eps);
    sp.lambda_eta = s.Scalar<double>("lambda_eta", sp.lambda_eta);
    sp.margin = s.Scalar<double>("margin", sp.margin);
    sp.min_radius = s.Scalar<double>("min_radius", sp.min_radius);
    sp.tangent_radius =
        s.Scalar<double>("tangent_radius", sp.tangent_radius);
    sp.mode = safety::ParseEllipsoidMode(
        s.Scalar<std::string>("ellipsoid", safety::ToString(sp.mode)));
    sp.qp_max_iterations =
        s.Scalar<int>("qp_max_iterations", sp.qp_max_iterations);
    s.Finish();
  }
  {
    Section s = root.Child("quad");
    QuadParams& q = cfg.quad;
    q.mass = s.Scalar<double>("mass", q.mass);
    q.gravity = s.Scalar<double>("gravity", q.gravity);
    q.drag = Vec3Or(s, "drag", q.drag.x());
    q.thrust_max = s.Scalar<double>("thrust_max", q.thrust_max);
    q.rate_min = s.Vec3("rate_min", q.rate_min);
    q.rate_max = s.Vec3("rate_max", q.rate_max);
    s.Finish();
  }
  {
    Section s = root.Child("gp");
    cfg.gp.kernel.length_scales = Vec3Or(s, "length_scales", 1.0);
    cfg.gp.kernel.prior_variance =
        s.Scalar<double>("prior_variance", cfg.gp.kernel.prior_variance);
    cfg.gp.kernel.noise_variance =
        s.Scalar<double>("noise_variance", cfg.gp.kernel.noise_variance);
    cfg.gp.capacity = s.Scalar<int>("capacity", cfg.gp.capacity);
    cfg.gp.refresh_interval =
        s.Scalar<int>("refresh_interval", cfg.gp.refresh_interval);
    s.Finish();
  }
  {
    Section s = root.Child("metrics");
    cfg.avoid_threshold =
        s.Scalar<double>("avoid_threshold", cfg.avoid_threshold);
    cfg.coverage_warmup =
        s.Scalar<double>("coverage_warmup", cfg.coverage_warmup);
    s.Finish();
  }
  root.Finish();
  cfg.Validate();
  return cfg;
}

std::vector<std::string> SplitDotted(const std::string& key) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : key) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  for (const std::string& p : parts) {
    if (p.empty()) throw ConfigError("malformed override key '" + key + "'");
  }
  return parts;
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double Seconds(std::chrono::steady_clock::duration d) {
  return std::chrono::duration<double>(d).count();
}

}  // namespace

Variant ParseVariant(const std::string& name) {
  if (name == "CEMPC") return Variant::kCempc;
  if (name == "LB-CEMPC") return Variant::kLbCempc;
  if (name == "LB-CEMPC-CBF") return Variant::kLbCempcCbf;
  if (name == "LB-CEMPC-MI") return Variant::kLbCempcMi;
  throw ConfigError("unknown variant '" + name +
                    "' (expected CEMPC, LB-CEMPC, LB-CEMPC-CBF or "
                    "LB-CEMPC-MI)");
}

std::string ToString(Variant v) {
  switch (v) {
    case Variant::kCempc:
      return "CEMPC";
    case Variant::kLbCempc:
      return "LB-CEMPC";
    case Variant::kLbCempcCbf:
      return "LB-CEMPC-CBF";
    case Variant::kLbCempcMi:
      return "LB-CEMPC-MI";
  }
  return "?";
}

bool UsesGp(Variant v) { return v != Variant::kCempc; }
bool UsesBarrier(Variant v) {
  return v == Variant::kLbCempcCbf || v == Variant::kLbCempcMi;
}
bool UsesLyapunov(Variant v) { return v == Variant::kLbCempcMi; }

double WindLevelSpeed(const std::string& level) {
  static const std::map<std::string, double> kLevels = {
      {"none", 0.0}, {"wind-1", 5.0}, {"wind-2", 8.0},
      {"wind-3", 10.0}, {"wind-4", 12.0}};
  const auto it = kLevels.find(level);
  if (it == kLevels.end()) {
    throw ConfigError("unknown wind level '" + level +
                      "' (expected none or wind-1 .. wind-4)");
  }
  return it->second;
}

WindParams WindConfig::Resolve(std::uint64_t seed) const {
  WindParams p;
  const double n = direction.norm();
  if (speed != 0.0 && !(n > 0.0)) {
    throw ConfigError("wind.direction must be non-zero");
  }
  p.constant = speed == 0.0 ? Eigen::Vector3d::Zero()
                            : Eigen::Vector3d(speed * direction / n);
  const double sigma = turbulence_intensity.value_or(0.1 * std::abs(speed));
  p.turbulence_intensity = Eigen::Vector3d::Constant(sigma);
  p.correlation_time = correlation_time;
  p.seed = seed;
  p.Validate();
  return p;
}

int ScenarioConfig::steps() const {
  return static_cast<int>(std::lround(duration * frequency));
}

void ScenarioConfig::Validate() const {
  if (!(duration > 0.0)) throw ConfigError("'duration' must be positive");
  if (!(frequency > 0.0)) throw ConfigError("'frequency' must be positive");
  if (steps() < 1) throw ConfigError("'duration' is shorter than one step");
  if (!(sensing_range > 0.0))
    throw ConfigError("'sensing_range' must be positive");
  if (plant_substeps < 1)
    throw ConfigError("'plant_substeps' must be >= 1");
  if (obstacles.size() > 64)
    throw ConfigError("at most 64 obstacles are supported");
  for (size_t i = 0; i < obstacles.size(); ++i) {
    const Obstacle& o = obstacles[i];
    if (!(o.radius > 0.0) || !o.center.allFinite() || !o.velocity.allFinite())
      throw ConfigError("'obstacles[" + std::to_string(i) +
                        "]' needs a positive radius and finite vectors");
  }
  if (!(reference.radius >= 0.0) || !std::isfinite(reference.angular_rate) ||
      !std::isfinite(reference.climb_rate))
    throw ConfigError("'reference' parameters are invalid");
  if (!(wind.speed >= 0.0)) throw ConfigError("'wind.speed' must be >= 0");
  if (wind.turbulence_intensity && !(*wind.turbulence_intensity >= 0.0))
    throw ConfigError("'wind.turbulence_intensity' must be >= 0");
  if (!(wind.correlation_time > 0.0))
    throw ConfigError("'wind.correlation_time' must be positive");
  cem.Validate();
  if (std::abs(cem.dt - dt()) > 1e-12)
    throw ConfigError("cem dt must equal 1 / frequency");
  cost.Validate();
  safety.Validate();
  quad.Validate();
  gp.kernel.Validate();
  if (gp.kernel.dim() != 3)
    throw ConfigError("'gp.length_scales' must have 3 entries");
  if (gp.capacity < 1) throw ConfigError("'gp.capacity' must be >= 1");
  if (gp.refresh_interval < 1)
    throw ConfigError("'gp.refresh_interval' must be >= 1");
  if (!(avoid_threshold > 0.0))
    throw ConfigError("'metrics.avoid_threshold' must be positive");
  if (!(coverage_warmup >= 0.0))
    throw ConfigError("'metrics.coverage_warmup' must be >= 0");
}

struct ScenarioSource::Impl {
  YAML::Node root;
};

ScenarioSource::ScenarioSource() : impl_(std::make_unique<Impl>()) {
  impl_->root = YAML::Node(YAML::NodeType::Map);
}
ScenarioSource::~ScenarioSource() = default;
ScenarioSource::ScenarioSource(const ScenarioSource& other)
    : impl_(std::make_unique<Impl>()) {
  impl_->root = YAML::Clone(other.impl_->root);
}
ScenarioSource& ScenarioSource::operator=(const ScenarioSource& other) {
  if (this != &other) impl_->root = YAML::Clone(other.impl_->root);
  return *this;
}

ScenarioSource ScenarioSource::FromString(const std::string& text) {
  ScenarioSource src;
  try {
    YAML::Node n = YAML::Load(text);
    if (n.IsNull()) n = YAML::Node(YAML::NodeType::Map);
    if (!n.IsMap()) throw ConfigError("scenario config must be a mapping");
    src.impl_->root = n;
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config parse error at line " +
                      std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  return src;
}

ScenarioSource ScenarioSource::FromFile(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open config '" + path + "'");
  std::string text;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, n);
  std::fclose(f);
  return FromString(text);
}

void ScenarioSource::Set(const std::string& key, const std::string& value) {
  std::string path = key;
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::ParserException&) {
    throw ConfigError("cannot parse value for '" + key + "'");
  }
  YAML::Node& root = impl_->root;
  if (key == "variant") {
    path = "controller.variant";
  } else if (key == "seed") {
    path = "seed";
  } else if (key == "horizon") {
    path = "cem.horizon_time";
    if (root["cem"] && root["cem"].IsMap()) root["cem"].remove("horizon_steps");
  } else if (key == "wind") {
    if (!root["wind"] || !root["wind"].IsMap()) {
      root["wind"] = YAML::Node(YAML::NodeType::Map);
    }
    const bool numeric = parsed.IsScalar() && [&] {
      try {
        parsed.as<double>();
        return true;
      } catch (const YAML::Exception&) {
        return false;
      }
    }();
    if (numeric) {
      root["wind"].remove("level");
      path = "wind.speed";
    } else {
      root["wind"].remove("speed");
      path = "wind.level";
    }
  }
  const std::vector<std::string> parts = SplitDotted(path);
  YAML::Node cur = root;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = cur[parts[i]];
    if (!next || !next.IsMap()) {
      cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next = cur[parts[i]];
    }
    cur.reset(next);
  }
  cur[parts.back()] = parsed;
}

ScenarioConfig ScenarioSource::Resolve() const { return Build(impl_->root); }

std::uint64_t WindSeed(std::uint64_t seed) { return DeriveSeed(seed, 2); }
std::uint64_t CemSeed(std::uint64_t seed) { return DeriveSeed(seed, 1); }

RunMetrics ComputeMetrics(std::span<const StepRecord> steps,
                          int obstacle_count, double avoid_threshold,
                          double coverage_warmup, double c_delta) {
  RunMetrics m;
  m.steps = static_cast<int>(steps.size());
  m.avoid_times.assign(obstacle_count, kNan);
  m.min_clearance = std::numeric_limits<double>::infinity();
  if (steps.empty()) return m;
  double sum_sq = 0.0;
  m.min_barrier = std::numeric_limits<double>::infinity();
  Eigen::Vector3d covered = Eigen::Vector3d::Zero();
  int coverage_steps = 0;
  for (const StepRecord& s : steps) {
    const double err = (s.x.p - s.desired.p).norm();
    sum_sq += err * err;
    m.max_error = std::max(m.max_error, err);
    m.min_barrier = std::min(m.min_barrier, s.h);
    if (err > avoid_threshold) {
      for (int i = 0; i < obstacle_count; ++i) {
        if (std::isnan(m.avoid_times[i]) && ((s.detected >> i) & 1u)) {
          m.avoid_times[i] = s.t;
        }
      }
    }
    if (s.clearance < 0.0) ++m.penetrations;
    m.min_clearance = std::min(m.min_clearance, s.clearance);
    if (s.intervention) ++m.interventions;
    if (s.gp_updated) ++m.gp_updates;
    if (s.gp_predicted && s.t >= coverage_warmup - 1e-12) {
      ++coverage_steps;
      for (int a = 0; a < 3; ++a) {
        const double band = c_delta * s.gp_stddev(a);
        if (std::abs(s.disturbance(a) - s.gp_mean(a)) <= band) covered(a) += 1;
      }
    }
  }
  m.rms_error = std::sqrt(sum_sq / static_cast<double>(steps.size()));
  if (coverage_steps > 0) m.gp_coverage = covered / coverage_steps;
  return m;
}

RunResult RunScenario(const ScenarioConfig& config) {
  config.Validate();
  using Clock = std::chrono::steady_clock;
  RunResult result;
  result.config = config;
  const double dt = config.dt();
  const int steps = config.steps();
  const int horizon = config.cem.horizon;
  const bool use_gp = UsesGp(config.variant);
  const bool use_barrier = UsesBarrier(config.variant);
  const bool use_lyapunov = UsesLyapunov(config.variant);
  result.steps.reserve(steps);
  result.timing.reserve(steps);

  State x;
  x.p = config.reference.At(0.0).p;
  WindModel wind(config.wind.Resolve(WindSeed(config.seed)));
  std::mt19937_64 rng(CemSeed(config.seed));
  const cem::ControlBounds bounds = cem::ControlBounds::From(config.quad);
  cem::SamplingDistribution dist = cem::SamplingDistribution::Cold(horizon, bounds);
  std::optional<igp::DisturbanceModel> gp;
  if (use_gp) {
    gp.emplace(config.gp.kernel, config.gp.capacity,
               config.gp.refresh_interval);
  }

  cem::PredictionContext ctx;
  ctx.quad = config.quad;
  ctx.cost = config.cost;
  ctx.dt = dt;
  ctx.references.resize(horizon + 1);

  try {
    for (int k = 0; k < steps; ++k) {
      const double t = k * dt;
      StepRecord rec;
      StepTiming timing;
      rec.t = t;
      rec.x = x;
      rec.desired = config.reference.At(t);

      const std::vector<DetectedObstacle> detected =
          Detect(x.p, config.obstacles, t, config.sensing_range);
      for (const DetectedObstacle& d : detected) {
        rec.detected |= std::uint64_t{1} << d.index;
      }
      rec.clearance = std::numeric_limits<double>::infinity();
      for (const Obstacle& o : config.obstacles) {
        rec.clearance = std::min(rec.clearance, o.SurfaceDistance(x.p, t));
      }
      if (rec.clearance < 0.0 && config.abort_on_collision) {
        result.steps.push_back(rec);
        result.timing.push_back(timing);
        result.status = RunStatus::kSafety;
        result.error = "vehicle entered an obstacle at t=" + std::to_string(t);
        break;
      }

      safety::DisturbanceEstimate estimate;
      igp::MeanSnapshot snapshot;
      if (use_gp) {
        const auto t0 = Clock::now();
        const std::array<igp::Prediction, 3> pred = gp->Predict(x.v);
        for (int a = 0; a < 3; ++a) {
          if (pred[a].variance < 0.0) {
            throw NumericalError("negative GP variance");
          }
          estimate.mean(a) = pred[a].mean;
          estimate.stddev(a) = std::sqrt(pred[a].variance);
        }
        snapshot = gp->Snapshot();
        timing.gp_predict_s = Seconds(Clock::now() - t0);
        rec.gp_predicted = true;
        rec.gp_mean = estimate.mean;
        rec.gp_stddev = estimate.stddev;
      }

      ctx.x0 = x;
      for (int j = 0; j <= horizon; ++j) {
        ctx.references[j] = config.reference.At(t + j * dt);
      }
      ctx.obstacles = detected;
      ctx.disturbance = use_gp ? &snapshot : nullptr;
      {
        const auto t0 = Clock::now();
        cem::MpcStepResult mpc = cem::MpcStep(ctx, dist, config.cem, bounds, rng);
        timing.mpc_s = Seconds(Clock::now() - t0);
        dist = std::move(mpc.next);
        rec.u_mpc = mpc.u_mpc;
        rec.cem_iterations = mpc.solve.iterations;
        rec.cem_best_cost = mpc.solve.best_cost;
      }

      const safety::SafeRegion region = safety::SafeEllipsoid(
          x.p, detected, config.sensing_range, config.safety);
      rec.inside_obstacle = region.inside_obstacle;
      rec.h = safety::BarrierValue(x.p, region.ellipsoid);
      rec.h_e = safety::HigherOrderBarrier(x, region.ellipsoid,
                                           config.safety.gamma);
      rec.lyapunov = safety::Lyapunov(x, rec.desired, config.safety);
      rec.u_applied = rec.u_mpc;
      if (use_barrier) {
        const auto t0 = Clock::now();
        const safety::FilterResult f =
            safety::MiFilter(x, rec.u_mpc, region.ellipsoid, rec.desired,
                             estimate, config.safety, config.quad,
                             use_lyapunov);
        timing.filter_s = Seconds(Clock::now() - t0);
        rec.filter_active = true;
        rec.u_applied = f.u;
        rec.intervention = f.intervened;
        rec.eps = f.eps;
        rec.eta = f.eta;
        rec.qp_iterations = f.qp_iterations;
      }

      const Eigen::Vector3d w = wind.Step(dt);
      rec.wind = w;
      rec.disturbance = DragForce(x.v, w, config.quad) / config.quad.mass;
      State next = x;
      const double sub_dt = dt / config.plant_substeps;
      for (int s = 0; s < config.plant_substeps; ++s) {
        next = Step(next, rec.u_applied, w, config.quad, sub_dt);
      }
      if (!next.AllFinite()) throw NumericalError("plant state is not finite");

      if (use_gp) {
        const auto t0 = Clock::now();
        const State nominal = NominalStep(x, rec.u_applied,
                                          Eigen::Vector3d::Zero(), config.quad,
                                          dt);
        const Eigen::Vector3d target = (next.v - nominal.v) / dt;
        gp->Update(x.v, target);
        timing.gp_update_s = Seconds(Clock::now() - t0);
        rec.gp_updated = true;
        result.dataset.push_back({t, x.v, target});
      }

      result.steps.push_back(rec);
      result.timing.push_back(timing);
      x = next;
    }
  } catch (const NumericalError& e) {
    result.status = RunStatus::kNumerical;
    result.error = e.what();
  }

  result.metrics = ComputeMetrics(
      result.steps, static_cast<int>(config.obstacles.size()),
      config.avoid_threshold, config.coverage_warmup, config.safety.c_delta);
  return result;
}

namespace {

void Put(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  out << buf;
}

void PutVec(std::ostream& out, const Eigen::Ref<const Eigen::VectorXd>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out << ',';
    Put(out, v(i));
  }
}

}  // namespace

void WriteStepCsv(const RunResult& run, std::ostream& out) {
  out << "t,px,py,pz,vx,vy,vz,roll,pitch,yaw,"
         "u_mpc_thrust,u_mpc_wx,u_mpc_wy,u_mpc_wz,"
         "u_thrust,u_wx,u_wy,u_wz,"
         "pd_x,pd_y,pd_z,vd_x,vd_y,vd_z,error,h,h_e,V,"
         "filter,intervention,eps,eta,qp_iters,gp_predict,gp_update,"
         "gp_mu_x,gp_mu_y,gp_mu_z,gp_sigma_x,gp_sigma_y,gp_sigma_z,"
         "wind_x,wind_y,wind_z,d_x,d_y,d_z,detected,clearance,"
         "cem_iters,cem_cost\n";
  for (const StepRecord& s : run.steps) {
    Put(out, s.t);
    PutVec(out, s.x.p);
    PutVec(out, s.x.v);
    PutVec(out, s.x.att);
    PutVec(out, s.u_mpc.AsVector());
    PutVec(out, s.u_applied.AsVector());
    PutVec(out, s.desired.p);
    PutVec(out, s.desired.v);
    out << ',';
    Put(out, (s.x.p - s.desired.p).norm());
    out << ',';
    Put(out, s.h);
    out << ',';
    Put(out, s.h_e);
    out << ',';
    Put(out, s.lyapunov);
    out << ',' << (s.filter_active ? 1 : 0) << ',' << (s.intervention ? 1 : 0)
        << ',';
    Put(out, s.eps);
    out << ',';
    Put(out, s.eta);
    out << ',' << s.qp_iterations << ',' << (s.gp_predicted ? 1 : 0) << ','
        << (s.gp_updated ? 1 : 0);
    PutVec(out, s.gp_mean);
    PutVec(out, s.gp_stddev);
    PutVec(out, s.wind);
    PutVec(out, s.disturbance);
    out << ',' << s.detected << ',';
    Put(out, s.clearance);
    out << ',' << s.cem_iterations << ',';
    Put(out, s.cem_best_cost);
    out << '\n';
  }
}

void WriteTimingCsv(const RunResult& run, std::ostream& out) {
  out << "t,gp_predict_s,gp_update_s,mpc_s,filter_s,gp_size\n";
  for (size_t i = 0; i < run.timing.size(); ++i) {
    const StepTiming& s = run.timing[i];
    Put(out, run.steps[i].t);
    for (double v : {s.gp_predict_s, s.gp_update_s, s.mpc_s, s.filter_s}) {
      out << ',';
      Put(out, v);
    }
    const int size = run.steps[i].gp_updated
                         ? std::min<int>(static_cast<int>(i) + 1,
                                         run.config.gp.capacity)
                         : 0;
    out << ',' << size << '\n';
  }
}

void WriteGpDatasetCsv(const RunResult& run, std::ostream& out) {
  out << "t,vx,vy,vz,y_axis0,y_axis1,y_axis2\n";
  for (const GpSample& s : run.dataset) {
    Put(out, s.t);
    PutVec(out, s.input);
    PutVec(out, s.target);
    out << '\n';
  }
}

std::string SummaryJson(const RunResult& run) {
  const ScenarioConfig& c = run.config;
  const RunMetrics& m = run.metrics;
  nlohmann::ordered_json j;
  j["scenario"] = c.name;
  j["variant"] = ToString(c.variant);
  j["wind"] = c.wind.label;
  j["wind_speed"] = c.wind.speed;
  j["horizon"] = std::round(c.horizon_time() * 1e6) / 1e6;
  j["horizon_steps"] = c.cem.horizon;
  j["seed"] = c.seed;
  j["obstacle_weight"] = c.cost.obstacle_weight;
  j["status"] = ToString(run.status);
  j["error"] = run.error;
  j["steps"] = m.steps;
  j["rms_error"] = m.rms_error;
  j["max_error"] = m.max_error;
  j["min_barrier"] = m.min_barrier;
  nlohmann::json avoid = nlohmann::json::array();
  for (double a : m.avoid_times) {
    avoid.push_back(std::isnan(a) ? nlohmann::json(nullptr)
                                  : nlohmann::json(a));
  }
  j["avoid_times"] = avoid;
  j["penetrations"] = m.penetrations;
  j["min_clearance"] = std::isfinite(m.min_clearance)
                           ? nlohmann::json(m.min_clearance)
                           : nlohmann::json(nullptr);
  j["interventions"] = m.interventions;
  j["gp_updates"] = m.gp_updates;
  nlohmann::json coverage = nlohmann::json::array();
  for (int a = 0; a < 3; ++a) {
    coverage.push_back(std::isnan(m.gp_coverage(a))
                           ? nlohmann::json(nullptr)
                           : nlohmann::json(m.gp_coverage(a)));
  }
  j["gp_coverage"] = coverage;
  return j.dump();
}

std::string ToString(RunStatus s) {
  switch (s) {
    case RunStatus::kOk:
      return "ok";
    case RunStatus::kNumerical:
      return "numerical";
    case RunStatus::kSafety:
      return "safety";
  }
  return "?";
}

}  // namespace lbcem
