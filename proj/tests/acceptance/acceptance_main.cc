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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Criteria can be selected by number on
// the command line (e.g. `acceptance 1 4 10`).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <climits>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "core/cem.h"
#include "core/dynamics.h"
#include "core/errors.h"
#include "core/igp.h"
#include "core/qp.h"
#include "core/safety.h"
#include "core/scenario.h"
#include "testing/generators.h"

namespace lbcem {
namespace {

using Clock = std::chrono::steady_clock;
using testing::Gen;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string Format(const char* fmt, ...) {
  char buf[1024];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

ScenarioSource Load(const std::string& name) {
  return ScenarioSource::FromFile(std::string(LBCEM_CONFIG_DIR) + "/" + name +
                                  ".yaml");
}

// Runs every config, spreading them over the available cores.
std::vector<RunResult> RunAll(const std::vector<ScenarioConfig>& configs) {
  std::vector<RunResult> out(configs.size());
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < std::min<size_t>(workers, configs.size()); ++w) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < configs.size(); i = next++) {
        out[i] = RunScenario(configs[i]);
      }
    });
  }
  for (std::thread& t : pool) t.join();
  return out;
}

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;  // sample
};

Stats Describe(const std::vector<double>& v) {
  Stats s;
  for (double x : v) s.mean += x;
  s.mean /= v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// 1. Incremental GP against a dense oracle.

struct DenseGp {
  igp::KernelParams params;
  int capacity;
  std::deque<std::pair<Eigen::VectorXd, double>> data;

  double K(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    const Eigen::ArrayXd d = (a - b).array() / params.length_scales.array();
    return params.prior_variance * std::exp(-0.5 * d.square().sum());
  }
  void Update(const Eigen::VectorXd& x, double y) {
    if (static_cast<int>(data.size()) == capacity) data.pop_front();
    data.emplace_back(x, y);
  }
  Eigen::MatrixXd Gram() const {
    const int n = static_cast<int>(data.size());
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) g(i, j) = K(data[i].first, data[j].first);
    }
    g.diagonal().array() += params.noise_variance;
    return g;
  }
  igp::Prediction Predict(const Eigen::VectorXd& x) const {
    const int n = static_cast<int>(data.size());
    Eigen::VectorXd k(n), y(n);
    for (int i = 0; i < n; ++i) {
      k(i) = K(data[i].first, x);
      y(i) = data[i].second;
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(Gram());
    return {k.dot(lu.solve(y)), params.prior_variance - k.dot(lu.solve(k))};
  }
};

Outcome CheckGpOracle() {
  const auto start = Clock::now();
  double worst_inverse = 0.0, worst_prediction = 0.0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Gen gen(1000 + seed);
    igp::KernelParams params;
    params.length_scales = gen.Vector(3, 0.5, 2.0);
    params.prior_variance = gen.Uniform(0.5, 2.0);
    params.noise_variance = gen.Uniform(0.01, 0.2);
    igp::IncrementalGp gp(params, 20);
    DenseGp oracle{params, 20, {}};
    const int updates = gen.Int(1, 60);
    for (int u = 0; u < updates; ++u) {
      const Eigen::VectorXd x = gen.Vector(3, -2.0, 2.0);
      const double y = gen.Uniform(-3.0, 3.0);
      if (gp.full()) {
        gp.ReplacePoint(x, y);
      } else {
        gp.AddPoint(x, y);
      }
      oracle.Update(x, y);
      const Eigen::MatrixXd inverse =
          oracle.Gram().fullPivLu().inverse();
      worst_inverse =
          std::max(worst_inverse, (gp.inverse_gram() - inverse).norm());
      for (int q = 0; q < 3; ++q) {
        const Eigen::VectorXd xq = gen.Vector(3, -2.5, 2.5);
        const igp::Prediction a = gp.Predict(xq);
        const igp::Prediction b = oracle.Predict(xq);
        worst_prediction = std::max({worst_prediction, std::abs(a.mean - b.mean),
                                     std::abs(a.variance - b.variance)});
      }
    }
  }
  const double elapsed = Seconds(start);
  Outcome o;
  o.pass = worst_inverse < 1e-8 && worst_prediction < 1e-10 && elapsed < 10.0;
  o.detail = Format(
      "500 sequences, max inverse err %.2e (<1e-8), max prediction err %.2e "
      "(<1e-10), %.2f s (<10 s)",
      worst_inverse, worst_prediction, elapsed);
  return o;
}

// ---------------------------------------------------------------------------
// 2. Update cost scaling.

// Median seconds per call of `fn`, repeated until `budget` seconds pass.
double TimePerCall(const std::function<void()>& fn, double budget) {
  std::vector<double> samples;
  const auto start = Clock::now();
  while (samples.size() < 5 || (Seconds(start) < budget && samples.size() < 2000)) {
    const auto t0 = Clock::now();
    fn();
    samples.push_back(Seconds(t0));
  }
  std::nth_element(samples.begin(), samples.begin() + samples.size() / 2,
                   samples.end());
  return samples[samples.size() / 2];
}

double LogLogSlope(const std::vector<double>& n, const std::vector<double>& t) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = n.size();
  for (size_t i = 0; i < n.size(); ++i) {
    const double x = std::log(n[i]), y = std::log(t[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

Outcome CheckGpScaling() {
  const std::vector<double> sizes = {20, 100, 500};
  std::vector<double> incremental, rebuild;
  for (double size : sizes) {
    const int n = static_cast<int>(size);
    Gen gen(77);
    igp::KernelParams params;
    params.length_scales = Eigen::VectorXd::Ones(3);
    // Disable the periodic refresh so only the rank-one path is timed.
    igp::IncrementalGp gp(params, n, INT_MAX);
    for (int i = 0; i < n; ++i) gp.AddPoint(gen.Vector(3, -5.0, 5.0), gen.Normal());
    std::vector<Eigen::VectorXd> xs;
    for (int i = 0; i < 64; ++i) xs.push_back(gen.Vector(3, -5.0, 5.0));
    size_t k = 0;
    incremental.push_back(TimePerCall(
        [&] { gp.ReplacePoint(xs[k++ % xs.size()], 0.5); }, 1.0));
    rebuild.push_back(TimePerCall([&] { gp.Refresh(); }, 1.0));
  }
  const double s_inc = LogLogSlope(sizes, incremental);
  const double s_full = LogLogSlope(sizes, rebuild);
  Outcome o;
  o.pass = std::abs(s_inc - 2.0) <= 0.4 && s_full >= 2.5;
  o.detail = Format(
      "incremental slope %.2f (2.0+-0.4) [%.2e %.2e %.2e s], rebuild slope "
      "%.2f (>=2.5) [%.2e %.2e %.2e s]",
      s_inc, incremental[0], incremental[1], incremental[2], s_full,
      rebuild[0], rebuild[1], rebuild[2]);
  return o;
}

// ---------------------------------------------------------------------------
// 3. CEM on a separable quadratic.

Outcome CheckCem() {
  const auto start = Clock::now();
  const cem::ControlBounds bounds = cem::ControlBounds::From(QuadParams{});
  cem::CemConfig cfg;
  cfg.samples = 100;
  cfg.elite = 10;
  cfg.iterations = 10;
  cfg.horizon = 1;
  int hits = 0, near = 0;
  double worst_gap = 0.0, worst_distance = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Gen gen(3000 + trial);
    cem::ControlSequence target(4, 1);
    Eigen::Vector4d weights;
    for (int r = 0; r < 4; ++r) {
      target(r, 0) = gen.Uniform(0.8 * bounds.lower(r) + 0.2 * bounds.upper(r),
                                 0.2 * bounds.lower(r) + 0.8 * bounds.upper(r));
      weights(r) = gen.Uniform(0.5, 2.0);
    }
    // Minimum value 0 at `target`.
    const cem::SequenceCost cost = [&](const cem::ControlSequence& u) {
      return (weights.array() * (u - target).col(0).array().square()).sum();
    };
    std::mt19937_64 rng(gen.engine()());
    const cem::CemResult r = cem::CemSolve(
        cem::SamplingDistribution::Cold(1, bounds), cfg, bounds, cost, rng);
    const double gap = r.best_cost;
    const double distance = (r.best_sequence - target).norm();
    worst_gap = std::max(worst_gap, gap);
    worst_distance = std::max(worst_distance, distance);
    if (gap <= 1e-2) ++hits;
    if (distance <= 1e-2) ++near;
  }
  const double elapsed = Seconds(start);
  Outcome o;
  o.pass = hits >= 95 && elapsed < 5.0;
  o.detail = Format(
      "%d/100 trials with cost within 1e-2 of the optimum (>=95), worst gap "
      "%.2e; argmin within 1e-2 in %d/100 (worst %.2e); %.2f s (<5 s)",
      hits, worst_gap, near, worst_distance, elapsed);
  return o;
}

// ---------------------------------------------------------------------------
// 4. QP solver and filter.

Outcome CheckQp() {
  // Generic KKT residuals.
  double worst_kkt = 0.0;
  int solved = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Gen gen(4000 + trial);
    const int n = gen.Int(1, 6);
    const int m = gen.Int(0, 10);
    qp::DenseQp p;
    p.hessian = gen.Spd(n, 0.1, 10.0);
    p.linear = gen.Vector(n, -5.0, 5.0);
    p.constraints = gen.Matrix(m, n, -1.0, 1.0);
    const Eigen::VectorXd start = gen.Vector(n, -1.0, 1.0);
    p.bounds = p.constraints * start;
    for (int i = 0; i < m; ++i) {
      if (gen.Uniform(0.0, 1.0) < 0.7) p.bounds(i) += gen.Uniform(0.0, 2.0);
    }
    try {
      const qp::DenseQpResult r = qp::SolveActiveSet(p, start, 100);
      worst_kkt = std::max(worst_kkt, qp::ComputeKktResiduals(p, r).Max());
      ++solved;
    } catch (const std::exception&) {
      worst_kkt = std::numeric_limits<double>::infinity();
    }
  }

  // Single violated constraint, no box: Euclidean halfspace projection.
  double worst_projection = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Gen gen(5000 + trial);
    const Eigen::Vector4d u = gen.Vector(4, -2.0, 2.0);
    Eigen::RowVector4d a = gen.Vector(4, -1.0, 1.0).transpose();
    a.normalize();
    const double offset = -a.dot(u.transpose()) + gen.Uniform(0.1, 2.0);
    safety::QpProblem p;
    p.u_mpc = u;
    p.lower = Eigen::Vector4d::Constant(-1e6);
    p.upper = Eigen::Vector4d::Constant(1e6);
    p.scale = Eigen::Vector4d::Ones();
    p.lambda_eps = 1e8;
    p.lambda_eta = 1e6;
    p.constraints.push_back({a, offset, safety::ConstraintKind::kBarrier});
    const safety::QpSolution s = safety::SolveQp(p);
    const double viol = a.dot(u.transpose()) + offset;
    const Eigen::Vector4d proj = u - viol * a.transpose();
    worst_projection = std::max(worst_projection, (s.u - proj).norm());
    worst_kkt = std::max(worst_kkt, s.residuals.Max());
  }

  // Filter passthrough on random flight states.
  const QuadParams quad;
  const safety::SafetySpec spec;
  int satisfied = 0, exact = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    Gen gen(6000 + trial);
    State x = gen.FlightState();
    x.att.head<2>() *= 0.5;
    const safety::Ellipsoid e = safety::Ellipsoid::Ball(
        x.p + gen.Vec3(-0.5, 0.5), gen.Uniform(0.7, 2.0));
    const DesiredState xd{x.p + gen.Vec3(-0.3, 0.3), x.v + gen.Vec3(-0.3, 0.3),
                          gen.Vec3(-0.5, 0.5)};
    const safety::DisturbanceEstimate d{gen.Vec3(-1, 1), gen.Vec3(0, 0.3)};
    const ControlInput u = gen.Control(quad);
    const bool use_clf = trial % 2 == 0;
    const safety::FilterResult r =
        safety::MiFilter(x, u, e, xd, d, spec, quad, use_clf);
    const Eigen::Vector4d uv = u.AsVector();
    if (r.cbf.Evaluate(uv) <= 0.0 && (!r.clf || r.clf->Evaluate(uv) <= 0.0)) {
      ++satisfied;
      const Eigen::Vector4d out = r.u.AsVector();
      if (!r.intervened && std::memcmp(out.data(), uv.data(), sizeof(double) * 4) == 0) {
        ++exact;
      }
    }
  }

  Outcome o;
  o.pass = solved == 1000 && worst_kkt < 1e-6 && worst_projection < 1e-6 &&
           satisfied > 0 && exact == satisfied;
  o.detail = Format(
      "%d/1000 solved, max KKT %.2e (<1e-6), max projection err %.2e "
      "(<1e-6), passthrough exact %d/%d",
      solved, worst_kkt, worst_projection, exact, satisfied);
  return o;
}

// ---------------------------------------------------------------------------
// 5. Analytic gradients against central differences.

double RelativeError(const Eigen::VectorXd& analytic,
                     const Eigen::VectorXd& numeric) {
  const double scale = numeric.norm();
  const double diff = (analytic - numeric).norm();
  return scale > 0.0 ? diff / scale : diff;
}

Outcome CheckGradients() {
  const SpiralReference ref;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Gen gen(7000 + trial);
    safety::Ellipsoid e;
    e.shape = gen.Spd(3, 0.5, 2.5);
    e.center = gen.Vec3(-1.0, 1.0);
    const State x = gen.FlightState();
    const double gamma = gen.Uniform(0.5, 2.0);
    safety::SafetySpec spec;
    spec.q_p = gen.Vec3(0.1, 1.0);
    spec.q_v = gen.Vec3(0.1, 1.0);
    const double t = gen.Uniform(0.0, 20.0);
    const double step = 1e-6;

    // Gradients over (p, v) and, for V, time.
    Eigen::VectorXd fd_h(3), fd_he(6), fd_v(7);
    for (int i = 0; i < 6; ++i) {
      State xp = x, xm = x;
      (i < 3 ? xp.p(i) : xp.v(i - 3)) += step;
      (i < 3 ? xm.p(i) : xm.v(i - 3)) -= step;
      if (i < 3) {
        fd_h(i) = (safety::BarrierValue(xp.p, e) - safety::BarrierValue(xm.p, e)) /
                  (2 * step);
      }
      fd_he(i) = (safety::HigherOrderBarrier(xp, e, gamma) -
                  safety::HigherOrderBarrier(xm, e, gamma)) /
                 (2 * step);
      fd_v(i) = (safety::Lyapunov(xp, ref.At(t), spec) -
                 safety::Lyapunov(xm, ref.At(t), spec)) /
                (2 * step);
    }
    fd_v(6) = (safety::Lyapunov(x, ref.At(t + step), spec) -
               safety::Lyapunov(x, ref.At(t - step), spec)) /
              (2 * step);

    const safety::PhaseGradient ghe =
        safety::HigherOrderBarrierGradient(x, e, gamma);
    const safety::PhaseGradient gv = safety::LyapunovGradient(x, ref.At(t), spec);
    Eigen::VectorXd a_he(6), a_v(7);
    a_he << ghe.dp, ghe.dv;
    a_v << gv.dp, gv.dv, gv.dt;
    worst = std::max({worst, RelativeError(safety::BarrierGradient(x.p, e), fd_h),
                      RelativeError(a_he, fd_he), RelativeError(a_v, fd_v)});
  }
  Outcome o;
  o.pass = worst < 1e-5;
  o.detail = Format("h, h_e, V at 100 states, max relative err %.2e (<1e-5)", worst);
  return o;
}

// ---------------------------------------------------------------------------
// Closed-loop criteria.

ScenarioConfig Configure(ScenarioSource src,
                         const std::vector<std::pair<std::string, std::string>>& sets) {
  for (const auto& [k, v] : sets) src.Set(k, v);
  return src.Resolve();
}

std::string Failures(const std::vector<RunResult>& runs) {
  std::string out;
  for (const RunResult& r : runs) {
    if (r.status != RunStatus::kOk) {
      out += Format(" [%s seed %llu: %s]", ToString(r.config.variant).c_str(),
                    static_cast<unsigned long long>(r.config.seed), r.error.c_str());
    }
  }
  return out;
}

Outcome CheckSafety() {
  const auto start = Clock::now();
  std::vector<ScenarioConfig> configs;
  for (const char* variant : {"LB-CEMPC-MI", "LB-CEMPC-CBF"}) {
    for (std::uint64_t seed : kSeeds) {
      configs.push_back(Configure(Load("scenario2"),
                                  {{"variant", variant},
                                   {"wind", "wind-2"},
                                   {"seed", std::to_string(seed)}}));
    }
  }
  const std::vector<RunResult> runs = RunAll(configs);
  const double elapsed = Seconds(start);
  double min_barrier = std::numeric_limits<double>::infinity();
  int penetrations = 0;
  for (const RunResult& r : runs) {
    min_barrier = std::min(min_barrier, r.metrics.min_barrier);
    penetrations += r.metrics.penetrations;
  }
  const std::string failures = Failures(runs);
  Outcome o;
  o.pass = failures.empty() && min_barrier >= 0.0 && penetrations == 0 &&
           elapsed < 300.0;
  o.detail = Format("10 runs, min barrier %.4f (>=0), penetrations %d (0), "
                    "%.0f s (<300 s)%s",
                    min_barrier, penetrations, elapsed, failures.c_str());
  return o;
}

Outcome CheckAblation() {
  const auto start = Clock::now();
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"LB-CEMPC-MI", "wind-4"},
      {"LB-CEMPC", "wind-4"},
      {"CEMPC", "wind-4"},
      {"CEMPC", "wind-1"}};
  std::vector<ScenarioConfig> configs;
  for (const auto& [variant, wind] : cases) {
    for (std::uint64_t seed : kSeeds) {
      configs.push_back(Configure(Load("tracking"), {{"variant", variant},
                                                     {"wind", wind},
                                                     {"horizon", "0.6"},
                                                     {"seed", std::to_string(seed)}}));
    }
  }
  const std::vector<RunResult> runs = RunAll(configs);
  const double elapsed = Seconds(start);
  std::vector<Stats> stats;
  for (size_t c = 0; c < cases.size(); ++c) {
    std::vector<double> rms;
    for (size_t s = 0; s < kSeeds.size(); ++s) {
      rms.push_back(runs[c * kSeeds.size() + s].metrics.rms_error);
    }
    stats.push_back(Describe(rms));
  }
  auto pooled = [](const Stats& a, const Stats& b) {
    return std::sqrt(0.5 * (a.stddev * a.stddev + b.stddev * b.stddev));
  };
  const Stats& mi = stats[0];
  const Stats& lb = stats[1];
  const Stats& ce = stats[2];
  const Stats& ce1 = stats[3];
  const bool mi_lb = lb.mean - mi.mean > pooled(mi, lb);
  const bool lb_ce = ce.mean - lb.mean > pooled(lb, ce);
  const bool wind = ce.mean > ce1.mean;
  const std::string failures = Failures(runs);
  Outcome o;
  o.pass = failures.empty() && mi_lb && lb_ce && wind && elapsed < 600.0;
  o.detail = Format(
      "RMS MI %.3f+-%.3f, LB %.3f+-%.3f, CEMPC %.3f+-%.3f; "
      "MI<LB by pooled sd: %s (gap %.3f vs %.3f), LB<CEMPC: %s (gap %.3f vs "
      "%.3f), CEMPC wind-4 %.3f > wind-1 %.3f: %s, %.0f s (<600 s)%s",
      mi.mean, mi.stddev, lb.mean, lb.stddev, ce.mean, ce.stddev,
      mi_lb ? "yes" : "no", lb.mean - mi.mean, pooled(mi, lb),
      lb_ce ? "yes" : "no", ce.mean - lb.mean, pooled(lb, ce), ce.mean,
      ce1.mean, wind ? "yes" : "no", elapsed, failures.c_str());
  return o;
}

Outcome CheckTradeoff() {
  const std::vector<std::string> weights = {"10", "0.1", "0"};
  std::vector<ScenarioConfig> configs;
  for (const std::string& w : weights) {
    for (std::uint64_t seed : kSeeds) {
      configs.push_back(Configure(Load("scenario2"),
                                  {{"variant", "LB-CEMPC-CBF"},
                                   {"wind", "wind-2"},
                                   {"cost.obstacle_weight", w},
                                   {"seed", std::to_string(seed)}}));
    }
  }
  const std::vector<RunResult> runs = RunAll(configs);
  std::vector<double> avoid, rms;
  int never = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    std::vector<double> a, r;
    for (size_t s = 0; s < kSeeds.size(); ++s) {
      const RunResult& run = runs[i * kSeeds.size() + s];
      double t = run.metrics.avoid_times.empty() ? std::nan("")
                                                 : run.metrics.avoid_times[0];
      // Never avoided counts as avoiding at the end of the run.
      if (std::isnan(t)) {
        ++never;
        t = run.config.duration;
      }
      a.push_back(t);
      r.push_back(run.metrics.rms_error);
    }
    avoid.push_back(Describe(a).mean);
    rms.push_back(Describe(r).mean);
  }
  // Weights are listed in decreasing order: avoid time must not decrease
  // and RMS must not increase along the list.
  const bool avoid_ok = avoid[0] <= avoid[1] && avoid[1] <= avoid[2];
  const bool rms_ok = rms[0] >= rms[1] && rms[1] >= rms[2];
  const std::string failures = Failures(runs);
  Outcome o;
  o.pass = failures.empty() && avoid_ok && rms_ok;
  o.detail = Format(
      "w=10/0.1/0: avoid time %.3f/%.3f/%.3f s (non-increasing in w: %s), "
      "RMS %.3f/%.3f/%.3f (non-decreasing in w: %s), %d runs never avoided%s",
      avoid[0], avoid[1], avoid[2], avoid_ok ? "yes" : "no", rms[0], rms[1],
      rms[2], rms_ok ? "yes" : "no", never, failures.c_str());
  return o;
}

Outcome CheckCoverage() {
  const RunResult r = RunScenario(Configure(
      Load("tracking"),
      {{"variant", "LB-CEMPC-MI"}, {"wind", "wind-4"}, {"seed", "1"}}));
  const Eigen::Vector3d c = r.metrics.gp_coverage;
  Outcome o;
  o.pass = r.status == RunStatus::kOk && (c.array() >= 0.95).all();
  o.detail = Format("coverage after %.1f s: x %.3f, y %.3f, z %.3f (>=0.95)%s",
                    r.config.coverage_warmup, c.x(), c.y(), c.z(),
                    Failures({r}).c_str());
  return o;
}

Outcome CheckDeterminism() {
  std::vector<ScenarioConfig> configs;
  for (int rep = 0; rep < 2; ++rep) {
    configs.push_back(Configure(Load("scenario2"), {{"seed", "3"}}));
    configs.push_back(Configure(Load("tracking"),
                                {{"variant", "LB-CEMPC"}, {"seed", "11"}}));
  }
  const std::vector<RunResult> runs = RunAll(configs);
  auto csv = [](const RunResult& r) {
    std::ostringstream out;
    WriteStepCsv(r, out);
    return out.str();
  };
  const bool a = csv(runs[0]) == csv(runs[2]);
  const bool b = csv(runs[1]) == csv(runs[3]);
  Outcome o;
  o.pass = a && b && !csv(runs[0]).empty();
  o.detail = Format("scenario2 seed 3 identical: %s, tracking seed 11 identical: %s",
                    a ? "yes" : "no", b ? "yes" : "no");
  return o;
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*check)();
};

const Criterion kCriteria[] = {
    {1, "IGP oracle equivalence", CheckGpOracle},
    {2, "IGP complexity", CheckGpScaling},
    {3, "CEM correctness", CheckCem},
    {4, "QP correctness", CheckQp},
    {5, "Lie-derivative check", CheckGradients},
    {6, "Safety property", CheckSafety},
    {7, "Ablation ordering", CheckAblation},
    {8, "Foresight trade-off trend", CheckTradeoff},
    {9, "GP coverage", CheckCoverage},
    {10, "Determinism", CheckDeterminism},
};

}  // namespace
}  // namespace lbcem

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const lbcem::Criterion& c : lbcem::kCriteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    lbcem::Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.number,
                c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
