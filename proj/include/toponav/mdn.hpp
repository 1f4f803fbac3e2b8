#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toponav/errors.hpp"
#include "toponav/nn.hpp"
#include "toponav/render.hpp"
#include "toponav/rng.hpp"
#include "toponav/sim.hpp"

namespace toponav {

// --- mixture over curvature ---------------------------------------------------

struct GmmComponent {
  double phi = 0.0;    // weight
  double mu = 0.0;     // mean curvature, 1/m
  double sigma = 0.0;  // std, 1/m
};

struct GmmParams {
  std::vector<GmmComponent> comps;
};

inline double gmm_density(const GmmParams& g, double theta) {
  double acc = 0.0;
  for (const GmmComponent& c : g.comps) {
    double z = (theta - c.mu) / c.sigma;
    acc += c.phi * std::exp(-0.5 * z * z) /
           (c.sigma * std::sqrt(2.0 * std::numbers::pi));
  }
  return acc;
}

// log density via logsumexp; safe where the linear form underflows.
inline double gmm_log_density(const GmmParams& g, double theta) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(g.comps.size());
  for (const GmmComponent& c : g.comps) {
    double z = (theta - c.mu) / c.sigma;
    double t = (c.phi > 0.0 ? std::log(c.phi)
                            : -std::numeric_limits<double>::infinity()) -
               0.5 * z * z - std::log(c.sigma) -
               0.5 * std::log(2.0 * std::numbers::pi);
    terms.push_back(t);
    best = std::max(best, t);
  }
  if (!std::isfinite(best)) return best;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - best);
  return best + std::log(acc);
}

// --- model ---------------------------------------------------------------------

// Architecture and loss hyperparameters. Defaults give ~26k parameters.
struct ModelConfig {
  int obs_size = 32;
  double obs_resolution = 1.0;
  int map_size = 64;
  double map_resolution = 1.0;
  int K = 3;
  double kappa_max = kKappaMax;
  double sigma_min = 1e-3;
  double sigma_max = 1.0;
  double sigma_bias = -2.302585092994046;       // ln 0.1: initial sigma
  double log_sigma_center = -3.912023005428146; // c in the sigma regularizer
  double lambda_phi = 0.01;
  double lambda_sigma = 0.05;
  double phi_eps = 1e-6;
  int obs_c1 = 4;
  int obs_c2 = 8;
  int map_c = 4;
  int route_c = 4;
  int trunk1 = 48;
  int trunk2 = 32;
  int det_hidden = 16;
  bool operator==(const ModelConfig&) const = default;
};

// Supervision item: ego observation, unrouted and routed patches of the
// same pose, and the executed curvature.
struct BatchItem {
  Observation obs;
  MapPatch map_u;
  MapPatch map_r;
  double target = 0.0;
};

using Batch = std::vector<BatchItem>;

// Compact uint8 storage for training corpora (rasters are binary).
struct CompactSample {
  std::vector<std::uint8_t> obs;
  std::vector<std::uint8_t> map_d;  // drivable channel
  std::vector<std::uint8_t> map_r;  // route channel
  double target = 0.0;
  float dist_junction = 1e9f;  // meters ahead to the next junction node
};

struct Dataset {
  int obs_size = 32;
  double obs_resolution = 1.0;
  int map_size = 64;
  double map_resolution = 1.0;
  std::vector<CompactSample> samples;

  BatchItem item(std::size_t i) const {
    const CompactSample& s = samples.at(i);
    BatchItem it;
    it.obs.size = obs_size;
    it.obs.resolution = obs_resolution;
    it.obs.values.assign(s.obs.begin(), s.obs.end());
    it.map_u.size = map_size;
    it.map_u.resolution = map_resolution;
    it.map_u.drivable.assign(s.map_d.begin(), s.map_d.end());
    it.map_r.size = map_size;
    it.map_r.resolution = map_resolution;
    it.map_r.drivable.assign(s.map_d.begin(), s.map_d.end());
    it.map_r.route.emplace(s.map_r.begin(), s.map_r.end());
    it.target = s.target;
    return it;
  }
};

namespace detail {

inline double logsumexp(const std::vector<double>& v) {
  double best = -std::numeric_limits<double>::infinity();
  for (double x : v) best = std::max(best, x);
  if (!std::isfinite(best)) return best;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - best);
  return best + std::log(acc);
}

}  // namespace detail

// Per-sample loss decomposition: mixture NLL, sqrt-weight penalty,
// log-sigma tether, squared deterministic error.
struct LossTerms {
  double nll = 0.0;
  double phi_pen = 0.0;
  double sigma_pen = 0.0;
  double det = 0.0;
  double total() const { return nll + phi_pen + sigma_pen + det; }
};

class SteeringModel {
 public:
  ModelConfig cfg;
  nn::Conv obs_conv1, obs_conv2;
  nn::Conv map_conv;
  nn::Conv route_conv;
  nn::Dense trunk_fc1, trunk_fc2;
  nn::Dense stoch_head;
  nn::Dense det_fc1, det_fc2;

  static SteeringModel init(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.K < 1) throw ConfigError("model K must be >= 1");
    if (!(cfg.phi_eps > 0.0)) throw ConfigError("model phi_eps must be > 0");
    if (!(cfg.sigma_min > 0.0) || !(cfg.sigma_max > cfg.sigma_min))
      throw ConfigError("model sigma bounds invalid");
    SteeringModel m;
    m.cfg = cfg;
    Rng rng(seed);
    m.obs_conv1.init(1, cfg.obs_size, cfg.obs_c1, 4, 4, rng);
    m.obs_conv2.init(cfg.obs_c1, m.obs_conv1.out_s, cfg.obs_c2, 2, 2, rng);
    m.map_conv.init(1, cfg.map_size, cfg.map_c, 8, 8, rng);
    m.route_conv.init(2, cfg.map_size, cfg.route_c, 8, 8, rng);
    int obs_feat = static_cast<int>(m.obs_conv2.out_size());
    int map_feat = static_cast<int>(m.map_conv.out_size());
    int route_feat = static_cast<int>(m.route_conv.out_size());
    m.trunk_fc1.init(obs_feat + map_feat, cfg.trunk1, rng);
    m.trunk_fc2.init(cfg.trunk1, cfg.trunk2, rng);
    m.stoch_head.init(cfg.trunk2, 3 * cfg.K, rng);
    m.det_fc1.init(cfg.trunk2 + route_feat, cfg.det_hidden, rng);
    m.det_fc2.init(cfg.det_hidden, 1, rng);
    return m;
  }

  template <typename F>
  void visit_tensors(F&& f) {
    f("obs_conv1.w", obs_conv1.w, obs_conv1.gw);
    f("obs_conv1.b", obs_conv1.b, obs_conv1.gb);
    f("obs_conv2.w", obs_conv2.w, obs_conv2.gw);
    f("obs_conv2.b", obs_conv2.b, obs_conv2.gb);
    f("map_conv.w", map_conv.w, map_conv.gw);
    f("map_conv.b", map_conv.b, map_conv.gb);
    f("route_conv.w", route_conv.w, route_conv.gw);
    f("route_conv.b", route_conv.b, route_conv.gb);
    f("trunk_fc1.w", trunk_fc1.w, trunk_fc1.gw);
    f("trunk_fc1.b", trunk_fc1.b, trunk_fc1.gb);
    f("trunk_fc2.w", trunk_fc2.w, trunk_fc2.gw);
    f("trunk_fc2.b", trunk_fc2.b, trunk_fc2.gb);
    f("stoch_head.w", stoch_head.w, stoch_head.gw);
    f("stoch_head.b", stoch_head.b, stoch_head.gb);
    f("det_fc1.w", det_fc1.w, det_fc1.gw);
    f("det_fc1.b", det_fc1.b, det_fc1.gb);
    f("det_fc2.w", det_fc2.w, det_fc2.gw);
    f("det_fc2.b", det_fc2.b, det_fc2.gb);
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    const_cast<SteeringModel*>(this)->visit_tensors(
        [&](const char*, std::vector<double>& w, std::vector<double>&) {
          n += w.size();
        });
    return n;
  }

  void zero_grads() {
    visit_tensors([](const char*, std::vector<double>&,
                     std::vector<double>& g) {
      std::fill(g.begin(), g.end(), 0.0);
    });
  }

  GmmParams forward_stochastic(const Observation& obs,
                               const MapPatch& map_u) const {
    StochTape tape;
    run_stochastic(obs, map_u, tape);
    return tape.gmm;
  }

  double forward_deterministic(const Observation& obs,
                               const MapPatch& map_r) const {
    DetTape tape;
    run_deterministic(obs, map_r, tape);
    return tape.out;
  }

  LossTerms item_loss(const BatchItem& item) const {
    StochTape st;
    DetTape dt;
    run_stochastic(item.obs, item.map_u, st);
    run_deterministic(item.obs, item.map_r, dt);
    return compute_terms(st, dt, item.target);
  }

  double loss(const Batch& batch) const {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    double acc = 0.0;
    for (const BatchItem& it : batch) acc += item_loss(it).total();
    return acc / static_cast<double>(batch.size());
  }

  // Accumulates d(mean loss)/d(params) into the layer gradient buffers
  // (cleared first) and returns the mean loss.
  double loss_and_gradients(const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    zero_grads();
    double acc = 0.0;
    double inv = 1.0 / static_cast<double>(batch.size());
    for (const BatchItem& it : batch) acc += backprop_item(it, inv);
    return acc * inv;
  }

 private:
  struct StochTape {
    std::vector<double> obs_in, c1, c2;   // post-activation
    std::vector<double> map_in, mc;
    std::vector<double> trunk_in, t1, t2;
    std::vector<double> head;             // raw 3K outputs
    // derived mixture quantities
    std::vector<double> log_phi, tanh_m, sigma, sigma_raw;
    GmmParams gmm;
  };

  struct DetTape {
    std::vector<double> obs_in, c1, c2;
    std::vector<double> map_in, mc;
    std::vector<double> trunk_in, t1, t2;
    std::vector<double> route_in, rc;
    std::vector<double> det_in, d1;
    double raw = 0.0;
    double out = 0.0;
  };

  std::vector<double> obs_to_vec(const Observation& obs) const {
    if (obs.size != cfg.obs_size || obs.resolution != cfg.obs_resolution)
      throw ChannelMismatchError(
          "observation raster " + std::to_string(obs.size) + "px @ " +
          fmt_double(obs.resolution) + " m/px, model expects " +
          std::to_string(cfg.obs_size) + "px @ " +
          fmt_double(cfg.obs_resolution) + " m/px");
    return std::vector<double>(obs.values.begin(), obs.values.end());
  }

  void check_map(const MapPatch& m, bool want_route) const {
    if (m.size != cfg.map_size || m.resolution != cfg.map_resolution)
      throw ChannelMismatchError(
          "map patch " + std::to_string(m.size) + "px @ " +
          fmt_double(m.resolution) + " m/px, model expects " +
          std::to_string(cfg.map_size) + "px @ " +
          fmt_double(cfg.map_resolution) + " m/px");
    if (want_route && !m.routed())
      throw ChannelMismatchError(
          "unrouted patch passed to the deterministic head");
    if (!want_route && m.routed())
      throw ChannelMismatchError("routed patch passed to the stochastic head");
  }

  // Shared encoder + trunk. map_plane is the drivable channel.
  void run_trunk(const std::vector<double>& obs_in,
                 const std::vector<double>& map_in, StochTape& t) const {
    t.c1 = obs_conv1.forward(obs_in);
    nn::tanh_forward(t.c1);
    t.c2 = obs_conv2.forward(t.c1);
    nn::tanh_forward(t.c2);
    t.mc = map_conv.forward(map_in);
    nn::tanh_forward(t.mc);
    t.trunk_in = t.c2;
    t.trunk_in.insert(t.trunk_in.end(), t.mc.begin(), t.mc.end());
    t.t1 = trunk_fc1.forward(t.trunk_in);
    nn::tanh_forward(t.t1);
    t.t2 = trunk_fc2.forward(t.t1);
    nn::tanh_forward(t.t2);
  }

  void run_stochastic(const Observation& obs, const MapPatch& map_u,
                      StochTape& t) const {
    check_map(map_u, /*want_route=*/false);
    t.obs_in = obs_to_vec(obs);
    t.map_in.assign(map_u.drivable.begin(), map_u.drivable.end());
    run_trunk(t.obs_in, t.map_in, t);
    t.head = stoch_head.forward(t.t2);

    int K = cfg.K;
    std::vector<double> logits(t.head.begin(), t.head.begin() + K);
    double lse = detail::logsumexp(logits);
    t.log_phi.resize(static_cast<std::size_t>(K));
    t.tanh_m.resize(static_cast<std::size_t>(K));
    t.sigma.resize(static_cast<std::size_t>(K));
    t.sigma_raw.resize(static_cast<std::size_t>(K));
    t.gmm.comps.resize(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
      std::size_t si = static_cast<std::size_t>(i);
      t.log_phi[si] = logits[si] - lse;
      t.tanh_m[si] = std::tanh(t.head[static_cast<std::size_t>(K + i)]);
      double u = t.head[static_cast<std::size_t>(2 * K + i)] + cfg.sigma_bias;
      t.sigma_raw[si] = std::exp(u);
      t.sigma[si] = std::clamp(t.sigma_raw[si], cfg.sigma_min, cfg.sigma_max);
      t.gmm.comps[si] = {std::exp(t.log_phi[si]),
                         cfg.kappa_max * t.tanh_m[si], t.sigma[si]};
    }
  }

  void run_deterministic(const Observation& obs, const MapPatch& map_r,
                         DetTape& t) const {
    check_map(map_r, /*want_route=*/true);
    StochTape trunk;
    trunk.obs_in = obs_to_vec(obs);
    trunk.map_in.assign(map_r.drivable.begin(), map_r.drivable.end());
    run_trunk(trunk.obs_in, trunk.map_in, trunk);
    t.obs_in = std::move(trunk.obs_in);
    t.c1 = std::move(trunk.c1);
    t.c2 = std::move(trunk.c2);
    t.map_in = std::move(trunk.map_in);
    t.mc = std::move(trunk.mc);
    t.trunk_in = std::move(trunk.trunk_in);
    t.t1 = std::move(trunk.t1);
    t.t2 = std::move(trunk.t2);

    t.route_in.resize(2 * t.map_in.size());
    std::copy(t.map_in.begin(), t.map_in.end(), t.route_in.begin());
    std::copy(map_r.route->begin(), map_r.route->end(),
              t.route_in.begin() + static_cast<std::ptrdiff_t>(t.map_in.size()));
    t.rc = route_conv.forward(t.route_in);
    nn::tanh_forward(t.rc);
    t.det_in = t.t2;
    t.det_in.insert(t.det_in.end(), t.rc.begin(), t.rc.end());
    t.d1 = det_fc1.forward(t.det_in);
    nn::tanh_forward(t.d1);
    t.raw = det_fc2.forward(t.d1)[0];
    t.out = cfg.kappa_max * std::tanh(t.raw);
  }

  LossTerms compute_terms(const StochTape& st, const DetTape& dt,
                          double target) const {
    int K = cfg.K;
    LossTerms terms;
    std::vector<double> a(static_cast<std::size_t>(K));
    double sqrt_sum = 0.0;
    for (int i = 0; i < K; ++i) {
      std::size_t si = static_cast<std::size_t>(i);
      const GmmComponent& c = st.gmm.comps[si];
      double z = (target - c.mu) / c.sigma;
      a[si] = st.log_phi[si] - 0.5 * z * z - std::log(c.sigma) -
              0.5 * std::log(2.0 * std::numbers::pi);
      sqrt_sum += std::sqrt(c.phi + cfg.phi_eps);
      double dls = std::log(c.sigma) - cfg.log_sigma_center;
      terms.sigma_pen += cfg.lambda_sigma * dls * dls;
    }
    terms.nll = -detail::logsumexp(a);
    terms.phi_pen = cfg.lambda_phi * sqrt_sum * sqrt_sum;
    double de = dt.out - target;
    terms.det = de * de;
    if (!std::isfinite(terms.nll)) throw NumericOverflowError("nll");
    if (!std::isfinite(terms.phi_pen))
      throw NumericOverflowError("phi-penalty");
    if (!std::isfinite(terms.sigma_pen))
      throw NumericOverflowError("sigma-penalty");
    if (!std::isfinite(terms.det)) throw NumericOverflowError("deterministic");
    return terms;
  }

  // Backprop for one item, gradients scaled by `scale`. Returns the
  // item's total loss.
  double backprop_item(const BatchItem& item, double scale) {
    StochTape st;
    DetTape dt;
    run_stochastic(item.obs, item.map_u, st);
    run_deterministic(item.obs, item.map_r, dt);
    LossTerms terms = compute_terms(st, dt, item.target);

    int K = cfg.K;
    // Responsibilities r_i under the mixture NLL.
    std::vector<double> a(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
      std::size_t si = static_cast<std::size_t>(i);
      const GmmComponent& c = st.gmm.comps[si];
      double z = (target_of(item) - c.mu) / c.sigma;
      a[si] = st.log_phi[si] - 0.5 * z * z - std::log(c.sigma) -
              0.5 * std::log(2.0 * std::numbers::pi);
    }
    double lse = detail::logsumexp(a);
    std::vector<double> dhead(static_cast<std::size_t>(3 * K), 0.0);
    double g_dot_phi = 0.0;
    std::vector<double> gp(static_cast<std::size_t>(K));
    double sqrt_sum = 0.0;
    for (int i = 0; i < K; ++i)
      sqrt_sum += std::sqrt(st.gmm.comps[static_cast<std::size_t>(i)].phi +
                            cfg.phi_eps);
    for (int i = 0; i < K; ++i) {
      std::size_t si = static_cast<std::size_t>(i);
      gp[si] = cfg.lambda_phi * sqrt_sum /
               std::sqrt(st.gmm.comps[si].phi + cfg.phi_eps);
      g_dot_phi += gp[si] * st.gmm.comps[si].phi;
    }
    for (int i = 0; i < K; ++i) {
      std::size_t si = static_cast<std::size_t>(i);
      const GmmComponent& c = st.gmm.comps[si];
      double r = std::exp(a[si] - lse);
      double z = (item.target - c.mu) / c.sigma;
      // logits: NLL (phi - r) plus the weight-penalty softmax chain
      dhead[si] = (c.phi - r) + c.phi * (gp[si] - g_dot_phi);
      // mu through the tanh scaling
      double dmu = -r * z / c.sigma;
      dhead[static_cast<std::size_t>(K + i)] =
          dmu * cfg.kappa_max * (1.0 - st.tanh_m[si] * st.tanh_m[si]);
      // log sigma, zero where the clamp is active
      bool interior = st.sigma_raw[si] > cfg.sigma_min &&
                      st.sigma_raw[si] < cfg.sigma_max;
      if (interior) {
        double dls = r * (1.0 - z * z) +
                     2.0 * cfg.lambda_sigma *
                         (std::log(c.sigma) - cfg.log_sigma_center);
        dhead[static_cast<std::size_t>(2 * K + i)] = dls;
      }
    }
    for (double& g : dhead) g *= scale;
    backward_trunk_from_head(st, dhead);

    // Deterministic branch.
    double dout = 2.0 * (dt.out - item.target) * scale;
    double draw = dout * cfg.kappa_max * (1.0 - std::tanh(dt.raw) * std::tanh(dt.raw));
    std::vector<double> dd1 = det_fc2.backward(dt.d1, {draw});
    nn::tanh_backward(dt.d1, dd1);
    std::vector<double> ddet_in = det_fc1.backward(dt.det_in, dd1);
    std::size_t t2n = dt.t2.size();
    std::vector<double> dt2(ddet_in.begin(),
                            ddet_in.begin() + static_cast<std::ptrdiff_t>(t2n));
    std::vector<double> drc(ddet_in.begin() + static_cast<std::ptrdiff_t>(t2n),
                            ddet_in.end());
    nn::tanh_backward(dt.rc, drc);
    route_conv.backward(dt.route_in, drc);
    backward_trunk(dt.obs_in, dt.c1, dt.c2, dt.map_in, dt.mc, dt.trunk_in,
                   dt.t1, dt.t2, dt2);
    return terms.total();
  }

  static double target_of(const BatchItem& item) { return item.target; }

  void backward_trunk_from_head(const StochTape& st,
                                const std::vector<double>& dhead) {
    std::vector<double> dt2 = stoch_head.backward(st.t2, dhead);
    backward_trunk(st.obs_in, st.c1, st.c2, st.map_in, st.mc, st.trunk_in,
                   st.t1, st.t2, dt2);
  }

  void backward_trunk(const std::vector<double>& obs_in,
                      const std::vector<double>& c1,
                      const std::vector<double>& c2,
                      const std::vector<double>& map_in,
                      const std::vector<double>& mc,
                      const std::vector<double>& trunk_in,
                      const std::vector<double>& t1,
                      const std::vector<double>& t2,
                      std::vector<double>& dt2) {
    nn::tanh_backward(t2, dt2);
    std::vector<double> dt1 = trunk_fc2.backward(t1, dt2);
    nn::tanh_backward(t1, dt1);
    std::vector<double> dtrunk_in = trunk_fc1.backward(trunk_in, dt1);
    std::size_t obs_n = c2.size();
    std::vector<double> dc2(dtrunk_in.begin(),
                            dtrunk_in.begin() +
                                static_cast<std::ptrdiff_t>(obs_n));
    std::vector<double> dmc(dtrunk_in.begin() +
                                static_cast<std::ptrdiff_t>(obs_n),
                            dtrunk_in.end());
    nn::tanh_backward(c2, dc2);
    std::vector<double> dc1 = obs_conv2.backward(c1, dc2);
    nn::tanh_backward(c1, dc1);
    obs_conv1.backward(obs_in, dc1);
    nn::tanh_backward(mc, dmc);
    map_conv.backward(map_in, dmc);
  }
};

// --- training --------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 0.005;
  double lr_decay = 0.99;  // per-epoch multiplier
  double momentum = 0.9;
  double grad_clip = 1.0;  // per-element gradient bound; <= 0 disables
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct TrainResult {
  std::vector<double> epoch_loss;
};

// SGD with momentum over shuffled mini-batches. Deterministic given the
// seed; single-threaded by contract.
inline TrainResult train(SteeringModel& model, const Dataset& ds,
                         const TrainConfig& cfg) {
  if (ds.samples.empty()) throw std::invalid_argument("empty dataset");
  if (cfg.epochs < 0) throw ConfigError("train epochs must be >= 0");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(cfg.lr_decay > 0.0) || cfg.lr_decay > 1.0)
    throw ConfigError("lr decay must be in (0, 1]");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");

  std::vector<std::vector<double>*> weights, grads;
  model.visit_tensors([&](const char*, std::vector<double>& w,
                          std::vector<double>& g) {
    weights.push_back(&w);
    grads.push_back(&g);
  });
  std::vector<std::vector<double>> velocity;
  velocity.reserve(weights.size());
  for (auto* w : weights) velocity.emplace_back(w->size(), 0.0);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(ds.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  int diverged_run = 0;
  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_acc = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Batch batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back(ds.item(order[i]));
      double loss = model.loss_and_gradients(batch);
      epoch_acc += loss * static_cast<double>(stop - start);
      for (std::size_t tn = 0; tn < weights.size(); ++tn) {
        std::vector<double>& w = *weights[tn];
        std::vector<double>& g = *grads[tn];
        std::vector<double>& v = velocity[tn];
        for (std::size_t i = 0; i < w.size(); ++i) {
          double gi = g[i];
          if (cfg.grad_clip > 0.0)
            gi = std::clamp(gi, -cfg.grad_clip, cfg.grad_clip);
          v[i] = cfg.momentum * v[i] - lr * gi;
          w[i] += v[i];
        }
      }
    }
    double epoch_loss = epoch_acc / static_cast<double>(ds.samples.size());
    result.epoch_loss.push_back(epoch_loss);
    lr *= cfg.lr_decay;
    // The NLL of a sharp mixture is negative, so the divergence guard works
    // on magnitude with constant slack rather than a bare 10x ratio.
    double threshold = 10.0 * std::abs(result.epoch_loss.front()) + 1.0;
    if (epoch_loss > threshold) {
      if (++diverged_run >= 3)
        throw TrainingDivergedError(
            "epoch loss " + fmt_double(epoch_loss) + " above " +
            fmt_double(threshold) + " for 3 consecutive epochs");
    } else {
      diverged_run = 0;
    }
  }
  return result;
}

// --- checkpoint -----------------------------------------------------------

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"obs_size", c.obs_size},
                     {"obs_resolution", c.obs_resolution},
                     {"map_size", c.map_size},
                     {"map_resolution", c.map_resolution},
                     {"K", c.K},
                     {"kappa_max", c.kappa_max},
                     {"sigma_min", c.sigma_min},
                     {"sigma_max", c.sigma_max},
                     {"sigma_bias", c.sigma_bias},
                     {"log_sigma_center", c.log_sigma_center},
                     {"lambda_phi", c.lambda_phi},
                     {"lambda_sigma", c.lambda_sigma},
                     {"phi_eps", c.phi_eps},
                     {"obs_c1", c.obs_c1},
                     {"obs_c2", c.obs_c2},
                     {"map_c", c.map_c},
                     {"route_c", c.route_c},
                     {"trunk1", c.trunk1},
                     {"trunk2", c.trunk2},
                     {"det_hidden", c.det_hidden}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("obs_size").get_to(c.obs_size);
  j.at("obs_resolution").get_to(c.obs_resolution);
  j.at("map_size").get_to(c.map_size);
  j.at("map_resolution").get_to(c.map_resolution);
  j.at("K").get_to(c.K);
  j.at("kappa_max").get_to(c.kappa_max);
  j.at("sigma_min").get_to(c.sigma_min);
  j.at("sigma_max").get_to(c.sigma_max);
  j.at("sigma_bias").get_to(c.sigma_bias);
  j.at("log_sigma_center").get_to(c.log_sigma_center);
  j.at("lambda_phi").get_to(c.lambda_phi);
  j.at("lambda_sigma").get_to(c.lambda_sigma);
  j.at("phi_eps").get_to(c.phi_eps);
  j.at("obs_c1").get_to(c.obs_c1);
  j.at("obs_c2").get_to(c.obs_c2);
  j.at("map_c").get_to(c.map_c);
  j.at("route_c").get_to(c.route_c);
  j.at("trunk1").get_to(c.trunk1);
  j.at("trunk2").get_to(c.trunk2);
  j.at("det_hidden").get_to(c.det_hidden);
}

inline std::string save_checkpoint(SteeringModel& model) {
  nlohmann::json j;
  j["format"] = "toponav-checkpoint";
  j["version"] = 1;
  j["config"] = model.cfg;
  nlohmann::json tensors = nlohmann::json::object();
  model.visit_tensors([&](const char* name, std::vector<double>& w,
                          std::vector<double>&) { tensors[name] = w; });
  j["tensors"] = std::move(tensors);
  return j.dump() + "\n";
}

inline SteeringModel load_checkpoint(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "toponav-checkpoint")
      throw ConfigError("bad checkpoint: unknown format");
    if (j.at("version").get<int>() != 1)
      throw ConfigError("bad checkpoint: unsupported version");
    ModelConfig cfg = j.at("config").get<ModelConfig>();
    SteeringModel model = SteeringModel::init(cfg, 0);
    const nlohmann::json& tensors = j.at("tensors");
    model.visit_tensors([&](const char* name, std::vector<double>& w,
                            std::vector<double>&) {
      const nlohmann::json& t = tensors.at(name);
      if (t.size() != w.size())
        throw ConfigError(std::string("bad checkpoint: tensor '") + name +
                          "' has " + std::to_string(t.size()) +
                          " values, expected " + std::to_string(w.size()));
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = t[i].get<double>();
    });
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad checkpoint: ") + e.what());
  }
}

}  // namespace toponav
