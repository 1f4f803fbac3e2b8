#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "toponav/mdn.hpp"
#include "toponav/rng.hpp"

using namespace toponav;

namespace {

// Small geometry so hand computation and finite differences stay cheap.
ModelConfig small_config() {
  ModelConfig cfg;
  cfg.obs_size = 8;
  cfg.map_size = 8;
  cfg.K = 1;
  cfg.obs_c1 = 1;
  cfg.obs_c2 = 1;
  cfg.map_c = 1;
  cfg.route_c = 1;
  cfg.trunk1 = 2;
  cfg.trunk2 = 1;
  cfg.det_hidden = 1;
  return cfg;
}

Observation random_obs(const ModelConfig& cfg, Rng& rng) {
  Observation o;
  o.size = cfg.obs_size;
  o.resolution = cfg.obs_resolution;
  o.values.resize(static_cast<std::size_t>(o.size) * o.size);
  for (float& v : o.values) v = (rng.uniform() < 0.3) ? 1.0f : 0.0f;
  return o;
}

MapPatch random_map(const ModelConfig& cfg, bool routed, Rng& rng) {
  MapPatch m;
  m.size = cfg.map_size;
  m.resolution = cfg.map_resolution;
  m.drivable.resize(static_cast<std::size_t>(m.size) * m.size);
  for (float& v : m.drivable) v = (rng.uniform() < 0.3) ? 1.0f : 0.0f;
  if (routed) {
    m.route.emplace(m.drivable.size(), 0.0f);
    for (std::size_t i = 0; i < m.drivable.size(); ++i)
      if (m.drivable[i] > 0.0f && rng.uniform() < 0.5) (*m.route)[i] = 1.0f;
  }
  return m;
}

BatchItem random_item(const ModelConfig& cfg, Rng& rng) {
  BatchItem it;
  it.obs = random_obs(cfg, rng);
  it.map_u = random_map(cfg, false, rng);
  it.map_r = random_map(cfg, true, rng);
  it.target = rng.uniform(-cfg.kappa_max, cfg.kappa_max);
  return it;
}

void zero_weights(SteeringModel& m) {
  m.visit_tensors([](const char*, std::vector<double>& w,
                     std::vector<double>&) {
    std::fill(w.begin(), w.end(), 0.0);
  });
}

}  // namespace

TEST_CASE("gmm_density standard normal and symmetry") {
  GmmParams g;
  g.comps = {{1.0, 0.0, 1.0}};
  REQUIRE(gmm_density(g, 0.0) == Catch::Approx(0.3989422804014327).epsilon(1e-12));
  for (double d : {0.1, 0.5, 1.7})
    REQUIRE(gmm_density(g, d) == Catch::Approx(gmm_density(g, -d)).epsilon(1e-14));
  GmmParams off;
  off.comps = {{1.0, 0.07, 0.03}};
  for (double d : {0.01, 0.02, 0.09})
    REQUIRE(gmm_density(off, 0.07 + d) ==
            Catch::Approx(gmm_density(off, 0.07 - d)).epsilon(1e-14));
}

TEST_CASE("gmm_density matches extended-precision summation") {
  GmmParams g;
  g.comps = {{0.5, -0.1, 0.02}, {0.3, 0.0, 0.05}, {0.2, 0.1, 0.02}};
  double theta = 0.05;
  long double acc = 0.0L;
  for (const GmmComponent& c : g.comps) {
    long double z = (static_cast<long double>(theta) - c.mu) / c.sigma;
    long double coef =
        c.phi / (c.sigma * std::sqrt(2.0L * 3.14159265358979323846264338327950288L));
    acc += coef * std::exp(-0.5L * z * z);
  }
  double got = gmm_density(g, theta);
  REQUIRE(std::abs(got - static_cast<double>(acc)) / static_cast<double>(acc) <
          1e-12);
  // log-density agrees with the log of the density.
  REQUIRE(gmm_log_density(g, theta) ==
          Catch::Approx(std::log(got)).epsilon(1e-12));
}

TEST_CASE("gmm_density integrates to one") {
  Rng rng(123);
  for (int rep = 0; rep < 20; ++rep) {
    int K = rng.uniform_int(1, 4);
    GmmParams g;
    double wsum = 0.0;
    for (int i = 0; i < K; ++i) {
      double w = rng.uniform(0.1, 1.0);
      wsum += w;
      g.comps.push_back(
          {w, rng.uniform(-0.2, 0.2), rng.uniform(0.01, 0.5)});
    }
    for (GmmComponent& c : g.comps) c.phi /= wsum;
    double lo = 1e9, hi = -1e9, smax = 0.0;
    for (const GmmComponent& c : g.comps) {
      lo = std::min(lo, c.mu);
      hi = std::max(hi, c.mu);
      smax = std::max(smax, c.sigma);
    }
    lo -= 8.0 * smax;
    hi += 8.0 * smax;
    int n = 10000;
    double h = (hi - lo) / n;
    double integral = 0.5 * (gmm_density(g, lo) + gmm_density(g, hi));
    for (int i = 1; i < n; ++i) integral += gmm_density(g, lo + i * h);
    integral *= h;
    REQUIRE(integral == Catch::Approx(1.0).margin(1e-3));
  }
}

TEST_CASE("forward_stochastic keeps mixture invariants on random nets") {
  ModelConfig cfg = small_config();
  cfg.K = 3;
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    SteeringModel m = SteeringModel::init(cfg, 100 + rep);
    Observation obs = random_obs(cfg, rng);
    MapPatch map_u = random_map(cfg, false, rng);
    GmmParams g = m.forward_stochastic(obs, map_u);
    REQUIRE(g.comps.size() == 3);
    double sum = 0.0;
    for (const GmmComponent& c : g.comps) {
      REQUIRE(c.phi >= 0.0);
      REQUIRE(c.sigma >= cfg.sigma_min);
      REQUIRE(c.sigma <= cfg.sigma_max);
      REQUIRE(std::abs(c.mu) <= cfg.kappa_max);
      sum += c.phi;
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("zero-weight network sits at the parameterization fixed point") {
  ModelConfig cfg = small_config();
  cfg.K = 3;
  SteeringModel m = SteeringModel::init(cfg, 1);
  zero_weights(m);
  Rng rng(9);
  Observation obs = random_obs(cfg, rng);
  MapPatch map_u = random_map(cfg, false, rng);
  GmmParams g = m.forward_stochastic(obs, map_u);
  for (const GmmComponent& c : g.comps) {
    REQUIRE(c.phi == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    REQUIRE(c.mu == 0.0);
    REQUIRE(c.sigma == Catch::Approx(std::exp(cfg.sigma_bias)).epsilon(1e-12));
  }
  MapPatch map_r = random_map(cfg, true, rng);
  REQUIRE(m.forward_deterministic(obs, map_r) == 0.0);
}

TEST_CASE("channel mismatches are rejected") {
  ModelConfig cfg = small_config();
  SteeringModel m = SteeringModel::init(cfg, 2);
  Rng rng(11);
  Observation obs = random_obs(cfg, rng);
  MapPatch map_u = random_map(cfg, false, rng);
  MapPatch map_r = random_map(cfg, true, rng);
  // Routed patch into the stochastic head and vice versa.
  REQUIRE_THROWS_AS(m.forward_stochastic(obs, map_r), ChannelMismatchError);
  REQUIRE_THROWS_AS(m.forward_deterministic(obs, map_u), ChannelMismatchError);
  // Wrong grid geometry.
  MapPatch wrong = map_u;
  wrong.size = 16;
  wrong.drivable.resize(256);
  REQUIRE_THROWS_AS(m.forward_stochastic(obs, wrong), ChannelMismatchError);
  MapPatch wrong_res = map_u;
  wrong_res.resolution = 2.0;
  REQUIRE_THROWS_AS(m.forward_stochastic(obs, wrong_res),
                    ChannelMismatchError);
  Observation bad_obs = obs;
  bad_obs.size = 4;
  bad_obs.values.resize(16);
  REQUIRE_THROWS_AS(m.forward_stochastic(bad_obs, map_u),
                    ChannelMismatchError);
}

TEST_CASE("loss equals a hand-computed value on a two-weight network") {
  ModelConfig cfg = small_config();  // K = 1
  SteeringModel m = SteeringModel::init(cfg, 3);
  zero_weights(m);
  // Exactly two nonzero weights: the mean head bias and the final
  // deterministic bias.
  m.stoch_head.b[1] = 0.3;
  m.det_fc2.b[0] = 0.25;
  Rng rng(13);
  BatchItem it = random_item(cfg, rng);
  it.target = 0.05;
  LossTerms terms = m.item_loss(it);

  // Scalar recomputation, term by term.
  double mu = cfg.kappa_max * std::tanh(0.3);
  double sigma = std::exp(cfg.sigma_bias);  // raw head is zero
  double z = (it.target - mu) / sigma;
  double nll =
      0.5 * z * z + std::log(sigma) + 0.5 * std::log(2.0 * std::numbers::pi);
  double phi_pen = cfg.lambda_phi * std::sqrt(1.0 + cfg.phi_eps) *
                   std::sqrt(1.0 + cfg.phi_eps);
  double dls = std::log(sigma) - cfg.log_sigma_center;
  double sigma_pen = cfg.lambda_sigma * dls * dls;
  double det_out = cfg.kappa_max * std::tanh(0.25);
  double det = (det_out - it.target) * (det_out - it.target);

  REQUIRE(terms.nll == Catch::Approx(nll).margin(1e-10));
  REQUIRE(terms.phi_pen == Catch::Approx(phi_pen).margin(1e-10));
  REQUIRE(terms.sigma_pen == Catch::Approx(sigma_pen).margin(1e-10));
  REQUIRE(terms.det == Catch::Approx(det).margin(1e-10));
  REQUIRE(m.loss({it}) ==
          Catch::Approx(nll + phi_pen + sigma_pen + det).margin(1e-10));
}

TEST_CASE("sigma at its center contributes nothing to the tether") {
  ModelConfig cfg = small_config();
  // Put the initial sigma exactly at the tether center.
  cfg.sigma_bias = cfg.log_sigma_center;
  SteeringModel m = SteeringModel::init(cfg, 4);
  zero_weights(m);
  Rng rng(15);
  BatchItem it = random_item(cfg, rng);
  it.target = 0.0;
  LossTerms terms = m.item_loss(it);
  REQUIRE(terms.sigma_pen == Catch::Approx(0.0).margin(1e-15));
  // Deterministic output equals the target here, so that term is zero too.
  REQUIRE(terms.det == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("sqrt-weight penalty prefers one-hot over uniform") {
  ModelConfig cfg;  // defaults: lambda_phi, eps
  auto penalty = [&](const std::vector<double>& phi) {
    double s = 0.0;
    for (double p : phi) s += std::sqrt(p + cfg.phi_eps);
    return cfg.lambda_phi * s * s;
  };
  std::vector<double> onehot{1.0, 0.0, 0.0};
  std::vector<double> uniform{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double p_hot = penalty(onehot);
  double p_uni = penalty(uniform);
  REQUIRE(p_hot < p_uni);
  Rng rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
    double s = a + b + c;
    double p = penalty({a / s, b / s, c / s});
    REQUIRE(p >= p_hot - 1e-12);
    REQUIRE(p <= p_uni + 1e-12);
  }
}

TEST_CASE("loss is invariant to batch order") {
  ModelConfig cfg = small_config();
  SteeringModel m = SteeringModel::init(cfg, 5);
  Rng rng(17);
  Batch batch;
  for (int i = 0; i < 5; ++i) batch.push_back(random_item(cfg, rng));
  double fwd = m.loss(batch);
  Batch rev(batch.rbegin(), batch.rend());
  REQUIRE(m.loss(rev) == Catch::Approx(fwd).epsilon(1e-12));
}

TEST_CASE("non-finite forward names the offending term") {
  ModelConfig cfg = small_config();
  SteeringModel m = SteeringModel::init(cfg, 6);
  zero_weights(m);
  // Poison the deterministic path only: NLL stays finite.
  m.det_fc2.b[0] = std::numeric_limits<double>::quiet_NaN();
  Rng rng(19);
  BatchItem it = random_item(cfg, rng);
  try {
    m.item_loss(it);
    FAIL("expected NumericOverflowError");
  } catch (const NumericOverflowError& e) {
    REQUIRE(e.term == "deterministic");
  }
  // Poison the stochastic head: the nll term trips first.
  SteeringModel m2 = SteeringModel::init(cfg, 6);
  zero_weights(m2);
  m2.stoch_head.b[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    m2.item_loss(it);
    FAIL("expected NumericOverflowError");
  } catch (const NumericOverflowError& e) {
    REQUIRE(e.term == "nll");
  }
}

TEST_CASE("default model stays under the parameter budget") {
  ModelConfig cfg;
  SteeringModel m = SteeringModel::init(cfg, 1);
  REQUIRE(m.param_count() < 100000);
  REQUIRE(m.param_count() > 1000);
}

TEST_CASE("checkpoint round-trips bitwise") {
  ModelConfig cfg = small_config();
  cfg.K = 2;
  SteeringModel m = SteeringModel::init(cfg, 21);
  std::string blob = save_checkpoint(m);
  SteeringModel back = load_checkpoint(blob);
  REQUIRE(back.cfg == m.cfg);
  std::vector<std::vector<double>> got, want;
  back.visit_tensors([&](const char*, std::vector<double>& w,
                         std::vector<double>&) { got.push_back(w); });
  m.visit_tensors([&](const char*, std::vector<double>& w,
                      std::vector<double>&) { want.push_back(w); });
  REQUIRE(got == want);
  // Same outputs on the same input.
  Rng rng(23);
  Observation obs = random_obs(cfg, rng);
  MapPatch map_u = random_map(cfg, false, rng);
  GmmParams a = m.forward_stochastic(obs, map_u);
  GmmParams b = back.forward_stochastic(obs, map_u);
  for (std::size_t i = 0; i < a.comps.size(); ++i) {
    REQUIRE(a.comps[i].phi == b.comps[i].phi);
    REQUIRE(a.comps[i].mu == b.comps[i].mu);
    REQUIRE(a.comps[i].sigma == b.comps[i].sigma);
  }
  // Saving the loaded model reproduces the same blob.
  REQUIRE(save_checkpoint(back) == blob);
}

TEST_CASE("checkpoint loading rejects malformed input") {
  REQUIRE_THROWS_AS(load_checkpoint("not json"), ConfigError);
  REQUIRE_THROWS_AS(load_checkpoint("{}"), ConfigError);
  REQUIRE_THROWS_AS(load_checkpoint(R"({"format":"bogus","version":1})"),
                    ConfigError);
  // Tensor with the wrong shape.
  ModelConfig cfg = small_config();
  SteeringModel m = SteeringModel::init(cfg, 25);
  std::string blob = save_checkpoint(m);
  auto j = nlohmann::json::parse(blob);
  j["tensors"]["stoch_head.b"] = std::vector<double>{1.0};
  REQUIRE_THROWS_AS(load_checkpoint(j.dump()), ConfigError);
}

TEST_CASE("model config validation") {
  ModelConfig cfg = small_config();
  cfg.K = 0;
  REQUIRE_THROWS_AS(SteeringModel::init(cfg, 1), ConfigError);
  cfg = small_config();
  cfg.sigma_min = -1.0;
  REQUIRE_THROWS_AS(SteeringModel::init(cfg, 1), ConfigError);
  cfg = small_config();
  cfg.phi_eps = 0.0;
  REQUIRE_THROWS_AS(SteeringModel::init(cfg, 1), ConfigError);
}
