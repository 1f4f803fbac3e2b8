#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "toponav/errors.hpp"
#include "toponav/mdn.hpp"
#include "toponav/render.hpp"
#include "toponav/rng.hpp"
#include "toponav/road_graph.hpp"
#include "toponav/sim.hpp"
#include "toponav/util.hpp"

namespace toponav {

struct PoseHypothesis {
  Pose pose;
  double weight = 0.0;
};

// Discrete weighted hypothesis set. `degenerate` marks a posterior update
// whose likelihoods all underflowed (the weights are then the prior's).
struct PoseBelief {
  std::vector<PoseHypothesis> hyps;
  bool degenerate = false;
};

inline PoseBelief make_prior(const Pose& center, double sigma_xy,
                             double sigma_alpha, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("prior needs >= 1 hypothesis");
  if (sigma_xy < 0.0 || sigma_alpha < 0.0)
    throw std::invalid_argument("prior sigma must be >= 0");
  PoseBelief b;
  b.hyps.reserve(static_cast<std::size_t>(n));
  double w = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    Pose p = center;
    if (sigma_xy > 0.0) {
      p.x += rng.normal(0.0, sigma_xy);
      p.y += rng.normal(0.0, sigma_xy);
    }
    if (sigma_alpha > 0.0)
      p.alpha = wrap_angle(p.alpha + rng.normal(0.0, sigma_alpha));
    b.hyps.push_back({p, w});
  }
  return b;
}

enum class PosteriorMode { observed_steering, sampled_steering };

// Sampling distribution for the sampled-steering mode's curvature draws.
enum class SteeringSampleSource { prior_marginal, measurement };

struct PosteriorConfig {
  PosteriorMode mode = PosteriorMode::observed_steering;
  double sigma_meas = 0.005;  // 1/m, measurement noise on executed curvature
  int n_steering = 129;       // quadrature points / Monte Carlo draws
  SteeringSampleSource sample_source = SteeringSampleSource::prior_marginal;
  double kappa_max = kKappaMax;
  double stroke = 3.0;  // for per-hypothesis patch rendering
};

namespace detail {

inline double normal_pdf(double x, double mean, double sd) {
  double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

// Normalizes p_j * r_j. When every ratio equals 1 the prior weights are
// returned bit-for-bit (flat-likelihood identity); when every likelihood is
// zero the prior is returned with the degenerate flag set.
inline PoseBelief reweight(const PoseBelief& prior,
                           const std::vector<double>& likelihood) {
  double max_l = 0.0;
  for (double l : likelihood) max_l = std::max(max_l, l);
  PoseBelief out = prior;
  if (max_l <= 0.0 || !std::isfinite(max_l)) {
    out.degenerate = true;
    return out;
  }
  bool flat = true;
  std::vector<double> ratio(likelihood.size());
  for (std::size_t j = 0; j < likelihood.size(); ++j) {
    ratio[j] = likelihood[j] / max_l;
    if (ratio[j] != 1.0) flat = false;
  }
  if (flat) return out;  // posterior == prior exactly
  double total = 0.0;
  for (std::size_t j = 0; j < ratio.size(); ++j) {
    out.hyps[j].weight = prior.hyps[j].weight * ratio[j];
    total += out.hyps[j].weight;
  }
  if (total <= 0.0) {
    out = prior;
    out.degenerate = true;
    return out;
  }
  for (PoseHypothesis& h : out.hyps) h.weight /= total;
  return out;
}

}  // namespace detail

// Weights-only update given the per-hypothesis mixtures. This is the core
// shared by both modes; posterior_update supplies the mixtures by running
// the model on per-hypothesis map patches.
inline PoseBelief posterior_update_gmms(const PoseBelief& prior,
                                        const std::vector<GmmParams>& gmms,
                                        const PosteriorConfig& cfg,
                                        std::optional<double> theta_meas,
                                        Rng& rng) {
  if (prior.hyps.empty()) throw std::invalid_argument("empty belief");
  if (gmms.size() != prior.hyps.size())
    throw std::invalid_argument("one mixture per hypothesis required");
  if (cfg.n_steering < 2)
    throw std::invalid_argument("n_steering must be >= 2");

  std::size_t n = prior.hyps.size();
  std::vector<double> likelihood(n, 0.0);

  if (cfg.mode == PosteriorMode::observed_steering) {
    if (!theta_meas)
      throw std::invalid_argument(
          "observed-steering mode requires a measured curvature");
    // Fixed-grid trapezoid quadrature of N(theta; meas, sigma^2) * mixture.
    double lo = -cfg.kappa_max - 4.0 * cfg.sigma_meas;
    double hi = cfg.kappa_max + 4.0 * cfg.sigma_meas;
    double h = (hi - lo) / static_cast<double>(cfg.n_steering - 1);
    for (int k = 0; k < cfg.n_steering; ++k) {
      double x = lo + h * k;
      double wk = (k == 0 || k == cfg.n_steering - 1) ? 0.5 * h : h;
      double meas = detail::normal_pdf(x, *theta_meas, cfg.sigma_meas);
      if (meas == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j)
        likelihood[j] += wk * meas * gmm_density(gmms[j], x);
    }
  } else {
    // Verbatim sampling loop: draw curvatures, weight each hypothesis by
    // its density normalized by the prior-weighted marginal, aggregate.
    std::vector<double> prior_w(n);
    for (std::size_t j = 0; j < n; ++j) prior_w[j] = prior.hyps[j].weight;
    std::vector<double> dens(n);
    for (int k = 0; k < cfg.n_steering; ++k) {
      double theta = 0.0;
      if (cfg.sample_source == SteeringSampleSource::measurement) {
        if (!theta_meas)
          throw std::invalid_argument(
              "measurement sampling requires a measured curvature");
        theta = rng.normal(*theta_meas, cfg.sigma_meas);
      } else {
        const GmmParams& g = gmms[rng.discrete(prior_w)];
        std::vector<double> phis(g.comps.size());
        for (std::size_t i = 0; i < g.comps.size(); ++i)
          phis[i] = g.comps[i].phi;
        const GmmComponent& c = g.comps[rng.discrete(phis)];
        theta = rng.normal(c.mu, c.sigma);
      }
      double marginal = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        dens[j] = gmm_density(gmms[j], theta);
        marginal += prior_w[j] * dens[j];
      }
      if (marginal <= 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) likelihood[j] += dens[j] / marginal;
    }
  }
  return detail::reweight(prior, likelihood);
}

// Full update: renders an unrouted patch at every hypothesis pose, runs the
// stochastic head on (observation, patch), then reweights. The observation
// comes from the true pose; each hypothesis explains it with its own map.
inline PoseBelief posterior_update(const PoseBelief& prior,
                                   const Observation& obs, const RoadGraph& g,
                                   const SteeringModel& model,
                                   const PosteriorConfig& cfg,
                                   std::optional<double> theta_meas,
                                   Rng& rng) {
  std::vector<GmmParams> gmms;
  gmms.reserve(prior.hyps.size());
  for (const PoseHypothesis& h : prior.hyps) {
    MapPatch patch =
        render_patch(g, h.pose, nullptr, model.cfg.map_size,
                     model.cfg.map_resolution, cfg.stroke);
    gmms.push_back(model.forward_stochastic(obs, patch));
  }
  return posterior_update_gmms(prior, gmms, cfg, theta_meas, rng);
}

// --- belief statistics -------------------------------------------------------

struct BeliefStats {
  double spatial_variance = 0.0;  // var(x) + var(y), m^2
  double angular_variance = 0.0;  // circular, rad^2
  double total_variance = 0.0;
  double entropy = 0.0;  // nats, Gaussian approximation over (x, y, alpha)
};

inline BeliefStats belief_stats(const PoseBelief& b) {
  if (b.hyps.empty()) throw std::invalid_argument("empty belief");
  double wsum = 0.0, mx = 0.0, my = 0.0, cs = 0.0, sn = 0.0;
  for (const PoseHypothesis& h : b.hyps) {
    wsum += h.weight;
    mx += h.weight * h.pose.x;
    my += h.weight * h.pose.y;
    cs += h.weight * std::cos(h.pose.alpha);
    sn += h.weight * std::sin(h.pose.alpha);
  }
  if (!(wsum > 0.0)) throw std::invalid_argument("belief weights sum to 0");
  mx /= wsum;
  my /= wsum;
  double ma = (cs == 0.0 && sn == 0.0) ? 0.0 : std::atan2(sn, cs);

  double vx = 0.0, vy = 0.0, va = 0.0, cxy = 0.0, cxa = 0.0, cya = 0.0;
  for (const PoseHypothesis& h : b.hyps) {
    double w = h.weight / wsum;
    double dx = h.pose.x - mx;
    double dy = h.pose.y - my;
    double da = wrap_angle(h.pose.alpha - ma);
    vx += w * dx * dx;
    vy += w * dy * dy;
    va += w * da * da;
    cxy += w * dx * dy;
    cxa += w * dx * da;
    cya += w * dy * da;
  }
  BeliefStats s;
  s.spatial_variance = vx + vy;
  s.angular_variance = va;
  s.total_variance = vx + vy + va;
  // Gaussian-approximation entropy with a per-axis variance floor.
  constexpr double kFloor = 1e-12;
  double fx = std::max(vx, kFloor);
  double fy = std::max(vy, kFloor);
  double fa = std::max(va, kFloor);
  double det = fx * (fy * fa - cya * cya) - cxy * (cxy * fa - cya * cxa) +
               cxa * (cxy * cya - fy * cxa);
  det = std::max(det, kFloor * kFloor * kFloor);
  double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  s.entropy = 0.5 * std::log(two_pi_e * two_pi_e * two_pi_e * det);
  return s;
}

inline std::string belief_to_csv(const PoseBelief& b) {
  std::string out = "x,y,alpha,weight\n";
  for (const PoseHypothesis& h : b.hyps) {
    out += fmt_double(h.pose.x);
    out += ',';
    out += fmt_double(h.pose.y);
    out += ',';
    out += fmt_double(h.pose.alpha);
    out += ',';
    out += fmt_double(h.weight);
    out += '\n';
  }
  return out;
}

// --- calibration ---------------------------------------------------------------

struct CalibSample {
  Observation obs;
  MapPatch map_u;
  double target = 0.0;
};

inline constexpr double kCalibPhiMin = 0.05;

// Fraction of samples where some component with phi >= 0.05 covers the
// target within z of its own standard deviation.
inline double calibration_fraction(const SteeringModel& model,
                                   const std::vector<CalibSample>& samples,
                                   double z) {
  if (samples.empty()) throw std::invalid_argument("empty calibration set");
  if (z < 0.0) throw std::invalid_argument("z must be >= 0");
  std::size_t hits = 0;
  for (const CalibSample& s : samples) {
    GmmParams g = model.forward_stochastic(s.obs, s.map_u);
    for (const GmmComponent& c : g.comps) {
      if (c.phi >= kCalibPhiMin && std::abs(s.target - c.mu) <= z * c.sigma) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

// --- place recognition -----------------------------------------------------------

struct PlaceSample {
  Observation obs;
  double theta = 0.0;  // executed curvature at the location
};

struct ConfusionMatrix {
  int n = 0;
  std::vector<std::vector<double>> raw;         // density scores
  std::vector<std::vector<double>> normalized;  // rows sum to 1
  std::vector<int> argmax;                      // per row, lowest index wins ties
};

// score(i, j): how well location j's map patch explains the observation and
// executed steering of location i.
inline ConfusionMatrix place_recognition(const SteeringModel& model,
                                         const std::vector<PlaceSample>& locs,
                                         const std::vector<MapPatch>& patches) {
  if (locs.empty() || locs.size() != patches.size())
    throw std::invalid_argument(
        "locations and patches must be equal-length, non-empty");
  std::size_t n = locs.size();
  ConfusionMatrix m;
  m.n = static_cast<int>(n);
  m.raw.assign(n, std::vector<double>(n, 0.0));
  m.normalized = m.raw;
  m.argmax.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      GmmParams g = model.forward_stochastic(locs[i].obs, patches[j]);
      m.raw[i][j] = gmm_density(g, locs[i].theta);
      row_sum += m.raw[i][j];
    }
    int best = 0;
    for (std::size_t j = 0; j < n; ++j) {
      m.normalized[i][j] = row_sum > 0.0 ? m.raw[i][j] / row_sum
                                         : 1.0 / static_cast<double>(n);
      if (m.raw[i][j] > m.raw[i][static_cast<std::size_t>(best)])
        best = static_cast<int>(j);
    }
    m.argmax[i] = best;
  }
  return m;
}

}  // namespace toponav
