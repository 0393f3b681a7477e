#include "dq/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include <gsl/gsl_integration.h>

#include "dq/model.hpp"
#include "dq/util.hpp"

namespace dq {

namespace {

constexpr std::uint64_t kWorldStream = 0x3001;
constexpr std::uint64_t kLoggedStream = 0x3002;
constexpr std::uint64_t kUnbiasedStream = 0x3003;
constexpr std::uint64_t kToyStream = 0x3004;

std::size_t uniform_index(SplitMix64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
}

// Inverse-CDF draw from unnormalized non-negative weights.
std::size_t draw_weighted(SplitMix64& rng, const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double target = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    target -= weights[i];
    if (target < 0.0) return i;
  }
  // Rounding can leave a sliver at the end; fall back to the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

double std_normal(SplitMix64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return normal(rng);
}

}  // namespace

void GenConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("GenConfig: " + what);
  };
  require(n_users >= 1 && n_videos >= 1, "n_users and n_videos must be >= 1");
  require(latent_dim >= 1, "latent_dim must be >= 1");
  require(d_min > 0.0 && std::isfinite(d_min), "d_min must be > 0");
  require(d_max >= d_min && std::isfinite(d_max), "invalid duration range: d_max < d_min");
  require(noise_sd >= 0.0, "noise_sd must be >= 0");
  require(slate_size >= 1, "slate_size must be >= 1");
}

double World::z_log_duration(double d) const {
  const double lo = std::log(config.d_min);
  const double hi = std::log(config.d_max);
  if (hi <= lo) return 0.0;
  const double mean = 0.5 * (lo + hi);
  const double sd = (hi - lo) / std::sqrt(12.0);
  return (std::log(d) - mean) / sd;
}

void World::refresh() {
  const double scale = 1.0 / std::sqrt(static_cast<double>(user_latent.cols()));
  interest = (user_latent * video_latent.transpose() * scale).unaryExpr([](double x) { return sigmoid(x); });
  video_popularity.resize(n_videos());
  user_activity.resize(n_users());
  for (std::size_t v = 0; v < n_videos(); ++v) video_popularity[v] = interest.col(static_cast<Eigen::Index>(v)).mean();
  for (std::size_t u = 0; u < n_users(); ++u) user_activity[u] = interest.row(static_cast<Eigen::Index>(u)).mean();
}

Schema World::schema() const {
  Schema s;
  s.dense_len = 3;
  s.dense_names = {"z_log_duration", "video_popularity", "user_activity"};
  s.id_vocab_sizes = {static_cast<std::int64_t>(n_users()), static_cast<std::int64_t>(n_videos())};
  s.id_names = {"user", "video"};
  return s;
}

InteractionRecord World::make_record(std::size_t user, std::size_t video, double watch_time_s) const {
  InteractionRecord r;
  r.user_id = static_cast<std::int64_t>(user);
  r.video_id = static_cast<std::int64_t>(video);
  r.duration = durations[video];
  r.watch_time = watch_time_s;
  r.dense = {z_log_duration(durations[video]), video_popularity[video], user_activity[user]};
  r.ids = {r.user_id, r.video_id};
  return r;
}

double World::watch_time(std::size_t user, std::size_t video, double noise) const {
  const double s = interest(static_cast<Eigen::Index>(user), static_cast<Eigen::Index>(video));
  return durations[video] * sigmoid(config.interest_scale * s + config.interest_offset + noise);
}

World generate_world(const GenConfig& c) {
  c.validate();
  World w;
  w.config = c;
  std::mt19937_64 rng(derive_seed(c.seed, kWorldStream));
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto p = static_cast<Eigen::Index>(c.latent_dim);
  w.user_latent.resize(static_cast<Eigen::Index>(c.n_users), p);
  w.video_latent.resize(static_cast<Eigen::Index>(c.n_videos), p);
  for (Eigen::Index i = 0; i < w.user_latent.rows(); ++i)
    for (Eigen::Index j = 0; j < p; ++j) w.user_latent(i, j) = normal(rng);
  for (Eigen::Index i = 0; i < w.video_latent.rows(); ++i)
    for (Eigen::Index j = 0; j < p; ++j) w.video_latent(i, j) = normal(rng);

  const double lo = std::log(c.d_min);
  const double hi = std::log(c.d_max);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  w.durations.resize(c.n_videos);
  for (auto& d : w.durations) {
    d = hi > lo ? std::clamp(std::exp(lo + (hi - lo) * unif(rng)), c.d_min, c.d_max) : c.d_min;
  }
  w.refresh();
  return w;
}

Dataset sample_logged_interactions(const World& w, std::size_t n, std::uint64_t seed) {
  const auto& c = w.config;
  Dataset ds;
  ds.schema = w.schema();
  ds.records.reserve(n);
  std::vector<double> z(w.n_videos());
  for (std::size_t v = 0; v < w.n_videos(); ++v) z[v] = w.z_log_duration(w.durations[v]);

  std::vector<std::size_t> slate(c.slate_size);
  std::vector<double> logits(c.slate_size);
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng(derive_seed(seed, kLoggedStream, i));
    const std::size_t user = uniform_index(rng, w.n_users());
    for (auto& v : slate) v = uniform_index(rng, w.n_videos());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < slate.size(); ++j) {
      const double s = w.interest(static_cast<Eigen::Index>(user), static_cast<Eigen::Index>(slate[j]));
      logits[j] = c.exposure_bias * z[slate[j]] + c.exposure_interest * s;
      top = std::max(top, logits[j]);
    }
    for (auto& l : logits) l = std::exp(l - top);
    const std::size_t video = slate[draw_weighted(rng, logits)];
    const double noise = c.noise_sd * std_normal(rng);
    ds.records.push_back(w.make_record(user, video, w.watch_time(user, video, noise)));
  }
  return ds;
}

Dataset sample_unbiased_test(const World& w, std::size_t n, std::uint64_t seed) {
  Dataset ds;
  ds.schema = w.schema();
  ds.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng(derive_seed(seed, kUnbiasedStream, i));
    const std::size_t user = uniform_index(rng, w.n_users());
    const std::size_t video = uniform_index(rng, w.n_videos());
    const double noise = w.config.noise_sd * std_normal(rng);
    ds.records.push_back(w.make_record(user, video, w.watch_time(user, video, noise)));
  }
  return ds;
}

namespace {

struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit HermiteRule(std::size_t n) {
    gsl_integration_fixed_workspace* ws =
        gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, n, 0.0, 1.0, 0.0, 0.0);
    if (ws == nullptr) throw std::runtime_error("failed to allocate Gauss-Hermite rule");
    const double* x = gsl_integration_fixed_nodes(ws);
    const double* wt = gsl_integration_fixed_weights(ws);
    nodes.assign(x, x + n);
    weights.assign(wt, wt + n);
    gsl_integration_fixed_free(ws);
  }
};

}  // namespace

double logit_normal_mean(double mu, double sigma) {
  if (sigma == 0.0) return sigmoid(mu);
  static const HermiteRule rule(64);
  // E f(sigma Z) = pi^{-1/2} sum_i w_i f(sqrt(2) sigma x_i)
  double total = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    total += rule.weights[i] * sigmoid(mu + std::sqrt(2.0) * sigma * rule.nodes[i]);
  }
  return total / std::sqrt(M_PI);
}

double true_expected_watch_time(const World& w, std::size_t user, std::size_t video) {
  const auto& c = w.config;
  const double s = w.interest(static_cast<Eigen::Index>(user), static_cast<Eigen::Index>(video));
  return w.durations[video] * logit_normal_mean(c.interest_scale * s + c.interest_offset, c.noise_sd);
}

// --- Discrete toy worlds ----------------------------------------------------

DiscreteToyWorld::DiscreteToyWorld(ToyWorldTables tables) : t_(std::move(tables)) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("toy world: " + what); };
  const std::size_t nd = t_.durations.size();
  if (t_.n_users == 0 || t_.n_videos == 0 || nd == 0) fail("supports of U, V and D must be non-empty");
  if (t_.duration_probs.size() != nd) fail("incomplete table: P(D) has the wrong length");
  if (t_.expected_watch.size() != t_.n_users * t_.n_videos * nd) {
    fail("incomplete table: E[W|u,v,d] needs " + std::to_string(t_.n_users * t_.n_videos * nd) +
         " entries, got " + std::to_string(t_.expected_watch.size()));
  }
  double total = 0.0;
  for (double p : t_.duration_probs) {
    if (!(p >= 0.0)) fail("P(D) entries must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("P(D) must sum to 1");
  for (double d : t_.durations) {
    if (!(d > 0.0)) fail("durations must be > 0");
  }
  for (double e : t_.expected_watch) {
    if (!std::isfinite(e)) fail("expectations must be finite");
  }
  if (!t_.exposure.empty()) {
    if (t_.exposure.size() != nd) fail("incomplete table: exposure needs one row per duration");
    for (const auto& row : t_.exposure) {
      if (row.size() != t_.n_videos) fail("incomplete table: exposure row has the wrong length");
      double s = 0.0;
      for (double p : row) {
        if (!(p >= 0.0)) fail("exposure probabilities must be >= 0");
        s += p;
      }
      if (!(s > 0.0)) fail("exposure row has no mass");
    }
  }
  if (t_.noise_rel < 0.0) fail("noise_rel must be >= 0");
}

double DiscreteToyWorld::expected_watch(std::size_t u, std::size_t v, std::size_t k) const {
  if (u >= t_.n_users || v >= t_.n_videos || k >= t_.durations.size()) {
    throw std::out_of_range("toy world: missing table entry for (u=" + std::to_string(u) +
                            ", v=" + std::to_string(v) + ", d index " + std::to_string(k) + ")");
  }
  return t_.expected_watch[(u * t_.n_videos + v) * t_.durations.size() + k];
}

double DiscreteToyWorld::exposure_prob(std::size_t v, std::size_t k) const {
  if (t_.exposure.empty()) return 1.0 / static_cast<double>(t_.n_videos);
  const auto& row = t_.exposure.at(k);
  return row.at(v) / std::accumulate(row.begin(), row.end(), 0.0);
}

Schema DiscreteToyWorld::schema() const {
  Schema s;
  s.dense_len = 0;
  s.id_vocab_sizes = {static_cast<std::int64_t>(t_.n_users), static_cast<std::int64_t>(t_.n_videos)};
  s.id_names = {"user", "video"};
  return s;
}

DiscreteToyWorld make_toy_world(ToyWorldTables tables) { return DiscreteToyWorld(std::move(tables)); }

Dataset sample_toy_interactions(const DiscreteToyWorld& w, std::size_t n, std::uint64_t seed) {
  Dataset ds;
  ds.schema = w.schema();
  ds.records.reserve(n);
  std::vector<std::vector<double>> exposure(w.n_durations(), std::vector<double>(w.n_videos()));
  for (std::size_t k = 0; k < w.n_durations(); ++k)
    for (std::size_t v = 0; v < w.n_videos(); ++v) exposure[k][v] = w.exposure_prob(v, k);

  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng(derive_seed(seed, kToyStream, i));
    const std::size_t u = uniform_index(rng, w.n_users());
    const std::size_t k = draw_weighted(rng, w.duration_probs());
    const std::size_t v = draw_weighted(rng, exposure[k]);
    const double mean = w.expected_watch(u, v, k);
    const double noise = w.tables().noise_rel > 0.0 ? w.tables().noise_rel * std_normal(rng) : 0.0;
    InteractionRecord r;
    r.user_id = static_cast<std::int64_t>(u);
    r.video_id = static_cast<std::int64_t>(v);
    r.duration = w.durations()[k];
    r.watch_time = std::max(0.0, mean * (1.0 + noise));
    r.ids = {r.user_id, r.video_id};
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace dq
