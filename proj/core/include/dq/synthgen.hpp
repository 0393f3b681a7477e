#pragma once

// Synthetic interaction worlds with a known causal structure.
//
// Users and videos carry latent vectors; interest s(u, v) = sigmoid(u.v / sqrt(p)).
// Each video has a log-uniform duration d. Watch time follows
//
//     w = d * sigmoid(a * s + b + eps),  eps ~ N(0, sigma^2)
//
// so duration acts on watch time directly, while the logging policy picks a
// video from a uniform slate with probability proportional to
// exp(alpha * z(d) + beta * s), which lets duration also drive exposure.

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dq/data.hpp"

namespace dq {

struct GenConfig {
  // Few users and a small latent space keep the world learnable from 200k
  // events; enough videos keep every group non-empty at m = 256 under alpha = 3.
  std::size_t n_users = 100;
  std::size_t n_videos = 4000;
  std::size_t latent_dim = 2;
  double d_min = 5.0;
  double d_max = 300.0;
  double interest_scale = 4.0;    // a
  double interest_offset = -2.0;  // b
  double noise_sd = 0.5;          // sigma
  double exposure_bias = 3.0;     // alpha, weight on z-scored log duration
  double exposure_interest = 2.0; // beta, weight on interest
  std::size_t slate_size = 50;
  std::uint64_t seed = 1;

  void validate() const;
};

struct World {
  GenConfig config;
  Eigen::MatrixXd user_latent;   // n_users x p
  Eigen::MatrixXd video_latent;  // n_videos x p
  std::vector<double> durations; // per video
  Eigen::MatrixXd interest;      // n_users x n_videos, cached s(u, v)
  std::vector<double> video_popularity;  // mean interest over users
  std::vector<double> user_activity;     // mean interest over videos

  std::size_t n_users() const { return static_cast<std::size_t>(user_latent.rows()); }
  std::size_t n_videos() const { return durations.size(); }
  // Log duration standardized with the log-uniform moments.
  double z_log_duration(double d) const;
  // Recomputes interest and summary statistics from the latents.
  void refresh();
  // Dataset schema shared by every dataset sampled from this world.
  Schema schema() const;
  InteractionRecord make_record(std::size_t user, std::size_t video, double watch_time) const;
  double watch_time(std::size_t user, std::size_t video, double noise) const;
};

World generate_world(const GenConfig& c);

// Events logged by a duration- and interest-biased policy.
Dataset sample_logged_interactions(const World& w, std::size_t n, std::uint64_t seed);

// Uniform user and uniform video: the exposure-bias-free distribution.
Dataset sample_unbiased_test(const World& w, std::size_t n, std::uint64_t seed);

// d_v * E[sigmoid(a s + b + eps)], integrated with 64-point Gauss-Hermite.
double true_expected_watch_time(const World& w, std::size_t user, std::size_t video);

// E[sigmoid(mu + eps)], eps ~ N(0, sigma^2).
double logit_normal_mean(double mu, double sigma);

// --- Discrete toy worlds ----------------------------------------------------

struct ToyWorldTables {
  std::size_t n_users = 0;
  std::size_t n_videos = 0;
  std::vector<double> durations;       // support of D
  std::vector<double> duration_probs;  // P(D = d)
  // E[W | u, v, d] at index (u * n_videos + v) * n_durations + k.
  std::vector<double> expected_watch;
  // Logging policy P(V = v | D = d_k), row k; empty means uniform.
  std::vector<std::vector<double>> exposure;
  // Watch time is E[W|u,v,d] * (1 + noise_rel * N(0, 1)), floored at 0.
  double noise_rel = 0.0;
};

class DiscreteToyWorld {
 public:
  explicit DiscreteToyWorld(ToyWorldTables tables);

  std::size_t n_users() const { return t_.n_users; }
  std::size_t n_videos() const { return t_.n_videos; }
  std::size_t n_durations() const { return t_.durations.size(); }
  const std::vector<double>& durations() const { return t_.durations; }
  const std::vector<double>& duration_probs() const { return t_.duration_probs; }
  const ToyWorldTables& tables() const { return t_; }

  // Throws std::out_of_range for a missing table entry.
  double expected_watch(std::size_t u, std::size_t v, std::size_t k) const;
  double exposure_prob(std::size_t v, std::size_t k) const;

  Schema schema() const;

 private:
  ToyWorldTables t_;
};

// Validates the tables (complete, P(D) sums to 1, finite expectations).
DiscreteToyWorld make_toy_world(ToyWorldTables tables);

// u uniform, d ~ P(D), v ~ P(V | d); ids = [u, v], no dense features.
Dataset sample_toy_interactions(const DiscreteToyWorld& w, std::size_t n, std::uint64_t seed);

}  // namespace dq
