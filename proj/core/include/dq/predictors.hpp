#pragma once

// End-to-end watch-time predictors.
//
//   VR      linear head, MSE on raw watch time.
//   WLR     two sigmoid heads on a shared trunk: p_w (log-loss, positives
//           weighted by watch time) and p_q60 (unweighted log-loss). Decoded
//           as p_w / (1 - p_w) * (1 - p_q60), or the plain odds in classic mode.
//   D2Q     sigmoid head regressing the within-duration-group watch-time
//           quantile; decoded through that group's inverse ECDF.
//   ResD2Q  D2Q plus a duration tower feeding the output layer.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dq/data.hpp"
#include "dq/distribution.hpp"
#include "dq/grouping.hpp"
#include "dq/model.hpp"
#include "dq/synthgen.hpp"

namespace dq {

enum class Method { kVr, kWlr, kD2q, kResD2q };
enum class WlrMode { kAdapted, kClassic };

std::string to_string(Method m);
Method parse_method(const std::string& name);
std::string to_string(WlrMode m);
WlrMode parse_wlr_mode(const std::string& name);

bool uses_duration_groups(Method m);

struct PredictorOptions {
  std::size_t min_group_samples = kDefaultMinGroupSamples;
  WlrMode wlr_mode = WlrMode::kAdapted;
  // Hidden widths of the ResD2Q duration tower; empty turns it off.
  std::vector<std::size_t> tower_dims{16, 16};
};

struct TrainMeta {
  std::uint64_t seed = 0;
  std::uint64_t data_fingerprint = 0;
  std::size_t train_rows = 0;
  std::vector<double> epoch_losses;

  bool operator==(const TrainMeta&) const = default;
};

struct Predictor {
  Method kind = Method::kD2q;
  ModelConfig config;
  NetParams params;
  Schema schema;
  DurationGroups groups;  // D2Q / ResD2Q
  GroupCdfs group_cdfs;   // D2Q / ResD2Q
  double q60_threshold = 0.0;  // WLR
  WlrMode wlr_mode = WlrMode::kAdapted;
  TrainMeta meta;
  bool trained = false;
};

// --- labels ------------------------------------------------------------------

std::vector<double> make_d2q_labels(const Dataset& ds, const DurationGroups& g, const GroupCdfs& cdfs);

struct WlrLabels {
  std::vector<double> labels;   // 1 iff w >= threshold
  std::vector<double> weights;  // w for positives, 1 for negatives
  double threshold = 0.0;
};

// Threshold is the 0.6 quantile of watch time, inverse_cdf(ECDF, 0.6).
WlrLabels make_wlr_labels(const Dataset& ds);

// --- WLR decoding -------------------------------------------------------------

// p_w / (1 - p_w) * (1 - p_q60), p_w clamped to [eps, 1 - eps].
double wlr_expected_watch_time(double p_w, double p_q60);
// p_w / (1 - p_w).
double wlr_classic_odds(double p_w);

// --- training and inference ----------------------------------------------------

// Builds the model-input batch for a dataset (labels/weights left empty).
Batch features_batch(const Dataset& ds);

Predictor train_predictor(Method kind, const Dataset& ds, std::size_t m, const ModelConfig& base,
                          const PredictorOptions& options = {});

// Raw network outputs (B x heads) for every record.
Matrix raw_outputs(const Predictor& p, const Dataset& ds);

double predict(const Predictor& p, const InteractionRecord& features);
std::vector<double> predict_all(const Predictor& p, const Dataset& ds);

// Maps a raw head output row to watch time for the given duration.
double decode(const Predictor& p, std::span<const double> head_outputs, double duration);

// --- backdoor adjustment -------------------------------------------------------

// sum_d P(D = d) E[W | u, v, d] on an exact toy world.
double backdoor_estimate(const DiscreteToyWorld& w, std::size_t u, std::size_t v);

// The same adjustment with a trained model: sum_d P(d) * predict(u, v, d).
double backdoor_predict(const Predictor& p, const InteractionRecord& features,
                        std::span<const double> durations, std::span<const double> probs);

}  // namespace dq
