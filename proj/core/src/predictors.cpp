#include "dq/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dq {

std::string to_string(Method m) {
  switch (m) {
    case Method::kVr: return "vr";
    case Method::kWlr: return "wlr";
    case Method::kD2q: return "d2q";
    case Method::kResD2q: return "resd2q";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "vr") return Method::kVr;
  if (name == "wlr") return Method::kWlr;
  if (name == "d2q") return Method::kD2q;
  if (name == "resd2q") return Method::kResD2q;
  throw std::invalid_argument("unknown method '" + name + "' (expected vr, wlr, d2q or resd2q)");
}

std::string to_string(WlrMode m) { return m == WlrMode::kAdapted ? "adapted" : "classic"; }

WlrMode parse_wlr_mode(const std::string& name) {
  if (name == "adapted") return WlrMode::kAdapted;
  if (name == "classic") return WlrMode::kClassic;
  throw std::invalid_argument("unknown WLR mode '" + name + "' (expected adapted or classic)");
}

bool uses_duration_groups(Method m) { return m == Method::kD2q || m == Method::kResD2q; }

std::vector<double> make_d2q_labels(const Dataset& ds, const DurationGroups& g, const GroupCdfs& cdfs) {
  if (cdfs.size() != g.m) throw std::invalid_argument("make_d2q_labels: groups and CDFs are not aligned");
  std::vector<double> labels;
  labels.reserve(ds.size());
  for (const auto& r : ds.records) labels.push_back(cdf_label(cdfs[assign_group(g, r.duration)], r.watch_time));
  return labels;
}

WlrLabels make_wlr_labels(const Dataset& ds) {
  if (ds.empty()) throw std::invalid_argument("make_wlr_labels: empty dataset");
  WlrLabels out;
  const auto watch = ds.watch_times();
  out.threshold = inverse_cdf(fit_ecdf(watch), 0.6);
  out.labels.reserve(watch.size());
  out.weights.reserve(watch.size());
  for (double w : watch) {
    const bool positive = w >= out.threshold;
    out.labels.push_back(positive ? 1.0 : 0.0);
    out.weights.push_back(positive ? w : 1.0);
  }
  return out;
}

double wlr_expected_watch_time(double p_w, double p_q60) {
  return wlr_classic_odds(p_w) * (1.0 - p_q60);
}

double wlr_classic_odds(double p_w) {
  const double p = std::clamp(p_w, kProbEps, 1.0 - kProbEps);
  return p / (1.0 - p);
}

Batch features_batch(const Dataset& ds) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  Batch b;
  b.dense.resize(n, static_cast<Eigen::Index>(ds.schema.dense_len));
  b.ids.resize(n, static_cast<Eigen::Index>(ds.schema.id_slots()));
  b.duration.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = ds.records[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < b.dense.cols(); ++j) b.dense(i, j) = r.dense.at(static_cast<std::size_t>(j));
    for (Eigen::Index j = 0; j < b.ids.cols(); ++j) b.ids(i, j) = r.ids.at(static_cast<std::size_t>(j));
    b.duration(i) = r.duration;
  }
  return b;
}

Predictor train_predictor(Method kind, const Dataset& ds, std::size_t m, const ModelConfig& base,
                          const PredictorOptions& options) {
  validate_dataset(ds);
  if (m < 1) throw std::invalid_argument("group count must be >= 1");
  if (!uses_duration_groups(kind) && m > 1) {
    throw std::invalid_argument("m>1 invalid for " + to_string(kind));
  }

  Predictor p;
  p.kind = kind;
  p.schema = ds.schema;
  p.wlr_mode = options.wlr_mode;
  p.config = base;
  p.config.dense_len = ds.schema.dense_len;
  p.config.id_vocab_sizes = ds.schema.id_vocab_sizes;
  p.config.duration_tower.clear();

  const auto durations = ds.durations();
  const double n = static_cast<double>(ds.size());
  const double mean = std::accumulate(durations.begin(), durations.end(), 0.0) / n;
  double var = 0.0;
  for (double d : durations) var += (d - mean) * (d - mean);
  const double sd = std::sqrt(var / n);
  p.config.duration_mean = mean;
  p.config.duration_scale = sd > 0.0 ? sd : 1.0;

  Batch data = features_batch(ds);
  const auto rows = static_cast<Eigen::Index>(ds.size());
  LossKind loss = LossKind::kMse;

  switch (kind) {
    case Method::kVr: {
      p.config.output_head = OutputHead::kLinear;
      p.config.num_heads = 1;
      data.labels.resize(rows, 1);
      for (Eigen::Index i = 0; i < rows; ++i) data.labels(i, 0) = ds.records[static_cast<std::size_t>(i)].watch_time;
      data.weights = Matrix::Ones(rows, 1);
      break;
    }
    case Method::kWlr: {
      p.config.output_head = OutputHead::kSigmoid;
      p.config.num_heads = 2;
      const WlrLabels wl = make_wlr_labels(ds);
      p.q60_threshold = wl.threshold;
      data.labels.resize(rows, 2);
      data.weights.resize(rows, 2);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const auto k = static_cast<std::size_t>(i);
        data.labels(i, 0) = data.labels(i, 1) = wl.labels[k];
        data.weights(i, 0) = wl.weights[k];
        data.weights(i, 1) = 1.0;
      }
      loss = LossKind::kLogLoss;
      break;
    }
    case Method::kD2q:
    case Method::kResD2q: {
      p.config.output_head = OutputHead::kSigmoid;
      p.config.num_heads = 1;
      if (kind == Method::kResD2q) p.config.duration_tower = options.tower_dims;
      p.groups = fit_duration_groups(durations, m);
      p.group_cdfs = fit_group_cdfs(ds, p.groups, options.min_group_samples);
      const auto labels = make_d2q_labels(ds, p.groups, p.group_cdfs);
      data.labels = Eigen::Map<const Vector>(labels.data(), rows);
      data.weights = Matrix::Ones(rows, 1);
      break;
    }
  }

  TrainResult trained = train(p.config, data, loss);
  p.params = std::move(trained.params);
  p.meta.seed = p.config.seed;
  p.meta.data_fingerprint = fingerprint(ds);
  p.meta.train_rows = ds.size();
  p.meta.epoch_losses = std::move(trained.epoch_losses);
  p.trained = true;
  return p;
}

Matrix raw_outputs(const Predictor& p, const Dataset& ds) {
  if (!p.trained) throw std::logic_error("predictor has not been trained");
  constexpr std::size_t kChunk = 4096;
  const Batch all = features_batch(ds);
  Matrix out(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(p.config.num_heads));
  std::vector<std::size_t> index;
  for (std::size_t start = 0; start < ds.size(); start += kChunk) {
    const std::size_t stop = std::min(ds.size(), start + kChunk);
    index.resize(stop - start);
    std::iota(index.begin(), index.end(), start);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(stop - start)) =
        forward(p.params, p.config, all.rows(index));
  }
  return out;
}

double decode(const Predictor& p, std::span<const double> head, double duration) {
  if (!(duration > 0.0)) throw std::invalid_argument("predict: duration must be > 0");
  switch (p.kind) {
    case Method::kVr:
      return std::max(0.0, head[0]);
    case Method::kWlr:
      return p.wlr_mode == WlrMode::kAdapted ? wlr_expected_watch_time(head[0], head[1])
                                             : wlr_classic_odds(head[0]);
    case Method::kD2q:
    case Method::kResD2q: {
      const std::size_t k = assign_group(p.groups, duration);
      return inverse_cdf(p.group_cdfs[k], std::clamp(head[0], 0.0, 1.0));
    }
  }
  return 0.0;
}

std::vector<double> predict_all(const Predictor& p, const Dataset& ds) {
  for (const auto& r : ds.records) {
    if (!(r.duration > 0.0)) throw std::invalid_argument("predict: duration must be > 0");
  }
  const Matrix out = raw_outputs(p, ds);
  std::vector<double> preds(ds.size());
  std::vector<double> row(static_cast<std::size_t>(out.cols()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (Eigen::Index h = 0; h < out.cols(); ++h) row[static_cast<std::size_t>(h)] = out(static_cast<Eigen::Index>(i), h);
    preds[i] = decode(p, row, ds.records[i].duration);
  }
  return preds;
}

double predict(const Predictor& p, const InteractionRecord& features) {
  Dataset one;
  one.schema = p.schema;
  one.records.push_back(features);
  return predict_all(p, one).front();
}

double backdoor_estimate(const DiscreteToyWorld& w, std::size_t u, std::size_t v) {
  double total = 0.0;
  for (std::size_t k = 0; k < w.n_durations(); ++k) total += w.duration_probs()[k] * w.expected_watch(u, v, k);
  return total;
}

double backdoor_predict(const Predictor& p, const InteractionRecord& features,
                        std::span<const double> durations, std::span<const double> probs) {
  if (durations.size() != probs.size() || durations.empty()) {
    throw std::invalid_argument("backdoor_predict: durations and probabilities must align");
  }
  Dataset ds;
  ds.schema = p.schema;
  for (double d : durations) {
    InteractionRecord r = features;
    r.duration = d;
    ds.records.push_back(std::move(r));
  }
  const auto preds = predict_all(p, ds);
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += probs[i] * preds[i];
  return total;
}

}  // namespace dq
