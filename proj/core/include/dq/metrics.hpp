#pragma once

// Accuracy and ranking metrics for watch-time predictions.
//
// XAUC scores every pair with distinct true watch times: 1 if the predictions
// order the pair like the truths, 0.5 on a prediction tie, 0 otherwise. Pairs
// with equal truths are not scorable.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dq/grouping.hpp"

namespace dq {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double mae(std::span<const double> pred, std::span<const double> truth);

// O(n log n) over all pairs.
double xauc_exact(std::span<const double> pred, std::span<const double> truth);

// Mean score over num_pairs uniformly drawn scorable pairs.
double xauc_sampled(std::span<const double> pred, std::span<const double> truth, std::size_t num_pairs,
                    std::uint64_t seed);

inline std::size_t default_pair_count(std::size_t n) {
  return std::min<std::size_t>(10 * n, 10'000'000);
}

// Per-user exact XAUC averaged with weights proportional to each scored user's
// record count. Users with fewer than two records or no scorable pair are skipped.
double xgauc(std::span<const double> pred, std::span<const double> truth,
             std::span<const std::int64_t> user_ids);

struct GroupReport {
  std::size_t group = 0;
  std::size_t count = 0;
  double mae = 0.0;
  std::optional<double> xauc;  // empty when the group has no scorable pair

  bool operator==(const GroupReport&) const = default;
};

std::vector<GroupReport> duration_bias_report(std::span<const double> pred, std::span<const double> truth,
                                              std::span<const double> durations, const DurationGroups& g);

// max / min of per-group MAE over non-empty groups.
double mae_spread(const std::vector<GroupReport>& rows);

struct EvalReport {
  std::string method;
  std::size_t m = 1;
  std::size_t n = 0;
  double mae = 0.0;
  double xauc = 0.0;        // sampled, as reported in offline tables
  double xauc_exact = 0.0;
  double xgauc = 0.0;
  std::vector<GroupReport> per_group;
  std::size_t pairs_sampled = 0;
  std::uint64_t seed = 0;

  bool operator==(const EvalReport&) const = default;
};

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& r);

EvalReport evaluate(std::span<const double> pred, std::span<const double> truth,
                    std::span<const double> durations, std::span<const std::int64_t> user_ids,
                    const DurationGroups& diagnostic_groups, std::uint64_t seed,
                    std::size_t num_pairs = 0);

}  // namespace dq
