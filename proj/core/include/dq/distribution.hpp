#pragma once

// Per-group empirical watch-time distributions.
//
// Labels use the mid-rank convention q = (#{x < w} + 0.5 #{x == w}) / n, so
// they stay strictly inside (0, 1). The inverse interpolates linearly between
// knots ((i - 0.5)/n, x_(i)), which makes label/inverse an exact bijection on
// distinct order statistics.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "dq/data.hpp"
#include "dq/grouping.hpp"

namespace dq {

class EmpiricalCdf {
 public:
  EmpiricalCdf() = default;
  // Throws std::invalid_argument on empty input.
  explicit EmpiricalCdf(std::vector<double> values);

  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted_values() const { return sorted_; }
  double min() const { return sorted_.front(); }
  double max() const { return sorted_.back(); }

  double label(double w) const;
  double inverse(double q) const;

  // Q representative values at quantiles (j + 0.5)/Q; a compact stand-in used
  // when the full sample is too large to checkpoint.
  EmpiricalCdf compressed(std::size_t knots) const;

  bool operator==(const EmpiricalCdf&) const = default;

 private:
  std::vector<double> sorted_;
};

EmpiricalCdf fit_ecdf(std::span<const double> values);
double cdf_label(const EmpiricalCdf& e, double w);
double inverse_cdf(const EmpiricalCdf& e, double q);

// Raised when a duration group is too small to estimate its distribution.
class GroupSizeError : public std::runtime_error {
 public:
  GroupSizeError(std::size_t group, std::size_t count, std::size_t required);
  std::size_t group;
  std::size_t count;
};

struct GroupCdfs {
  std::vector<EmpiricalCdf> cdfs;  // index-aligned with DurationGroups

  std::size_t size() const { return cdfs.size(); }
  const EmpiricalCdf& operator[](std::size_t k) const { return cdfs.at(k); }
  bool operator==(const GroupCdfs&) const = default;
};

inline constexpr std::size_t kDefaultMinGroupSamples = 10;

GroupCdfs fit_group_cdfs(const Dataset& ds, const DurationGroups& g,
                         std::size_t min_group_samples = kDefaultMinGroupSamples);

}  // namespace dq
