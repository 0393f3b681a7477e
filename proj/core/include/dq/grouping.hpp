#pragma once

// Equal-frequency binning of video duration.
//
// Group k covers the half-open interval (b_k, b_{k+1}] with the outer tails
// clamped: group 0 is (-inf, b_1] and group M-1 is (b_{M-1}, +inf). Each cut
// b_i is the ceil(i*n/M)-th smallest fitting duration, so cuts are always
// observed values and boundary samples fall into the lower group.

#include <cstddef>
#include <span>
#include <vector>

namespace dq {

struct DurationGroups {
  std::size_t m = 1;
  std::vector<double> boundaries;  // M-1 non-decreasing cuts

  bool operator==(const DurationGroups&) const = default;
};

DurationGroups fit_duration_groups(std::span<const double> durations, std::size_t m);

// Total over d; out-of-range durations clamp to the first/last group.
std::size_t assign_group(const DurationGroups& g, double d);

std::vector<std::size_t> assign_groups(const DurationGroups& g, std::span<const double> durations);

std::vector<std::size_t> group_sizes(const DurationGroups& g, std::span<const double> durations);

}  // namespace dq
