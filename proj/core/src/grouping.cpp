#include "dq/grouping.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dq {

DurationGroups fit_duration_groups(std::span<const double> durations, std::size_t m) {
  const std::size_t n = durations.size();
  if (n == 0) throw std::invalid_argument("fit_duration_groups: empty duration list");
  if (m < 1) throw std::invalid_argument("fit_duration_groups: group count must be >= 1");
  if (m > n) {
    throw std::invalid_argument("fit_duration_groups: group count " + std::to_string(m) +
                                " exceeds sample count " + std::to_string(n));
  }
  std::vector<double> sorted(durations.begin(), durations.end());
  std::sort(sorted.begin(), sorted.end());

  DurationGroups g;
  g.m = m;
  g.boundaries.reserve(m - 1);
  for (std::size_t i = 1; i < m; ++i) {
    const std::size_t rank = (i * n + m - 1) / m;  // ceil(i*n/m), 1-indexed
    g.boundaries.push_back(sorted[rank - 1]);
  }
  return g;
}

std::size_t assign_group(const DurationGroups& g, double d) {
  auto it = std::lower_bound(g.boundaries.begin(), g.boundaries.end(), d);
  return static_cast<std::size_t>(it - g.boundaries.begin());
}

std::vector<std::size_t> assign_groups(const DurationGroups& g, std::span<const double> durations) {
  std::vector<std::size_t> out;
  out.reserve(durations.size());
  for (double d : durations) out.push_back(assign_group(g, d));
  return out;
}

std::vector<std::size_t> group_sizes(const DurationGroups& g, std::span<const double> durations) {
  std::vector<std::size_t> counts(g.m, 0);
  for (double d : durations) ++counts[assign_group(g, d)];
  return counts;
}

}  // namespace dq
