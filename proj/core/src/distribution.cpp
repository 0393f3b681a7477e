#include "dq/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dq {

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw std::invalid_argument("empirical CDF needs at least one sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::label(double w) const {
  const auto n = static_cast<double>(sorted_.size());
  auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), w);
  auto hi = std::upper_bound(lo, sorted_.end(), w);
  const double less = static_cast<double>(lo - sorted_.begin());
  const double equal = static_cast<double>(hi - lo);
  const double q = (less + 0.5 * equal) / n;
  return std::clamp(q, 0.5 / n, 1.0 - 0.5 / n);
}

double EmpiricalCdf::inverse(double q) const {
  if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("inverse_cdf: q must lie in [0, 1]");
  const std::size_t n = sorted_.size();
  // Real-valued 0-based knot position; knot i sits at (i + 0.5)/n.
  double pos = q * static_cast<double>(n) - 0.5;
  if (pos <= 0.0) return sorted_.front();
  if (pos >= static_cast<double>(n - 1)) return sorted_.back();
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) < 1e-9) pos = nearest;
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  if (frac == 0.0) return sorted_[i];
  return sorted_[i] + frac * (sorted_[i + 1] - sorted_[i]);
}

EmpiricalCdf EmpiricalCdf::compressed(std::size_t knots) const {
  if (knots == 0) throw std::invalid_argument("compressed: knot count must be >= 1");
  if (knots >= sorted_.size()) return *this;
  std::vector<double> grid;
  grid.reserve(knots);
  for (std::size_t j = 0; j < knots; ++j) {
    grid.push_back(inverse((static_cast<double>(j) + 0.5) / static_cast<double>(knots)));
  }
  return EmpiricalCdf(std::move(grid));
}

EmpiricalCdf fit_ecdf(std::span<const double> values) {
  return EmpiricalCdf(std::vector<double>(values.begin(), values.end()));
}

double cdf_label(const EmpiricalCdf& e, double w) { return e.label(w); }
double inverse_cdf(const EmpiricalCdf& e, double q) { return e.inverse(q); }

GroupSizeError::GroupSizeError(std::size_t group_, std::size_t count_, std::size_t required)
    : std::runtime_error("group " + std::to_string(group_) + " has " + std::to_string(count_) +
                         " < " + std::to_string(required) + " samples"),
      group(group_),
      count(count_) {}

GroupCdfs fit_group_cdfs(const Dataset& ds, const DurationGroups& g,
                         std::size_t min_group_samples) {
  std::vector<std::vector<double>> buckets(g.m);
  for (const auto& r : ds.records) buckets[assign_group(g, r.duration)].push_back(r.watch_time);
  const std::size_t required = std::max<std::size_t>(min_group_samples, 1);
  for (std::size_t k = 0; k < g.m; ++k) {
    if (buckets[k].size() < required) throw GroupSizeError(k, buckets[k].size(), required);
  }
  GroupCdfs out;
  out.cdfs.reserve(g.m);
  for (auto& b : buckets) out.cdfs.emplace_back(std::move(b));
  return out;
}

}  // namespace dq
