#include "dq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dq/util.hpp"

namespace dq {

namespace {

void require_aligned(std::span<const double> pred, std::span<const double> truth, const char* who) {
  if (pred.size() != truth.size()) throw MetricError(std::string(who) + ": length mismatch");
}

// Fenwick tree over prediction ranks.
class RankCounter {
 public:
  explicit RankCounter(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t rank) {
    for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  // Number of inserted ranks < rank.
  std::uint64_t below(std::size_t rank) const {
    std::uint64_t s = 0;
    for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::uint64_t> tree_;
};

double pair_score(double pi, double pj, double ti, double tj) {
  if (pi == pj) return 0.5;
  return ((pi < pj) == (ti < tj)) ? 1.0 : 0.0;
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  require_aligned(pred, truth, "mae");
  if (pred.empty()) throw MetricError("mae: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += std::abs(truth[i] - pred[i]);
  return total / static_cast<double>(pred.size());
}

double xauc_exact(std::span<const double> pred, std::span<const double> truth) {
  require_aligned(pred, truth, "xauc");
  const std::size_t n = pred.size();
  if (n < 2) throw MetricError("xauc: need at least two samples");

  std::vector<double> levels(pred.begin(), pred.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  auto rank_of = [&levels](double v) {
    return static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), v) - levels.begin());
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&truth](std::size_t a, std::size_t b) { return truth[a] < truth[b]; });

  RankCounter counter(levels.size());
  std::uint64_t concordant = 0, pred_ties = 0, truth_tie_pairs = 0, inserted = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t stop = start;
    while (stop < n && truth[order[stop]] == truth[order[start]]) ++stop;
    const std::uint64_t block = stop - start;
    truth_tie_pairs += block * (block - 1) / 2;
    for (std::size_t i = start; i < stop; ++i) {
      const std::size_t r = rank_of(pred[order[i]]);
      const std::uint64_t lt = counter.below(r);
      const std::uint64_t le = counter.below(r + 1);
      concordant += lt;
      pred_ties += le - lt;
    }
    for (std::size_t i = start; i < stop; ++i) counter.add(rank_of(pred[order[i]]));
    inserted += block;
    start = stop;
  }
  const std::uint64_t total_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t scored = total_pairs - truth_tie_pairs;
  if (scored == 0) throw MetricError("xauc: no scorable pair (all truths equal)");
  return (static_cast<double>(concordant) + 0.5 * static_cast<double>(pred_ties)) / static_cast<double>(scored);
}

double xauc_sampled(std::span<const double> pred, std::span<const double> truth, std::size_t num_pairs,
                    std::uint64_t seed) {
  require_aligned(pred, truth, "xauc");
  const std::size_t n = pred.size();
  if (n < 2) throw MetricError("xauc: need at least two samples");
  if (num_pairs < 1) throw MetricError("xauc: num_pairs must be >= 1");
  const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
  if (*lo == *hi) throw MetricError("xauc: no scorable pair (all truths equal)");

  SplitMix64 rng(seed);
  auto index = [&rng, n] {
    return std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
  };
  double total = 0.0;
  for (std::size_t k = 0; k < num_pairs; ++k) {
    std::size_t i, j;
    do {
      i = index();
      j = index();
    } while (i == j || truth[i] == truth[j]);
    total += pair_score(pred[i], pred[j], truth[i], truth[j]);
  }
  return total / static_cast<double>(num_pairs);
}

double xgauc(std::span<const double> pred, std::span<const double> truth,
             std::span<const std::int64_t> user_ids) {
  require_aligned(pred, truth, "xgauc");
  if (user_ids.size() != pred.size()) throw MetricError("xgauc: length mismatch");
  std::map<std::int64_t, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < user_ids.size(); ++i) by_user[user_ids[i]].push_back(i);

  double weighted = 0.0, weight = 0.0;
  std::vector<double> up, ut;
  for (const auto& [user, rows] : by_user) {
    if (rows.size() < 2) continue;
    up.clear();
    ut.clear();
    for (auto i : rows) {
      up.push_back(pred[i]);
      ut.push_back(truth[i]);
    }
    const auto [lo, hi] = std::minmax_element(ut.begin(), ut.end());
    if (*lo == *hi) continue;
    const double count = static_cast<double>(rows.size());
    weighted += count * xauc_exact(up, ut);
    weight += count;
  }
  if (weight == 0.0) throw MetricError("xgauc: no user has a scorable pair");
  return weighted / weight;
}

std::vector<GroupReport> duration_bias_report(std::span<const double> pred, std::span<const double> truth,
                                              std::span<const double> durations, const DurationGroups& g) {
  require_aligned(pred, truth, "duration_bias_report");
  if (durations.size() != pred.size()) throw MetricError("duration_bias_report: length mismatch");
  std::vector<std::vector<std::size_t>> members(g.m);
  for (std::size_t i = 0; i < durations.size(); ++i) members[assign_group(g, durations[i])].push_back(i);

  std::vector<GroupReport> rows;
  std::vector<double> gp, gt;
  for (std::size_t k = 0; k < g.m; ++k) {
    GroupReport row;
    row.group = k;
    row.count = members[k].size();
    gp.clear();
    gt.clear();
    for (auto i : members[k]) {
      gp.push_back(pred[i]);
      gt.push_back(truth[i]);
    }
    if (!gp.empty()) row.mae = mae(gp, gt);
    if (gp.size() >= 2 && *std::min_element(gt.begin(), gt.end()) != *std::max_element(gt.begin(), gt.end())) {
      row.xauc = xauc_exact(gp, gt);
    }
    rows.push_back(row);
  }
  return rows;
}

double mae_spread(const std::vector<GroupReport>& rows) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : rows) {
    if (r.count == 0) continue;
    lo = std::min(lo, r.mae);
    hi = std::max(hi, r.mae);
  }
  if (!std::isfinite(lo)) throw MetricError("mae_spread: no non-empty group");
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

EvalReport evaluate(std::span<const double> pred, std::span<const double> truth,
                    std::span<const double> durations, std::span<const std::int64_t> user_ids,
                    const DurationGroups& diagnostic_groups, std::uint64_t seed, std::size_t num_pairs) {
  EvalReport r;
  r.n = pred.size();
  r.seed = seed;
  r.pairs_sampled = num_pairs > 0 ? num_pairs : default_pair_count(pred.size());
  r.mae = mae(pred, truth);
  r.xauc = xauc_sampled(pred, truth, r.pairs_sampled, seed);
  r.xauc_exact = xauc_exact(pred, truth);
  r.xgauc = xgauc(pred, truth, user_ids);
  r.per_group = duration_bias_report(pred, truth, durations, diagnostic_groups);
  return r;
}

// --- serialization -------------------------------------------------------------

using nlohmann::json;

std::string report_to_json(const EvalReport& r) {
  json groups = json::array();
  for (const auto& g : r.per_group) {
    groups.push_back({{"group", g.group},
                      {"count", g.count},
                      {"mae", g.mae},
                      {"xauc", g.xauc ? json(*g.xauc) : json(nullptr)}});
  }
  json j{{"method", r.method},           {"m", r.m},
         {"n", r.n},                     {"mae", r.mae},
         {"xauc", r.xauc},               {"xauc_exact", r.xauc_exact},
         {"xgauc", r.xgauc},             {"per_group", groups},
         {"pairs_sampled", r.pairs_sampled}, {"seed", r.seed}};
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  EvalReport r;
  r.method = j.at("method").get<std::string>();
  r.m = j.at("m").get<std::size_t>();
  r.n = j.at("n").get<std::size_t>();
  r.mae = j.at("mae").get<double>();
  r.xauc = j.at("xauc").get<double>();
  r.xauc_exact = j.at("xauc_exact").get<double>();
  r.xgauc = j.at("xgauc").get<double>();
  r.pairs_sampled = j.at("pairs_sampled").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& g : j.at("per_group")) {
    GroupReport row;
    row.group = g.at("group").get<std::size_t>();
    row.count = g.at("count").get<std::size_t>();
    row.mae = g.at("mae").get<double>();
    if (!g.at("xauc").is_null()) row.xauc = g.at("xauc").get<double>();
    r.per_group.push_back(row);
  }
  return r;
}

std::string report_csv_header() { return "method,m,n,mae,xauc,xauc_exact,xgauc,pairs_sampled,seed"; }

std::string report_csv_row(const EvalReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.method << ',' << r.m << ',' << r.n << ',' << r.mae << ',' << r.xauc << ',' << r.xauc_exact << ','
     << r.xgauc << ',' << r.pairs_sampled << ',' << r.seed;
  return os.str();
}

}  // namespace dq
