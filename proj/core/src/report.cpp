#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "dq/harness.hpp"

namespace dq {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

std::vector<MethodCurve> aggregate(const std::vector<SweepRow>& rows) {
  std::vector<Method> order;
  std::map<Method, std::map<std::size_t, std::vector<const SweepRow*>>> cells;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
    if (r.ok) cells[r.method][r.m].push_back(&r);
  }
  std::vector<MethodCurve> curves;
  for (auto method : order) {
    MethodCurve c{method, {}, {}, {}, {}};
    for (const auto& [m, members] : cells[method]) {
      double x = 0, xa = 0, e = 0;
      for (const auto* r : members) {
        x += r->xgauc;
        xa += r->xauc;
        e += r->mae;
      }
      const auto k = static_cast<double>(members.size());
      c.m.push_back(m);
      c.mean_xgauc.push_back(x / k);
      c.mean_xauc.push_back(xa / k);
      c.mean_mae.push_back(e / k);
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

std::string results_csv(const std::vector<SweepRow>& rows, bool with_wall_time) {
  std::ostringstream os;
  os << "method,m,seed,mae,xauc,xgauc,wall_time_s\n";
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << r.m << ',' << r.seed << ',';
    if (r.ok) {
      os << fmt("%.10g", r.mae) << ',' << fmt("%.10g", r.xauc) << ',' << fmt("%.10g", r.xgauc);
    } else {
      os << "nan,nan,nan";
    }
    os << ',' << (with_wall_time ? fmt("%.3f", r.wall_time_s) : std::string()) << '\n';
  }
  return os.str();
}

std::string summary_markdown(const std::vector<SweepRow>& rows) {
  const auto curves = aggregate(rows);
  std::set<std::size_t> ms;
  for (const auto& c : curves) ms.insert(c.m.begin(), c.m.end());
  std::set<std::uint64_t> seeds;
  for (const auto& r : rows) seeds.insert(r.seed);

  std::ostringstream os;
  os << "# Offline evaluation (mean over " << seeds.size() << " seed" << (seeds.size() == 1 ? "" : "s")
     << ")\n\n";
  os << "| #Groups | Method | XAUC | XGAUC | MAE |\n";
  os << "|---:|---|---:|---:|---:|\n";
  for (auto m : ms) {
    for (const auto& c : curves) {
      auto it = std::find(c.m.begin(), c.m.end(), m);
      if (it == c.m.end()) continue;
      const auto i = static_cast<std::size_t>(it - c.m.begin());
      os << "| " << m << " | " << to_string(c.method) << " | " << fmt("%.4f", c.mean_xauc[i]) << " | "
         << fmt("%.4f", c.mean_xgauc[i]) << " | " << fmt("%.4f", c.mean_mae[i]) << " |\n";
    }
  }
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.ok ? 0 : 1;
  if (failed > 0) {
    os << "\n## Failed cells\n\n";
    for (const auto& r : rows) {
      if (!r.ok) os << "- " << to_string(r.method) << " m=" << r.m << " seed=" << r.seed << ": " << r.error << "\n";
    }
  }
  return os.str();
}

std::string xgauc_chart_svg(const std::vector<SweepRow>& rows) {
  const auto curves = aggregate(rows);
  std::set<std::size_t> mset;
  double lo = 1.0, hi = 0.0;
  for (const auto& c : curves) {
    mset.insert(c.m.begin(), c.m.end());
    for (double v : c.mean_xgauc) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const std::vector<std::size_t> ms(mset.begin(), mset.end());
  if (ms.empty() || hi < lo) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\"></svg>\n";
  }
  const double pad = std::max(0.002, 0.1 * (hi - lo));
  lo -= pad;
  hi += pad;

  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 150, kTop = 30, kBottom = 60;
  const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
  auto x_of = [&](std::size_t m) {
    const auto i = static_cast<double>(std::find(ms.begin(), ms.end(), m) - ms.begin());
    return ms.size() == 1 ? kLeft + plot_w / 2 : kLeft + plot_w * i / static_cast<double>(ms.size() - 1);
  };
  auto y_of = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

  static const std::map<Method, const char*> kColor{{Method::kVr, "#555555"},
                                                    {Method::kWlr, "#000000"},
                                                    {Method::kD2q, "#1f4fd1"},
                                                    {Method::kResD2q, "#e08a00"}};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
     << kTop + plot_h << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + plot_h
     << "\" stroke=\"black\"/>\n";
  for (auto m : ms) {
    os << "<text x=\"" << fmt("%.1f", x_of(m)) << "\" y=\"" << kTop + plot_h + 18 << "\" text-anchor=\"middle\">" << m
       << "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt("%.1f", y_of(v) + 4) << "\" text-anchor=\"end\">"
       << fmt("%.2f", 100.0 * v) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kH - 18 << "\" text-anchor=\"middle\"># Duration groups</text>\n";
  os << "<text x=\"18\" y=\"" << kTop + plot_h / 2 << "\" transform=\"rotate(-90 18 " << kTop + plot_h / 2
     << ")\" text-anchor=\"middle\">XGAUC (%)</text>\n";

  double legend_y = kTop + 10;
  for (const auto& c : curves) {
    const char* color = kColor.at(c.method);
    if (!uses_duration_groups(c.method)) {
      if (c.mean_xgauc.empty()) continue;
      const double y = y_of(c.mean_xgauc.front());
      os << "<line x1=\"" << kLeft << "\" y1=\"" << fmt("%.1f", y) << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
         << fmt("%.1f", y) << "\" stroke=\"" << color << "\" stroke-dasharray=\"6 4\"/>\n";
    } else {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < c.m.size(); ++i) {
        os << (i ? " " : "") << fmt("%.1f", x_of(c.m[i])) << ',' << fmt("%.1f", y_of(c.mean_xgauc[i]));
      }
      os << "\"/>\n";
      for (std::size_t i = 0; i < c.m.size(); ++i) {
        os << "<circle cx=\"" << fmt("%.1f", x_of(c.m[i])) << "\" cy=\"" << fmt("%.1f", y_of(c.mean_xgauc[i]))
           << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    os << "<line x1=\"" << kW - kRight + 15 << "\" y1=\"" << legend_y << "\" x2=\"" << kW - kRight + 40 << "\" y2=\""
       << legend_y << "\" stroke=\"" << color << "\" stroke-width=\"2\""
       << (uses_duration_groups(c.method) ? "" : " stroke-dasharray=\"6 4\"") << "/>\n";
    os << "<text x=\"" << kW - kRight + 46 << "\" y=\"" << legend_y + 4 << "\">" << to_string(c.method) << "</text>\n";
    legend_y += 20;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dq
