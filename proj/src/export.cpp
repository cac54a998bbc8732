// SPDX-License-Identifier: Apache-2.0
#include "itrlhf/export.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "itrlhf/metrics.hpp"
#include "itrlhf/orchestrator.hpp"

namespace itrlhf {

namespace fs = std::filesystem;

namespace {

struct Figure {
  std::string csv;
  std::string x_label;
  std::string y_label;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
};

struct RunRows {
  std::string strategy;
  std::vector<CheckpointRow> rows;
};

std::vector<RunRows> load_runs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("no such run directory: " + dir.string());
  std::vector<RunRows> out;
  for (const auto& run : expand_run_dirs(dir.string())) {
    RunRows r;
    r.strategy = "unknown";
    if (fs::exists(run / "manifest.json")) {
      const auto m = nlohmann::json::parse(read_text(run / "manifest.json"));
      if (m.value("status", "ok") != "ok") continue;
      if (m.contains("config") && m["config"].contains("strategy.data"))
        r.strategy = m["config"]["strategy.data"].get<std::string>();
    }
    r.rows = read_metrics(run / "metrics.jsonl");
    out.push_back(std::move(r));
  }
  if (out.empty()) throw std::runtime_error("no metrics.jsonl found under " + dir.string());
  return out;
}

double sorted_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Figure fig2(const std::vector<RunRows>& runs, double width) {
  std::map<std::string, std::vector<CheckpointRow>> by_strategy;
  for (const auto& r : runs) {
    auto& dst = by_strategy[r.strategy];
    dst.insert(dst.end(), r.rows.begin(), r.rows.end());
  }
  Figure f;
  f.x_label = "KL to SFT (bucket)";
  f.y_label = "mean gold";
  std::ostringstream os;
  os << "strategy,iteration,kl_bucket_lo,kl_bucket_hi,mean_gold,std_gold,count\n";
  for (const auto& [strategy, rows] : by_strategy) {
    for (const auto& a : aggregate_by_iteration(rows, width)) {
      const KlBucket& b = a.bucket;
      os << strategy << ',' << a.iteration << ',' << format_double(b.lo) << ',' << format_double(b.hi) << ','
         << format_double(b.mean_gold) << ',' << format_double(b.std_gold) << ',' << b.count << '\n';
      f.series[strategy + " it" + std::to_string(a.iteration)].emplace_back(b.lo, b.mean_gold);
    }
  }
  f.csv = os.str();
  return f;
}

Figure fig3(const std::vector<RunRows>& runs, double width) {
  std::vector<CheckpointRow> rows;
  for (const auto& r : runs) rows.insert(rows.end(), r.rows.begin(), r.rows.end());
  Figure f;
  f.x_label = "KL to SFT (bucket)";
  f.y_label = "score";
  std::ostringstream os;
  os << "iteration,kl_bucket,mean_gold,mean_proxy,mmd\n";
  for (const auto& a : aggregate_by_iteration(rows, width)) {
    const KlBucket& b = a.bucket;
    os << a.iteration << ',' << format_double(b.lo) << ',' << format_double(b.mean_gold) << ','
       << format_double(b.mean_proxy) << ',' << format_double(b.mmd) << '\n';
    const std::string it = "it" + std::to_string(a.iteration);
    f.series[it + " gold"].emplace_back(b.lo, b.mean_gold);
    f.series[it + " proxy"].emplace_back(b.lo, b.mean_proxy);
  }
  f.csv = os.str();
  return f;
}

Figure fig6(const std::vector<RunRows>& runs) {
  struct Cell {
    std::vector<double> gold, proxy;
  };
  std::map<std::pair<int, long>, Cell> cells;
  std::map<int, long> last_step;
  for (const auto& r : runs)
    for (const auto& row : r.rows) {
      auto& c = cells[{row.iteration, row.step}];
      c.gold.push_back(row.mean_gold);
      c.proxy.push_back(row.mean_proxy);
      last_step[row.iteration] = std::max(last_step[row.iteration], row.step);
    }
  std::map<int, long> offset;
  long acc = 0;
  for (const auto& [it, s] : last_step) {
    offset[it] = acc;
    acc += s;
  }
  Figure f;
  f.x_label = "global step";
  f.y_label = "score";
  std::ostringstream os;
  os << "iteration,step,global_step,mean_gold,mean_proxy,count\n";
  for (const auto& [key, c] : cells) {
    const long global = offset[key.first] + key.second;
    const double g = sorted_mean(c.gold), p = sorted_mean(c.proxy);
    os << key.first << ',' << key.second << ',' << global << ',' << format_double(g) << ','
       << format_double(p) << ',' << c.gold.size() << '\n';
    f.series["gold"].emplace_back(static_cast<double>(global), g);
    f.series["proxy"].emplace_back(static_cast<double>(global), p);
  }
  f.csv = os.str();
  return f;
}

Figure build(const fs::path& run_dir, const std::string& figure, const ExportOptions& opt) {
  if (std::find(figure_ids().begin(), figure_ids().end(), figure) == figure_ids().end()) {
    std::string msg = "unknown figure id '" + figure + "'; valid ids:";
    for (const auto& id : figure_ids()) msg += " " + id;
    throw UnknownFigure(msg);
  }
  auto runs = load_runs(run_dir);
  for (const auto& extra : opt.with) {
    auto more = load_runs(extra);
    runs.insert(runs.end(), more.begin(), more.end());
  }
  if (figure == "fig2") return fig2(runs, opt.bucket_width);
  if (figure == "fig3") return fig3(runs, opt.bucket_width);
  return fig6(runs);
}

std::string svg_chart(const Figure& f) {
  constexpr double W = 720, H = 420, L = 60, R = 180, T = 20, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& [_, pts] : f.series)
    for (auto [x, y] : pts) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  if (!(x1 >= x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << f.x_label << " [" << format_double(x0) << ", " << format_double(x1) << "]</text>\n"
     << "<text x=\"15\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 15 "
     << (T + H - B) / 2 << ")\" text-anchor=\"middle\">" << f.y_label << " [" << format_double(y0) << ", "
     << format_double(y1) << "]</text>\n";
  int i = 0;
  for (const auto& [name, pts] : f.series) {
    const char* colour = palette[i % 10];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : pts)
      if (std::isfinite(x) && std::isfinite(y)) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n<text x=\"" << W - R + 10 << "\" y=\"" << T + 14 * (i + 1) << "\" font-size=\"11\" fill=\""
       << colour << "\">" << name << "</text>\n";
    ++i;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::string export_figure_csv(const fs::path& run_dir, const std::string& figure, const ExportOptions& opt) {
  return build(run_dir, figure, opt).csv;
}

fs::path export_figure(const fs::path& run_dir, const std::string& figure, const fs::path& out,
                       const ExportOptions& opt) {
  const Figure f = build(run_dir, figure, opt);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(out, f.csv);
  if (!opt.svg) return {};
  fs::path chart = out;
  chart.replace_extension(".svg");
  if (chart == out) chart += ".svg";
  try {
    write_text(chart, svg_chart(f));
  } catch (const std::exception&) {
    return {};
  }
  return chart;
}

}  // namespace itrlhf
