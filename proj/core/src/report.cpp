#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "red/error.hpp"
#include "red/format.hpp"
#include "red/harness.hpp"

namespace red {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunSummary {
  fs::path dir;
  std::string estimator;
  std::string env;
  int n = 0;
  std::uint64_t seed = 0;
  std::vector<CurveRow> curve;
};

struct Point {
  double x;
  double y;
};

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

RunSummary load_record(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "CorruptRecord", "cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail("CorruptRecord", e.what());
  }
  try {
    RunSummary r;
    r.dir = path.parent_path();
    const auto& cfg = j.at("config");
    r.estimator = cfg.at("estimator").at("kind").get<std::string>();
    r.env = cfg.at("env").get<std::string>();
    r.n = cfg.at("dataset").at("n").get<int>();
    r.seed = cfg.at("seed").get<std::uint64_t>();
    for (const auto& row : j.at("curve")) {
      r.curve.push_back({row.at("env_step").get<std::int64_t>(),
                         row.at("true_reward_per_step").get<double>(),
                         row.at("true_reward_per_episode").get<double>(),
                         row.at("eval_std").get<double>(), row.at("seed").get<std::uint64_t>()});
    }
    require(!r.curve.empty(), "CorruptRecord", "empty learning curve");
    return r;
  } catch (const json::exception& e) {
    fail("CorruptRecord", e.what());
  }
}

std::vector<RewardMapRow> load_reward_map(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::vector<RewardMapRow> rows;
  if (!in || !std::getline(in, line) || line != kRewardMapCsvHeader) return rows;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    RewardMapRow r{};
    char comma = 0;
    if (ss >> r.s >> comma >> r.a >> comma >> r.score >> comma >> r.reward >> comma >> r.viz_reward) {
      rows.push_back(r);
    }
  }
  return rows;
}

class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label, double x0, double x1,
          double y0, double y1)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)),
        x0_(x0), x1_(x1 > x0 ? x1 : x0 + 1.0), y0_(y0), y1_(y1 > y0 ? y1 : y0 + 1.0) {}

  void band(const std::vector<Point>& lower, const std::vector<Point>& upper, const char* color) {
    body_ << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (const auto& p : lower) body_ << px(p.x) << ',' << py(p.y) << ' ';
    for (auto it = upper.rbegin(); it != upper.rend(); ++it) body_ << px(it->x) << ',' << py(it->y) << ' ';
    body_ << "\"/>\n";
  }

  void line(const std::vector<Point>& pts, const char* color, const std::string& label) {
    body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) body_ << px(p.x) << ',' << py(p.y) << ' ';
    body_ << "\"/>\n";
    legend_.emplace_back(label, color);
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << title_ << "</text>\n"
        << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight
        << "\" height=\"" << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x0_ + (x1_ - x0_) * i / 4.0;
      const double yv = y0_ + (y1_ - y0_) * i / 4.0;
      out << "<text x=\"" << px(xv) << "\" y=\"" << kHeight - kBottom + 16
          << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n"
          << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
          << tick(yv) << "</text>\n";
    }
    out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 8 << "\" text-anchor=\"middle\">"
        << x_label_ << "</text>\n"
        << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << kHeight / 2 << ")\">" << y_label_ << "</text>\n"
        << body_.str();
    for (std::size_t i = 0; i < legend_.size(); ++i) {
      const double y = kTop + 14 + 16 * static_cast<double>(i);
      out << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << y - 4 << "\" x2=\""
          << kWidth - kRight + 28 << "\" y2=\"" << y - 4 << "\" stroke=\"" << legend_[i].second
          << "\" stroke-width=\"2\"/>\n"
          << "<text x=\"" << kWidth - kRight + 32 << "\" y=\"" << y << "\">" << legend_[i].first
          << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
  }

 private:
  static constexpr int kWidth = 760;
  static constexpr int kHeight = 420;
  static constexpr int kLeft = 60;
  static constexpr int kRight = 140;
  static constexpr int kTop = 30;
  static constexpr int kBottom = 50;

  double px(double x) const { return kLeft + (x - x0_) / (x1_ - x0_) * (kWidth - kLeft - kRight); }
  double py(double y) const {
    return kHeight - kBottom - (y - y0_) / (y1_ - y0_) * (kHeight - kTop - kBottom);
  }
  static std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }

  std::string title_, x_label_, y_label_;
  double x0_, x1_, y0_, y1_;
  std::ostringstream body_;
  std::vector<std::pair<std::string, std::string>> legend_;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "IoError", "cannot write " + path.string());
  out << text;
}

std::vector<Point> moving_average(const std::vector<Point>& pts, int window) {
  if (window <= 1) return pts;
  std::vector<Point> out;
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    sum += pts[i].y;
    if (i >= static_cast<std::size_t>(window)) sum -= pts[i - static_cast<std::size_t>(window)].y;
    const auto count = std::min(i + 1, static_cast<std::size_t>(window));
    out.push_back({pts[i].x, sum / static_cast<double>(count)});
  }
  return out;
}

std::string learning_curve_svg(const std::vector<RunSummary>& runs, int smooth_window) {
  // One line per estimator/dataset size, averaged over seeds at shared eval steps.
  std::map<std::string, std::vector<const RunSummary*>> groups;
  for (const auto& r : runs) groups[r.estimator + " n=" + std::to_string(r.n)].push_back(&r);

  struct Series {
    std::string label;
    std::vector<Point> mean, lo, hi;
  };
  std::vector<Series> series;
  double x_max = 0.0, y_min = 0.0, y_max = 0.0;
  for (const auto& [label, members] : groups) {
    std::map<std::int64_t, std::vector<double>> by_step;
    for (const auto* r : members) {
      for (const auto& row : r->curve) by_step[row.env_step].push_back(row.true_reward_per_step);
    }
    Series s{label, {}, {}, {}};
    std::vector<Point> means, sds;
    for (const auto& [step, vals] : by_step) {
      if (vals.size() != members.size()) continue;
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(vals.size()));
      means.push_back({static_cast<double>(step), mean});
      sds.push_back({static_cast<double>(step), sd});
    }
    means = moving_average(means, smooth_window);
    sds = moving_average(sds, smooth_window);
    for (std::size_t i = 0; i < means.size(); ++i) {
      const double x = means[i].x;
      const double mean = means[i].y;
      const double sd = sds[i].y;
      s.mean.push_back({x, mean});
      s.lo.push_back({x, mean - sd});
      s.hi.push_back({x, mean + sd});
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, mean - sd);
      y_max = std::max(y_max, mean + sd);
    }
    series.push_back(std::move(s));
  }
  SvgPlot plot("True reward per step during training", "environment steps", "reward per step", 0.0,
               x_max, y_min, y_max);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    plot.band(series[i].lo, series[i].hi, color);
    plot.line(series[i].mean, color, series[i].label);
  }
  return plot.str();
}

std::string reward_map_svg(const std::string& title, const std::vector<RewardMapRow>& rows) {
  std::vector<Point> minus, plus;
  double lo = 0.0, hi = 0.0;
  for (const auto& r : rows) {
    (r.a < 0.0 ? minus : plus).push_back({r.s, r.reward});
    lo = std::min(lo, r.s);
    hi = std::max(hi, r.s);
  }
  SvgPlot plot(title, "state s", "reward", lo, hi, 0.0, 1.0);
  plot.line(minus, kPalette[1], "a = -1");
  plot.line(plus, kPalette[0], "a = +1");
  return plot.str();
}

}  // namespace

int cmd_report(const fs::path& run_dir, std::ostream& out, std::ostream& err, int smooth_window) {
  const fs::path report_dir = run_dir / "report";
  try {
    require(smooth_window >= 1, "InvalidConfig", "smoothing window must be >= 1");
    if (!fs::is_directory(run_dir)) fail("NoRuns", run_dir.string() + " is not a directory");
    std::vector<fs::path> records;
    for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
      if (entry.is_regular_file() && entry.path().filename() == "run_record.json") {
        records.push_back(entry.path());
      }
    }
    std::sort(records.begin(), records.end());

    std::vector<RunSummary> runs;
    std::ostringstream table;
    table << "run,estimator,env,n,seed,final_per_step,final_per_episode,status\n";
    for (const auto& path : records) {
      const std::string name = fs::relative(path.parent_path(), run_dir).generic_string();
      try {
        RunSummary r = load_record(path);
        const auto& last = r.curve.back();
        table << name << ',' << r.estimator << ',' << r.env << ',' << r.n << ',' << r.seed << ','
              << format_double(last.true_reward_per_step) << ','
              << format_double(last.true_reward_per_episode) << ",ok\n";
        runs.push_back(std::move(r));
      } catch (const Error& e) {
        table << name << ",,,,,,,skipped:" << e.kind() << '\n';
        err << json{{"kind", "CorruptRecord"}, {"message", e.message()}, {"run", name}}.dump() << '\n';
      }
    }
    if (runs.empty()) fail("NoRuns", "no valid run records under " + run_dir.string());

    fs::create_directories(report_dir);
    out << table.str();
    write_file(report_dir / "summary.csv", table.str());
    write_file(report_dir / "learning_curves.svg", learning_curve_svg(runs, smooth_window));

    // Reward map of the first run per estimator that has one.
    std::map<std::string, bool> drawn;
    for (const auto& r : runs) {
      if (drawn[r.estimator]) continue;
      const auto rows = load_reward_map(r.dir / "reward_map.csv");
      if (rows.empty()) continue;
      drawn[r.estimator] = true;
      write_file(report_dir / ("reward_map_" + r.estimator + ".svg"),
                 reward_map_svg("Reward map (" + r.estimator + ", n=" + std::to_string(r.n) +
                                    ", seed " + std::to_string(r.seed) + ")",
                                rows));
    }
    return kExitOk;
  } catch (const Error& e) {
    err << json{{"kind", e.kind()}, {"message", e.message()}}.dump() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << json{{"kind", "RuntimeFailure"}, {"message", e.what()}}.dump() << '\n';
    return kExitRuntimeError;
  }
}

}  // namespace red
