#include "qflow/report_io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "qflow/errors.hpp"

namespace qflow {

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string metrics_csv_row(const TrainRecord& r) {
  std::string row = std::to_string(r.env_steps);
  for (double v : {r.mean_return, r.std_return, r.critic_loss, r.actor_loss, r.flow_loss,
                   r.superiority_ratio, r.clamp_rate, r.wall_seconds}) {
    row += ',';
    row += format_double(v);
  }
  return row;
}

void MetricsCsvWriter::open(const std::string& path) {
  path_ = path;
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw IoError("cannot write metrics CSV " + path_);
  out << kMetricsCsvHeader << "\n";
}

void MetricsCsvWriter::append(const TrainRecord& record) {
  if (path_.empty()) throw std::logic_error("MetricsCsvWriter: append before open");
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to metrics CSV " + path_);
  out << metrics_csv_row(record) << "\n";
}

void write_metrics_csv(const std::string& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write metrics CSV " + path);
  out << kMetricsCsvHeader << "\n";
  for (const auto& record : report.records) out << metrics_csv_row(record) << "\n";
}

void write_train_summary_json(const std::string& path, const TrainReport& report,
                              const TrainConfig& config) {
  nlohmann::json summary;
  summary["env_steps"] = report.env_steps;
  summary["critic_updates"] = report.critic_updates;
  summary["actor_updates"] = report.actor_updates;
  summary["flow_updates"] = report.flow_updates;
  summary["actions_flow"] = report.actions_flow;
  summary["actions_gaussian"] = report.actions_gaussian;
  summary["transitions_pushed"] = report.transitions_pushed;
  summary["exploration_mode"] =
      config.exploration_mode == ExplorationMode::kFlow ? "flow" : "gaussian";
  summary["seed"] = config.seed;
  if (!report.records.empty()) {
    summary["final_mean_return"] = report.records.back().mean_return;
    long gain_records = 0, gain_nonneg = 0;
    for (const auto& r : report.records) {
      if (r.value_gain_valid) {
        ++gain_records;
        if (r.value_gain >= 0.0) ++gain_nonneg;
      }
    }
    summary["value_gain_records"] = gain_records;
    summary["value_gain_nonnegative"] = gain_nonneg;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write summary " + path);
  out << summary.dump(2) << "\n";
}

void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<SvgSeries>& series) {
  constexpr int kWidth = 720, kHeight = 440;
  constexpr int kLeft = 70, kRight = 30, kTop = 40, kBottom = 50;
  const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#8c564b"};

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (first) {
        x_min = x_max = x;
        y_min = y_max = y;
        first = false;
      } else {
        x_min = std::min(x_min, x);
        x_max = std::max(x_max, x);
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
      }
    }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;

  const auto px = [&](double x) {
    return kLeft + (x - x_min) / (x_max - x_min) * (kWidth - kLeft - kRight);
  };
  const auto py = [&](double y) {
    return kHeight - kBottom - (y - y_min) / (y_max - y_min) * (kHeight - kTop - kBottom);
  };

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write SVG " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";

  // axes
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight
      << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 4.0;
    const double yv = y_min + (y_max - y_min) * i / 4.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << kHeight - kBottom + 18
        << "\" text-anchor=\"middle\">" << format_double(xv).substr(0, 8) << "</text>\n";
    out << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
        << format_double(yv).substr(0, 8) << "</text>\n";
    out << "<line x1=\"" << px(xv) << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << px(xv)
        << "\" y2=\"" << kHeight - kBottom + 4 << "\" stroke=\"black\"/>\n";
  }
  out << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (kTop + kHeight - kBottom) / 2
      << ")\">" << y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = palette[si % 5];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[si].points) out << px(x) << "," << py(y) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << kWidth - kRight - 6 << "\" y=\"" << kTop + 16 * (si + 1)
        << "\" text-anchor=\"end\" fill=\"" << color << "\">" << series[si].label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace qflow
