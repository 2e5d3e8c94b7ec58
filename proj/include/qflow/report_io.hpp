#pragma once

#include <string>
#include <vector>

#include "qflow/trainer.hpp"

namespace qflow {

inline constexpr const char* kMetricsCsvHeader =
    "env_steps,mean_return,std_return,critic_loss,actor_loss,flow_loss,"
    "superiority_ratio,clamp_rate,wall_seconds";

// Shortest round-trip-exact decimal representation.
std::string format_double(double value);

std::string metrics_csv_row(const TrainRecord& record);

// Streams records as they arrive; the header is written on open.
class MetricsCsvWriter {
 public:
  MetricsCsvWriter() = default;
  void open(const std::string& path);
  void append(const TrainRecord& record);
  bool is_open() const { return !path_.empty(); }

 private:
  std::string path_;
};

void write_metrics_csv(const std::string& path, const TrainReport& report);

void write_train_summary_json(const std::string& path, const TrainReport& report,
                              const TrainConfig& config);

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Minimal self-contained SVG line chart (axes, ticks, legend).
void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<SvgSeries>& series);

}  // namespace qflow
