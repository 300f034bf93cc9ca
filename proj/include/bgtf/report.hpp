#pragma once
// Benchmark report assembly and rendering: aligned text, CSV, markdown, and
// SVG bar charts. Layout mirrors the five-metric comparison table
// Model | MSE | RMSE | MAE | MAPE | R^2, plus the two-row ablation pair.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "bgtf/metrics.hpp"

namespace bgtf {

struct BenchmarkReport {
  std::vector<MetricsReport> table;     // benchmark rows, five models
  std::vector<MetricsReport> ablation;  // {transformer, hybrid}
  std::vector<std::string> failed;      // models whose training failed
};

namespace detail {

inline std::string full_precision(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fixed3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

inline std::string r2_cell(const MetricsReport& r, bool full) {
  if (!r.r2.has_value()) return "n/a";
  return full ? full_precision(*r.r2) : fixed3(*r.r2);
}

}  // namespace detail

inline const std::vector<std::string> kReportColumns = {"Model", "MSE", "RMSE", "MAE", "MAPE", "R²"};

// CSV carries full precision so RMSE = sqrt(MSE) can be re-verified exactly
// from the emitted file; the display renderers round to 3 decimals.
inline std::string render_csv(const BenchmarkReport& rep) {
  std::ostringstream os;
  os << "section,model,mse,rmse,mae,mape,r2,n\n";
  auto row = [&os](const char* section, const MetricsReport& r) {
    os << section << ',' << r.model << ',' << detail::full_precision(r.mse) << ','
       << detail::full_precision(r.rmse) << ',' << detail::full_precision(r.mae) << ','
       << detail::full_precision(r.mape_percent) << ','
       << (r.r2 ? detail::full_precision(*r.r2) : "") << ',' << r.n << '\n';
  };
  for (const MetricsReport& r : rep.table) row("benchmark", r);
  for (const MetricsReport& r : rep.ablation) row("ablation", r);
  for (const std::string& name : rep.failed) os << "failed," << name << ",,,,,,\n";
  return os.str();
}

inline std::string render_markdown(const BenchmarkReport& rep) {
  std::ostringstream os;
  auto emit_table = [&os](const std::vector<MetricsReport>& rows) {
    os << "| Model | MSE | RMSE | MAE | MAPE | R² |\n";
    os << "| --- | --- | --- | --- | --- | --- |\n";
    for (const MetricsReport& r : rows) {
      os << "| " << r.model << " | " << detail::fixed3(r.mse) << " | " << detail::fixed3(r.rmse)
         << " | " << detail::fixed3(r.mae) << " | " << detail::fixed3(r.mape_percent) << " | "
         << detail::r2_cell(r, false) << " |\n";
    }
  };
  os << "## Benchmark\n\n";
  emit_table(rep.table);
  os << "\n## Ablation\n\n";
  emit_table(rep.ablation);
  if (!rep.failed.empty()) {
    os << "\nFailed models:";
    for (const std::string& name : rep.failed) os << ' ' << name;
    os << '\n';
  }
  return os.str();
}

inline std::string render_text(const BenchmarkReport& rep) {
  std::ostringstream os;
  auto emit_table = [&os](const std::vector<MetricsReport>& rows) {
    os << std::left << std::setw(16) << "Model" << std::right << std::setw(12) << "MSE"
       << std::setw(12) << "RMSE" << std::setw(12) << "MAE" << std::setw(12) << "MAPE"
       << std::setw(12) << "R²" << '\n';
    for (const MetricsReport& r : rows) {
      os << std::left << std::setw(16) << r.model << std::right << std::setw(12)
         << detail::fixed3(r.mse) << std::setw(12) << detail::fixed3(r.rmse) << std::setw(12)
         << detail::fixed3(r.mae) << std::setw(12) << detail::fixed3(r.mape_percent)
         << std::setw(12) << detail::r2_cell(r, false) << '\n';
    }
  };
  os << "Benchmark\n";
  emit_table(rep.table);
  os << "\nAblation\n";
  emit_table(rep.ablation);
  for (const std::string& name : rep.failed) os << "\nFAILED: " << name << '\n';
  return os.str();
}

// One labeled bar per model. Self-contained SVG 1.1, no external resources.
inline std::string render_svg_bars(const std::string& title,
                                   const std::vector<std::pair<std::string, double>>& values) {
  const double bar_width = 70.0, gap = 30.0, chart_height = 240.0;
  const double margin_left = 50.0, margin_top = 40.0, margin_bottom = 60.0;
  const double width = margin_left + values.size() * (bar_width + gap) + gap;
  const double height = margin_top + chart_height + margin_bottom;
  double max_value = 0.0;
  for (const auto& [name, v] : values) max_value = std::max(max_value, v);
  if (max_value <= 0.0) max_value = 1.0;

  auto num = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
  };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width)
     << "\" height=\"" << num(height) << "\" viewBox=\"0 0 " << num(width) << " " << num(height)
     << "\">\n";
  os << "  <title>" << title << "</title>\n";
  os << "  <text x=\"" << num(width / 2.0) << "\" y=\"24\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"16\">"
     << title << "</text>\n";
  double x = margin_left + gap;
  for (const auto& [name, v] : values) {
    const double h = chart_height * (v / max_value);
    const double y = margin_top + (chart_height - h);
    os << "  <rect class=\"bar\" x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\""
       << num(bar_width) << "\" height=\"" << num(h) << "\" fill=\"#4878a8\"><title>" << name
       << ": " << detail::full_precision(v) << "</title></rect>\n";
    os << "  <text x=\"" << num(x + bar_width / 2.0) << "\" y=\"" << num(margin_top + chart_height + 18.0)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << name
       << "</text>\n";
    os << "  <text x=\"" << num(x + bar_width / 2.0) << "\" y=\"" << num(y - 6.0)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fixed3(v)
       << "</text>\n";
    x += bar_width + gap;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace bgtf
