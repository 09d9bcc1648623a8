#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "optomech/dsp.hpp"
#include "optomech/integrate.hpp"

namespace optomech::cli {

/// `# dt=...` and `# t0=...` comment lines, then `t,x` rows.
std::string time_trace_csv(const TimeTrace& trace);
TimeTrace parse_time_trace_csv(const std::string& text, const std::string& origin);
TimeTrace read_time_trace(const std::filesystem::path& path);

/// `f_hz,amplitude,unit` rows on a uniform grid.
std::string spectrum_csv(const Spectrum& spectrum);
Spectrum parse_spectrum_csv(const std::string& text, const std::string& origin);
Spectrum read_spectrum(const std::filesystem::path& path);

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);
  void comment(const std::string& text);
  CsvWriter& cell(double value);
  CsvWriter& cell(const std::string& value);
  void end_row();
  std::string str() const;

 private:
  std::string comments_;
  std::string body_;
  bool row_open_ = false;
};

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;  // draw points instead of a polyline
};

/// Minimal deterministic line plot.
std::string svg_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series);

std::string read_file(const std::filesystem::path& path);

struct OutputFile {
  std::string name;
  std::string content;
};

/// Writes every file through a temporary name and renames it into place, so
/// a failure leaves no partially written outputs behind.
void write_outputs(const std::filesystem::path& dir, const std::vector<OutputFile>& files);

}  // namespace optomech::cli
