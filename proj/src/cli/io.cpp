#include "optomech/cli/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "optomech/cli/config.hpp"
#include "optomech/errors.hpp"

namespace optomech::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& field, const std::string& origin, int line) {
  const std::string t = trim(field);
  double v = 0.0;
  const char* begin = t.data();
  if (!t.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw InputError(origin + ":" + std::to_string(line) + ": expected a number, got '" + field + "'");
  }
  return v;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(trim(f));
  return out;
}

struct CsvLine {
  int number;
  std::vector<std::string> cells;
};

/// Splits into `# key=value` comments and data lines (header included).
void scan(const std::string& text, std::vector<std::pair<std::string, std::string>>& meta,
          std::vector<CsvLine>& rows) {
  std::stringstream ss(text);
  std::string line;
  int n = 0;
  while (std::getline(ss, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos) meta.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
      continue;
    }
    rows.push_back({n, fields(t)});
  }
}

}  // namespace

std::string time_trace_csv(const TimeTrace& trace) {
  std::string out = "# dt=" + format_double(trace.dt) + "\n# t0=" + format_double(trace.t0) + "\n";
  if (!trace.source.empty()) out += "# source=" + trace.source + "\n";
  out += "t,x\n";
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    out += format_double(trace.time_at(i));
    out += ',';
    out += format_double(trace.samples[i]);
    out += '\n';
  }
  return out;
}

TimeTrace parse_time_trace_csv(const std::string& text, const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<CsvLine> rows;
  scan(text, meta, rows);
  if (rows.empty() || rows.front().cells != std::vector<std::string>{"t", "x"}) {
    throw InputError(origin + ": expected header 't,x'");
  }
  TimeTrace trace;
  std::optional<double> dt;
  std::vector<double> times;
  for (const auto& [k, v] : meta) {
    if (k == "dt") dt = to_double(v, origin, 0);
    if (k == "source") trace.source = v;
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.cells.size() != 2) throw InputError(origin + ":" + std::to_string(row.number) + ": expected 2 columns");
    times.push_back(to_double(row.cells[0], origin, row.number));
    trace.samples.push_back(to_double(row.cells[1], origin, row.number));
  }
  if (times.empty()) throw InputError(origin + ": trace has no samples");
  trace.t0 = times.front();
  if (!dt) {
    if (times.size() < 2) throw InputError(origin + ": cannot infer dt from a single sample");
    dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  }
  trace.dt = *dt;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::fabs(times[i] - trace.time_at(i)) > 1e-6 * trace.dt + 1e-12 * std::fabs(times[i])) {
      throw InputError(origin + ": sample " + std::to_string(i) + " is off the uniform time grid");
    }
  }
  trace.validate();
  return trace;
}

TimeTrace read_time_trace(const std::filesystem::path& path) {
  return parse_time_trace_csv(read_file(path), path.string());
}

std::string spectrum_csv(const Spectrum& s) {
  std::string out = "# df=" + format_double(s.df) + "\n";
  if (s.slope_sign != 0) out += "# slope_sign=" + std::to_string(s.slope_sign) + "\n";
  out += "f_hz,amplitude,unit\n";
  const char* unit = to_string(s.unit);
  for (std::size_t i = 0; i < s.amplitudes.size(); ++i) {
    out += format_double(s.frequency(i));
    out += ',';
    out += format_double(s.amplitudes[i]);
    out += ',';
    out += unit;
    out += '\n';
  }
  return out;
}

Spectrum parse_spectrum_csv(const std::string& text, const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<CsvLine> rows;
  scan(text, meta, rows);
  if (rows.empty() || rows.front().cells != std::vector<std::string>{"f_hz", "amplitude", "unit"}) {
    throw InputError(origin + ": expected header 'f_hz,amplitude,unit'");
  }
  Spectrum s;
  for (const auto& [k, v] : meta) {
    if (k == "slope_sign") s.slope_sign = static_cast<int>(to_double(v, origin, 0));
  }
  std::vector<double> freqs;
  std::string unit;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.cells.size() != 3) throw InputError(origin + ":" + std::to_string(row.number) + ": expected 3 columns");
    if (unit.empty()) unit = row.cells[2];
    if (row.cells[2] != unit) throw InputError(origin + ":" + std::to_string(row.number) + ": mixed units");
    freqs.push_back(to_double(row.cells[0], origin, row.number));
    s.amplitudes.push_back(to_double(row.cells[1], origin, row.number));
  }
  if (freqs.size() < 2) throw InputError(origin + ": spectrum needs at least two bins");
  s.unit = parse_amplitude_unit(unit);
  s.f0_bin = freqs.front();
  s.df = (freqs.back() - freqs.front()) / static_cast<double>(freqs.size() - 1);
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (std::fabs(freqs[i] - s.frequency(i)) > 1e-6 * s.df) {
      throw InputError(origin + ": bin " + std::to_string(i) + " is off the uniform frequency grid");
    }
  }
  s.validate();
  return s;
}

Spectrum read_spectrum(const std::filesystem::path& path) {
  return parse_spectrum_csv(read_file(path), path.string());
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) {
  for (std::size_t i = 0; i < header.size(); ++i) body_ += (i ? "," : "") + header[i];
  body_ += '\n';
}

void CsvWriter::comment(const std::string& text) { comments_ += "# " + text + "\n"; }

CsvWriter& CsvWriter::cell(double value) { return cell(format_double(value)); }

CsvWriter& CsvWriter::cell(const std::string& value) {
  if (row_open_) body_ += ',';
  body_ += value;
  row_open_ = true;
  return *this;
}

void CsvWriter::end_row() {
  body_ += '\n';
  row_open_ = false;
}

std::string CsvWriter::str() const { return comments_ + body_; }

std::string svg_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series) {
  constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  static const char* const colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x1 > x0)) {
    x0 = std::isfinite(x0) ? x0 - 0.5 : 0.0;
    x1 = x0 + 1.0;
  }
  if (!(y1 > y0)) {
    y0 = std::isfinite(y0) ? y0 - 0.5 : 0.0;
    y1 = y0 + 1.0;
  }
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  const auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  const auto tick = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << L << "\" y=\"" << H - B + 15 << "\" text-anchor=\"start\">" << tick(x0) << "</text>\n";
  os << "<text x=\"" << W - R << "\" y=\"" << H - B + 15 << "\" text-anchor=\"end\">" << tick(x1) << "</text>\n";
  os << "<text x=\"" << L - 5 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << tick(y0) << "</text>\n";
  os << "<text x=\"" << L - 5 << "\" y=\"" << T + 10 << "\" text-anchor=\"end\">" << tick(y1) << "</text>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << x_label
     << "</text>\n";
  os << "<text x=\"15\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
     << (T + H - B) / 2 << ")\">" << y_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = colours[k % 5];
    if (s.markers) {
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        os << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"2.5\" fill=\"" << colour
           << "\"/>\n";
      }
    } else {
      os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\" points=\"";
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        os << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
      }
      os << "\"/>\n";
    }
    os << "<text x=\"" << W - R - 5 << "\" y=\"" << T + 15 + 15 * static_cast<double>(k)
       << "\" text-anchor=\"end\" fill=\"" << colour << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_outputs(const std::filesystem::path& dir, const std::vector<OutputFile>& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> temps;
  try {
    for (const auto& f : files) {
      const auto tmp = dir / (f.name + ".tmp");
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      temps.push_back(tmp);
      out << f.content;
      out.close();
      if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    }
  } catch (...) {
    for (const auto& t : temps) std::filesystem::remove(t, ec);
    throw;
  }
  for (std::size_t i = 0; i < files.size(); ++i) std::filesystem::rename(temps[i], dir / files[i].name);
}

}  // namespace optomech::cli
