#include "pitchfork/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace pitchfork {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last) fail(ErrorKind::Validation, what + ": '" + t + "' is not a number");
  return v;
}

std::int64_t parse_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    fail(ErrorKind::Validation, what + ": '" + t + "' is not an integer");
  }
  return v;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

// --- Config -----------------------------------------------------------------------

void Config::load_file(const std::filesystem::path& path) { load_text(read_text_file(path), path.string()); }

void Config::load_text(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorKind::Validation, where + ": malformed section header '" + line + "'");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Validation, where + ": expected key = value, got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    if (!has(full)) fail(ErrorKind::Validation, where + ": unknown config key '" + full + "'");
    values_[full] = trim(std::string_view(line).substr(eq + 1));
  }
}

void Config::apply_env(const std::string& prefix) {
  for (auto& [key, value] : values_) {
    std::string name = prefix + key;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) {
      return c == '.' ? '_' : static_cast<char>(std::toupper(c));
    });
    if (const char* env = std::getenv(name.c_str())) value = env;
  }
}

void Config::set(const std::string& key, const std::string& value) {
  if (!has(key)) fail(ErrorKind::Validation, "unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorKind::Validation, "missing config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const { return parse_double(get(key), key); }

std::int64_t Config::get_int(const std::string& key) const { return parse_int(get(key), key); }

std::vector<double> Config::get_list(const std::string& key) const {
  std::vector<double> out;
  const std::string& raw = get(key);
  if (trim(raw).empty()) return out;
  for (const auto& item : split(raw, ',')) out.push_back(parse_double(item, key));
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string Config::hash() const {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canonical());
  return os.str();
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

// --- trajectory CSV ------------------------------------------------------------------

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log) {
  out << "# pitchfork " << kVersion << " experiment=" << log.experiment << " seed=" << log.seed
      << " config_hash=" << log.config_hash << "\n";
  out << kTrajectoryHeader << "\n";
  for (const auto& r : log.readings) {
    out << r.step << ',' << format_number(r.log_beta) << ',' << format_number(r.log_beta_c) << ','
        << format_number(r.log_ratio) << ',' << (r.nc1 ? format_number(*r.nc1) : std::string()) << ','
        << format_number(r.order_parameter) << '\n';
  }
}

TrajectoryLog read_trajectory_csv(std::istream& in, const std::string& source) {
  TrajectoryLog log;
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    header = split(t, ',');
    break;
  }
  if (header.empty()) fail(ErrorKind::Validation, source + ": no header line");
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const auto& required : split(kTrajectoryHeader, ',')) {
    if (!column.count(required)) fail(ErrorKind::Validation, source + ": missing column '" + required + "'");
  }
  auto real_or_nan = [](const std::string& s, const std::string& what) {
    return s.empty() ? std::numeric_limits<double>::quiet_NaN() : parse_double(s, what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split(t, ',');
    const std::string where = source + ":" + std::to_string(lineno);
    if (fields.size() != header.size()) {
      fail(ErrorKind::Validation, where + ": expected " + std::to_string(header.size()) + " fields");
    }
    auto field = [&](const char* name) -> const std::string& { return fields[column.at(name)]; };
    CriticalityReading r;
    r.step = parse_int(field("step"), where + " step");
    r.log_beta = real_or_nan(field("log_beta"), where + " log_beta");
    r.log_beta_c = real_or_nan(field("log_beta_c"), where + " log_beta_c");
    r.log_ratio = parse_double(field("log_ratio"), where + " log_ratio");
    if (!field("nc1").empty()) r.nc1 = parse_double(field("nc1"), where + " nc1");
    r.order_parameter = real_or_nan(field("order_parameter"), where + " order_parameter");
    r.degenerate_covariance = std::isinf(r.log_beta_c);
    log.readings.push_back(r);
  }
  return log;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// --- SVG ------------------------------------------------------------------------------

std::string line_chart_svg(const ChartSpec& spec, const std::vector<ChartSeries>& series) {
  constexpr double width = 640, height = 400, left = 70, right = 150, top = 40, bottom = 50;
  constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!spec.log_x || x > 0) && (!spec.log_y || y > 0);
  };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 <= 0) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 <= 0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + (y1 - v) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  if (!spec.provenance.empty()) os << "<!-- " << xml_escape(spec.provenance) << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << xml_escape(spec.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    os << "<text x=\"" << px(fx) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
       << (spec.log_x ? "1e" : "") << format_number(std::round(fx * 1000) / 1000) << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\">"
       << (spec.log_y ? "1e" : "") << format_number(std::round(fy * 1000) / 1000) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
     << xml_escape(spec.x_label) << "</text>\n";
  os << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << xml_escape(spec.y_label) << "</text>\n";
  if (spec.x_marker && usable(*spec.x_marker, spec.log_y ? 1.0 : 0.0)) {
    const double v = px(tx(*spec.x_marker));
    os << "<line x1=\"" << v << "\" y1=\"" << top << "\" x2=\"" << v << "\" y2=\"" << top + ph
       << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  if (spec.y_marker && usable(spec.log_x ? 1.0 : 0.0, *spec.y_marker)) {
    const double v = py(ty(*spec.y_marker));
    os << "<line x1=\"" << left << "\" y1=\"" << v << "\" x2=\"" << left + pw << "\" y2=\"" << v
       << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = palette[k % std::size(palette)];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (usable(s.x[i], s.y[i])) os << px(tx(s.x[i])) << ',' << py(ty(s.y[i])) << ' ';
    }
    os << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 30 << "\" y2=\""
       << ly - 4 << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly << "\">" << xml_escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pitchfork
