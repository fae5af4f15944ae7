#include "homoglab/report.hpp"

#include "homoglab/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace homoglab {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::string format_number(std::int64_t v) { return std::to_string(v); }
std::string format_number(std::uint64_t v) { return std::to_string(v); }

void Table::add(std::vector<std::string> row) {
  require(row.size() == header.size(), "table row width differs from the header");
  rows.push_back(std::move(row));
}

namespace {
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
} // namespace

std::string Table::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += csv_field(r[i]);
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::string escape_xml(const std::string& s) {
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

std::string fixed(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

std::string pow2_label(int k) {
  if (k >= 0 && k <= 10) return std::to_string(1 << k);
  if (k < 0 && k >= -10) return "1/" + std::to_string(1 << -k);
  return "2^" + std::to_string(k);
}

constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

std::string render_svg(const PlotSpec& plot) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : plot.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0) || !std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!(xmin <= xmax)) return {};
  // axis range in log2 units, snapped outward to powers of two
  int lx0 = static_cast<int>(std::floor(std::log2(xmin))), lx1 = static_cast<int>(std::ceil(std::log2(xmax)));
  int ly0 = static_cast<int>(std::floor(std::log2(ymin))), ly1 = static_cast<int>(std::ceil(std::log2(ymax)));
  if (lx0 == lx1) ++lx1;
  if (ly0 == ly1) ++ly1;

  const double W = 640, H = 440, left = 80, right = 170, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (std::log2(x) - lx0) / (lx1 - lx0) * pw; };
  auto py = [&](double y) { return top + ph - (std::log2(y) - ly0) / (ly1 - ly0) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<!-- " << escape_xml(plot.provenance) << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << escape_xml(plot.title) << "</text>\n";
  os << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph << "\"/>\n";
  os << "</g>\n<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
  const int xstep = std::max(1, (lx1 - lx0) / 10), ystep = std::max(1, (ly1 - ly0) / 10);
  for (int k = lx0; k <= lx1; k += xstep) {
    const double x = left + static_cast<double>(k - lx0) / (lx1 - lx0) * pw;
    os << "<line x1=\"" << fixed(x) << "\" y1=\"" << top + ph << "\" x2=\"" << fixed(x) << "\" y2=\"" << top + ph + 5
       << "\" stroke=\"black\"/>";
    os << "<text x=\"" << fixed(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << pow2_label(k)
       << "</text>\n";
  }
  for (int k = ly0; k <= ly1; k += ystep) {
    const double y = top + ph - static_cast<double>(k - ly0) / (ly1 - ly0) * ph;
    os << "<line x1=\"" << left - 5 << "\" y1=\"" << fixed(y) << "\" x2=\"" << left << "\" y2=\"" << fixed(y)
       << "\" stroke=\"black\"/>";
    os << "<text x=\"" << left - 8 << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">" << pow2_label(k)
       << "</text>\n";
  }
  os << "</g>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 18
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape_xml(plot.x_label)
     << "</text>\n";
  os << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\""
     << " transform=\"rotate(-90 18 " << top + ph / 2 << ")\">" << escape_xml(plot.y_label) << "</text>\n";

  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const auto& s = plot.series[si];
    const char* color = kColors[si % kColors.size()];
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (s.x[i] > 0.0 && s.y[i] > 0.0 && std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
        pts.emplace_back(px(s.x[i]), py(s.y[i]));
    os << "<g class=\"series\" data-label=\"" << escape_xml(s.label) << "\">\n";
    if (s.line && pts.size() > 1) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << fixed(pts[i].first) << ',' << fixed(pts[i].second);
      os << "\"/>\n";
    }
    for (const auto& [x, y] : pts)
      os << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(si);
    os << "<rect x=\"" << left + pw + 12 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << color
       << "\"/><text x=\"" << left + pw + 28 << "\" y=\"" << ly
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(s.label) << "</text>\n";
    os << "</g>\n";
  }
  os << "<text x=\"" << W - 6 << "\" y=\"" << H - 4
     << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"9\" fill=\"#666\">" << escape_xml(plot.provenance)
     << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path p(path);
  if (p.has_parent_path()) {
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path);
}

} // namespace homoglab
