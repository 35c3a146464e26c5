#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "geosteer/errors.hpp"
#include "geosteer/harness.hpp"

namespace geosteer::harness {
namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // Avoid "-0.000000" so equal values always print identically.
  if (std::string(buf) == "-0.000000") return "0.000000";
  return buf;
}

std::string opt6(const std::optional<double>& v) { return v ? fixed6(*v) : ""; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const char* kTableHeader =
    "method,scenario,reward,reservoir_contact_pct,high_quality_pct,operating_cost,sidetracks,"
    "seeds";

// Linear map from data coordinates to the SVG canvas.
struct Frame {
  double x0, x1, y0, y1;  // data ranges; y grows downward (depth)
  double left = 60, right = 20, top = 30, bottom = 40;
  double width = 800, height = 400;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return top + (y - y0) / (y1 - y0) * (height - top - bottom); }
};

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string polyline(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys) {
  std::string pts;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) pts += ' ';
    pts += fmt2(f.px(xs[i])) + "," + fmt2(f.py(ys[i]));
  }
  return pts;
}

std::string band(const Frame& f, const std::vector<double>& xs, const std::vector<double>& upper,
                 const std::vector<double>& lower) {
  std::string pts = polyline(f, xs, upper);
  for (std::size_t i = xs.size(); i-- > 0;)
    pts += " " + fmt2(f.px(xs[i])) + "," + fmt2(f.py(lower[i]));
  return pts;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void svg_open(std::ostream& os, const Frame& f, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
     << f.height << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << f.width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"14\">"
     << escape_xml(title) << "</text>\n";
}

void svg_axes(std::ostream& os, const Frame& f, const std::string& xlabel,
              const std::string& ylabel) {
  const double xl = f.left, xr = f.width - f.right, yt = f.top, yb = f.height - f.bottom;
  os << "<rect x=\"" << fmt2(xl) << "\" y=\"" << fmt2(yt) << "\" width=\"" << fmt2(xr - xl)
     << "\" height=\"" << fmt2(yb - yt) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = f.x0 + (f.x1 - f.x0) * t / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * t / 4.0;
    os << "<text x=\"" << fmt2(f.px(xv)) << "\" y=\"" << fmt2(yb + 15)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fmt2(xv)
       << "</text>\n";
    os << "<text x=\"" << fmt2(xl - 5) << "\" y=\"" << fmt2(f.py(yv) + 3)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt2(yv)
       << "</text>\n";
  }
  os << "<text x=\"" << fmt2((xl + xr) / 2) << "\" y=\"" << fmt2(f.height - 8)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
     << escape_xml(xlabel) << "</text>\n";
  os << "<text x=\"12\" y=\"" << fmt2((yt + yb) / 2) << "\" transform=\"rotate(-90 12 "
     << fmt2((yt + yb) / 2) << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"11\">"
     << escape_xml(ylabel) << "</text>\n";
}

Frame depth_frame(const std::vector<double>& xs, const std::vector<const std::vector<double>*>& ys) {
  double lo = 1e300, hi = -1e300;
  for (const auto* v : ys)
    for (double y : *v) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  const double pad = std::max(1.0, 0.1 * (hi - lo));
  return Frame{xs.front(), std::max(xs.back(), xs.front() + 1.0), lo - pad, hi + pad};
}

}  // namespace

// ---------------------------------------------------------------------------
// Tables

void write_table_csv(std::ostream& os, const ComparisonTable& table) {
  os << kTableHeader << '\n';
  for (const auto& r : table.rows) {
    os << r.method << ',' << r.scenario << ',' << fixed6(r.reward) << ',' << fixed6(r.contact)
       << ',' << opt6(r.high_quality) << ',' << opt6(r.operating_cost) << ','
       << fixed6(r.sidetracks) << ',' << r.per_seed_rewards.size() << '\n';
  }
}

ComparisonTable read_table_csv(std::istream& is) {
  ComparisonTable table;
  std::string line;
  if (!std::getline(is, line) || line != kTableHeader)
    throw UsageError("comparison CSV: unexpected header");
  auto num = [](const std::string& s) { return std::strtod(s.c_str(), nullptr); };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 8) throw UsageError("comparison CSV: expected 8 columns");
    ComparisonRow r;
    r.method = cells[0];
    r.scenario = cells[1];
    r.reward = num(cells[2]);
    r.contact = num(cells[3]);
    if (!cells[4].empty()) r.high_quality = num(cells[4]);
    if (!cells[5].empty()) r.operating_cost = num(cells[5]);
    r.sidetracks = num(cells[6]);
    r.per_seed_rewards.assign(static_cast<std::size_t>(std::strtoul(cells[7].c_str(), nullptr, 10)),
                              0.0);
    table.rows.push_back(std::move(r));
  }
  return table;
}

nlohmann::json table_json(const ComparisonTable& table) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["env"] = table.env;
  auto& rows = j["rows"] = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json row = {{"method", r.method},
                          {"scenario", r.scenario},
                          {"reward", r.reward},
                          {"reservoir_contact_pct", r.contact},
                          {"sidetracks", r.sidetracks}};
    row["high_quality_pct"] = r.high_quality ? nlohmann::json(*r.high_quality) : nlohmann::json();
    row["operating_cost"] = r.operating_cost ? nlohmann::json(*r.operating_cost) : nlohmann::json();
    row["per_seed_rewards"] = r.per_seed_rewards;
    rows.push_back(std::move(row));
  }
  return j;
}

void write_table_json(std::ostream& os, const ComparisonTable& table) {
  os << table_json(table).dump(2) << '\n';
}

void write_episodes_csv(std::ostream& os, const EvalReport& report) {
  os << "agent,seed,scenario,episode,reward,reservoir_contact_pct,high_quality_pct,"
        "operating_cost,sidetracks,realization_hash\n";
  const std::string seed = report.seed ? std::to_string(*report.seed) : "";
  for (const auto& s : report.scenarios) {
    for (const auto& e : s.episodes) {
      char hash[24];
      std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(e.realization_hash));
      os << report.agent << ',' << seed << ',' << s.label << ',' << e.index << ','
         << fixed6(e.reward) << ',' << fixed6(e.contact) << ',' << opt6(e.high_quality) << ','
         << opt6(e.operating_cost) << ',' << e.sidetracks << ',' << hash << '\n';
    }
  }
}

void write_curves_csv(std::ostream& os, const std::vector<TrainedAgent>& trained) {
  os << "seed,episode,reward,reservoir_contact_pct,high_quality_pct,operating_cost,sidetracks,"
        "ma_reward,ma_contact_pct\n";
  for (const auto& t : trained) {
    const auto ma_r = t.curve.moving_average_reward();
    const auto ma_c = t.curve.moving_average_contact();
    for (std::size_t i = 0; i < t.curve.episodes.size(); ++i) {
      const auto& e = t.curve.episodes[i];
      const bool has_ma = i + 1 >= static_cast<std::size_t>(kMovingAverageWindow);
      const std::size_t m = i + 1 - kMovingAverageWindow;
      os << t.seed << ',' << e.index << ',' << fixed6(e.reward) << ',' << fixed6(e.contact) << ','
         << opt6(e.high_quality) << ',' << opt6(e.operating_cost) << ',' << e.sidetracks << ','
         << (has_ma ? fixed6(ma_r[m]) : "") << ',' << (has_ma ? fixed6(ma_c[m]) : "") << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// SVG

void write_trajectory_svg(std::ostream& os, const env::Env1& env, const std::string& title) {
  const auto& t = env.truth();
  const auto& z = env.trajectory();
  const std::size_t n = t.top.size();
  std::vector<double> xs(n), bottom(n), hq(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = static_cast<double>(i) * t.dx;
    bottom[i] = t.bottom(static_cast<int>(i));
    hq[i] = t.hq_boundary(static_cast<int>(i));
  }
  const Frame f = depth_frame(xs, {&t.top, &bottom, &z});
  svg_open(os, f, title);
  os << "<polygon points=\"" << band(f, xs, t.top, bottom)
     << "\" fill=\"#f4d58d\" stroke=\"none\"/>\n";
  os << "<polygon points=\"" << band(f, xs, t.top, hq) << "\" fill=\"#e09f3e\" stroke=\"none\"/>\n";
  os << "<polyline points=\"" << polyline(f, xs, t.top)
     << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  os << "<polyline points=\"" << polyline(f, xs, bottom)
     << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  std::vector<double> zx(xs.begin(), xs.begin() + static_cast<long>(z.size()));
  os << "<polyline points=\"" << polyline(f, zx, z)
     << "\" fill=\"none\" stroke=\"#c1121f\" stroke-width=\"2\"/>\n";
  svg_axes(os, f, "horizontal distance (m)", "TVD (m)");
  os << "</svg>\n";
}

void write_trajectory_svg(std::ostream& os, const env::Env2& env, const std::string& title) {
  const auto& t = env.truth();
  const auto& z = env.trajectory();
  const std::size_t n = t.upper.size();
  std::vector<double> xs(n), lower(n);
  for (std::size_t j = 0; j < n; ++j) {
    xs[j] = static_cast<double>(j) * t.spacing;
    lower[j] = t.lower(static_cast<int>(j));
  }
  const Frame f = depth_frame(xs, {&t.upper, &lower, &z});
  svg_open(os, f, title);
  os << "<polygon points=\"" << band(f, xs, t.upper, lower)
     << "\" fill=\"#f4d58d\" stroke=\"none\"/>\n";
  os << "<polyline points=\"" << polyline(f, xs, t.upper)
     << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  os << "<polyline points=\"" << polyline(f, xs, lower)
     << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  for (const auto& d : t.fault_draws) {
    os << "<line x1=\"" << fmt2(f.px(d.location)) << "\" y1=\"" << fmt2(f.top) << "\" x2=\""
       << fmt2(f.px(d.location)) << "\" y2=\"" << fmt2(f.height - f.bottom)
       << "\" stroke=\"#6c757d\" stroke-dasharray=\"4 3\"/>\n";
  }
  std::vector<double> zx(xs.begin(), xs.begin() + static_cast<long>(z.size()));
  os << "<polyline points=\"" << polyline(f, zx, z)
     << "\" fill=\"none\" stroke=\"#c1121f\" stroke-width=\"2\"/>\n";
  svg_axes(os, f, "horizontal distance (m)", "TVD (m)");
  os << "</svg>\n";
}

void write_curves_svg(std::ostream& os, const std::vector<TrainedAgent>& trained,
                      const std::string& title) {
  std::size_t n = 0;
  for (const auto& t : trained) n = std::max(n, t.curve.episodes.size());
  Frame f{0.0, static_cast<double>(std::max<std::size_t>(n, 2)), 100.0, 0.0};
  svg_open(os, f, title);
  static const char* kColors[] = {"#1d3557", "#e63946", "#2a9d8f", "#f4a261", "#6a4c93",
                                  "#8d99ae", "#588157", "#bc6c25"};
  std::size_t c = 0;
  for (const auto& t : trained) {
    const auto ma = t.curve.moving_average_contact();
    if (ma.empty()) continue;
    std::vector<double> xs(ma.size());
    for (std::size_t i = 0; i < ma.size(); ++i)
      xs[i] = static_cast<double>(i + kMovingAverageWindow);
    os << "<polyline points=\"" << polyline(f, xs, ma) << "\" fill=\"none\" stroke=\""
       << kColors[c++ % 8] << "\" stroke-width=\"1.2\"/>\n";
  }
  svg_axes(os, f, "episode", "reservoir contact, 100-episode mean (%)");
  os << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Files

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << content;
  out.close();
  if (!out) throw IoError(path.string(), "write failed");
}

void save_checkpoint_file(const std::filesystem::path& path, const agents::Checkpoint& ckpt) {
  std::ostringstream os(std::ios::binary);
  agents::save_checkpoint(os, ckpt);
  write_file(path, os.str());
}

agents::Checkpoint load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open checkpoint");
  return agents::load_checkpoint(in);
}

void init_logging() {
  auto logger = spdlog::get("geosteer");
  if (!logger) logger = spdlog::stderr_color_mt("geosteer");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%l] %v");
  const char* level = std::getenv("GEOSTEER_LOG_LEVEL");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

}  // namespace geosteer::harness
