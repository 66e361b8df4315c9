#include "mpts/results.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "mpts/config.hpp"
#include "mpts/error.hpp"

namespace mpts {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StateError("cannot open " + path.string() + " for writing");
  return os;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

void write_results_csv(const std::vector<RoundLog>& logs, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "method,repeat,round,labeled_count,accuracy,wall_time_s\n";
  for (const RoundLog& l : logs) {
    os << l.method << ',' << l.repeat << ',' << l.round << ',' << l.labeled_count << ','
       << fmt("%.6f", l.test_accuracy) << ',' << fmt("%.3f", l.wall_time_seconds) << '\n';
  }
}

void write_results_json(const std::vector<RoundLog>& logs, const ExperimentConfig& config,
                        const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::parse(config_to_json(config));
  auto rows = nlohmann::ordered_json::array();
  for (const RoundLog& l : logs) {
    nlohmann::ordered_json r;
    r["method"] = l.method;
    r["repeat"] = l.repeat;
    r["round"] = l.round;
    r["labeled_count"] = l.labeled_count;
    r["repeat_seed"] = l.repeat_seed;
    r["accuracy"] = l.test_accuracy;
    r["wall_time_s"] = l.wall_time_seconds;
    rows.push_back(std::move(r));
  }
  j["rounds"] = std::move(rows);
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

std::vector<RoundLog> read_results_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "method,repeat,round,labeled_count,accuracy,wall_time_s") {
    throw FormatError(path.string() + ": line 1: not a results CSV header");
  }
  std::vector<RoundLog> logs;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": expected 6 cells");
    }
    RoundLog l;
    try {
      l.method = cells[0];
      l.repeat = std::stoul(cells[1]);
      l.round = std::stoul(cells[2]);
      l.labeled_count = std::stoul(cells[3]);
      l.test_accuracy = std::stod(cells[4]);
      l.wall_time_seconds = std::stod(cells[5]);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": bad number");
    }
    logs.push_back(l);
  }
  return logs;
}

std::vector<CurvePoint> accuracy_curves(const std::vector<RoundLog>& logs) {
  std::map<std::pair<std::string, std::size_t>, std::vector<const RoundLog*>> groups;
  for (const RoundLog& l : logs) groups[{l.method, l.round}].push_back(&l);
  std::vector<CurvePoint> out;
  for (const auto& [key, rows] : groups) {
    CurvePoint p;
    p.method = key.first;
    p.round = key.second;
    p.repeats = rows.size();
    double sum = 0.0;
    double labeled = 0.0;
    for (const RoundLog* r : rows) {
      sum += r->test_accuracy;
      labeled += static_cast<double>(r->labeled_count);
    }
    const double n = static_cast<double>(rows.size());
    p.mean_accuracy = sum / n;
    p.labeled_count = static_cast<std::size_t>(std::lround(labeled / n));
    if (rows.size() > 1) {
      double ss = 0.0;
      for (const RoundLog* r : rows) {
        const double d = r->test_accuracy - p.mean_accuracy;
        ss += d * d;
      }
      p.std_accuracy = std::sqrt(ss / (n - 1.0));
    }
    out.push_back(p);
  }
  return out;
}

void write_curves_csv(const std::vector<CurvePoint>& curves, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "method,round,labeled_count,mean_accuracy,std_accuracy,repeats\n";
  for (const CurvePoint& p : curves) {
    os << p.method << ',' << p.round << ',' << p.labeled_count << ','
       << fmt("%.6f", p.mean_accuracy) << ',' << fmt("%.6f", p.std_accuracy) << ',' << p.repeats
       << '\n';
  }
}

}  // namespace mpts
