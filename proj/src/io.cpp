#include "escore/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "escore/error.hpp"

namespace escore {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

double parse_double(const std::string& s, int line_no, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw data_error(std::string("line ") + std::to_string(line_no) +
                     ": cannot parse " + what + " '" + s + "'");
  }
}

int parse_int(const std::string& s, int line_no, const char* what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw data_error(std::string("line ") + std::to_string(line_no) +
                     ": cannot parse " + what + " '" + s + "'");
  }
}

}  // namespace

StationLoad load_station_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open station file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw data_error("station file '" + path + "' is empty");
  auto header = split_csv_line(line);
  const bool has_cov = header.size() == 4 && header[3] == "covariate";
  if (!(header.size() >= 3 && header[0] == "station_id" &&
        header[1] == "year" && header[2] == "value" &&
        (header.size() == 3 || has_cov)))
    throw data_error(
        "station file header must be station_id,year,value[,covariate]");

  struct Row {
    int year;
    double value;
    double covariate;
  };
  std::map<std::string, std::vector<Row>> grouped;
  std::vector<std::string> order;
  StationLoad out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw data_error("line " + std::to_string(line_no) +
                       ": expected " + std::to_string(header.size()) +
                       " fields");
    if (fields[2].empty() || (has_cov && fields[3].empty())) {
      ++out.dropped_rows;  // blank value: row dropped, count reported
      continue;
    }
    Row row{};
    row.year = parse_int(fields[1], line_no, "year");
    row.value = parse_double(fields[2], line_no, "value");
    row.covariate = has_cov ? parse_double(fields[3], line_no, "covariate") : 0.0;
    auto [it, inserted] = grouped.try_emplace(fields[0]);
    if (inserted) order.push_back(fields[0]);
    for (const Row& existing : it->second) {
      if (existing.year == row.year)
        throw data_error("line " + std::to_string(line_no) +
                         ": duplicate year " + std::to_string(row.year) +
                         " for station '" + fields[0] + "'");
    }
    it->second.push_back(row);
  }

  for (const auto& id : order) {
    auto rows = grouped[id];
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return a.year < b.year; });
    StationSeries s;
    s.station_id = id;
    for (const Row& r : rows) {
      s.years.push_back(r.year);
      s.values.push_back(r.value);
    }
    if (has_cov) {
      s.covariate.emplace();
      for (const Row& r : rows) s.covariate->push_back(r.covariate);
    }
    out.stations.push_back(std::move(s));
  }
  return out;
}

std::map<int, double> load_covariate_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open covariate file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw data_error("covariate file '" + path + "' is empty");
  const auto header = split_csv_line(line);
  if (header.size() != 2 || header[0] != "year" || header[1] != "covariate")
    throw data_error("covariate file header must be year,covariate");
  std::map<int, double> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2)
      throw data_error("line " + std::to_string(line_no) + ": expected 2 fields");
    const int year = parse_int(fields[0], line_no, "year");
    if (!out.emplace(year, parse_double(fields[1], line_no, "covariate")).second)
      throw data_error("line " + std::to_string(line_no) +
                       ": duplicate year " + std::to_string(year));
  }
  return out;
}

void attach_covariate(std::vector<StationSeries>& stations,
                      const std::map<int, double>& covariate) {
  for (auto& s : stations) {
    std::vector<double> cov;
    cov.reserve(s.years.size());
    for (int year : s.years) {
      const auto it = covariate.find(year);
      if (it == covariate.end())
        throw data_error("station '" + s.station_id + "' year " +
                         std::to_string(year) + " missing from covariate file");
      cov.push_back(it->second);
    }
    s.covariate = std::move(cov);
  }
}

double empirical_quantile(std::span<const double> values, double p) {
  if (values.empty()) throw data_error("empirical_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0))
    throw domain_error("empirical_quantile: p outside [0,1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - std::floor(h)) * (sorted[lo + 1] - sorted[lo]);
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path + "' for digest");
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char chunk[4096];
  while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(chunk[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

void emit_results(const ExperimentResult& result, const RunManifest& manifest,
                  const std::string& out_dir, bool plots) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw data_error("cannot create output directory '" + out_dir + "'");

  const auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    if (!out)
      throw data_error("cannot write '" + (fs::path(out_dir) / name).string() +
                       "'");
    return out;
  };

  {
    auto out = open(result.experiment + "_long.csv");
    out << "experiment,score,threshold_p,label,replicate,value\n";
    for (const auto& r : result.rows) {
      out << result.experiment << ',' << r.score << ','
          << format_real(r.threshold_p) << ',' << r.label << ','
          << r.replicate << ',' << format_real(r.value) << '\n';
    }
  }
  {
    auto out = open(result.experiment + "_summary.csv");
    out << "experiment,score,threshold_p,label,stat,value\n";
    for (const auto& r : result.summary) {
      out << result.experiment << ',' << r.score << ','
          << format_real(r.threshold_p) << ',' << r.label << ',' << r.stat
          << ',' << format_real(r.value) << '\n';
    }
  }
  {
    nlohmann::ordered_json j;
    j["tool_version"] = manifest.tool_version;
    j["experiment"] = manifest.experiment;
    j["master_seed"] = manifest.master_seed;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : manifest.config_echo) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
    for (const auto& [path, digest] : manifest.input_digests)
      inputs.push_back({{"path", path}, {"fnv1a64", digest}});
    j["inputs"] = inputs;
    j["dropped_rows"] = manifest.dropped_rows;
    j["created_utc"] = manifest.created_utc;
    auto out = open("manifest.json");
    out << j.dump(2) << '\n';
  }
  if (plots) {
    for (const auto& fig : result.figures) {
      auto out = open(fig.name + ".svg");
      out << fig.svg;
    }
  }
}

}  // namespace escore
