#include "riskwild/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace riskwild {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string dataset_to_csv(const FixedDesignDataset& ds) {
  std::ostringstream os;
  for (int j = 0; j < ds.p(); ++j) os << (j ? "," : "") << "x_" << (j + 1);
  for (int j = 0; j < ds.d(); ++j) os << ",y_" << (j + 1);
  os << "\n";
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.p(); ++j) os << (j ? "," : "") << format_double(ds.x[i](j));
    for (int j = 0; j < ds.d(); ++j) os << "," << format_double(ds.y[i](j));
    os << "\n";
  }
  return os.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

FixedDesignDataset dataset_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  int p = 0, d = 0;
  for (const auto& name : header) {
    if (name.rfind("x_", 0) == 0) {
      ++p;
    } else if (name.rfind("y_", 0) == 0) {
      ++d;
    } else {
      throw ConfigError("unexpected dataset column '" + name + "'");
    }
  }
  if (p < 1 || d < 1) throw ConfigError("dataset header must list x_* then y_* columns");

  std::vector<Vec> xs, ys;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != p + d) {
      throw ConfigError("dataset row has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(p + d));
    }
    Vec x(p), y(d);
    for (int j = 0; j < p; ++j) x(j) = std::stod(fields[j]);
    for (int j = 0; j < d; ++j) y(j) = std::stod(fields[p + j]);
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
  }
  return FixedDesignDataset::create(std::move(xs), std::move(ys));
}

nlohmann::json dataset_to_json(const FixedDesignDataset& ds) {
  nlohmann::json j;
  j["n"] = ds.n();
  j["p"] = ds.p();
  j["d"] = ds.d();
  auto& jx = j["x"] = nlohmann::json::array();
  auto& jy = j["y"] = nlohmann::json::array();
  for (int i = 0; i < ds.n(); ++i) {
    nlohmann::json rx = nlohmann::json::array(), ry = nlohmann::json::array();
    for (int k = 0; k < ds.p(); ++k) rx.push_back(ds.x[i](k));
    for (int k = 0; k < ds.d(); ++k) ry.push_back(ds.y[i](k));
    jx.push_back(std::move(rx));
    jy.push_back(std::move(ry));
  }
  return j;
}

FixedDesignDataset dataset_from_json(const nlohmann::json& j) {
  for (const auto& key : {"n", "p", "d", "x", "y"}) {
    if (!j.contains(key)) throw ConfigError(std::string("dataset JSON missing key '") + key + "'");
  }
  const int n = j["n"], p = j["p"], d = j["d"];
  if (static_cast<int>(j["x"].size()) != n || static_cast<int>(j["y"].size()) != n) {
    throw ConfigError("dataset JSON row count disagrees with n");
  }
  std::vector<Vec> xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(j["x"][i].size()) != p || static_cast<int>(j["y"][i].size()) != d) {
      throw ConfigError("dataset JSON row dimension disagrees with p/d");
    }
    xs[i].resize(p);
    ys[i].resize(d);
    for (int k = 0; k < p; ++k) xs[i](k) = j["x"][i][k];
    for (int k = 0; k < d; ++k) ys[i](k) = j["y"][i][k];
  }
  return FixedDesignDataset::create(std::move(xs), std::move(ys));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

FixedDesignDataset load_dataset(const std::string& path) {
  const std::string text = read_text_file(path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    return dataset_from_json(nlohmann::json::parse(text));
  }
  return dataset_from_csv(text);
}

void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file '" + tmp.string() + "'");
    out << content;
  }
  fs::rename(tmp, target);
}

}  // namespace riskwild
