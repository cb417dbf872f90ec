#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisnet/field.hpp"

namespace poisnet {

// Flat INI-style run configuration. Sections and keys are schema-checked:
// unknown ones are rejected. Every value has a default matching the
// desk-scaled setup, so an empty file is a valid config. Paths resolve
// relative to the config file location.
class RunConfig {
 public:
  RunConfig() { set_schema(); }

  static RunConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    RunConfig cfg = from_text(buf.str());
    cfg.base_dir_ = std::filesystem::absolute(path).parent_path().string();
    cfg.raw_text_ = buf.str();
    return cfg;
  }

  static RunConfig from_text(const std::string& text) {
    RunConfig cfg;
    cfg.raw_text_ = text;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw std::runtime_error("config: malformed section at line " +
                                   std::to_string(lineno));
        section = trim(line.substr(1, line.size() - 2));
        if (!cfg.schema_.count(section))
          throw std::runtime_error("config: unknown section [" + section +
                                   "] at line " + std::to_string(lineno));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("config: expected key = value at line " +
                                 std::to_string(lineno));
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (section.empty())
        throw std::runtime_error("config: key outside any section at line " +
                                 std::to_string(lineno));
      if (!cfg.schema_.at(section).count(key))
        throw std::runtime_error("config: unknown key '" + key + "' in [" +
                                 section + "]");
      cfg.values_[section + "." + key] = value;
    }
    return cfg;
  }

  std::string get(const std::string& dotted, const std::string& fallback) const {
    const auto it = values_.find(dotted);
    return it == values_.end() ? fallback : it->second;
  }
  double get(const std::string& dotted, double fallback) const {
    const auto it = values_.find(dotted);
    return it == values_.end() ? fallback : std::stod(it->second);
  }
  long get(const std::string& dotted, long fallback) const {
    const auto it = values_.find(dotted);
    return it == values_.end() ? fallback : std::stol(it->second);
  }
  int get(const std::string& dotted, int fallback) const {
    return static_cast<int>(get(dotted, static_cast<long>(fallback)));
  }
  std::uint64_t get(const std::string& dotted, std::uint64_t fallback) const {
    const auto it = values_.find(dotted);
    return it == values_.end() ? fallback : std::stoull(it->second);
  }
  bool has(const std::string& dotted) const { return values_.count(dotted) > 0; }

  std::vector<double> get_list(const std::string& dotted,
                               std::vector<double> fallback) const {
    const auto it = values_.find(dotted);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::istringstream ls(it->second);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
  }
  std::vector<std::string> get_names(const std::string& dotted,
                                     std::vector<std::string> fallback) const {
    const auto it = values_.find(dotted);
    if (it == values_.end()) return fallback;
    std::vector<std::string> out;
    std::istringstream ls(it->second);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) out.push_back(tok);
    }
    return out;
  }

  // Paths are interpreted relative to the config file directory.
  std::string resolve_path(const std::string& p) const {
    if (p.empty() || std::filesystem::path(p).is_absolute() ||
        base_dir_.empty())
      return p;
    return (std::filesystem::path(base_dir_) / p).string();
  }

  GridSpec grid() const {
    const std::string geom = get("grid.geometry", std::string("cartesian"));
    if (geom != "cartesian" && geom != "axisymmetric")
      throw std::runtime_error("config: grid.geometry must be cartesian or axisymmetric");
    return GridSpec(get("grid.nx", 64), get("grid.ny", 64),
                    get("grid.Lx", 0.01), get("grid.Ly", 0.01),
                    geom == "cartesian" ? Geometry::cartesian
                                        : Geometry::axisymmetric);
  }

  // FNV-1a of the raw config text, for the provenance record.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : raw_text_) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  void set_schema() {
    schema_["grid"] = {"nx", "ny", "Lx", "Ly", "geometry"};
    schema_["dataset"] = {"kind", "count", "c", "N", "p", "alpha",
                          "train_fraction", "targets", "target_rtol", "dir",
                          "amplitude_n0", "seed"};
    schema_["network"] = {"arch", "n_b", "depths", "rf", "ksx", "ksy",
                          "width", "budget", "checkpoint", "init_seed"};
    schema_["training"] = {"epochs", "batch_size", "lr", "optimizer", "seed",
                           "precision", "w_dirichlet", "w_inside",
                           "w_laplacian", "w_neumann"};
    schema_["simulation"] = {"case", "backend", "rtol", "modes", "periods",
                             "steps_per_period", "n0", "ne_amp", "sigma",
                             "T0", "Ex", "dt", "steps", "record_every",
                             "x0", "sigma_x", "sigma_r", "n_back",
                             "snapshot_times"};
    schema_["solve"] = {"charge", "charge_file", "backend", "rtol", "modes",
                        "max_iter"};
    schema_["eval"] = {"datasets", "backend", "rtol", "modes", "mode_n",
                       "mode_m", "resolutions", "amplitude"};
    schema_["benchmark"] = {"backends", "sizes", "reps", "rtol"};
  }

  std::map<std::string, std::string> values_;
  std::map<std::string, std::set<std::string>> schema_;
  std::string base_dir_;
  std::string raw_text_;
};

}  // namespace poisnet
