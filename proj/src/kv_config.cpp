// Copyright 2026 The AMSR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "amsr/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "amsr/errors.hpp"

namespace amsr {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (cfg.items_.count(key) != 0) throw ConfigError("field '" + key + "' given twice");
    cfg.items_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  KvConfig cfg = parse(ss.str());
  cfg.base_dir_ = path.parent_path();
  return cfg;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = items_.find(key);
  return it == items_.end() ? fallback : it->second;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback, std::int64_t lo,
                               std::int64_t hi) const {
  auto it = items_.find(key);
  if (it == items_.end()) return fallback;
  const std::string& v = it->second;
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || out < lo || out > hi) {
    throw ConfigError("field '" + key + "': expected integer in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "], got '" + v + "'");
  }
  return out;
}

double KvConfig::get_double(const std::string& key, double fallback, double lo, double hi) const {
  auto it = items_.find(key);
  if (it == items_.end()) return fallback;
  const std::string& v = it->second;
  double out = 0;
  std::size_t used = 0;
  bool ok = true;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    ok = false;
  }
  if (!ok || used != v.size() || !(out >= lo && out <= hi)) {
    std::ostringstream msg;
    msg << "field '" << key << "': expected number in [" << lo << ", " << hi << "], got '" << v << "'";
    throw ConfigError(msg.str());
  }
  return out;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = items_.find(key);
  if (it == items_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("field '" + key + "': expected true or false, got '" + v + "'");
}

void KvConfig::reject_unknown(const std::set<std::string>& known) const {
  for (const auto& [key, value] : items_) {
    if (known.count(key) == 0) throw ConfigError("unknown field '" + key + "'");
  }
}

}  // namespace amsr
