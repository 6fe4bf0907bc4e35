// Copyright 2026 The biped_sim2real Authors
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

// Sectioned key-value files ("[section]" headers, "key = value" lines, ';' or
// '#' comments). Keys are addressed as "section.key".

#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "biped/common.hpp"

namespace biped {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig FromFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return FromString(ss.str(), path);
  }

  static KeyValueConfig FromString(const std::string& text,
                                   const std::string& origin = "<string>") {
    // property_tree's INI reader only knows ';' comments.
    std::stringstream cleaned;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      auto first = line.find_first_not_of(" \t");
      if (first != std::string::npos && line[first] == '#') continue;
      cleaned << line << '\n';
    }
    KeyValueConfig cfg;
    try {
      boost::property_tree::ini_parser::read_ini(cleaned, cfg.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(origin + ": " + e.message() + " (line " +
                        std::to_string(e.line()) + ")");
    }
    return cfg;
  }

  bool Has(const std::string& key) const {
    return tree_.get_child_optional(Path(key)).has_value();
  }

  std::string GetString(const std::string& key, const std::string& fallback) const {
    auto v = tree_.get_optional<std::string>(Path(key));
    return v ? Trim(*v) : fallback;
  }

  std::string RequireString(const std::string& key) const {
    auto v = tree_.get_optional<std::string>(Path(key));
    if (!v) throw ConfigError(key + ": missing required field");
    return Trim(*v);
  }

  double GetDouble(const std::string& key, double fallback) const {
    if (!Has(key)) return fallback;
    return ParseDouble(key, RequireString(key));
  }

  std::int64_t GetInt(const std::string& key, std::int64_t fallback) const {
    if (!Has(key)) return fallback;
    const std::string s = RequireString(key);
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError(key + ": expected an integer, got '" + s + "'");
    }
    return out;
  }

  bool GetBool(const std::string& key, bool fallback) const {
    if (!Has(key)) return fallback;
    const std::string s = RequireString(key);
    if (s == "true" || s == "on" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "off" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected a boolean (true/false/on/off), got '" + s + "'");
  }

  std::vector<double> GetDoubles(const std::string& key,
                                 const std::vector<double>& fallback) const {
    if (!Has(key)) return fallback;
    std::istringstream in(RequireString(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(ParseDouble(key, tok));
    return out;
  }

  void Set(const std::string& key, const std::string& value) {
    tree_.put(Path(key), value);
  }
  void Set(const std::string& key, double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    Set(key, os.str());
  }
  void Set(const std::string& key, std::int64_t value) { Set(key, std::to_string(value)); }
  void Set(const std::string& key, int value) { Set(key, std::to_string(value)); }
  void Set(const std::string& key, bool value) {
    Set(key, std::string(value ? "true" : "false"));
  }

  /// Overlays every key of `other` onto this config.
  void Merge(const KeyValueConfig& other) {
    for (const auto& [section, child] : other.tree_) {
      for (const auto& [key, value] : child) {
        tree_.put(boost::property_tree::ptree::path_type(section + kSep + key, kSep),
                  value.data());
      }
    }
  }

  /// Every "section.key", in file order.
  std::vector<std::string> Keys() const {
    std::vector<std::string> out;
    for (const auto& [section, child] : tree_) {
      if (child.empty()) out.push_back(section);  // key outside any section
      for (const auto& kv : child) out.push_back(section + "." + kv.first);
    }
    return out;
  }

  std::string ToString() const {
    std::ostringstream os;
    boost::property_tree::ini_parser::write_ini(os, tree_);
    return os.str();
  }

  void WriteFile(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file '" + path + "'");
    out << ToString();
  }

 private:
  // "link.thigh.mass" is section "link.thigh", key "mass".
  static boost::property_tree::ptree::path_type Path(const std::string& key) {
    std::string p = key;
    const auto dot = p.rfind('.');
    if (dot != std::string::npos) p[dot] = kSep;
    return boost::property_tree::ptree::path_type(p, kSep);
  }

  static constexpr char kSep = '\x1f';

  static std::string Trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static double ParseDouble(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
  }

  boost::property_tree::ptree tree_;
};

}  // namespace biped
