// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "svkit/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "svkit/error.hpp"

namespace sv::config {

namespace {

std::string trimmed(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& name) {
  Config cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trimmed(line);
    if (t.empty() || t[0] == '#') continue;
    std::string where = name + " line " + std::to_string(line_no);
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw DataError(where + ": expected 'section.key = value'");
    std::string key = trimmed(t.substr(0, eq));
    std::string value = trimmed(t.substr(eq + 1));
    if (key.empty()) throw DataError(where + ": empty key");
    auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot == key.size() - 1)
      throw DataError(where + ": key '" + key +
                      "' must look like section.key");
    if (key.find(' ') != std::string::npos ||
        key.find('\t') != std::string::npos)
      throw DataError(where + ": key '" + key + "' contains whitespace");
    if (value.empty()) throw DataError(where + ": empty value for " + key);
    if (!cfg.values_.emplace(key, value).second)
      throw DataError(where + ": duplicate key '" + key + "'");
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_string(ss.str(), path);
}

bool Config::has(const std::string& key) const {
  return values_.count(key) > 0;
}

void Config::bad_value(const std::string& key, const std::string& why) const {
  throw DataError(name_ + ": config value for '" + key + "' " + why + " (is '" +
                  values_.at(key) + "')");
}

std::string Config::get_string(const std::string& key,
                               const std::string& dflt) const {
  auto it = values_.find(key);
  return it == values_.end() ? dflt : it->second;
}

int Config::get_int(const std::string& key, int dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    std::size_t pos = 0;
    int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) bad_value(key, "is not an integer");
    return v;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, "is not an integer");
  }
}

std::uint64_t Config::get_uint64(const std::string& key,
                                 std::uint64_t dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) bad_value(key, "is not an integer");
    return static_cast<std::uint64_t>(v);
  } catch (const DataError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, "is not an integer");
  }
}

double Config::get_double(const std::string& key, double dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    std::size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size() || !std::isfinite(v))
      bad_value(key, "is not a finite number");
    return v;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, "is not a finite number");
  }
}

bool Config::get_bool(const std::string& key, bool dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  bad_value(key, "is not a boolean (true/false/1/0)");
}

std::vector<double> Config::get_double_list(
    const std::string& key, const std::vector<double>& dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  std::vector<double> out;
  std::istringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      double v = std::stod(tok, &pos);
      if (pos != tok.size() || !std::isfinite(v))
        bad_value(key, "has a bad list entry '" + tok + "'");
      out.push_back(v);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      bad_value(key, "has a bad list entry '" + tok + "'");
    }
  }
  if (out.empty()) bad_value(key, "is an empty list");
  return out;
}

}  // namespace sv::config
