// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_CONFIG_HPP_
#define SVKIT_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sv::config {

// Flat "section.key = value" text. Blank lines and full-line '#' comments
// are allowed; parse errors carry line numbers.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text,
                             const std::string& name = "<config>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key,
                         const std::string& dflt) const;
  int get_int(const std::string& key, int dflt) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t dflt) const;
  double get_double(const std::string& key, double dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;
  // comma-separated reals, e.g. "loss.ce_schedule = 1.0,0.5,0.1"
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& dflt) const;

  const std::map<std::string, std::string>& items() const { return values_; }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;

  [[noreturn]] void bad_value(const std::string& key,
                              const std::string& why) const;
};

}  // namespace sv::config

#endif  // SVKIT_CONFIG_HPP_
