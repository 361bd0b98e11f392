// Copyright 2026 the condest authors
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
//
// Minimal declarative config files: one `dotted.key = value` per line,
// values are numbers, strings, booleans or bracketed number lists, `#`
// starts a comment. Keys keep insertion order so files round-trip.

#ifndef CONDEST_CONFIG_HPP_
#define CONDEST_CONFIG_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "condest/errors.hpp"

namespace condest {

class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const;
  /// Keys below throw ConfigError when the key is missing or malformed;
  /// the variants with a default never throw on absence.
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_vector(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, const std::vector<double>& value);

  /// Keys with the given prefix (prefix itself excluded), insertion order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  std::string serialize() const;

 private:
  const std::string& raw(const std::string& key) const;
  std::vector<std::string> order_;
  std::map<std::string, std::string> values_;
};

}  // namespace condest

#endif  // CONDEST_CONFIG_HPP_
