// Copyright 2026 The mixctc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MIXCTC_COMMON_CONFIG_HPP
#define MIXCTC_COMMON_CONFIG_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace mixctc {

// Flat key=value settings store. The on-disk format is UTF-8 text, one
// "key=value" per line, with '#' starting a comment and blank lines ignored.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load_file(const std::string& path);

  // Keys sorted, one per line; parse(serialize()) round-trips.
  std::string serialize() const;
  void save_file(const std::string& path) const;

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set_int(const std::string& key, int64_t value);
  void set_double(const std::string& key, double value);
  void set_bool(const std::string& key, bool value);

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Copies every entry of `other` over this one.
  void merge(const KeyValueConfig& other);

  // Throws InvalidConfig naming the first key not in `known`.
  void reject_unknown_keys(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace mixctc

#endif  // MIXCTC_COMMON_CONFIG_HPP
