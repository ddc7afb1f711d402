#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace kktleak {

/**
 * Flat key = value configuration text.
 *
 *   # comment
 *   width = 1000
 *   dims = [5, 20, 100]
 *   loss = "exponential"
 *
 * Keys may contain dots. Strings may be quoted. Lists are bracketed and
 * comma separated. Duplicate keys are an error.
 */
class FlatConfig {
 public:
  static FlatConfig parse(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         const std::vector<std::int64_t>& fallback) const;

  /// Throws ParseError naming the first key no getter has read.
  void reject_unused() const;

 private:
  std::string raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace kktleak
