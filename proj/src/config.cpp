#include "kktleak/config.hpp"

#include "kktleak/error.hpp"
#include "text_util.hpp"

namespace kktleak {

FlatConfig FlatConfig::parse(const std::string& text) {
  FlatConfig cfg;
  std::size_t lineno = 0;
  for (const std::string& line : detail::split(text, '\n')) {
    ++lineno;
    std::string body = line;
    // '#' starts a comment unless it sits inside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '"') quoted = !quoted;
      if (body[i] == '#' && !quoted) {
        body.resize(i);
        break;
      }
    }
    body = detail::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(lineno) + " is not key = value");
    }
    const std::string key = detail::trim(body.substr(0, eq));
    std::string value = detail::trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError("config line " + std::to_string(lineno) + " has no key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (!cfg.values_.emplace(key, value).second) {
      throw ParseError("config key '" + key + "' appears twice");
    }
  }
  return cfg;
}

bool FlatConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string FlatConfig::raw(const std::string& key) const {
  used_.insert(key);
  return values_.at(key);
}

std::string FlatConfig::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}

double FlatConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? detail::parse_double(raw(key), key) : fallback;
}

std::int64_t FlatConfig::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? detail::parse_int(raw(key), key) : fallback;
}

bool FlatConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = raw(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError("config key '" + key + "' must be true or false");
}

std::vector<std::int64_t> FlatConfig::get_int_list(
    const std::string& key, const std::vector<std::int64_t>& fallback) const {
  if (!has(key)) return fallback;
  std::string v = raw(key);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    throw ParseError("config key '" + key + "' must be a bracketed list");
  }
  v = detail::trim(v.substr(1, v.size() - 2));
  std::vector<std::int64_t> out;
  if (v.empty()) return out;
  for (const std::string& item : detail::split(v, ',')) {
    out.push_back(detail::parse_int(item, key));
  }
  return out;
}

void FlatConfig::reject_unused() const {
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) throw ParseError("unknown config key '" + key + "'");
  }
}

}  // namespace kktleak
