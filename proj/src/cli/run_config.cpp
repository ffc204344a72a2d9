#include "mtgrid/cli/run_config.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "mtgrid/common/atomic_file.hpp"
#include "mtgrid/common/error.hpp"

namespace mtgrid::cli {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  for (char c : key) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' && c != '-') return false;
  }
  return true;
}

// Strips quotes and a trailing comment from a raw value.
std::string parse_value(std::string_view raw, const std::string& where) {
  raw = trim(raw);
  if (!raw.empty() && raw.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < raw.size() && raw[i] != '"'; ++i) {
      if (raw[i] == '\\' && i + 1 < raw.size()) ++i;
      out += raw[i];
    }
    if (i >= raw.size()) throw InvalidArgument(where + ": unterminated string");
    const auto rest = trim(raw.substr(i + 1));
    if (!rest.empty() && rest.front() != '#') throw InvalidArgument(where + ": text after string");
    return out;
  }
  const auto hash = raw.find('#');
  if (hash != std::string_view::npos) raw = trim(raw.substr(0, hash));
  return std::string(raw);
}

bool needs_quotes(const std::string& v) {
  if (v.empty()) return true;
  for (char c : v) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '#' || c == '"' || c == ',') return true;
  }
  return false;
}

std::string quote(const std::string& v) {
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text, const std::string& origin) {
  RunConfig config;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    if (body.front() == '[') {
      const auto close = body.find(']');
      if (close == std::string_view::npos) throw InvalidArgument(where + ": unterminated section");
      section = std::string(trim(body.substr(1, close - 1)));
      if (!valid_key(section)) throw InvalidArgument(where + ": bad section name");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw InvalidArgument(where + ": expected key = value");
    const auto key = trim(body.substr(0, eq));
    if (!valid_key(key)) throw InvalidArgument(where + ": bad key '" + std::string(key) + "'");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    config.values_[full] = parse_value(body.substr(eq + 1), where);
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

void RunConfig::set(const std::string& key, std::string value) {
  if (!valid_key(key)) throw InvalidArgument("bad config key '" + key + "'");
  values_[key] = std::move(value);
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw InvalidArgument("override '" + std::string(assignment) + "' is not key=value");
  }
  set(std::string(trim(assignment.substr(0, eq))),
      parse_value(assignment.substr(eq + 1), "override"));
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  defaults_used_[key] = fallback;
  return fallback;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, fallback);
    defaults_used_[key] = std::string(buf, res.ptr);
    return fallback;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("config key " + key + " expects a number, got '" + it->second + "'");
  }
}

std::int64_t RunConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    defaults_used_[key] = std::to_string(fallback);
    return fallback;
  }
  std::int64_t v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("config key " + key + " expects an integer, got '" + s + "'");
  }
  return v;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    defaults_used_[key] = fallback ? "true" : "false";
    return fallback;
  }
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw InvalidArgument("config key " + key + " expects true or false, got '" + it->second + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key,
                                             const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    std::string joined;
    for (const auto& f : fallback) joined += (joined.empty() ? "" : ",") + f;
    defaults_used_[key] = joined;
    return fallback;
  }
  std::vector<std::string> out;
  std::string_view rest = it->second;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::string RunConfig::serialize() const {
  std::map<std::string, std::string> all = defaults_used_;
  for (const auto& [k, v] : values_) all[k] = v;
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [k, v] : all) {
    const auto dot = k.rfind('.');
    const std::string section = dot == std::string::npos ? "" : k.substr(0, dot);
    const std::string leaf = dot == std::string::npos ? k : k.substr(dot + 1);
    sections[section].emplace_back(leaf, v);
  }
  std::string out;
  for (const auto& [section, entries] : sections) {
    if (!section.empty()) out += (out.empty() ? "[" : "\n[") + section + "]\n";
    for (const auto& [leaf, v] : entries) {
      out += leaf + " = " + (needs_quotes(v) ? quote(v) : v) + "\n";
    }
  }
  return out;
}

}  // namespace mtgrid::cli
