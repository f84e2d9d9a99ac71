#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "kl/common.hpp"

namespace kl {

/// Minimal TOML-subset reader for scenario files: comments, one-level [tables],
/// bare keys, and values that are strings, numbers, booleans, or (nested)
/// arrays. Anything outside the subset is rejected as ConfigInvalid; JSON
/// scenarios bypass this entirely.
class TomlSubset {
 public:
  static nlohmann::json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  static nlohmann::json parse(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* section = &root;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string s = strip(line);
      if (s.empty() || s[0] == '#') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw Error(ErrorCode::ConfigInvalid,
                      "line " + std::to_string(lineno) + ": malformed table header");
        const std::string name = strip(s.substr(1, s.size() - 2));
        if (name.empty())
          throw Error(ErrorCode::ConfigInvalid,
                      "line " + std::to_string(lineno) + ": empty table name");
        root[name] = nlohmann::json::object();
        section = &root[name];
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorCode::ConfigInvalid,
                    "line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = strip(s.substr(0, eq));
      std::size_t pos = 0;
      const std::string vs = strip(s.substr(eq + 1));
      nlohmann::json v = parse_value(vs, pos, lineno);
      skip_ws(vs, pos);
      if (pos != vs.size() && vs[pos] != '#')
        throw Error(ErrorCode::ConfigInvalid,
                    "line " + std::to_string(lineno) + ": trailing characters");
      (*section)[key] = std::move(v);
    }
    return root;
  }

 private:
  static std::string strip(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static void skip_ws(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  static nlohmann::json parse_value(const std::string& s, std::size_t& pos,
                                    int lineno) {
    skip_ws(s, pos);
    if (pos >= s.size())
      throw Error(ErrorCode::ConfigInvalid,
                  "line " + std::to_string(lineno) + ": missing value");
    const char c = s[pos];
    if (c == '"') {
      ++pos;
      std::string out;
      while (pos < s.size() && s[pos] != '"') {
        if (s[pos] == '\\' && pos + 1 < s.size()) ++pos;
        out += s[pos++];
      }
      if (pos >= s.size())
        throw Error(ErrorCode::ConfigInvalid,
                    "line " + std::to_string(lineno) + ": unterminated string");
      ++pos;
      return out;
    }
    if (c == '[') {
      ++pos;
      nlohmann::json arr = nlohmann::json::array();
      skip_ws(s, pos);
      if (pos < s.size() && s[pos] == ']') {
        ++pos;
        return arr;
      }
      while (true) {
        arr.push_back(parse_value(s, pos, lineno));
        skip_ws(s, pos);
        if (pos < s.size() && s[pos] == ',') {
          ++pos;
          continue;
        }
        if (pos < s.size() && s[pos] == ']') {
          ++pos;
          return arr;
        }
        throw Error(ErrorCode::ConfigInvalid,
                    "line " + std::to_string(lineno) + ": malformed array");
      }
    }
    // bare scalar: bool or number
    std::size_t end = pos;
    while (end < s.size() && s[end] != ',' && s[end] != ']' && s[end] != '#' &&
           !std::isspace(static_cast<unsigned char>(s[end])))
      ++end;
    const std::string tok = s.substr(pos, end - pos);
    pos = end;
    if (tok == "true") return true;
    if (tok == "false") return false;
    try {
      std::size_t used = 0;
      if (tok.find_first_of(".eEinfa") == std::string::npos) {
        const long long iv = std::stoll(tok, &used);
        if (used == tok.size()) return iv;
      }
      const double dv = std::stod(tok, &used);
      if (used == tok.size()) return dv;
    } catch (...) {
    }
    throw Error(ErrorCode::ConfigInvalid,
                "line " + std::to_string(lineno) + ": bad scalar '" + tok + "'");
  }
};

}  // namespace kl
