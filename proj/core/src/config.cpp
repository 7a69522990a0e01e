#include "semprobe/config.hpp"

#include <fstream>
#include <sstream>

#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe {

namespace {

std::string unquote(std::string_view value) {
  if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
      value.back() == value.front()) {
    value = value.substr(1, value.size() - 2);
  }
  return std::string(value);
}

}  // namespace

AnalysisConfig parse_config(const std::string& text, const std::string& source) {
  AnalysisConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::string section;

  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    auto fail = [&](const std::string& detail) {
      throw ParseError(ErrorKind::validation, source, line_no, detail);
    };

    if (body.front() == '[') {
      if (body.back() != ']') fail("unterminated section header");
      section = std::string(trim(body.substr(1, body.size() - 2)));
      if (section != "fit" && section != "exclusion") fail("unknown section [" + section + "]");
      continue;
    }
    auto eq = body.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    std::string key(trim(body.substr(0, eq)));
    std::string value = unquote(trim(body.substr(eq + 1)));
    if (section.empty()) fail("key '" + key + "' outside a section");

    auto number = [&]() {
      auto parsed = parse_double(value);
      if (!parsed) fail("'" + key + "' needs a number, got '" + value + "'");
      return *parsed;
    };
    auto integer = [&]() {
      auto parsed = parse_uint(value);
      if (!parsed) fail("'" + key + "' needs a non-negative integer, got '" + value + "'");
      return static_cast<int>(*parsed);
    };

    if (section == "fit") {
      auto& fit = config.fit;
      if (key == "pse_min") fit.pse_min = number();
      else if (key == "pse_max") fit.pse_max = number();
      else if (key == "beta_min") fit.beta_min = number();
      else if (key == "beta_max") fit.beta_max = number();
      else if (key == "lambda_fixed") fit.lambda_fixed = number();
      else if (key == "lambda_max") fit.lambda_max = number();
      else if (key == "grid_size") fit.grid_size = integer();
      else if (key == "max_iterations") fit.max_iterations = integer();
      else if (key == "tolerance") fit.tolerance = number();
      else if (key == "gof_critical") fit.gof_critical = number();
      else if (key == "lambda_mode") {
        if (value == "fixed") fit.lambda_mode = LambdaMode::fixed;
        else if (value == "free") fit.lambda_mode = LambdaMode::free;
        else fail("lambda_mode must be 'fixed' or 'free'");
      } else {
        fail("unknown key '" + key + "' in [fit]");
      }
    } else {
      auto& exclusion = config.exclusion;
      if (key == "fast_ms") exclusion.fast_ms = number();
      else if (key == "slow_ms") exclusion.slow_ms = number();
      else if (key == "flag_fraction") exclusion.flag_fraction = number();
      else fail("unknown key '" + key + "' in [exclusion]");
    }
  }

  config.fit.validate();
  if (!(config.exclusion.fast_ms < config.exclusion.slow_ms)) {
    throw Error(ErrorKind::validation, source + ": exclusion fast_ms must be below slow_ms");
  }
  return config;
}

AnalysisConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

}  // namespace semprobe
