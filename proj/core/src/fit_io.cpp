#include "semprobe/fit_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe {

FitRow make_fit_row(const ResponseCurve& curve, const PsychometricFit& fit, double gof_critical) {
  auto derived = bias_sensitivity(fit, /*force_accept=*/true);
  FitRow row;
  row.observer_id = curve.observer_id;
  row.observer_kind = curve.observer_kind;
  row.pair_id = curve.pair_id;
  row.guidance_scale = curve.guidance_scale;
  row.pse = fit.pse;
  row.beta1 = fit.beta1;
  row.lambda = fit.lambda;
  row.deviance = fit.deviance;
  row.bias = derived.bias;
  row.sensitivity = derived.sensitivity;
  row.log_likelihood = fit.log_likelihood;
  row.converged = fit.converged;
  row.degenerate = fit.degenerate;
  row.passes_gof = passes_gof(fit.deviance, gof_critical);
  row.n_points = fit.n_points;
  return row;
}

FitRow make_error_row(const ResponseCurve& curve, const std::string& error) {
  FitRow row;
  row.observer_id = curve.observer_id;
  row.observer_kind = curve.observer_kind;
  row.pair_id = curve.pair_id;
  row.guidance_scale = curve.guidance_scale;
  row.n_points = static_cast<int>(curve.points.size());
  row.error = error.empty() ? "unfittable" : error;
  return row;
}

std::string fit_row_line(const FitRow& row) {
  // Hand-assembled so decimals keep exactly 6 significant digits.
  std::string line = "{";
  auto key = [&](const char* name) {
    if (line.size() > 1) line += ',';
    line += '"';
    line += name;
    line += "\":";
  };
  auto text = [&](const char* name, const std::string& value) {
    key(name);
    line += nlohmann::json(value).dump();
  };
  auto decimal = [&](const char* name, const std::optional<double>& value) {
    if (!value) return;
    key(name);
    line += format_significant(*value, 6);
  };
  auto flag = [&](const char* name, bool value) {
    key(name);
    line += value ? "true" : "false";
  };

  text("observer_id", row.observer_id);
  text("observer_kind", std::string(to_string(row.observer_kind)));
  text("pair_id", row.pair_id);
  decimal("guidance_scale", row.guidance_scale);
  decimal("pse", row.pse);
  decimal("beta1", row.beta1);
  decimal("lambda", row.lambda);
  decimal("deviance", row.deviance);
  decimal("bias", row.bias);
  decimal("sensitivity", row.sensitivity);
  decimal("log_likelihood", row.log_likelihood);
  flag("converged", row.converged);
  flag("degenerate", row.degenerate);
  flag("passes_gof", row.passes_gof);
  key("n_points");
  line += std::to_string(row.n_points);
  if (!row.error.empty()) text("error", row.error);
  line += '}';
  return line;
}

void write_fit_rows(std::ostream& out, const std::vector<FitRow>& rows) {
  for (const auto& row : rows) out << fit_row_line(row) << '\n';
}

std::vector<FitRow> read_fit_rows(std::istream& in, const std::string& source) {
  std::vector<FitRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fail = [&](const std::string& detail) {
      throw ParseError(ErrorKind::schema, source, line_no, detail);
    };
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail("expected a JSON object");

    auto required_string = [&](const char* name) {
      if (!doc.contains(name) || !doc[name].is_string()) {
        fail(std::string("missing string field '") + name + "'");
      }
      return doc[name].get<std::string>();
    };
    auto optional_number = [&](const char* name) -> std::optional<double> {
      if (!doc.contains(name) || doc[name].is_null()) return std::nullopt;
      if (!doc[name].is_number()) fail(std::string("field '") + name + "' must be a number");
      return doc[name].get<double>();
    };
    auto boolean = [&](const char* name) {
      if (!doc.contains(name)) return false;
      if (!doc[name].is_boolean()) fail(std::string("field '") + name + "' must be a boolean");
      return doc[name].get<bool>();
    };

    FitRow row;
    row.observer_id = required_string("observer_id");
    auto kind = parse_observer_kind(required_string("observer_kind"));
    if (!kind) fail("unknown observer_kind");
    row.observer_kind = *kind;
    row.pair_id = required_string("pair_id");
    auto guidance = optional_number("guidance_scale");
    if (!guidance) fail("missing number field 'guidance_scale'");
    row.guidance_scale = *guidance;
    row.pse = optional_number("pse");
    row.beta1 = optional_number("beta1");
    row.lambda = optional_number("lambda");
    row.deviance = optional_number("deviance");
    row.bias = optional_number("bias");
    row.sensitivity = optional_number("sensitivity");
    row.log_likelihood = optional_number("log_likelihood");
    row.converged = boolean("converged");
    row.degenerate = boolean("degenerate");
    row.passes_gof = boolean("passes_gof");
    if (doc.contains("n_points")) {
      if (!doc["n_points"].is_number_integer()) fail("field 'n_points' must be an integer");
      row.n_points = doc["n_points"].get<int>();
    }
    if (doc.contains("error")) {
      if (!doc["error"].is_string()) fail("field 'error' must be a string");
      row.error = doc["error"].get<std::string>();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<FitRow> load_fit_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open fit file " + path.string());
  return read_fit_rows(in, path.string());
}

}  // namespace semprobe
