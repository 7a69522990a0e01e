#include "semprobe/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "semprobe/aggregate.hpp"
#include "semprobe/error.hpp"
#include "semprobe/format.hpp"
#include "semprobe/psychometric.hpp"

namespace semprobe::analysis {

using json = nlohmann::ordered_json;

std::optional<ReportMode> parse_report_mode(std::string_view text) {
  if (text == "bias") return ReportMode::bias;
  if (text == "sensitivity") return ReportMode::sensitivity;
  return std::nullopt;
}

namespace {

std::string_view mode_name(ReportMode mode) {
  return mode == ReportMode::bias ? "bias" : "sensitivity";
}

struct SourcedValue {
  FitRow row;
  double value = 0.0;
  std::vector<std::string> sources;
};

}  // namespace

ReportTable build_report(const std::vector<SourcedRows>& inputs, ReportMode mode,
                         const ReportOptions& options) {
  if (inputs.empty()) throw Error(ErrorKind::validation, "report needs at least one fit file");

  const char* field_name = mode == ReportMode::bias ? "bias" : "sensitivity";
  std::map<std::tuple<std::string, double>, SourcedValue> cells;  // (observer, guidance)
  std::set<std::string> pairs;

  for (const auto& input : inputs) {
    for (const auto& row : input.rows) {
      if (!row.error.empty()) continue;
      const auto& field = mode == ReportMode::bias ? row.bias : row.sensitivity;
      if (!field) {
        throw Error(ErrorKind::schema, input.source + ": row for '" + row.observer_id +
                                           "' at GS " + format_shortest(row.guidance_scale) +
                                           " has no '" + field_name + "' field");
      }
      pairs.insert(row.pair_id);
      auto key = std::make_tuple(row.observer_id, row.guidance_scale);
      auto it = cells.find(key);
      if (it == cells.end()) {
        cells.emplace(key, SourcedValue{row, *field, {input.source}});
        continue;
      }
      if (it->second.value != *field || it->second.row.observer_kind != row.observer_kind) {
        std::string sources;
        for (const auto& s : it->second.sources) sources += s + ", ";
        throw Error(ErrorKind::conflict,
                    "conflicting " + std::string(field_name) + " for '" + row.observer_id +
                        "' at GS " + format_shortest(row.guidance_scale) + " in " + sources +
                        input.source);
      }
      it->second.sources.push_back(input.source);
    }
  }
  if (pairs.size() > 1) {
    throw Error(ErrorKind::validation, "fit files mix pairs; report one pair at a time");
  }

  ReportTable table;
  table.mode = mode;
  table.pair_id = pairs.empty() ? std::string{} : *pairs.begin();

  std::set<double> scales;
  std::set<std::string> humans;
  std::set<std::string> machines;
  for (const auto& [key, cell] : cells) {
    scales.insert(std::get<1>(key));
    (cell.row.observer_kind == ObserverKind::human ? humans : machines).insert(std::get<0>(key));
  }
  table.guidance_scales.assign(scales.begin(), scales.end());
  if (!humans.empty()) table.columns.push_back(options.human_group_label);
  if (options.include_individual_humans) {
    table.columns.insert(table.columns.end(), humans.begin(), humans.end());
  }
  table.columns.insert(table.columns.end(), machines.begin(), machines.end());

  // Raw (unrounded) values feed the normalization.
  std::vector<std::vector<std::optional<double>>> raw(
      table.guidance_scales.size(), std::vector<std::optional<double>>(table.columns.size()));
  table.cells.assign(table.guidance_scales.size(),
                     std::vector<std::optional<TableCell>>(table.columns.size()));

  for (std::size_t r = 0; r < table.guidance_scales.size(); ++r) {
    const double scale = table.guidance_scales[r];
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const auto& column = table.columns[c];
      const bool group = !humans.empty() && c == 0;
      if (group) {
        std::vector<ObserverSummary> members;
        for (const auto& id : humans) {
          auto it = cells.find({id, scale});
          if (it == cells.end()) continue;
          ObserverSummary summary;
          summary.observer_id = id;
          summary.guidance_scale = scale;
          summary.bias = it->second.row.bias.value_or(0.0);
          summary.sensitivity = it->second.row.sensitivity.value_or(0.0);
          members.push_back(summary);
        }
        if (members.empty()) continue;
        auto average = grand_average(members, column);
        double mean = mode == ReportMode::bias ? average.mean_bias : average.mean_sensitivity;
        auto sem = mode == ReportMode::bias ? average.sem_bias : average.sem_sensitivity;
        raw[r][c] = mean;
        TableCell cell;
        cell.value = round_half_away(mean);
        if (sem) cell.sem = round_half_away(*sem);
        cell.n_observers = average.n_observers;
        table.cells[r][c] = cell;
      } else {
        auto it = cells.find({column, scale});
        if (it == cells.end()) continue;
        raw[r][c] = it->second.value;
        table.cells[r][c] = TableCell{round_half_away(it->second.value), 0.0, 0, std::nullopt, 1};
      }
    }
  }

  std::vector<double> values;
  for (const auto& row : raw) {
    for (const auto& value : row) {
      if (value) values.push_back(*value);
    }
  }
  auto intensities = min_max_intensity(
      values, mode == ReportMode::bias ? IntensityMode::magnitude : IntensityMode::range);
  std::size_t next = 0;
  for (std::size_t r = 0; r < raw.size(); ++r) {
    for (std::size_t c = 0; c < raw[r].size(); ++c) {
      if (!raw[r][c]) continue;
      auto& cell = *table.cells[r][c];
      cell.intensity = intensities[next++];
      if (mode == ReportMode::bias) cell.direction = cell.value > 0.0 ? 1 : (cell.value < 0.0 ? -1 : 0);
    }
  }
  return table;
}

std::string report_to_json(const ReportTable& table) {
  json doc;
  doc["mode"] = std::string(mode_name(table.mode));
  doc["pair_id"] = table.pair_id;
  doc["guidance_scales"] = table.guidance_scales;
  doc["columns"] = table.columns;
  auto rows = json::array();
  for (const auto& row : table.cells) {
    auto out = json::array();
    for (const auto& cell : row) {
      if (!cell) {
        out.push_back(nullptr);
        continue;
      }
      json item;
      item["value"] = cell->value;
      item["intensity"] = cell->intensity;
      item["direction"] = cell->direction;
      if (cell->sem) item["sem"] = *cell->sem;
      item["n_observers"] = cell->n_observers;
      out.push_back(std::move(item));
    }
    rows.push_back(std::move(out));
  }
  doc["cells"] = std::move(rows);
  return doc.dump(2) + "\n";
}

ReportTable report_from_json(const std::string& text) {
  ReportTable table;
  try {
    auto doc = json::parse(text);
    auto mode = parse_report_mode(doc.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorKind::schema, "unknown report mode");
    table.mode = *mode;
    table.pair_id = doc.at("pair_id").get<std::string>();
    table.guidance_scales = doc.at("guidance_scales").get<std::vector<double>>();
    table.columns = doc.at("columns").get<std::vector<std::string>>();
    for (const auto& row : doc.at("cells")) {
      std::vector<std::optional<TableCell>> cells;
      for (const auto& item : row) {
        if (item.is_null()) {
          cells.emplace_back();
          continue;
        }
        TableCell cell;
        cell.value = item.at("value").get<double>();
        cell.intensity = item.at("intensity").get<double>();
        cell.direction = item.at("direction").get<int>();
        if (item.contains("sem")) cell.sem = item.at("sem").get<double>();
        cell.n_observers = item.at("n_observers").get<int>();
        cells.push_back(cell);
      }
      table.cells.push_back(std::move(cells));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("malformed report JSON: ") + e.what());
  }
  if (table.cells.size() != table.guidance_scales.size()) {
    throw Error(ErrorKind::schema, "report JSON: row count differs from guidance scales");
  }
  for (const auto& row : table.cells) {
    if (row.size() != table.columns.size()) {
      throw Error(ErrorKind::schema, "report JSON: column count mismatch");
    }
  }
  return table;
}

std::string render_text(const ReportTable& table) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"GS"};
  header.insert(header.end(), table.columns.begin(), table.columns.end());
  grid.push_back(header);
  for (std::size_t r = 0; r < table.cells.size(); ++r) {
    std::vector<std::string> line{format_fixed(table.guidance_scales[r], 1)};
    for (const auto& cell : table.cells[r]) {
      if (!cell) {
        line.emplace_back("-");
        continue;
      }
      std::string text = format_fixed(cell->value, 2);
      if (cell->sem) text += " +/- " + format_fixed(*cell->sem, 2);
      text += " [" + format_fixed(cell->intensity, 2) + "]";
      line.push_back(text);
    }
    grid.push_back(line);
  }

  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
  }
  std::ostringstream out;
  out << (table.mode == ReportMode::bias ? "Bias" : "Sensitivity") << " (" << table.pair_id
      << "); [intensity] = global min-max normalization\n";
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c > 0) out << "  ";
      out << line[c] << std::string(widths[c] - line[c].size(), ' ');
    }
    out << '\n';
  }
  std::string text = out.str();
  // Trailing padding on the last column is noise.
  std::string cleaned;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    auto end = line.find_last_not_of(' ');
    cleaned += (end == std::string::npos ? std::string{} : line.substr(0, end + 1)) + "\n";
  }
  return cleaned;
}

CurvesResult build_curves(const std::vector<FitRow>& fits, const std::vector<ResponseCurve>& curves) {
  using Key = std::tuple<std::string, std::string, double>;  // pair, observer, guidance
  std::map<Key, const ResponseCurve*> by_key;
  std::map<std::string, std::set<double>> alphas_by_pair;
  for (const auto& curve : curves) {
    by_key[{curve.pair_id, curve.observer_id, curve.guidance_scale}] = &curve;
    for (const auto& point : curve.points) alphas_by_pair[curve.pair_id].insert(point.alpha);
  }

  CurvesResult result;
  std::set<Key> used;
  for (const auto& fit : fits) {
    const Key key{fit.pair_id, fit.observer_id, fit.guidance_scale};
    const std::string cell = fit.observer_id + " @ GS " + format_shortest(fit.guidance_scale);
    if (!fit.error.empty() || !fit.pse || !fit.beta1) {
      result.warnings.push_back(cell + ": no usable fit, skipped");
      used.insert(key);
      continue;
    }
    auto it = by_key.find(key);
    if (it == by_key.end()) {
      throw Error(ErrorKind::validation, "fit for " + cell + " (" + fit.pair_id +
                                             ") has no matching trials in the log");
    }
    used.insert(key);
    const ResponseCurve& curve = *it->second;

    CurvePlot plot;
    plot.observer_id = fit.observer_id;
    plot.pair_id = fit.pair_id;
    plot.guidance_scale = fit.guidance_scale;
    plot.pse = *fit.pse;
    plot.beta1 = *fit.beta1;
    plot.lambda = fit.lambda.value_or(0.0);

    for (double alpha : alphas_by_pair[fit.pair_id]) {
      auto point = std::find_if(curve.points.begin(), curve.points.end(),
                                [&](const CurvePoint& p) { return p.alpha == alpha; });
      if (point == curve.points.end() || point->n_total == 0) {
        result.warnings.push_back(cell + ": no trials at alpha " + format_shortest(alpha) +
                                  ", point omitted");
        continue;
      }
      double p = point->proportion();
      plot.observed.push_back(
          {alpha, p, point->n_total, std::sqrt(p * (1.0 - p) / static_cast<double>(point->n_total))});
    }
    for (int i = 0; i < kFittedCurvePoints; ++i) {
      double alpha = static_cast<double>(i) / (kFittedCurvePoints - 1);
      plot.fitted.emplace_back(alpha, logistic_p(alpha, plot.pse, plot.beta1, plot.lambda));
    }
    result.plots.push_back(std::move(plot));
  }
  for (const auto& [key, curve] : by_key) {
    if (used.count(key) == 0) {
      result.warnings.push_back(std::get<1>(key) + " @ GS " + format_shortest(std::get<2>(key)) +
                                ": trials present but no fit row");
    }
  }
  return result;
}

std::string curves_to_json(const CurvesResult& result) {
  auto plots = json::array();
  for (const auto& plot : result.plots) {
    json item;
    item["observer_id"] = plot.observer_id;
    item["pair_id"] = plot.pair_id;
    item["guidance_scale"] = plot.guidance_scale;
    item["pse"] = plot.pse;
    item["beta1"] = plot.beta1;
    item["lambda"] = plot.lambda;
    auto observed = json::array();
    for (const auto& point : plot.observed) {
      observed.push_back(
          {{"alpha", point.alpha}, {"proportion", point.proportion}, {"n", point.n}, {"sem", point.sem}});
    }
    item["observed"] = std::move(observed);
    auto fitted = json::array();
    for (const auto& [alpha, p] : plot.fitted) fitted.push_back({{"alpha", alpha}, {"p", p}});
    item["fitted"] = std::move(fitted);
    plots.push_back(std::move(item));
  }
  json doc;
  doc["curves"] = std::move(plots);
  doc["warnings"] = result.warnings;
  return doc.dump(2) + "\n";
}

}  // namespace semprobe::analysis
