#include "semprobe/softmax_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <utility>

#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe::machine {

namespace {

constexpr std::string_view kLongHeader = "image_ref,model_id,label_id,probability";

double parse_probability(std::string_view text, const std::string& source, std::size_t line) {
  auto value = parse_double(text);
  if (!value) {
    throw ParseError(ErrorKind::schema, source, line,
                     "malformed probability '" + std::string(text) + "'");
  }
  if (!(*value >= 0.0 && *value <= 1.0)) {
    throw ParseError(ErrorKind::schema, source, line,
                     "probability " + std::string(text) + " outside [0, 1]");
  }
  return *value;
}

void require_identifier(std::string_view text, const char* what, const std::string& source,
                        std::size_t line) {
  if (text.empty()) {
    throw ParseError(ErrorKind::schema, source, line, std::string("empty ") + what);
  }
}

}  // namespace

std::vector<SoftmaxRecord> read_softmax(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_text;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header_text = std::string(trim(line));
      break;
    }
  }
  if (header_text.empty()) return {};

  const bool long_layout = header_text == kLongHeader;
  std::vector<int> wide_labels;
  if (!long_layout) {
    auto columns = split(header_text, ',');
    if (columns.size() < 3 || trim(columns[0]) != "image_ref" || trim(columns[1]) != "model_id") {
      throw ParseError(ErrorKind::schema, source, line_no,
                       "unrecognized softmax header '" + header_text + "'");
    }
    for (std::size_t i = 2; i < columns.size(); ++i) {
      auto id = parse_uint(columns[i]);
      if (!id) {
        throw ParseError(ErrorKind::schema, source, line_no,
                         "columnar header needs integer label ids, got '" +
                             std::string(columns[i]) + "'");
      }
      wide_labels.push_back(static_cast<int>(*id));
    }
  }

  std::vector<SoftmaxRecord> records;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = trim(line);
    if (text.empty()) continue;
    auto fields = split(text, ',');
    const std::size_t expected = long_layout ? 4 : 2 + wide_labels.size();
    if (fields.size() != expected) {
      throw ParseError(ErrorKind::schema, source, line_no,
                       "expected " + std::to_string(expected) + " fields, got " +
                           std::to_string(fields.size()));
    }
    std::string image_ref(trim(fields[0]));
    std::string model_id(trim(fields[1]));
    require_identifier(image_ref, "image_ref", source, line_no);
    require_identifier(model_id, "model_id", source, line_no);

    auto [it, inserted] = index.try_emplace({image_ref, model_id}, records.size());
    if (inserted) records.push_back({image_ref, model_id, {}});
    auto& record = records[it->second];

    auto add_entry = [&](int label_id, double probability) {
      for (const auto& entry : record.entries) {
        if (entry.label_id == label_id) {
          throw ParseError(ErrorKind::schema, source, line_no,
                           "duplicate label " + std::to_string(label_id) + " for " + image_ref +
                               " / " + model_id);
        }
      }
      record.entries.push_back({label_id, probability});
    };

    if (long_layout) {
      auto label = parse_uint(fields[2]);
      if (!label) {
        throw ParseError(ErrorKind::schema, source, line_no,
                         "malformed label_id '" + std::string(fields[2]) + "'");
      }
      add_entry(static_cast<int>(*label), parse_probability(fields[3], source, line_no));
    } else {
      for (std::size_t i = 0; i < wide_labels.size(); ++i) {
        add_entry(wide_labels[i], parse_probability(fields[2 + i], source, line_no));
      }
    }
  }
  return records;
}

std::vector<SoftmaxRecord> load_softmax(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open softmax file " + path.string());
  return read_softmax(in, path.string());
}

void write_softmax(std::ostream& out, const std::vector<SoftmaxRecord>& records) {
  out << kLongHeader << '\n';
  for (const auto& record : records) {
    for (const auto& entry : record.entries) {
      out << record.image_ref << ',' << record.model_id << ',' << entry.label_id << ','
          << format_shortest(entry.probability) << '\n';
    }
  }
}

std::optional<StimulusCondition> condition_from_image_ref(const std::string& image_ref) {
  std::string name = std::filesystem::path(image_ref).filename().string();
  // Only an alphabetic suffix is an extension; "0.3" style fields are not.
  auto dot = name.rfind('.');
  if (dot != std::string::npos && dot + 1 < name.size() &&
      std::all_of(name.begin() + static_cast<std::ptrdiff_t>(dot) + 1, name.end(),
                  [](unsigned char c) { return std::isalpha(c) != 0; })) {
    name.erase(dot);
  }
  auto parts = split(name, '_');
  if (parts.size() != 4 || parts[0].empty()) return std::nullopt;
  auto guidance = parse_double(parts[1]);
  auto alpha = parse_double(parts[2]);
  auto seed = parse_uint(parts[3]);
  if (!guidance || !alpha || !seed) return std::nullopt;
  return StimulusCondition{std::string(parts[0]), *alpha, *guidance, *seed, image_ref};
}

std::string image_ref_for(const std::string& pair_id, double guidance_scale, double alpha,
                          std::uint64_t seed) {
  return pair_id + "_" + format_shortest(guidance_scale) + "_" + format_shortest(alpha) + "_" +
         std::to_string(seed) + ".png";
}

}  // namespace semprobe::machine
