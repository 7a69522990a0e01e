#include "semprobe/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe::service {

void validate_manifest(const Manifest& manifest) {
  auto fail = [&](const std::string& detail) {
    throw Error(ErrorKind::validation, "manifest '" + manifest.manifest_id + "': " + detail);
  };
  if (manifest.manifest_id.empty() ||
      manifest.manifest_id.find_first_of("/\\ \t\n") != std::string::npos) {
    fail("manifest_id must be a non-empty plain token");
  }
  try {
    manifest.pair.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  if (manifest.conditions.empty()) fail("no conditions");

  std::set<ConditionKey> keys;
  std::set<std::string> refs;
  for (std::size_t i = 0; i < manifest.conditions.size(); ++i) {
    const auto& condition = manifest.conditions[i];
    std::string where = "condition " + std::to_string(i) + ": ";
    try {
      validate(condition);
    } catch (const Error& e) {
      fail(where + e.what());
    }
    if (condition.pair_id != manifest.pair.pair_id()) {
      fail(where + "pair_id '" + condition.pair_id + "' differs from '" +
           manifest.pair.pair_id() + "'");
    }
    if (condition.image_ref.empty()) fail(where + "empty image_ref");
    if (!keys.insert(key_of(condition)).second) fail(where + "duplicate condition");
    if (!refs.insert(condition.image_ref).second) {
      fail(where + "duplicate image_ref '" + condition.image_ref + "'");
    }
  }
}

Manifest manifest_from_json_text(const std::string& text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::schema, source + ": " + e.what());
  }
  auto fail = [&](const std::string& detail) {
    throw Error(ErrorKind::schema, source + ": " + detail);
  };
  if (!doc.is_object()) fail("manifest must be a JSON object");
  for (const char* field : {"manifest_id", "category_a", "category_b"}) {
    if (!doc.contains(field) || !doc[field].is_string()) {
      fail(std::string("missing string field '") + field + "'");
    }
  }
  if (!doc.contains("conditions") || !doc["conditions"].is_array()) {
    fail("missing 'conditions' array");
  }

  Manifest manifest;
  manifest.manifest_id = doc["manifest_id"].get<std::string>();
  manifest.pair = {doc["category_a"].get<std::string>(), doc["category_b"].get<std::string>()};
  for (const auto& item : doc["conditions"]) {
    if (!item.is_object() || !item.contains("pair_id") || !item["pair_id"].is_string() ||
        !item.contains("alpha") || !item["alpha"].is_number() ||
        !item.contains("guidance_scale") || !item["guidance_scale"].is_number() ||
        !item.contains("seed") || !item["seed"].is_number_unsigned() ||
        !item.contains("image_ref") || !item["image_ref"].is_string()) {
      fail("condition " + std::to_string(manifest.conditions.size()) +
           " needs pair_id, alpha, guidance_scale, seed (unsigned) and image_ref");
    }
    manifest.conditions.push_back({item["pair_id"].get<std::string>(),
                                   item["alpha"].get<double>(),
                                   item["guidance_scale"].get<double>(),
                                   item["seed"].get<std::uint64_t>(),
                                   item["image_ref"].get<std::string>()});
  }
  validate_manifest(manifest);
  return manifest;
}

std::string manifest_to_json_text(const Manifest& manifest) {
  nlohmann::ordered_json doc;
  doc["manifest_id"] = manifest.manifest_id;
  doc["category_a"] = manifest.pair.category_a;
  doc["category_b"] = manifest.pair.category_b;
  auto conditions = nlohmann::ordered_json::array();
  for (const auto& condition : manifest.conditions) {
    nlohmann::ordered_json item;
    item["pair_id"] = condition.pair_id;
    item["alpha"] = condition.alpha;
    item["guidance_scale"] = condition.guidance_scale;
    item["seed"] = condition.seed;
    item["image_ref"] = condition.image_ref;
    conditions.push_back(std::move(item));
  }
  doc["conditions"] = std::move(conditions);
  return doc.dump(2) + "\n";
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return manifest_from_json_text(buffer.str(), path.string());
}

Manifest factorial_manifest(const std::string& manifest_id, const CategoryPair& pair,
                            const std::vector<double>& guidance_scales,
                            const std::vector<double>& alphas, int n_seeds) {
  Manifest manifest{manifest_id, pair, {}};
  const std::string pair_id = pair.pair_id();
  for (double guidance : guidance_scales) {
    for (double alpha : alphas) {
      for (int seed = 0; seed < n_seeds; ++seed) {
        std::string ref = pair_id + "_" + format_shortest(guidance) + "_" +
                          format_shortest(alpha) + "_" + std::to_string(seed) + ".png";
        manifest.conditions.push_back(
            {pair_id, alpha, guidance, static_cast<std::uint64_t>(seed), ref});
      }
    }
  }
  validate_manifest(manifest);
  return manifest;
}

}  // namespace semprobe::service
