#include <filesystem>
#include <string_view>
#include <utility>

#include "consensus/harness.hpp"

namespace consensus::detail {
// Defined in the generated catalog_data.cpp.
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_scenarios();
std::string_view embedded_manifest();
}  // namespace consensus::detail

namespace consensus::harness {

using nlohmann::json;

namespace {

const json& manifest() {
  static const json doc = json::parse(detail::embedded_manifest());
  return doc;
}

// Canonical id for an id or alias; empty when unknown.
std::string canonical_id(const std::string& id) {
  for (const json& e : manifest().at("entries")) {
    if (e.at("id") == id) return id;
    for (const json& alias : e.value("aliases", json::array())) {
      if (alias == id) return e.at("id").get<std::string>();
    }
  }
  return {};
}

}  // namespace

std::vector<CatalogEntry> catalog() {
  std::vector<CatalogEntry> out;
  for (const json& e : manifest().at("entries")) {
    out.push_back(
        {e.at("id").get<std::string>(), e.at("anchor").get<std::string>(), e.at("summary").get<std::string>()});
  }
  return out;
}

Scenario catalog_scenario(const std::string& id) {
  const std::string canonical = canonical_id(id);
  if (canonical.empty()) {
    std::string known;
    for (const auto& e : catalog()) known += (known.empty() ? "" : ", ") + e.id;
    throw InvalidArgument("unknown catalog id '" + id + "' (known: " + known + ")");
  }
  for (const auto& [name, text] : detail::embedded_scenarios()) {
    if (name != canonical) continue;
    Scenario s = parse_scenario(json::parse(text), "catalog:" + canonical);
    if (s.id != canonical) throw ParseError("/id", "catalog file declares id '" + s.id + "'", "catalog:" + canonical);
    return s;
  }
  throw InvalidArgument("catalog id '" + canonical + "' has no scenario file");
}

Scenario resolve_scenario(const std::string& path_or_id) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(path_or_id, ec)) return load_scenario(path_or_id);
  if (path_or_id.ends_with(".json")) throw ParseError("", "no such scenario file", path_or_id);
  return catalog_scenario(path_or_id);
}

}  // namespace consensus::harness
