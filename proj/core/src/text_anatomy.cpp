#include "lga/text_anatomy.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lga/error.hpp"

namespace lga {

namespace {

constexpr std::array<std::string_view, 21> kCountWords = {
    "zero",    "one",     "two",       "three",    "four",     "five",    "six",
    "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
    "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen", "twenty"};

constexpr std::string_view kExampleBlock =
    "Example:\n"
    "Input: jumping into pool.\n"
    "Output: {\"Action Label\": \"Jumping into poo\", \"sub-action description\": "
    "[\"A photo of a person stands at the edge of a pool, preparing to jump in.\", "
    "\"A photo of a person leaps off the edge, mid-air over the pool.\", "
    "\"A photo of a person enters the water, creating a splash as they dive in.\"]}\n";

std::string count_phrase(std::size_t n) {
  return spell_count(n) + (n == 1 ? " sub-action description" : " sub-action descriptions");
}

}  // namespace

std::string spell_count(std::size_t n) {
  if (n < kCountWords.size()) return std::string(kCountWords[n]);
  return std::to_string(n);
}

std::string build_prompt(std::string_view label, std::size_t phases) {
  if (label.empty()) fail(ErrorKind::invalid_argument, "action label must be non-empty");
  if (phases < 1) fail(ErrorKind::invalid_argument, "phase count must be at least 1");

  const std::string count = count_phrase(phases);
  std::string out;
  out += "Deduce the scene description and " + count + " from an action label. ";
  out +=
      "The scene description should include possible scene elements, such as humans, objects, and "
      "background. The scene description must consist of visible elements, not abstract "
      "descriptions like atmosphere, mood or social setting. The sub-action descriptions must "
      "follow strict temporal order, focusing on the posture of the people involved, relevant "
      "elements in the scene, and potential interactive objects. Ignore object textures and "
      "dismiss any unlikely or invalid sub-actions, as well as unnecessary emotional "
      "descriptions. Keep the sub-action descriptions brief and clear and avoid the abstract "
      "descriptions such as enjoying the performance. ";
  out += "Provide a concise answer for both the scene description and the " + count +
         ", following the example below:\n";
  out += kExampleBlock;
  if (phases != 3) {
    out += "Note: the example lists 3 entries, but your \"sub-action description\" list must "
           "contain exactly " +
           std::to_string(phases) + " entries in temporal order.\n";
  }
  out +=
      "Your analysis should be thorough and accurate, considering all relevant aspects of the "
      "action to support your deductions effectively. Once I provide the action label, please "
      "deduce the scene description and " +
      count + " accordingly.\n";
  out += "\nInput: ";
  out += label;
  out += ".\nOutput:";
  return out;
}

namespace {

// End offset (one past the closing brace) of the balanced object starting at
// `open`, honouring JSON string escapes. npos when unbalanced.
std::size_t match_object(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      if (ch == '\\') {
        ++i;
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (ch == '"') {
      in_string = true;
    } else if (ch == '{') {
      ++depth;
    } else if (ch == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::optional<nlohmann::json> first_json_object(std::string_view raw) {
  for (auto open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    const auto end = match_object(raw, open);
    if (end == std::string_view::npos) continue;
    auto parsed = nlohmann::json::parse(raw.substr(open, end - open), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

}  // namespace

AtomicDescriptions parse_llm_response(std::string_view raw,
                                      std::optional<std::size_t> expected_phases) {
  const std::string raw_text(raw);
  auto obj = first_json_object(raw);
  if (!obj) throw ParseError("no JSON object found in model reply", raw_text);

  const auto label = obj->find("Action Label");
  if (label == obj->end() || !label->is_string()) {
    throw ParseError("model reply lacks a string \"Action Label\"", raw_text);
  }
  const auto subs = obj->find("sub-action description");
  if (subs == obj->end() || !subs->is_array()) {
    throw ParseError("model reply lacks a \"sub-action description\" array", raw_text);
  }

  AtomicDescriptions out;
  out.label = label->get<std::string>();
  for (const auto& item : *subs) {
    if (!item.is_string()) throw ParseError("non-string sub-action description", raw_text);
    out.descriptions.push_back(item.get<std::string>());
  }
  for (const char* key : {"scene description", "Scene Description", "scene"}) {
    const auto scene = obj->find(key);
    if (scene != obj->end() && scene->is_string()) {
      out.scene = scene->get<std::string>();
      break;
    }
  }

  if (out.label.empty()) throw ParseError("empty \"Action Label\"", raw_text);
  if (out.descriptions.empty()) throw ParseError("empty sub-action description list", raw_text);
  if (expected_phases && out.descriptions.size() != *expected_phases) {
    throw ParseError("expected " + std::to_string(*expected_phases) + " sub-action descriptions, got " +
                         std::to_string(out.descriptions.size()),
                     raw_text);
  }
  return out;
}

std::string to_llm_json(const AtomicDescriptions& desc) {
  nlohmann::ordered_json j;
  j["Action Label"] = desc.label;
  j["sub-action description"] = desc.descriptions;
  if (desc.scene) j["scene description"] = *desc.scene;
  return j.dump();
}

DescriptionCache DescriptionCache::load(const std::filesystem::path& path) {
  DescriptionCache cache;
  std::ifstream in(path, std::ios::binary);
  if (!in) return cache;
  std::stringstream buf;
  buf << in.rdbuf();
  auto j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded() || !j.is_array()) {
    throw Error(ErrorKind::invalid_data, "description cache is not a JSON array", path.string());
  }
  for (const auto& item : j) {
    try {
      AtomicDescriptions d;
      d.label = item.at("label").get<std::string>();
      d.descriptions = item.at("descriptions").get<std::vector<std::string>>();
      if (item.contains("scene") && item["scene"].is_string()) d.scene = item["scene"].get<std::string>();
      const auto phases = item.at("L").get<std::size_t>();
      if (phases != d.descriptions.size()) {
        throw Error(ErrorKind::invalid_data,
                    "cache entry '" + d.label + "' declares L=" + std::to_string(phases) + " but has " +
                        std::to_string(d.descriptions.size()) + " descriptions",
                    path.string());
      }
      cache.put(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::invalid_data, std::string("malformed cache entry: ") + e.what(),
                  path.string());
    }
  }
  return cache;
}

void DescriptionCache::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& [key, d] : entries_) {
    nlohmann::ordered_json item;
    item["label"] = d.label;
    item["L"] = d.descriptions.size();
    item["descriptions"] = d.descriptions;
    if (d.scene) item["scene"] = *d.scene;
    arr.push_back(std::move(item));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open description cache for writing", path.string());
  out << arr.dump(2) << '\n';
}

const AtomicDescriptions* DescriptionCache::find(const std::string& label, std::size_t phases) const {
  const auto it = entries_.find({label, phases});
  return it == entries_.end() ? nullptr : &it->second;
}

void DescriptionCache::put(AtomicDescriptions desc) {
  auto key = std::make_pair(desc.label, desc.descriptions.size());
  entries_.insert_or_assign(std::move(key), std::move(desc));
}

}  // namespace lga
