#include "hkrm/annotations.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>

#include "hkrm/error.hpp"
#include "json.hpp"

namespace hkrm {

using nlohmann::json;

namespace {

std::string require_string(const json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line);
  if (!obj[key].is_string()) throw ParseError(std::string("field '") + key + "' must be a string", line);
  return obj[key].get<std::string>();
}

}  // namespace

AnnotationRecord parse_annotation(std::string_view line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line_number);
  }
  if (!j.is_object()) throw ParseError("record must be a JSON object", line_number);

  AnnotationRecord rec;
  rec.image = require_string(j, "image", line_number);
  rec.class_name = require_string(j, "class", line_number);
  if (j.contains("attributes")) {
    if (!j["attributes"].is_array()) throw ParseError("'attributes' must be an array", line_number);
    for (const auto& a : j["attributes"]) {
      if (!a.is_string()) throw ParseError("attribute names must be strings", line_number);
      rec.attributes.push_back(a.get<std::string>());
    }
  }
  if (j.contains("relations")) {
    if (!j["relations"].is_array()) throw ParseError("'relations' must be an array", line_number);
    for (const auto& r : j["relations"]) {
      if (!r.is_object()) throw ParseError("relations must be objects", line_number);
      rec.relations.push_back(
          {require_string(r, "predicate", line_number), require_string(r, "object_class", line_number)});
    }
  }
  return rec;
}

std::string to_json_line(const AnnotationRecord& record) {
  json rels = json::array();
  for (const auto& r : record.relations)
    rels.push_back({{"predicate", r.predicate}, {"object_class", r.object_class}});
  json j = {{"image", record.image},
            {"class", record.class_name},
            {"attributes", record.attributes},
            {"relations", rels}};
  return j.dump();
}

std::vector<AnnotationRecord> read_annotations(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_annotation(line, n));
  }
  return out;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations '" + path.string() + "'");
  return read_annotations(in);
}

Vocabulary::Vocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], i).second)
      throw DomainError("duplicate vocabulary entry '" + names_[i] + "'");
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary '" + path.string() + "'");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    names.push_back(line.substr(b, e - b + 1));
  }
  return Vocabulary(std::move(names));
}

Vocabulary top_k(const std::map<std::string, std::uint64_t>& counts, std::size_t k) {
  std::vector<std::pair<std::string, std::uint64_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (items.size() > k) items.resize(k);
  std::vector<std::string> names;
  names.reserve(items.size());
  for (auto& [name, c] : items) names.push_back(name);
  return Vocabulary(std::move(names));
}

IngestResult ingest_annotations(std::span<const AnnotationRecord> records,
                                const IngestOptions& options) {
  if (records.empty()) throw DomainError("ingest_annotations: no annotation records");

  Vocabulary classes;
  if (options.classes) {
    classes = *options.classes;
  } else {
    std::set<std::string> seen;
    for (const auto& r : records) {
      seen.insert(r.class_name);
      for (const auto& rel : r.relations) seen.insert(rel.object_class);
    }
    classes = Vocabulary(std::vector<std::string>(seen.begin(), seen.end()));
  }

  auto pick = [&](const std::optional<Vocabulary>& given, std::size_t k, bool attrs) {
    if (given) return *given;
    std::map<std::string, std::uint64_t> freq;
    for (const auto& r : records) {
      if (attrs) {
        for (const auto& a : r.attributes) ++freq[a];
      } else {
        for (const auto& rel : r.relations) ++freq[rel.predicate];
      }
    }
    return top_k(freq, k);
  };
  const Vocabulary attributes = pick(options.attributes, options.top_attributes, true);
  const Vocabulary predicates = pick(options.predicates, options.top_predicates, false);

  IngestResult out;
  out.table.class_names = classes.names();
  out.table.attribute_names = attributes.names();
  out.table.counts.assign(classes.size() * attributes.size(), 0);
  out.relations.class_names = classes.names();
  out.relations.predicate_names = predicates.names();

  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::uint64_t> triple_counts;
  for (const auto& r : records) {
    const auto subject = classes.find(r.class_name);
    if (!subject) {
      ++out.skipped.records;
      ++out.skipped.unknown_names["class:" + r.class_name];
      continue;
    }
    for (const auto& a : r.attributes) {
      if (auto k = attributes.find(a)) {
        ++out.table.count(*subject, *k);
      } else {
        ++out.skipped.attributes;
        ++out.skipped.unknown_names["attribute:" + a];
      }
    }
    for (const auto& rel : r.relations) {
      const auto p = predicates.find(rel.predicate);
      const auto o = classes.find(rel.object_class);
      if (!p || !o) {
        ++out.skipped.relations;
        if (!p) ++out.skipped.unknown_names["predicate:" + rel.predicate];
        if (!o) ++out.skipped.unknown_names["class:" + rel.object_class];
        continue;
      }
      ++triple_counts[{*subject, *p, *o}];
    }
  }
  for (const auto& [key, count] : triple_counts) {
    out.relations.triples.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), count});
  }
  return out;
}

}  // namespace hkrm
