#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hkrm {

struct Relation {
  std::string predicate;
  std::string object_class;
};

// One annotated object instance; one NDJSON line:
//   {"image": str, "class": str, "attributes": [str], "relations": [{"predicate": str, "object_class": str}]}
struct AnnotationRecord {
  std::string image;
  std::string class_name;
  std::vector<std::string> attributes;
  std::vector<Relation> relations;
};

AnnotationRecord parse_annotation(std::string_view line, std::size_t line_number = 0);
std::string to_json_line(const AnnotationRecord& record);
// Blank lines are skipped; malformed lines throw ParseError with their line number.
std::vector<AnnotationRecord> read_annotations(std::istream& in);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);

// Ordered name list with index lookup.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::optional<std::size_t> find(std::string_view name) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Plain text, one name per line; blank lines and lines starting with '#' ignored.
Vocabulary read_vocabulary(const std::filesystem::path& path);

// The k most frequent names, ordered by descending count then by name.
Vocabulary top_k(const std::map<std::string, std::uint64_t>& counts, std::size_t k);

// C x K class/attribute co-occurrence counts.
struct FrequencyTable {
  std::vector<std::string> class_names;
  std::vector<std::string> attribute_names;
  std::vector<std::uint64_t> counts;  // row-major C x K

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t num_attributes() const { return attribute_names.size(); }
  std::uint64_t count(std::size_t c, std::size_t k) const { return counts[c * num_attributes() + k]; }
  std::uint64_t& count(std::size_t c, std::size_t k) { return counts[c * num_attributes() + k]; }
  bool operator==(const FrequencyTable&) const = default;
};

struct Triple {
  std::size_t subject = 0;
  std::size_t predicate = 0;
  std::size_t object = 0;
  std::uint64_t count = 0;
  bool operator==(const Triple&) const = default;
};

// Subject-predicate-object tallies, sorted by (subject, predicate, object).
struct RelationshipTriples {
  std::vector<std::string> class_names;
  std::vector<std::string> predicate_names;
  std::vector<Triple> triples;
  bool operator==(const RelationshipTriples&) const = default;
};

// Occurrences dropped because a name fell outside the active vocabulary.
struct SkipReport {
  std::uint64_t records = 0;  // records whose subject class is unknown
  std::uint64_t attributes = 0;
  std::uint64_t relations = 0;  // unknown predicate or object class
  std::map<std::string, std::uint64_t> unknown_names;
  std::uint64_t total() const { return records + attributes + relations; }
};

struct IngestOptions {
  // When unset, classes are every subject/object name seen (sorted) and
  // attributes/predicates are the top-k most frequent.
  std::optional<Vocabulary> classes;
  std::optional<Vocabulary> attributes;
  std::optional<Vocabulary> predicates;
  std::size_t top_attributes = 200;
  std::size_t top_predicates = 200;
};

struct IngestResult {
  FrequencyTable table;
  RelationshipTriples relations;
  SkipReport skipped;
};

// Throws DomainError on empty input.
IngestResult ingest_annotations(std::span<const AnnotationRecord> records,
                                const IngestOptions& options = {});

}  // namespace hkrm
