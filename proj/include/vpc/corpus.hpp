#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vpc/error.hpp"

namespace vpc::corpus {

enum class Split { kTrain, kValid, kTest };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view name);

// One audiovisual sample. Media locators are opaque; nothing here opens them.
struct Clip {
  std::string id;
  std::string show;
  std::string audio_ref;
  std::string video_ref;
  std::string reference;
  double duration_s = 0.0;
  std::optional<double> speech_density;
  Split split = Split::kTest;
  // Unrecognised keys from the source record, re-emitted on serialisation.
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const Clip&) const = default;
};

inline constexpr int kSchemaVersion = 1;

struct Manifest {
  std::string name;
  int schema_version = kSchemaVersion;
  std::vector<Clip> clips;

  const Clip* find(std::string_view id) const;
  bool operator==(const Manifest&) const = default;
};

class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line, const std::string& detail);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(std::string id);
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class UnknownSplit : public Error {
 public:
  explicit UnknownSplit(const std::string& name);
};

// Parses line-delimited JSON, one clip per line. Blank lines are skipped.
// An optional first record of the form {"manifest": {"name", "schema_version"}}
// sets the manifest metadata; otherwise `default_name` is used.
Manifest parse_manifest(std::istream& in, std::string default_name = "");
Manifest parse_manifest_string(std::string_view text, std::string default_name = "");
Manifest load_manifest(const std::string& path);

void serialize_manifest(const Manifest& m, std::ostream& out);
std::string serialize_manifest(const Manifest& m);

nlohmann::json clip_to_json(const Clip& clip);

enum class ViolationKind {
  kEmptyTestReference,
  kNonPositiveDuration,
  kSpeechDensityRange,
  kSplitOverlap,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string clip_id;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool valid() const { return violations.empty(); }
};

ValidationReport validate_manifest(const Manifest& m);

struct CorpusStats {
  std::size_t clip_count = 0;
  double total_hours = 0.0;
  double mean_duration_s = 0.0;
  // Mean over the clips that carry a density; absent when none do.
  std::optional<double> mean_speech_density;
  std::map<std::string, std::size_t> per_show_counts;
};

CorpusStats split_stats(const Manifest& m, Split split);
// Accepts a split name; throws UnknownSplit for anything other than
// train, valid or test.
CorpusStats split_stats(const Manifest& m, std::string_view split);

}  // namespace vpc::corpus
