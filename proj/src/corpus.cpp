#include "vpc/corpus.hpp"

#include "vpc/textnorm.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace vpc::corpus {

using nlohmann::json;

namespace {

constexpr std::string_view kRequiredKeys[] = {"id",        "show",      "audio_ref", "video_ref",
                                              "reference", "duration_s", "split"};

std::string require_string(const json& rec, std::string_view key, std::size_t line) {
  const auto it = rec.find(key);
  if (it == rec.end()) {
    throw MalformedRecord(line, "missing required field '" + std::string(key) + "'");
  }
  if (!it->is_string()) {
    throw MalformedRecord(line, "field '" + std::string(key) + "' must be a string");
  }
  return it->get<std::string>();
}

double require_number(const json& rec, std::string_view key, std::size_t line) {
  const auto it = rec.find(key);
  if (it == rec.end()) {
    throw MalformedRecord(line, "missing required field '" + std::string(key) + "'");
  }
  if (!it->is_number()) {
    throw MalformedRecord(line, "field '" + std::string(key) + "' must be a number");
  }
  return it->get<double>();
}

Clip clip_from_json(const json& rec, std::size_t line) {
  if (!rec.is_object()) {
    throw MalformedRecord(line, "record is not a JSON object");
  }
  Clip clip;
  clip.id = require_string(rec, "id", line);
  clip.show = require_string(rec, "show", line);
  clip.audio_ref = require_string(rec, "audio_ref", line);
  clip.video_ref = require_string(rec, "video_ref", line);
  clip.reference = require_string(rec, "reference", line);
  clip.duration_s = require_number(rec, "duration_s", line);

  const std::string split = require_string(rec, "split", line);
  const auto parsed = parse_split(split);
  if (!parsed) {
    throw MalformedRecord(line, "field 'split' must be one of train, valid, test (got '" + split + "')");
  }
  clip.split = *parsed;

  if (const auto it = rec.find("speech_density"); it != rec.end() && !it->is_null()) {
    if (!it->is_number()) {
      throw MalformedRecord(line, "field 'speech_density' must be a number");
    }
    clip.speech_density = it->get<double>();
  }

  for (const auto& [key, value] : rec.items()) {
    bool known = key == "speech_density";
    for (const auto k : kRequiredKeys) known = known || key == k;
    if (!known) clip.extra[key] = value;
  }
  return clip;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "test";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

const Clip* Manifest::find(std::string_view id) const {
  for (const auto& clip : clips) {
    if (clip.id == id) return &clip;
  }
  return nullptr;
}

MalformedRecord::MalformedRecord(std::size_t line, const std::string& detail)
    : Error("malformed record at line " + std::to_string(line) + ": " + detail), line_(line) {}

DuplicateId::DuplicateId(std::string id) : Error("duplicate clip id '" + id + "'"), id_(std::move(id)) {}

UnknownSplit::UnknownSplit(const std::string& name) : Error("unknown split '" + name + "'") {}

Manifest parse_manifest(std::istream& in, std::string default_name) {
  Manifest m;
  m.name = std::move(default_name);
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  bool first_record = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedRecord(line_no, e.what());
    }
    if (first_record && rec.is_object() && rec.size() == 1 && rec.contains("manifest")) {
      const json& header = rec["manifest"];
      if (!header.is_object()) throw MalformedRecord(line_no, "manifest header must be an object");
      if (const auto it = header.find("name"); it != header.end()) {
        if (!it->is_string()) throw MalformedRecord(line_no, "manifest name must be a string");
        m.name = it->get<std::string>();
      }
      if (const auto it = header.find("schema_version"); it != header.end()) {
        if (!it->is_number_integer()) throw MalformedRecord(line_no, "schema_version must be an integer");
        m.schema_version = it->get<int>();
        if (m.schema_version != kSchemaVersion) {
          throw MalformedRecord(line_no, "unsupported schema_version " + std::to_string(m.schema_version));
        }
      }
      first_record = false;
      continue;
    }
    first_record = false;
    Clip clip = clip_from_json(rec, line_no);
    if (!seen.insert(clip.id).second) throw DuplicateId(clip.id);
    m.clips.push_back(std::move(clip));
  }
  return m;
}

Manifest parse_manifest_string(std::string_view text, std::string default_name) {
  std::istringstream in{std::string(text)};
  return parse_manifest(in, std::move(default_name));
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path + "'");
  std::string stem = path;
  if (const auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
  if (const auto dot = stem.find_last_of('.'); dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
  return parse_manifest(in, stem);
}

json clip_to_json(const Clip& clip) {
  json rec = clip.extra.is_object() ? clip.extra : json::object();
  rec["id"] = clip.id;
  rec["show"] = clip.show;
  rec["audio_ref"] = clip.audio_ref;
  rec["video_ref"] = clip.video_ref;
  rec["reference"] = clip.reference;
  rec["duration_s"] = clip.duration_s;
  rec["split"] = std::string(to_string(clip.split));
  if (clip.speech_density) rec["speech_density"] = *clip.speech_density;
  return rec;
}

void serialize_manifest(const Manifest& m, std::ostream& out) {
  out << json{{"manifest", {{"name", m.name}, {"schema_version", m.schema_version}}}}.dump() << '\n';
  for (const auto& clip : m.clips) out << clip_to_json(clip).dump() << '\n';
}

std::string serialize_manifest(const Manifest& m) {
  std::ostringstream out;
  serialize_manifest(m, out);
  return out.str();
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kEmptyTestReference:
      return "EmptyTestReference";
    case ViolationKind::kNonPositiveDuration:
      return "NonPositiveDuration";
    case ViolationKind::kSpeechDensityRange:
      return "SpeechDensityRange";
    case ViolationKind::kSplitOverlap:
      return "SplitOverlap";
  }
  return "Unknown";
}

ValidationReport validate_manifest(const Manifest& m) {
  ValidationReport report;
  std::unordered_map<std::string, Split> first_split;
  for (const auto& clip : m.clips) {
    if (!(clip.duration_s > 0.0) || !std::isfinite(clip.duration_s)) {
      report.violations.push_back({ViolationKind::kNonPositiveDuration, clip.id,
                                   "duration_s must be > 0 (got " + std::to_string(clip.duration_s) + ")"});
    }
    if (clip.speech_density && !(*clip.speech_density >= 0.0 && *clip.speech_density <= 1.0)) {
      report.violations.push_back({ViolationKind::kSpeechDensityRange, clip.id,
                                   "speech_density must lie in [0,1] (got " +
                                       std::to_string(*clip.speech_density) + ")"});
    }
    if (clip.split == Split::kTest && textnorm::normalize(clip.reference).empty()) {
      report.violations.push_back(
          {ViolationKind::kEmptyTestReference, clip.id, "test clip has an empty reference transcript"});
    }
    const auto [it, inserted] = first_split.emplace(clip.id, clip.split);
    if (!inserted) {
      report.violations.push_back({ViolationKind::kSplitOverlap, clip.id,
                                   "clip id appears more than once (splits " + std::string(to_string(it->second)) +
                                       " and " + std::string(to_string(clip.split)) + ")"});
    }
  }
  return report;
}

CorpusStats split_stats(const Manifest& m, Split split) {
  CorpusStats stats;
  double total_seconds = 0.0;
  double density_sum = 0.0;
  std::size_t density_count = 0;
  for (const auto& clip : m.clips) {
    if (clip.split != split) continue;
    ++stats.clip_count;
    total_seconds += clip.duration_s;
    ++stats.per_show_counts[clip.show];
    if (clip.speech_density) {
      density_sum += *clip.speech_density;
      ++density_count;
    }
  }
  stats.total_hours = total_seconds / 3600.0;
  if (stats.clip_count > 0) stats.mean_duration_s = total_seconds / static_cast<double>(stats.clip_count);
  if (density_count > 0) stats.mean_speech_density = density_sum / static_cast<double>(density_count);
  return stats;
}

CorpusStats split_stats(const Manifest& m, std::string_view split) {
  const auto parsed = parse_split(split);
  if (!parsed) throw UnknownSplit(std::string(split));
  return split_stats(m, *parsed);
}

}  // namespace vpc::corpus
