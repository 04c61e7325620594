#include "vpc/prompting.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "vpc/digest.hpp"

namespace vpc::prompting {

namespace {

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

struct Piece {
  bool placeholder;
  std::string text;  // literal text or variable name
};

std::vector<Piece> tokenize(std::string_view body) {
  std::vector<Piece> pieces;
  std::string literal;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body.compare(i, 2, "{{") == 0) {
      std::size_t j = i + 2;
      if (j >= body.size() || !is_name_start(body[j])) {
        throw TemplateSyntax("'{{' at offset " + std::to_string(i) + " does not open a placeholder");
      }
      while (j < body.size() && is_name_char(body[j])) ++j;
      if (body.compare(j, 2, "}}") != 0) {
        throw TemplateSyntax("unterminated placeholder at offset " + std::to_string(i));
      }
      if (!literal.empty()) pieces.push_back({false, std::move(literal)});
      literal.clear();
      pieces.push_back({true, std::string(body.substr(i + 2, j - i - 2))});
      i = j + 2;
      continue;
    }
    if (body.compare(i, 2, "}}") == 0) {
      throw TemplateSyntax("stray '}}' at offset " + std::to_string(i));
    }
    literal.push_back(body[i]);
    ++i;
  }
  if (!literal.empty()) pieces.push_back({false, std::move(literal)});
  return pieces;
}

constexpr std::string_view kShowRecognitionBody =
    "You are watching a clip from a TV series. Which TV show is this clip from? "
    "Use the setting, the characters and any on-screen text to decide.\n"
    "Answer with the title of the show only. If you are not sure, answer \"unknown\".";

constexpr std::string_view kDescriptionBody =
    "Describe this video clip in fine-grained detail so that the description can be used to check "
    "a transcript of its dialogue. Cover:\n"
    "- the scene and location;\n"
    "- the characters present, with names if you recognise them;\n"
    "- what the characters are doing, including gestures;\n"
    "- notable objects;\n"
    "- any text visible on screen.\n"
    "Be factual and concise. Do not invent dialogue.";

constexpr std::string_view kCorrectionBody =
    "You are correcting the output of an automatic speech recognition (ASR) system on a clip from a "
    "TV series. Information extracted from the clip's video:\n"
    "TV show: {{context1}}\n"
    "Scene description: {{context2}}\n"
    "\n"
    "ASR transcript:\n"
    "{{hypothesis}}\n"
    "\n"
    "Correct recognition errors in the transcript, such as misspelled character names, words that "
    "sound alike, and words that do not fit the scene, using the video information when it helps. "
    "Keep words that are already plausible and do not paraphrase or summarise.\n"
    "Output ONLY the corrected transcript, with no commentary, labels or quotation marks.";

constexpr std::string_view kBuiltinVersion = "1";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open template file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

PromptTemplate make_template(std::string id, std::string version, std::string body) {
  PromptTemplate tpl;
  for (const auto& piece : tokenize(body)) {
    if (piece.placeholder) tpl.required_vars_.insert(piece.text);
  }
  tpl.content_hash_ = sha256_hex(body);
  tpl.id_ = std::move(id);
  tpl.version_ = std::move(version);
  tpl.body_ = std::move(body);
  return tpl;
}

std::string render(const PromptTemplate& tpl, const Vars& vars, bool strict) {
  for (const auto& name : tpl.required_vars()) {
    if (!vars.contains(name)) throw MissingVariable(name);
  }
  if (strict) {
    for (const auto& [name, value] : vars) {
      if (!tpl.required_vars().contains(name)) throw UnknownVariable(name);
    }
  }
  std::string out;
  out.reserve(tpl.body().size());
  for (const auto& piece : tokenize(tpl.body())) {
    out += piece.placeholder ? vars.at(piece.text) : piece.text;
  }
  return out;
}

PromptTemplate load_builtin(std::string_view id) {
  if (id == kShowRecognition) {
    return make_template(std::string(id), std::string(kBuiltinVersion), std::string(kShowRecognitionBody));
  }
  if (id == kFineGrainedDescription) {
    return make_template(std::string(id), std::string(kBuiltinVersion), std::string(kDescriptionBody));
  }
  if (id == kCorrection) {
    return make_template(std::string(id), std::string(kBuiltinVersion), std::string(kCorrectionBody));
  }
  throw UnknownTemplate(std::string(id));
}

std::string serialize_template(const PromptTemplate& tpl) {
  return "id: " + tpl.id() + "\nversion: " + tpl.version() + "\n---\n" + tpl.body();
}

PromptTemplate parse_template(std::string_view text) {
  std::string id;
  std::string version;
  std::size_t pos = 0;
  while (true) {
    const std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) throw TemplateSyntax("template header is not terminated by '---'");
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    if (line == "---") break;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) throw TemplateSyntax("bad header line '" + std::string(line) + "'");
    std::string_view key = line.substr(0, colon);
    std::string_view value = line.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    while (!value.empty() && value.back() == ' ') value.remove_suffix(1);
    if (key == "id") {
      id = value;
    } else if (key == "version") {
      version = value;
    }
  }
  if (id.empty()) throw TemplateSyntax("template header lacks an id");
  if (version.empty()) throw TemplateSyntax("template header lacks a version");
  return make_template(std::move(id), std::move(version), std::string(text.substr(pos)));
}

void save_template(const PromptTemplate& tpl, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write template file '" + path + "'");
  out << serialize_template(tpl);
}

PromptTemplate load_template_file(const std::string& path) { return parse_template(read_file(path)); }

TemplateSet resolve_templates(const std::optional<std::string>& prompt_dir) {
  TemplateSet set{load_builtin(kShowRecognition), load_builtin(kFineGrainedDescription), load_builtin(kCorrection)};
  if (!prompt_dir) return set;
  namespace fs = std::filesystem;
  if (!fs::is_directory(*prompt_dir)) throw Error("prompt directory '" + *prompt_dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(*prompt_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".prompt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    PromptTemplate tpl = load_template_file(file.string());
    if (tpl.id() == kShowRecognition) {
      set.show_recognition = std::move(tpl);
    } else if (tpl.id() == kFineGrainedDescription) {
      set.description = std::move(tpl);
    } else if (tpl.id() == kCorrection) {
      set.correction = std::move(tpl);
    }
  }
  if (!set.correction.required_vars().contains("hypothesis")) {
    throw TemplateSyntax("correction template must use the {{hypothesis}} placeholder");
  }
  return set;
}

}  // namespace vpc::prompting
