#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "vpc/error.hpp"

namespace vpc::prompting {

inline constexpr std::string_view kShowRecognition = "p1_show_recognition";
inline constexpr std::string_view kFineGrainedDescription = "p2_fine_grained_description";
inline constexpr std::string_view kCorrection = "t_correction";

// Immutable once built; construct through make_template so that
// required_vars and content_hash always agree with the body.
class PromptTemplate {
 public:
  const std::string& id() const { return id_; }
  const std::string& version() const { return version_; }
  const std::string& body() const { return body_; }
  const std::set<std::string>& required_vars() const { return required_vars_; }
  const std::string& content_hash() const { return content_hash_; }

  friend PromptTemplate make_template(std::string id, std::string version, std::string body);

 private:
  std::string id_;
  std::string version_;
  std::string body_;
  std::set<std::string> required_vars_;
  std::string content_hash_;
};

class TemplateSyntax : public Error {
 public:
  using Error::Error;
};

class MissingVariable : public Error {
 public:
  explicit MissingVariable(std::string name) : Error("missing template variable '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class UnknownVariable : public Error {
 public:
  explicit UnknownVariable(std::string name) : Error("unknown template variable '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class UnknownTemplate : public Error {
 public:
  explicit UnknownTemplate(const std::string& id) : Error("unknown prompt template '" + id + "'") {}
};

// Placeholders are `{{name}}` with name matching [A-Za-z_][A-Za-z0-9_]*.
// Any other use of `{{` or `}}` is a TemplateSyntax error.
PromptTemplate make_template(std::string id, std::string version, std::string body);

using Vars = std::map<std::string, std::string>;

// Strict by default: extra variables are rejected.
std::string render(const PromptTemplate& tpl, const Vars& vars, bool strict = true);

PromptTemplate load_builtin(std::string_view id);

// Text asset: "id: <id>\nversion: <v>\n---\n<body>". The body is kept verbatim.
std::string serialize_template(const PromptTemplate& tpl);
PromptTemplate parse_template(std::string_view text);
void save_template(const PromptTemplate& tpl, const std::string& path);
PromptTemplate load_template_file(const std::string& path);

// The three templates a correction run needs.
struct TemplateSet {
  PromptTemplate show_recognition;
  PromptTemplate description;
  PromptTemplate correction;
};

// Builtins, overridden by any `*.prompt` file in `prompt_dir` whose header id
// matches one of the three roles.
TemplateSet resolve_templates(const std::optional<std::string>& prompt_dir);

}  // namespace vpc::prompting
