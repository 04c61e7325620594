#include <doctest.h>

#include <random>

#include "support.hpp"
#include "vpc/digest.hpp"
#include "vpc/prompting.hpp"

using namespace vpc::prompting;

TEST_CASE("render substitutes every placeholder") {
  const auto t = make_template("x", "1", "Hi {{name}}, meet {{other}} and {{name}} again.");
  CHECK(t.required_vars() == std::set<std::string>{"name", "other"});
  CHECK(render(t, {{"name", "Ross"}, {"other", "Rachel"}}) == "Hi Ross, meet Rachel and Ross again.");
}

TEST_CASE("render errors") {
  const auto t = make_template("x", "1", "{{a}} {{b}}");
  SUBCASE("missing") {
    try {
      render(t, {{"a", "1"}});
      FAIL("expected MissingVariable");
    } catch (const MissingVariable& e) {
      CHECK(e.name() == "b");
    }
  }
  SUBCASE("unknown in strict mode") {
    try {
      render(t, {{"a", "1"}, {"b", "2"}, {"c", "3"}});
      FAIL("expected UnknownVariable");
    } catch (const UnknownVariable& e) {
      CHECK(e.name() == "c");
    }
  }
  SUBCASE("unknown tolerated when lax") { CHECK(render(t, {{"a", "1"}, {"b", "2"}, {"c", "3"}}, false) == "1 2"); }
}

TEST_CASE("values are inserted literally") {
  const auto t = make_template("x", "1", "<{{v}}>");
  CHECK(render(t, {{"v", "{{v}} and }} {{"}}) == "<{{v}} and }} {{>");
}

TEST_CASE("template syntax errors") {
  CHECK_THROWS_AS(make_template("x", "1", "{{ spaced }}"), TemplateSyntax);
  CHECK_THROWS_AS(make_template("x", "1", "{{unterminated"), TemplateSyntax);
  CHECK_THROWS_AS(make_template("x", "1", "stray }}"), TemplateSyntax);
  CHECK_THROWS_AS(make_template("x", "1", "{{9lives}}"), TemplateSyntax);
  CHECK_NOTHROW(make_template("x", "1", "single { braces } are fine"));
}

TEST_CASE("content hash is the SHA-256 of the body") {
  const auto t = make_template("x", "7", "body text");
  CHECK(t.content_hash() == vpc::sha256_hex("body text"));
  CHECK(make_template("x", "7", "body text ").content_hash() != t.content_hash());
}

TEST_CASE("distinct values render distinct prompts") {
  const auto t = load_builtin(kCorrection);
  std::mt19937 rng(3);
  std::set<std::string> seen;
  for (int i = 0; i < 500; ++i) {
    const std::string h = "hyp " + std::to_string(i) + " " + std::to_string(rng());
    const auto out = render(t, {{"hypothesis", h}, {"context1", "Friends"}, {"context2", "a coffee shop"}});
    CHECK(out.find(h) != std::string::npos);
    seen.insert(out);
  }
  CHECK(seen.size() == 500);
}

TEST_CASE("builtins") {
  const auto p1 = load_builtin(kShowRecognition);
  const auto p2 = load_builtin(kFineGrainedDescription);
  const auto t = load_builtin(kCorrection);
  CHECK(p1.required_vars().empty());
  CHECK(p2.required_vars().empty());
  CHECK(t.required_vars() == std::set<std::string>{"context1", "context2", "hypothesis"});
  CHECK(p1.id() == kShowRecognition);
  CHECK_THROWS_AS(load_builtin("nope"), UnknownTemplate);
}

TEST_CASE("save and load round trip preserves the hash") {
  vpc::testing::TempDir dir;
  for (const auto id : {kShowRecognition, kFineGrainedDescription, kCorrection}) {
    const auto t = load_builtin(id);
    const std::string path = dir.str(std::string(id) + ".prompt");
    save_template(t, path);
    const auto back = load_template_file(path);
    CHECK(back.id() == t.id());
    CHECK(back.version() == t.version());
    CHECK(back.body() == t.body());
    CHECK(back.content_hash() == t.content_hash());
  }
  const auto odd = make_template("odd", "2", "\n\nleading and trailing newlines\n\n");
  CHECK(parse_template(serialize_template(odd)).content_hash() == odd.content_hash());
  CHECK_THROWS_AS(parse_template("no header here"), TemplateSyntax);
}

TEST_CASE("a prompt directory overrides builtins by id") {
  vpc::testing::TempDir dir;
  const auto custom = make_template(std::string(kCorrection), "2", "Fix: {{hypothesis}} ({{context1}})");
  save_template(custom, dir.str("t.prompt"));
  vpc::testing::write_file(dir.path() / "notes.txt", "ignored");
  const auto set = resolve_templates(dir.str());
  CHECK(set.correction.content_hash() == custom.content_hash());
  CHECK(set.show_recognition.content_hash() == load_builtin(kShowRecognition).content_hash());
  CHECK(resolve_templates(std::nullopt).correction.content_hash() == load_builtin(kCorrection).content_hash());

  vpc::testing::TempDir bad;
  save_template(make_template(std::string(kCorrection), "3", "no hypothesis slot"), bad.str("t.prompt"));
  CHECK_THROWS(resolve_templates(bad.str()));
}
