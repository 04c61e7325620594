#include "support.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

namespace vpc::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string pattern = (fs::temp_directory_path() / "vpc-test-XXXXXX").string();
  if (::mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string TempDir::str(const std::string& child) const {
  return child.empty() ? path_.string() : (path_ / child).string();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

namespace {

constexpr const char* kShows[] = {"Friends", "Desperate Housewives", "How I Met Your Mother", "Modern Family"};

constexpr const char* kVocab[] = {"joey",  "where", "is",     "the",  "coffee", "ross",  "we",   "were", "on",
                                  "a",     "break", "beehive", "hat", "rachel", "look",  "at",   "this", "house",
                                  "going", "to",    "be",     "fine", "phil",  "gloria", "lily", "oh",   "my"};

}  // namespace

corpus::Manifest violin_tv_like_manifest() {
  corpus::Manifest m;
  m.name = "violin-tv-synthetic";
  const std::pair<corpus::Split, std::size_t> splits[] = {
      {corpus::Split::kTrain, 7983}, {corpus::Split::kValid, 1007}, {corpus::Split::kTest, 1013}};
  std::size_t k = 0;
  for (const auto& [split, count] : splits) {
    for (std::size_t i = 0; i < count; ++i, ++k) {
      corpus::Clip c;
      c.id = "clip" + std::to_string(k);
      c.show = kShows[k % 4];
      c.audio_ref = "audio/" + c.id + ".wav";
      c.video_ref = "video/" + c.id + ".mp4";
      c.reference = "reference transcript for " + c.id;
      // Symmetric +/-10 s jitter around 32.4 s, balanced in pairs.
      c.duration_s = 32.4 + ((k % 2 == 0) ? 10.0 : -10.0) * (k + 1 < 10003 ? 1.0 : 0.0);
      c.speech_density = 0.749;
      c.split = split;
      m.clips.push_back(std::move(c));
    }
  }
  return m;
}

corpus::Manifest synthetic_manifest(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, std::size(kVocab) - 1);
  std::uniform_int_distribution<int> len(3, 12);
  corpus::Manifest m;
  m.name = "synthetic";
  for (std::size_t i = 0; i < n; ++i) {
    corpus::Clip c;
    c.id = "s" + std::to_string(i);
    c.show = kShows[i % 4];
    c.audio_ref = "audio/" + c.id + ".wav";
    c.video_ref = "video/" + c.id + ".mp4";
    const int words = len(rng);
    for (int w = 0; w < words; ++w) {
      if (w) c.reference += ' ';
      c.reference += kVocab[word(rng)];
    }
    c.duration_s = 10.0 + static_cast<double>(i % 30);
    c.split = corpus::Split::kTest;
    m.clips.push_back(std::move(c));
  }
  return m;
}

std::vector<pipeline::Hypothesis> corrupted_hypotheses(const corpus::Manifest& m, const std::string& asr_model,
                                                       const std::string& setting, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> action(0, 9);
  std::uniform_int_distribution<std::size_t> word(0, std::size(kVocab) - 1);
  std::vector<pipeline::Hypothesis> out;
  for (const auto& clip : m.clips) {
    std::istringstream in(clip.reference);
    std::string tok;
    std::string text;
    const auto emit = [&](const std::string& t) {
      if (!text.empty()) text += ' ';
      text += t;
    };
    while (in >> tok) {
      switch (action(rng)) {
        case 0:  // deletion
          break;
        case 1:  // substitution
          emit(kVocab[word(rng)]);
          break;
        case 2:  // insertion
          emit(tok);
          emit(kVocab[word(rng)]);
          break;
        default:
          emit(tok);
      }
    }
    out.push_back({clip.id, asr_model, setting, text});
  }
  return out;
}

pipeline::HypothesisSet to_set(const std::vector<pipeline::Hypothesis>& hyps) {
  pipeline::HypothesisSet set;
  for (const auto& h : hyps) set.add(h);
  return set;
}

std::string write_stub_extractor(const fs::path& dir) {
  const fs::path script = dir / "stub_extractor.sh";
  write_file(script, "#!/bin/sh\nprintf 'FRAME %s %s' \"$1\" \"$2\" > \"$3\"\n");
  ::chmod(script.c_str(), 0755);
  return script.string();
}

FakeChatTransport::FakeChatTransport(Handler handler) : handler_(std::move(handler)) {}

model::HttpResponse FakeChatTransport::post(const std::string& url, const model::Headers& headers,
                                            const std::string& body, std::chrono::seconds) {
  ++calls_;
  {
    std::lock_guard lock(mu_);
    urls_.push_back(url);
    headers_.push_back(headers);
  }
  return handler_(nlohmann::json::parse(body));
}

std::vector<std::string> FakeChatTransport::urls() const {
  std::lock_guard lock(mu_);
  return urls_;
}

std::vector<model::Headers> FakeChatTransport::headers() const {
  std::lock_guard lock(mu_);
  return headers_;
}

model::HttpResponse completion(const std::string& text, const std::string& model) {
  const nlohmann::json body{{"id", "cmpl-test"},
                            {"model", model},
                            {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}}}},
                            {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 5}, {"total_tokens", 15}}}};
  return {200, body.dump()};
}

std::string last_text(const nlohmann::json& body) {
  const auto& content = body.at("messages").back().at("content");
  if (content.is_string()) return content.get<std::string>();
  std::string text;
  for (const auto& part : content) {
    if (part.at("type") == "text") text = part.at("text").get<std::string>();
  }
  return text;
}

int unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof(addr);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), len) != 0 ||
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    ::close(fd);
    throw std::runtime_error("bind failed");
  }
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace vpc::testing
