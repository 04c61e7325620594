#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpc/corpus.hpp"
#include "vpc/model_client.hpp"
#include "vpc/pipeline.hpp"

namespace vpc::testing {

// Directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = "") const;

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

// Split sizes and durations matching the Violin-TV subset
// totals: 10,003 clips, 7,983/1,007/1,013 split, 32.4 s mean duration.
corpus::Manifest violin_tv_like_manifest();

// `n` test-split clips with deterministic pseudo-random references drawn
// from a small vocabulary; shows rotate over the four series.
corpus::Manifest synthetic_manifest(std::size_t n, unsigned seed);

// A hypothesis per clip with deterministic word-level corruption.
std::vector<pipeline::Hypothesis> corrupted_hypotheses(const corpus::Manifest& m, const std::string& asr_model,
                                                       const std::string& setting, unsigned seed);

pipeline::HypothesisSet to_set(const std::vector<pipeline::Hypothesis>& hyps);

// Writes an executable frame extractor that emits "FRAME <video> <ts>" as
// the image bytes. Returns its path.
std::string write_stub_extractor(const std::filesystem::path& dir);

// Answers chat-completions calls in-process, like a live endpoint, from a
// function of the parsed wire body. Counts every call.
class FakeChatTransport final : public model::Transport {
 public:
  using Handler = std::function<model::HttpResponse(const nlohmann::json& body)>;
  explicit FakeChatTransport(Handler handler);

  model::HttpResponse post(const std::string& url, const model::Headers& headers, const std::string& body,
                           std::chrono::seconds timeout) override;
  std::size_t calls() const { return calls_.load(); }
  std::vector<std::string> urls() const;
  std::vector<model::Headers> headers() const;

 private:
  Handler handler_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mu_;
  std::vector<std::string> urls_;
  std::vector<model::Headers> headers_;
};

// A loopback TCP port with nothing listening on it.
int unused_port();

// Chat-completions body with a single choice.
model::HttpResponse completion(const std::string& text, const std::string& model = "fake-model");

// Last text content of the last message in a wire body.
std::string last_text(const nlohmann::json& body);

}  // namespace vpc::testing
