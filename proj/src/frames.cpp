#include "vpc/frames.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vpc/digest.hpp"

extern char** environ;

namespace vpc::model {

namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "vpc-frames-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) throw ExtractionFailed("cannot create temporary directory");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Returns the exit status; throws ExtractionFailed when the process could
// not be started.
int run_process(const std::vector<std::string>& argv, const fs::path& stderr_path) {
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC,
                                   0644);
  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw ExtractionFailed("cannot start '" + argv[0] + "': " + std::strerror(rc));
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw ExtractionFailed("waitpid failed: " + std::string(std::strerror(errno)));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

std::string mime_for(const fs::path& path, std::string_view bytes) {
  if (bytes.size() >= 8 && bytes.substr(0, 8) == "\x89PNG\r\n\x1a\n") return "image/png";
  if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xFF\xD8\xFF") return "image/jpeg";
  return path.extension() == ".png" ? "image/png" : "image/jpeg";
}

}  // namespace

ExtractorCommand parse_extractor_command(const std::string& command) {
  std::istringstream in(command);
  ExtractorCommand cmd;
  std::string word;
  while (in >> word) {
    if (cmd.program.empty()) {
      cmd.program = word;
    } else {
      cmd.args.push_back(word);
    }
  }
  return cmd;
}

std::vector<double> frame_timestamps(double duration_s, int n) {
  if (n < 1) throw Error("frame count must be at least 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out.push_back((k + 0.5) * duration_s / n);
  return out;
}

std::string format_timestamp(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", seconds);
  return buf;
}

std::vector<ImagePart> sample_frames(const std::string& video_ref, double duration_s, int n,
                                     const ExtractorCommand& extractor) {
  if (video_ref.empty()) throw UnsupportedMedia("empty video locator");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw UnsupportedMedia("clip duration must be positive to place frames");
  }
  if (extractor.program.empty()) throw ExtractionFailed("no frame extractor command configured");
  const std::vector<double> stamps = frame_timestamps(duration_s, n);

  TempDir tmp;
  std::vector<ImagePart> frames;
  frames.reserve(stamps.size());
  for (std::size_t k = 0; k < stamps.size(); ++k) {
    const fs::path out = tmp.path() / ("frame_" + std::to_string(k) + ".jpg");
    const fs::path err = tmp.path() / ("frame_" + std::to_string(k) + ".stderr");
    std::vector<std::string> argv{extractor.program};
    argv.insert(argv.end(), extractor.args.begin(), extractor.args.end());
    argv.push_back(video_ref);
    argv.push_back(format_timestamp(stamps[k]));
    argv.push_back(out.string());
    const int status = run_process(argv, err);
    if (status != 0) {
      std::string excerpt = read_all(err).substr(0, 400);
      throw ExtractionFailed("'" + extractor.program + "' exited with status " + std::to_string(status) +
                             (excerpt.empty() ? std::string() : ": " + excerpt));
    }
    if (!fs::exists(out) || fs::file_size(out) == 0) {
      throw ExtractionFailed("'" + extractor.program + "' produced no image for t=" + format_timestamp(stamps[k]));
    }
    const std::string bytes = read_all(out);
    frames.push_back(ImagePart{mime_for(out, bytes), base64_encode(bytes)});
  }
  return frames;
}

}  // namespace vpc::model
