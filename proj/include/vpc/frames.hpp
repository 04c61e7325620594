#pragma once

#include <string>
#include <vector>

#include "vpc/error.hpp"
#include "vpc/model_client.hpp"

namespace vpc::model {

// External frame grabber invoked as `<program> [args...] <video> <timestamp> <out>`.
// It must write one image to <out> and exit 0.
struct ExtractorCommand {
  std::string program;
  std::vector<std::string> args;
};

// Splits a command line on whitespace; no quoting rules.
ExtractorCommand parse_extractor_command(const std::string& command);

class ExtractionFailed : public Error {
 public:
  explicit ExtractionFailed(const std::string& detail) : Error("frame extraction failed: " + detail) {}
};

class UnsupportedMedia : public Error {
 public:
  explicit UnsupportedMedia(const std::string& detail) : Error("unsupported media: " + detail) {}
};

// timestamp_k = (k + 0.5) * duration / n for k in [0, n).
std::vector<double> frame_timestamps(double duration_s, int n);

// Timestamps are passed to the extractor with millisecond precision.
std::string format_timestamp(double seconds);

// Runs the extractor once per timestamp and returns the frames base64
// encoded, in timestamp order.
std::vector<ImagePart> sample_frames(const std::string& video_ref, double duration_s, int n,
                                     const ExtractorCommand& extractor);

}  // namespace vpc::model
