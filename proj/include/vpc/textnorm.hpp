#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vpc/error.hpp"

namespace vpc::textnorm {

struct NormConfig {
  std::string profile;  // name recorded in every report
  bool lowercase = true;
  bool strip_punctuation = true;
  bool keep_intra_word_apostrophes = true;
  bool unicode_fold = true;  // curly quotes, dashes, exotic spaces -> ASCII
};

// "default-v1": fold, lowercase, drop punctuation except apostrophes between
// two letters, split on whitespace. "verbatim-v1": whitespace split only.
inline constexpr std::string_view kDefaultProfile = "default-v1";
inline constexpr std::string_view kVerbatimProfile = "verbatim-v1";

NormConfig default_profile();
NormConfig verbatim_profile();

class UnknownProfile : public Error {
 public:
  explicit UnknownProfile(const std::string& name) : Error("unknown normalization profile '" + name + "'") {}
};

NormConfig profile_by_name(std::string_view name);

// Ordered non-empty tokens without whitespace.
using TokenSeq = std::vector<std::string>;

TokenSeq normalize(std::string_view text, const NormConfig& cfg);
TokenSeq normalize(std::string_view text);  // default profile

std::string join(const TokenSeq& tokens);

}  // namespace vpc::textnorm
