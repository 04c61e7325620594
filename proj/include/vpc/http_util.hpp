#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "vpc/error.hpp"

namespace vpc {

struct Url {
  std::string scheme;
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

Url parse_url(const std::string& url);

struct HttpPostResult {
  bool ok = false;  // false when no HTTP response arrived
  int status = 0;
  std::string body;
  std::string error;
};

// Keeps cpp-httplib out of every other translation unit.
HttpPostResult http_post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                         const std::string& body, std::chrono::seconds timeout);

}  // namespace vpc
