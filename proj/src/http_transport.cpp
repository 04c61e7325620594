#include <httplib.h>

#include "vpc/http_util.hpp"
#include "vpc/model_client.hpp"

namespace vpc {

Url parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("URL '" + url + "' lacks a scheme");
  Url out;
  out.scheme = url.substr(0, scheme_end);
  if (out.scheme != "http" && out.scheme != "https") throw Error("unsupported URL scheme in '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (out.origin.size() <= scheme_end + 3) throw Error("URL '" + url + "' lacks a host");
  return out;
}

HttpPostResult http_post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                         const std::string& body, std::chrono::seconds timeout) {
  const Url parsed = parse_url(url);
  httplib::Client client(parsed.origin);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers hdrs;
  std::string content_type = "application/json";
  for (const auto& [k, v] : headers) {
    if (k == "Content-Type") {
      content_type = v;
    } else {
      hdrs.emplace(k, v);
    }
  }
  const auto res = client.Post(parsed.path, hdrs, body, content_type);
  if (!res) {
    return HttpPostResult{false, 0, {}, httplib::to_string(res.error())};
  }
  return HttpPostResult{true, res->status, res->body, {}};
}

namespace model {

HttpResponse HttpTransport::post(const std::string& url, const Headers& headers, const std::string& body,
                                 std::chrono::seconds timeout) {
  const HttpPostResult res = http_post(url, headers, body, timeout);
  if (!res.ok) throw TransportError("POST " + url + ": " + res.error);
  return HttpResponse{res.status, res.body};
}

}  // namespace model
}  // namespace vpc
