#pragma once

#include <map>
#include <string>

#include "holmes/service/hub.hpp"

namespace holmes::service {

struct HttpRequest {
  std::string method;
  std::string target;  ///< path plus optional query string
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Splits "a=1&b=x" into a map; later keys win.
std::map<std::string, std::string> parse_query(const std::string& query);

/// Maps one request onto the hub. Never throws.
HttpResponse route(Hub& hub, const HttpRequest& request);

}  // namespace holmes::service
