#include "holmes/service/router.hpp"

#include <charconv>
#include <regex>

#include "holmes/errors.hpp"

namespace holmes::service {

namespace {

HttpResponse json(int status, const Json& body) { return {status, "application/json", body.dump()}; }

HttpResponse error(int status, const std::string& message) { return json(status, {{"error", message}}); }

std::string url_decode(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out += ' ';
    } else if (s[i] == '%' && i + 2 < s.size()) {
      int v = 0;
      const auto [p, ec] = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
      if (ec == std::errc() && p == s.data() + i + 3) {
        out += static_cast<char>(v);
        i += 2;
      } else {
        out += s[i];
      }
    } else {
      out += s[i];
    }
  }
  return out;
}

bool parse_size(const std::string& s, std::size_t& out) {
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

std::map<std::string, std::string> parse_query(const std::string& query) {
  std::map<std::string, std::string> out;
  std::size_t start = 0;
  while (start <= query.size()) {
    const std::size_t end = std::min(query.find('&', start), query.size());
    const std::string part = query.substr(start, end - start);
    if (!part.empty()) {
      const std::size_t eq = part.find('=');
      if (eq == std::string::npos)
        out[url_decode(part)] = "";
      else
        out[url_decode(part.substr(0, eq))] = url_decode(part.substr(eq + 1));
    }
    start = end + 1;
  }
  return out;
}

HttpResponse route(Hub& hub, const HttpRequest& req) {
  static const std::regex representatives(R"(/leaves/([01]+)/representatives)");
  static const std::regex score(R"(/leaves/([01]+)/score)");
  static const std::regex pattern(R"(/patterns/(\d+)\.png)");

  const std::size_t q = req.target.find('?');
  const std::string path = req.target.substr(0, q);
  const auto query = q == std::string::npos ? std::map<std::string, std::string>{} : parse_query(req.target.substr(q + 1));
  std::smatch m;

  try {
    if (req.method == "OPTIONS") return {204, "text/plain", ""};
    if (req.method == "GET") {
      if (path == "/status") return json(200, hub.status());
      if (path == "/tree") return json(200, hub.tree());
      if (std::regex_match(path, m, representatives)) {
        std::size_t n = 6;
        if (const auto it = query.find("n"); it != query.end() && !parse_size(it->second, n))
          return error(400, "n must be a non-negative integer");
        const auto out = hub.representatives(m[1], n);
        if (!out) return error(404, "no leaf " + m[1].str());
        return json(200, *out);
      }
      if (std::regex_match(path, m, pattern)) {
        std::size_t run = 0;
        if (!parse_size(m[1], run)) return error(404, "no such run");
        const auto png = hub.pattern_png(run);
        if (!png) return error(404, "no run " + m[1].str());
        return {200, "image/png", std::string(png->begin(), png->end())};
      }
      if (path == "/diversity") {
        std::size_t bins = 20;
        if (const auto it = query.find("bins"); it != query.end() && !parse_size(it->second, bins))
          return error(400, "bins must be a positive integer");
        const auto bc = query.contains("bc") ? query.at("bc") : std::string("statistics");
        const auto cls = query.contains("class") ? query.at("class") : std::string("all");
        return json(200, hub.diversity(bc, static_cast<int>(bins), cls));
      }
    } else if (req.method == "POST") {
      if (std::regex_match(path, m, score)) {
        double value = 0.0;
        try {
          const Json body = Json::parse(req.body);
          const Json& s = body.at("score");
          if (!s.is_number()) return error(400, "score must be a number");
          value = s.get<double>();
        } catch (const Json::exception&) {
          return error(400, "body must be {\"score\": number}");
        }
        switch (hub.submit_score(m[1], value)) {
          case ScoreResult::unknown_leaf:
            return error(404, "no leaf " + m[1].str());
          case ScoreResult::negative:
            return error(400, "score must be a non-negative finite number");
          case ScoreResult::accepted:
            return json(200, {{"leaf", m[1].str()}, {"score", value}, {"paused", hub.paused()}});
        }
      }
      if (path == "/control/resume") {
        const bool released = hub.resume();
        return json(200, {{"released", released}, {"paused", hub.paused()}});
      }
    } else {
      return error(405, "method not allowed");
    }
    return error(404, "no route for " + path);
  } catch (const ConfigError& e) {
    return error(400, e.what());
  } catch (const NoRunError& e) {
    return error(404, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

}  // namespace holmes::service
