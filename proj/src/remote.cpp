#include "dualmc/remote.hpp"

#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "dualmc/error.hpp"

namespace dualmc {

nlohmann::json ScoreRequest::to_json() const {
  auto ev = nlohmann::json::array();
  for (const auto& e : evidence) ev.push_back({e.symptom.index, sign(e.status)});
  auto know = nlohmann::json::array();
  for (const auto& k : knowledge) know.push_back({k.symptom.index, k.frequency});
  return {{"v", kRemoteProtocolVersion}, {"evidence", ev}, {"disease", disease.index}, {"knowledge", know}};
}

ScoreRequest make_request(const Evidence& evidence, DiseaseId disease, const KnowledgeBase& kb) {
  kb.check_disease(disease);
  for (const auto& e : evidence) kb.check_symptom(e.symptom);
  return {evidence.entries(), disease, kb.relevant(disease)};
}

BinaryLogits parse_score_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw BadResponse(std::string("response is not valid JSON: ") + e.what());
  }
  auto field = [&](const char* name) {
    if (!j.is_object() || !j.contains(name)) throw BadResponse(std::string("response lacks '") + name + "'");
    const auto& v = j.at(name);
    if (!v.is_number()) throw BadResponse(std::string("'") + name + "' is not a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw BadResponse(std::string("'") + name + "' is not finite");
    return x;
  };
  return {field("logit_T"), field("logit_F")};
}

Endpoint parse_endpoint(const std::string& url) {
  static const std::regex re(R"(^(http://[^/\s]+)(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw InvalidConfig("endpoint must look like http://host:port[/path], got '" + url + "'");
  Endpoint e;
  e.base = m[1];
  if (m[2].matched && m[2].length() > 1) e.path = m[2];
  return e;
}

std::string resolve_endpoint(const std::string& configured) {
  if (const char* env = std::getenv(kEndpointEnv); env && *env) return env;
  return configured;
}

BinaryLogits remote_score(const Endpoint& endpoint, const ScoreRequest& request, std::chrono::milliseconds timeout) {
  httplib::Client client(endpoint.base);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  const auto res = client.Post(endpoint.path, request.to_json().dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read || err == httplib::Error::Write)
      throw Timeout("scoring request to " + endpoint.base + " timed out (" + httplib::to_string(err) + ")");
    throw ServerError("scoring request to " + endpoint.base + " failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300)
    throw ServerError("scoring server returned HTTP " + std::to_string(res->status));
  return parse_score_response(res->body);
}

// Counting gate bounding concurrent requests; waits at most the timeout.
struct RemoteScorer::Gate {
  std::mutex mutex;
  std::condition_variable cv;
  std::size_t free = 0;
};

RemoteScorer::RemoteScorer(const std::string& url, RemoteOptions options)
    : endpoint_(parse_endpoint(resolve_endpoint(url))), options_(options), gate_(std::make_unique<Gate>()) {
  if (options_.max_in_flight == 0) throw InvalidConfig("max_in_flight must be positive");
  gate_->free = options_.max_in_flight;
}

RemoteScorer::~RemoteScorer() = default;

BinaryLogits RemoteScorer::score(const Evidence& evidence, DiseaseId disease, const KnowledgeBase& kb) const {
  std::string key = std::to_string(disease.index) + ":";
  for (const auto& e : evidence) key += std::to_string(e.symptom.index) + (sign(e.status) > 0 ? "+" : "-");
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  const auto request = make_request(evidence, disease, kb);
  {
    std::unique_lock lock(gate_->mutex);
    if (!gate_->cv.wait_for(lock, options_.timeout, [&] { return gate_->free > 0; }))
      throw Timeout("no free request slot within the timeout");
    --gate_->free;
  }
  struct Release {
    Gate& g;
    ~Release() {
      {
        std::lock_guard lock(g.mutex);
        ++g.free;
      }
      g.cv.notify_one();
    }
  } release{*gate_};
  ++calls_;
  const auto logits = remote_score(endpoint_, request, options_.timeout);
  std::lock_guard lock(cache_mutex_);
  cache_.emplace(key, logits);
  return logits;
}

}  // namespace dualmc
