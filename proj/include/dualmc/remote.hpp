#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dualmc/diagnosis.hpp"

namespace dualmc {

inline constexpr int kRemoteProtocolVersion = 1;
inline constexpr const char* kEndpointEnv = "DUALMC_SCORE_ENDPOINT";

struct ScoreRequest {
  std::vector<SymptomEntry> evidence;
  DiseaseId disease;
  std::vector<RelevantSymptom> knowledge;  // the disease's relevant symptoms

  nlohmann::json to_json() const;
};

// Builds the request for one (evidence, disease) query.
ScoreRequest make_request(const Evidence& evidence, DiseaseId disease, const KnowledgeBase& kb);

// Validates a response body: both logits present, numeric and finite.
// Throws BadResponse otherwise.
BinaryLogits parse_score_response(const std::string& body);

struct Endpoint {
  std::string base;  // scheme://host:port
  std::string path = "/score";
};

// "http://host:port[/path]". Throws InvalidConfig for anything else.
Endpoint parse_endpoint(const std::string& url);
// The environment override wins over the configured value.
std::string resolve_endpoint(const std::string& configured);

// Single POST round trip. Throws Timeout, ServerError (unreachable or non-2xx)
// and BadResponse.
BinaryLogits remote_score(const Endpoint& endpoint, const ScoreRequest& request,
                          std::chrono::milliseconds timeout = std::chrono::seconds(5));

struct RemoteOptions {
  std::chrono::milliseconds timeout = std::chrono::seconds(5);
  std::size_t max_in_flight = 4;
};

// Scoring backend served over HTTP. Responses are cached per (evidence,
// disease) for the lifetime of the object; concurrent callers share the cache
// and at most max_in_flight requests are outstanding at once.
class RemoteScorer final : public ScoringBackend {
 public:
  explicit RemoteScorer(const std::string& url, RemoteOptions options = {});
  ~RemoteScorer() override;

  BinaryLogits score(const Evidence& evidence, DiseaseId disease, const KnowledgeBase& kb) const override;

  std::size_t network_calls() const noexcept { return calls_.load(); }
  std::size_t cache_hits() const noexcept { return hits_.load(); }

 private:
  struct Gate;
  Endpoint endpoint_;
  RemoteOptions options_;
  std::unique_ptr<Gate> gate_;
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::string, BinaryLogits> cache_;
  mutable std::atomic<std::size_t> calls_{0};
  mutable std::atomic<std::size_t> hits_{0};
};

}  // namespace dualmc
