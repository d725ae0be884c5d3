#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dualmc/core.hpp"
#include "dualmc/diagnosis.hpp"
#include "dualmc/environment.hpp"
#include "dualmc/inquiry.hpp"
#include "dualmc/knowledge_base.hpp"
#include "dualmc/policy.hpp"

namespace dualmc {

struct ConsultationConfig {
  std::size_t max_turns = 10;    // L
  std::size_t mask_window = 3;   // w
  std::size_t samples = 6;       // N policy draws per turn
  std::size_t typicality_k = 5;
  double tau = 1.0;
  // When false, a sampled termination only ends the consultation if it is the
  // sole candidate; otherwise the selector picks among the inquiry candidates.
  bool terminate_on_sample = true;
  InquiryConfig inquiry{};
  RewardConstants rewards{};

  EnvironmentConfig environment(bool use_masking) const;
};

struct AblationConfig {
  bool use_adapter = true;
  bool use_policy = true;
  bool use_masking = true;
  bool use_retry = true;
  bool use_decision = true;

  // Throws InvalidConfig when both the policy and the decision step are off.
  void validate() const;
  // "full" or e.g. "w/o masking".
  std::string label() const;
  // Full system with one component removed. Throws InvalidConfig for an
  // unknown name (adapter, policy, masking, retry, decision).
  static AblationConfig without(const std::string& component);
  bool operator==(const AblationConfig&) const = default;
};

nlohmann::json to_json(const AblationConfig& a);
nlohmann::json to_json(const ConsultationConfig& c);

// Everything a consultation reads. `plain_backend` is the scorer with a zero
// adapter, used for the "w/o adapter" variant; it may be null when that
// variant is never requested.
struct Components {
  const KnowledgeBase* kb = nullptr;
  const ScoringBackend* backend = nullptr;
  const ScoringBackend* plain_backend = nullptr;
  const PolicyNet* policy = nullptr;
  const Eigen::MatrixXd* cooc = nullptr;
  const Patient* patient = nullptr;  // null: record-driven simulator

  // Throws ComponentShapeMismatch unless policy and co-occurrence sizes agree
  // with the knowledge base, and InvalidConfig for missing components.
  void check() const;
  const ScoringBackend& scorer(const AblationConfig& ablation) const;
};

struct ConsultationResult {
  DiseaseId prediction;
  DiseaseId initial_prediction;
  DiseaseId label;
  std::size_t turns_used = 0;
  std::size_t retries = 0;
  bool correct = false;
  std::vector<nlohmann::json> trace;  // header line, then one line per turn

  std::string trace_jsonl() const;
  // Symptom ids asked, in order.
  std::vector<std::size_t> inquiries() const;
};

// Runs the diagnose -> sample -> select -> respond loop for one record until
// termination or L inquiries.
ConsultationResult run_consultation(const PatientRecord& record, const Components& components,
                                    const ConsultationConfig& config, const AblationConfig& ablation,
                                    std::mt19937_64& rng);

// Baseline: asks L uniformly random unasked symptoms, no policy or selector.
ConsultationResult run_random_inquiry(const PatientRecord& record, const KnowledgeBase& kb,
                                      const ScoringBackend& backend, const ConsultationConfig& config,
                                      std::mt19937_64& rng);

struct DiseaseAccuracy {
  DiseaseId disease;
  std::size_t cases = 0;
  std::size_t correct = 0;
  double accuracy() const noexcept { return cases ? static_cast<double>(correct) / cases : 0.0; }
};

struct SuiteMetrics {
  double acc = 0.0;
  double acc_init = 0.0;
  double avg_n = 0.0;
  std::size_t cases = 0;
  std::vector<DiseaseAccuracy> per_disease;
  std::vector<ConsultationResult> results;  // in record order, when kept
};

enum class InquiryMode { System, Random };

struct SuiteOptions {
  InquiryMode mode = InquiryMode::System;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool keep_results = false;
};

// Per-record RNG streams are derived from (seed, record index), so results do
// not depend on the thread count. Throws EmptySuite.
SuiteMetrics run_suite(std::span<const PatientRecord> records, const Components& components,
                       const ConsultationConfig& config, const AblationConfig& ablation,
                       const SuiteOptions& options);

// Aggregation alone, for callers that already hold results.
SuiteMetrics summarize(std::span<const ConsultationResult> results, std::size_t disease_count);

struct TrainingConfig {
  std::size_t total_steps = 51200;
  std::size_t steps_per_update = 1024;
  PpoConfig ppo{};
};

// PPO on the consultation environment. Each rollout collects whole episodes
// (records visited in a reshuffled cycle) until steps_per_update transitions
// are gathered, then runs one update. The callback, if set, sees every
// update's diagnostics.
std::vector<PpoDiagnostics> train_policy(PolicyNet& net, const ConsultationEnv& env,
                                         std::span<const PatientRecord> records, const TrainingConfig& config,
                                         std::uint64_t seed,
                                         const std::function<void(std::size_t, const PpoDiagnostics&)>& on_update = {});

// splitmix64 finalizer, used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace dualmc
