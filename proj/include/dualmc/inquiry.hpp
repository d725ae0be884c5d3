#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dualmc/core.hpp"
#include "dualmc/knowledge_base.hpp"

namespace dualmc {

// cooc[a][b] = P(both Present | either Present) over the training records;
// the diagonal is 1 for every symptom observed Present at least once.
Eigen::MatrixXd cooccurrence(std::span<const PatientRecord> records, std::size_t m);

struct InquiryConfig {
  double margin = 0.1;           // top-1 minus top-2 confidence needed for strategy 1
  double relevance_floor = 0.0;  // strategy 2 scores at or below this ask for a retry
  std::size_t max_retries = 3;
};

enum class DecisionKind { Ask, Retry, Terminate };
enum class Strategy { None, ConfirmTop, EvidenceRelevance, Fallback };

const char* to_string(DecisionKind k) noexcept;
const char* to_string(Strategy s) noexcept;

struct CandidateScore {
  std::size_t action = 0;
  double top_frequency = 0.0;  // freq[top1][s]
  double relevance = 0.0;      // sum of co-occurrence with present evidence
};

struct InquiryDecision {
  DecisionKind kind = DecisionKind::Terminate;
  SymptomId symptom{};
  Strategy strategy = Strategy::None;
  std::vector<CandidateScore> scores;  // per inquiry candidate, for the trace
};

// Rule-based Inquiry Agent. The termination action (index m) wins whenever it
// is among the candidates. Otherwise strategy 1 confirms a clearly leading
// disease with its most typical candidate symptom, and strategy 2 picks the
// candidate most co-occurring with the present evidence; when neither
// qualifies a Retry is requested while retries_used < max_retries, after
// which the best strategy-1 candidate is asked. Pure function.
InquiryDecision select_inquiry(const std::set<std::size_t>& candidates, std::span<const double> confidence,
                               const KnowledgeBase& kb, const Eigen::MatrixXd& cooc,
                               const Evidence& evidence, const InquiryConfig& config,
                               std::size_t retries_used = 0);

}  // namespace dualmc
