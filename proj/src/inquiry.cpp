#include "dualmc/inquiry.hpp"

#include <algorithm>

#include "dualmc/error.hpp"

namespace dualmc {

Eigen::MatrixXd cooccurrence(std::span<const PatientRecord> records, std::size_t m) {
  const auto dim = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd both = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd single = Eigen::VectorXd::Zero(dim);
  std::vector<Eigen::Index> present;
  for (const auto& r : records) {
    present.clear();
    for (const auto& e : r.all_symptoms()) {
      if (e.symptom.index >= m) throw IdOutOfRange("symptom id out of range in co-occurrence");
      if (e.status == SymptomStatus::Present) present.push_back(static_cast<Eigen::Index>(e.symptom.index));
    }
    for (auto a : present) {
      single(a) += 1.0;
      for (auto b : present) both(a, b) += 1.0;
    }
  }
  Eigen::MatrixXd cooc = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = 0; b < dim; ++b) {
      const double either = single(a) + single(b) - both(a, b);
      if (either > 0.0) cooc(a, b) = both(a, b) / either;
    }
  return cooc;
}

const char* to_string(DecisionKind k) noexcept {
  switch (k) {
    case DecisionKind::Ask: return "ask";
    case DecisionKind::Retry: return "retry";
    case DecisionKind::Terminate: return "terminate";
  }
  return "?";
}

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::None: return "none";
    case Strategy::ConfirmTop: return "confirm-top";
    case Strategy::EvidenceRelevance: return "evidence-relevance";
    case Strategy::Fallback: return "fallback";
  }
  return "?";
}

InquiryDecision select_inquiry(const std::set<std::size_t>& candidates, std::span<const double> confidence,
                               const KnowledgeBase& kb, const Eigen::MatrixXd& cooc,
                               const Evidence& evidence, const InquiryConfig& config,
                               std::size_t retries_used) {
  if (candidates.empty()) throw EmptyCandidates("no candidate actions to choose from");
  const std::size_t m = kb.symptom_count();
  if (confidence.size() != kb.disease_count()) throw LengthMismatch("confidence length != disease count");
  InquiryDecision out;
  if (candidates.count(m)) {
    out.kind = DecisionKind::Terminate;
    return out;
  }

  const auto ranked = top_w_diseases(confidence, std::min<std::size_t>(2, confidence.size()));
  const DiseaseId top1 = ranked.front();
  const double second = ranked.size() > 1 ? confidence[ranked[1].index] : 0.0;
  const double lead = confidence[top1.index] - second;

  for (auto a : candidates) {
    if (a > m) throw IdOutOfRange("candidate action " + std::to_string(a) + " out of range");
    CandidateScore cs{a, kb.freq(top1, SymptomId{a}), 0.0};
    for (const auto& e : evidence)
      if (e.status == SymptomStatus::Present)
        cs.relevance += cooc(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(e.symptom.index));
    out.scores.push_back(cs);
  }

  // Scores are in ascending action order, so strict > keeps the lowest index on ties.
  auto best_by = [&](auto key) {
    const CandidateScore* best = &out.scores.front();
    for (const auto& cs : out.scores)
      if (key(cs) > key(*best)) best = &cs;
    return *best;
  };
  const auto best_freq = best_by([](const CandidateScore& c) { return c.top_frequency; });
  const auto best_rel = best_by([](const CandidateScore& c) { return c.relevance; });

  if (lead > config.margin && best_freq.top_frequency > 0.0) {
    out.kind = DecisionKind::Ask;
    out.symptom = SymptomId{best_freq.action};
    out.strategy = Strategy::ConfirmTop;
  } else if (best_rel.relevance > config.relevance_floor) {
    out.kind = DecisionKind::Ask;
    out.symptom = SymptomId{best_rel.action};
    out.strategy = Strategy::EvidenceRelevance;
  } else if (retries_used < config.max_retries) {
    out.kind = DecisionKind::Retry;
  } else {
    out.kind = DecisionKind::Ask;
    out.symptom = SymptomId{best_freq.action};
    out.strategy = Strategy::Fallback;
  }
  return out;
}

}  // namespace dualmc
