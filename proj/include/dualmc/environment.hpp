#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dualmc/core.hpp"
#include "dualmc/diagnosis.hpp"
#include "dualmc/knowledge_base.hpp"
#include "dualmc/policy.hpp"

namespace dualmc {

struct RewardConstants {
  double hit = 0.5;
  double rank = 0.5;
  double diagnosis = 1.0;
  double freq_penalty = 0.2;
};

struct RewardBreakdown {
  double freq_term = 0.0;
  double hit_term = 0.0;
  double rank_term = 0.0;
  double total = 0.0;

  static RewardBreakdown of(double freq, double hit, double rank) {
    return RewardBreakdown{freq, hit, rank, freq + hit + rank};
  }
};

struct EnvironmentConfig {
  std::size_t max_turns = 10;      // L
  std::size_t mask_window = 3;     // w
  std::size_t typicality_k = 5;    // patient simulator threshold
  double tau = 1.0;
  bool use_masking = true;
  RewardConstants rewards{};
};

// Dynamic consultation state owned by one worker.
struct EpisodeState {
  ObservationState obs;
  std::vector<bool> asked;  // per symptom; explicit symptoms count as asked
  Evidence evidence;
  PatientRecord record;
  std::size_t turn = 0;
  bool done = false;

  bool was_asked(SymptomId s) const { return asked.at(s.index); }
};

// Shaped reward for one inquiry step: symptom frequency under the true disease
// (or -freq_penalty when irrelevant), +/- hit for recorded symptoms, and
// +/-rank / 0 as the true disease's confidence rank improves / worsens / holds.
// Throws TerminationNotScoredHere for the termination action.
RewardBreakdown short_reward(const EpisodeState& before, std::size_t action, const EpisodeState& after,
                             const KnowledgeBase& kb, const RewardConstants& constants);

// +diagnosis when the prediction matches the label, -diagnosis otherwise.
double long_reward(DiseaseId predicted, DiseaseId label, double magnitude = 1.0);

// Patient simulator: the recorded status when the symptom is in the record,
// otherwise Present iff the symptom is among the typicality_k most frequent
// relevant symptoms of the true disease. Throws DuplicateQuery when the
// symptom is already in the evidence.
SymptomStatus respond(const PatientRecord& record, const KnowledgeBase& kb, SymptomId symptom,
                      std::size_t typicality_k, const Evidence& answered);

// Answers inquiries during a consultation. The default is the simulator
// above; an interactive front end can substitute a human.
class Patient {
 public:
  virtual ~Patient() = default;
  virtual SymptomStatus answer(const EpisodeState& state, SymptomId symptom) const = 0;
};

struct StepOutcome {
  RewardBreakdown shaped;       // zero for the termination action
  double outcome = 0.0;         // long-term reward, non-zero only when done
  bool done = false;
  bool terminated = false;      // ended by the termination action
  std::optional<SymptomStatus> response;

  double reward() const noexcept { return shaped.total + outcome; }
};

// The consultation MDP. Holds references to a knowledge base and scorer that
// must outlive it; neither is mutated.
class ConsultationEnv {
 public:
  // `patient` may be null, in which case the record-driven simulator answers.
  ConsultationEnv(const KnowledgeBase& kb, const ScoringBackend& backend, EnvironmentConfig config,
                  const Patient* patient = nullptr);

  EpisodeState reset(const PatientRecord& record) const;
  // Inquiry bit i is set iff symptom i is relevant to one of the top-w
  // diseases and not yet asked (all unasked symptoms when masking is off);
  // the termination bit is always set.
  ActionMask mask(const EpisodeState& state) const;
  // Throws EpisodeDone / DisabledAction.
  StepOutcome step(EpisodeState& state, std::size_t action) const;

  std::size_t termination_action() const noexcept { return kb_.symptom_count(); }
  const KnowledgeBase& kb() const noexcept { return kb_; }
  const ScoringBackend& backend() const noexcept { return backend_; }
  const EnvironmentConfig& config() const noexcept { return config_; }

 private:
  const KnowledgeBase& kb_;
  const ScoringBackend& backend_;
  EnvironmentConfig config_;
  const Patient* patient_ = nullptr;
};

// Mask construction as a free function for callers with their own state.
ActionMask build_mask(const EpisodeState& state, const KnowledgeBase& kb, std::size_t w,
                      bool use_masking = true);

}  // namespace dualmc
