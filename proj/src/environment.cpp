#include "dualmc/environment.hpp"

#include <algorithm>

#include "dualmc/error.hpp"

namespace dualmc {

RewardBreakdown short_reward(const EpisodeState& before, std::size_t action, const EpisodeState& after,
                             const KnowledgeBase& kb, const RewardConstants& constants) {
  if (action >= kb.symptom_count())
    throw TerminationNotScoredHere("the termination action has no short-term reward");
  const SymptomId s{action};
  const DiseaseId label = before.record.label;

  const double freq_term = kb.is_relevant(label, s) ? kb.freq(label, s) : -constants.freq_penalty;
  const double hit_term = before.record.recorded_status(s) ? constants.hit : -constants.hit;

  const auto rank_before = rank_of(before.obs.confidence, label.index);
  const auto rank_after = rank_of(after.obs.confidence, label.index);
  double rank_term = 0.0;
  if (rank_after < rank_before) rank_term = constants.rank;
  else if (rank_after > rank_before) rank_term = -constants.rank;
  return RewardBreakdown::of(freq_term, hit_term, rank_term);
}

double long_reward(DiseaseId predicted, DiseaseId label, double magnitude) {
  return predicted == label ? magnitude : -magnitude;
}

SymptomStatus respond(const PatientRecord& record, const KnowledgeBase& kb, SymptomId symptom,
                      std::size_t typicality_k, const Evidence& answered) {
  kb.check_symptom(symptom);
  if (answered.contains(symptom))
    throw DuplicateQuery("symptom " + std::to_string(symptom.index) + " was already answered");
  if (auto recorded = record.recorded_status(symptom)) return *recorded;
  const auto& rel = kb.relevant(record.label);
  const std::size_t top = std::min(typicality_k, rel.size());
  for (std::size_t i = 0; i < top; ++i)
    if (rel[i].symptom == symptom) return SymptomStatus::Present;
  return SymptomStatus::Absent;
}

ActionMask build_mask(const EpisodeState& state, const KnowledgeBase& kb, std::size_t w,
                      bool use_masking) {
  const std::size_t m = kb.symptom_count();
  ActionMask mask{std::vector<std::uint8_t>(m + 1, 0)};
  mask.bits[m] = 1;
  if (!use_masking) {
    for (std::size_t s = 0; s < m; ++s) mask.bits[s] = state.asked[s] ? 0 : 1;
    return mask;
  }
  if (w == 0) throw InvalidConfig("masking window must be >= 1");
  for (auto d : top_w_diseases(state.obs.confidence, std::min(w, kb.disease_count())))
    for (const auto& rs : kb.relevant(d))
      if (!state.asked[rs.symptom.index]) mask.bits[rs.symptom.index] = 1;
  return mask;
}

ConsultationEnv::ConsultationEnv(const KnowledgeBase& kb, const ScoringBackend& backend,
                                 EnvironmentConfig config, const Patient* patient)
    : kb_(kb), backend_(backend), config_(config), patient_(patient) {
  if (config_.mask_window == 0) throw InvalidConfig("masking window must be >= 1");
  if (!(config_.tau > 0.0)) throw NonPositiveTemperature("temperature must be positive");
}

EpisodeState ConsultationEnv::reset(const PatientRecord& record) const {
  validate_record(record, kb_.symptom_count(), kb_.disease_count());
  EpisodeState st;
  st.record = record;
  st.obs.symptoms.assign(kb_.symptom_count(), 0);
  st.asked.assign(kb_.symptom_count(), false);
  for (const auto& e : record.explicit_symptoms) {
    st.evidence.append(e);
    st.obs.symptoms[e.symptom.index] = static_cast<std::int8_t>(sign(e.status));
    st.asked[e.symptom.index] = true;
  }
  st.obs.confidence = diagnose(st.evidence, kb_, backend_, config_.tau);
  st.done = config_.max_turns == 0;
  return st;
}

ActionMask ConsultationEnv::mask(const EpisodeState& state) const {
  return build_mask(state, kb_, config_.mask_window, config_.use_masking);
}

StepOutcome ConsultationEnv::step(EpisodeState& state, std::size_t action) const {
  if (state.done) throw EpisodeDone("episode already finished");
  const auto current = mask(state);
  if (action >= current.size() || !current.enabled(action))
    throw DisabledAction("action " + std::to_string(action) + " is masked out");

  StepOutcome out;
  if (action == termination_action()) {
    state.done = true;
    out.done = true;
    out.terminated = true;
    out.outcome = long_reward(final_diagnosis(state.obs.confidence), state.record.label,
                              config_.rewards.diagnosis);
    return out;
  }

  const EpisodeState before = state;
  const SymptomId s{action};
  if (state.evidence.contains(s)) throw DuplicateQuery("symptom already answered");
  const auto status = patient_ ? patient_->answer(state, s)
                               : respond(state.record, kb_, s, config_.typicality_k, state.evidence);
  if (status == SymptomStatus::Unknown) throw InvalidRecord("patient answered Unknown");
  state.evidence.append({s, status});
  state.obs.symptoms[s.index] = static_cast<std::int8_t>(sign(status));
  state.asked[s.index] = true;
  state.obs.confidence = diagnose(state.evidence, kb_, backend_, config_.tau);
  ++state.turn;
  out.response = status;
  out.shaped = short_reward(before, action, state, kb_, config_.rewards);
  if (state.turn >= config_.max_turns) {
    state.done = true;
    out.done = true;
    out.outcome = long_reward(final_diagnosis(state.obs.confidence), state.record.label,
                              config_.rewards.diagnosis);
  }
  return out;
}

}  // namespace dualmc
