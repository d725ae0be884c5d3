#include "dualmc/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <mutex>
#include <set>
#include <thread>

#include "dualmc/error.hpp"

namespace dualmc {

EnvironmentConfig ConsultationConfig::environment(bool use_masking) const {
  EnvironmentConfig e;
  e.max_turns = max_turns;
  e.mask_window = mask_window;
  e.typicality_k = typicality_k;
  e.tau = tau;
  e.use_masking = use_masking;
  e.rewards = rewards;
  return e;
}

void AblationConfig::validate() const {
  if (!use_policy && !use_decision)
    throw InvalidConfig("policy and decision ablations cannot be combined");
}

std::string AblationConfig::label() const {
  std::vector<std::string> off;
  if (!use_adapter) off.push_back("adapter");
  if (!use_policy) off.push_back("policy");
  if (!use_masking) off.push_back("masking");
  if (!use_retry) off.push_back("retry");
  if (!use_decision) off.push_back("decision");
  if (off.empty()) return "full";
  std::string s = "w/o";
  for (const auto& o : off) s += " " + o;
  return s;
}

AblationConfig AblationConfig::without(const std::string& component) {
  AblationConfig a;
  if (component == "adapter") a.use_adapter = false;
  else if (component == "policy") a.use_policy = false;
  else if (component == "masking") a.use_masking = false;
  else if (component == "retry") a.use_retry = false;
  else if (component == "decision") a.use_decision = false;
  else throw InvalidConfig("unknown ablation component '" + component + "'");
  return a;
}

nlohmann::json to_json(const AblationConfig& a) {
  return {{"adapter", a.use_adapter}, {"policy", a.use_policy}, {"masking", a.use_masking},
          {"retry", a.use_retry}, {"decision", a.use_decision}};
}

nlohmann::json to_json(const ConsultationConfig& c) {
  return {{"L", c.max_turns}, {"w", c.mask_window}, {"N", c.samples}, {"K", c.typicality_k},
          {"tau", c.tau}, {"terminate_on_sample", c.terminate_on_sample},
          {"margin", c.inquiry.margin}, {"relevance_floor", c.inquiry.relevance_floor},
          {"max_retries", c.inquiry.max_retries}};
}

void Components::check() const {
  if (!kb || !backend || !policy || !cooc) throw InvalidConfig("consultation components are incomplete");
  const std::size_t m = kb->symptom_count(), n = kb->disease_count();
  if (policy->symptom_count() != m || policy->input_size() != m + n)
    throw ComponentShapeMismatch("policy expects m=" + std::to_string(policy->symptom_count()) +
                                 " but the knowledge base has m=" + std::to_string(m) + ", n=" + std::to_string(n));
  if (static_cast<std::size_t>(cooc->rows()) != m || static_cast<std::size_t>(cooc->cols()) != m)
    throw ComponentShapeMismatch("co-occurrence matrix does not match the symptom vocabulary");
}

const ScoringBackend& Components::scorer(const AblationConfig& ablation) const {
  if (ablation.use_adapter) return *backend;
  if (!plain_backend) throw InvalidConfig("w/o adapter requested but no plain scorer was supplied");
  return *plain_backend;
}

std::string ConsultationResult::trace_jsonl() const {
  std::string out;
  for (const auto& line : trace) out += line.dump() + "\n";
  return out;
}

std::vector<std::size_t> ConsultationResult::inquiries() const {
  std::vector<std::size_t> out;
  for (const auto& line : trace)
    if (line.value("type", "") == "turn" && line.contains("symptom")) out.push_back(line["symptom"].get<std::size_t>());
  return out;
}

namespace {

nlohmann::json header_line(const PatientRecord& record, const EpisodeState& st, const std::string& mode,
                           const nlohmann::json& config, const nlohmann::json& ablation) {
  return {{"type", "header"}, {"mode", mode}, {"config", config}, {"ablation", ablation},
          {"label", record.label.index}, {"initial_prediction", final_diagnosis(st.obs.confidence).index},
          {"confidence", st.obs.confidence}};
}

nlohmann::json turn_line(std::size_t turn, std::size_t action, const StepOutcome& out, const EpisodeState& st) {
  nlohmann::json t{{"type", "turn"}, {"turn", turn}};
  if (out.terminated) {
    t["action"] = "terminate";
  } else {
    t["action"] = "ask";
    t["symptom"] = action;
    t["response"] = out.response ? sign(*out.response) : 0;
  }
  t["reward"] = {{"freq", out.shaped.freq_term}, {"hit", out.shaped.hit_term}, {"rank", out.shaped.rank_term},
                 {"outcome", out.outcome}, {"total", out.reward()}};
  t["confidence"] = st.obs.confidence;
  return t;
}

void finish(ConsultationResult& r, const EpisodeState& st) {
  // Confidences are recomputed on the full evidence after every response.
  r.prediction = final_diagnosis(st.obs.confidence);
  r.label = st.record.label;
  r.turns_used = st.turn;
  r.correct = r.prediction == r.label;
  r.trace.push_back({{"type", "result"}, {"prediction", r.prediction.index}, {"correct", r.correct},
                     {"turns_used", r.turns_used}, {"retries", r.retries}});
}

}  // namespace

ConsultationResult run_consultation(const PatientRecord& record, const Components& components,
                                    const ConsultationConfig& config, const AblationConfig& ablation,
                                    std::mt19937_64& rng) {
  components.check();
  ablation.validate();
  const KnowledgeBase& kb = *components.kb;
  const ConsultationEnv env(kb, components.scorer(ablation), config.environment(ablation.use_masking),
                            components.patient);
  const std::size_t term = env.termination_action();
  InquiryConfig inquiry = config.inquiry;
  if (!ablation.use_retry) inquiry.max_retries = 0;

  ConsultationResult result;
  EpisodeState st = env.reset(record);
  result.initial_prediction = final_diagnosis(st.obs.confidence);
  result.trace.push_back(header_line(record, st, "system", to_json(config), to_json(ablation)));

  while (!st.done) {
    const ActionMask mask = env.mask(st);
    nlohmann::json rounds = nlohmann::json::array();
    std::size_t action = term;
    std::size_t retries = 0;
    for (;;) {
      nlohmann::json round;
      std::set<std::size_t> candidates;
      if (!ablation.use_decision) {
        // The first policy draw is executed as is.
        const auto probs = components.policy->action_probs(st.obs, mask);
        action = sample_index(probs, rng);
        round = {{"candidates", {action}}, {"decision", "direct"}};
        rounds.push_back(std::move(round));
        break;
      }
      if (ablation.use_policy) {
        candidates = sample_candidates(*components.policy, st.obs, mask, config.samples, rng);
      } else {
        for (std::size_t a = 0; a < term; ++a)
          if (mask.enabled(a)) candidates.insert(a);
        if (candidates.empty()) candidates.insert(term);
      }
      round["candidates"] = candidates;
      if (!config.terminate_on_sample && candidates.size() > 1) candidates.erase(term);

      const auto decision = select_inquiry(candidates, st.obs.confidence, kb, *components.cooc, st.evidence,
                                           inquiry, retries);
      round["decision"] = to_string(decision.kind);
      round["strategy"] = to_string(decision.strategy);
      auto scores = nlohmann::json::array();
      for (const auto& cs : decision.scores)
        scores.push_back({{"action", cs.action}, {"freq", cs.top_frequency}, {"relevance", cs.relevance}});
      round["scores"] = std::move(scores);
      rounds.push_back(std::move(round));

      if (decision.kind == DecisionKind::Retry) {
        ++retries;
        continue;
      }
      action = decision.kind == DecisionKind::Terminate ? term : decision.symptom.index;
      break;
    }
    result.retries += retries;
    const std::size_t turn = st.turn;
    const auto out = env.step(st, action);
    auto line = turn_line(turn, action, out, st);
    line["rounds"] = std::move(rounds);
    line["retries"] = retries;
    result.trace.push_back(std::move(line));
  }
  finish(result, st);
  return result;
}

ConsultationResult run_random_inquiry(const PatientRecord& record, const KnowledgeBase& kb,
                                      const ScoringBackend& backend, const ConsultationConfig& config,
                                      std::mt19937_64& rng) {
  const ConsultationEnv env(kb, backend, config.environment(false));
  ConsultationResult result;
  EpisodeState st = env.reset(record);
  result.initial_prediction = final_diagnosis(st.obs.confidence);
  result.trace.push_back(header_line(record, st, "random", to_json(config), nlohmann::json::object()));
  std::vector<std::size_t> open;
  while (!st.done) {
    open.clear();
    for (std::size_t s = 0; s < kb.symptom_count(); ++s)
      if (!st.asked[s]) open.push_back(s);
    if (open.empty()) break;
    const std::size_t action = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
    const std::size_t turn = st.turn;
    const auto out = env.step(st, action);
    result.trace.push_back(turn_line(turn, action, out, st));
  }
  finish(result, st);
  return result;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SuiteMetrics summarize(std::span<const ConsultationResult> results, std::size_t disease_count) {
  if (results.empty()) throw EmptySuite("no consultation results to summarize");
  SuiteMetrics m;
  m.cases = results.size();
  m.per_disease.resize(disease_count);
  for (std::size_t d = 0; d < disease_count; ++d) m.per_disease[d].disease = DiseaseId{d};
  std::size_t correct = 0, initial = 0, turns = 0;
  for (const auto& r : results) {
    correct += r.correct;
    initial += r.initial_prediction == r.label;
    turns += r.turns_used;
    if (r.label.index >= disease_count) throw IdOutOfRange("result label out of range");
    auto& row = m.per_disease[r.label.index];
    ++row.cases;
    row.correct += r.correct;
  }
  const auto count = static_cast<double>(results.size());
  m.acc = correct / count;
  m.acc_init = initial / count;
  m.avg_n = turns / count;
  return m;
}

SuiteMetrics run_suite(std::span<const PatientRecord> records, const Components& components,
                       const ConsultationConfig& config, const AblationConfig& ablation,
                       const SuiteOptions& options) {
  if (records.empty()) throw EmptySuite("suite has no records");
  if (options.mode == InquiryMode::System) {
    components.check();
    ablation.validate();
  } else if (!components.kb || !components.backend) {
    throw InvalidConfig("random baseline needs a knowledge base and a scorer");
  }
  std::vector<ConsultationResult> results(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      std::mt19937_64 rng(mix_seed(options.seed, i));
      results[i] = options.mode == InquiryMode::System
                       ? run_consultation(records[i], components, config, ablation, rng)
                       : run_random_inquiry(records[i], *components.kb, components.scorer(ablation), config, rng);
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, records.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        try {
          worker();
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = records.size();
        }
      });
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }
  auto metrics = summarize(results, components.kb->disease_count());
  if (options.keep_results) metrics.results = std::move(results);
  return metrics;
}

std::vector<PpoDiagnostics> train_policy(PolicyNet& net, const ConsultationEnv& env,
                                         std::span<const PatientRecord> records, const TrainingConfig& config,
                                         std::uint64_t seed,
                                         const std::function<void(std::size_t, const PpoDiagnostics&)>& on_update) {
  if (records.empty()) throw EmptyRollout("no training records");
  if (config.steps_per_update == 0) throw InvalidConfig("steps_per_update must be positive");
  if (env.config().max_turns == 0) throw InvalidConfig("training needs at least one turn per episode");
  if (net.symptom_count() != env.kb().symptom_count() ||
      net.input_size() != env.kb().symptom_count() + env.kb().disease_count())
    throw ComponentShapeMismatch("policy network does not match the environment");

  std::mt19937_64 rng(mix_seed(seed, 0));
  PpoTrainer trainer(config.ppo, mix_seed(seed, 1));
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  std::vector<PpoDiagnostics> log;
  std::vector<Transition> buffer;
  std::size_t steps = 0;
  while (steps < config.total_steps) {
    buffer.clear();
    while (buffer.size() < config.steps_per_update) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      EpisodeState st = env.reset(records[order[cursor++]]);
      while (!st.done) {
        Transition t;
        t.state = st.obs;
        t.mask = env.mask(st);
        const auto probs = net.action_probs(st.obs, t.mask);
        t.action = sample_index(probs, rng);
        t.log_prob = std::log(probs[t.action]);
        t.value = net.value(st.obs);
        const auto out = env.step(st, t.action);
        t.reward = out.reward();
        t.done = out.done;
        buffer.push_back(std::move(t));
      }
    }
    steps += buffer.size();
    log.push_back(trainer.update(net, buffer));
    if (on_update) on_update(log.size() - 1, log.back());
  }
  return log;
}

}  // namespace dualmc
