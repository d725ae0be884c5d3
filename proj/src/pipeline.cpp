#include "dualmc/pipeline.hpp"

#include <fstream>

#include "dualmc/error.hpp"
#include "dualmc/remote.hpp"
#include "dualmc/synthetic.hpp"

namespace dualmc {

nlohmann::json kb_to_json(const KnowledgeBase& kb) {
  auto freq = nlohmann::json::array();
  const auto& f = kb.freq_matrix();
  for (Eigen::Index d = 0; d < f.rows(); ++d) {
    auto row = nlohmann::json::array();
    for (Eigen::Index s = 0; s < f.cols(); ++s) row.push_back(f(d, s));
    freq.push_back(std::move(row));
  }
  return {{"freq", freq}, {"prior", kb.prior()}, {"symptoms", kb.symptom_names()}, {"diseases", kb.disease_names()}};
}

KnowledgeBase kb_from_json(const nlohmann::json& j) {
  try {
    const auto& rows = j.at("freq");
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto m = n ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
    Eigen::MatrixXd freq(n, m);
    for (Eigen::Index d = 0; d < n; ++d) {
      if (static_cast<Eigen::Index>(rows[d].size()) != m) throw InvalidConfig("ragged frequency matrix");
      for (Eigen::Index s = 0; s < m; ++s) freq(d, s) = rows[d][s].get<double>();
    }
    KnowledgeBase kb(std::move(freq), j.at("prior").get<std::vector<double>>());
    kb.set_names(j.value("symptoms", std::vector<std::string>{}), j.value("diseases", std::vector<std::string>{}));
    return kb;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed knowledge base: ") + e.what());
  }
}

void save_kb(const std::filesystem::path& path, const KnowledgeBase& kb) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kb_to_json(kb).dump() << '\n';
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return kb_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 1, e.what());
  }
}

DatasetBundle load_dataset(const Config& config, const std::string& dataset,
                           const std::optional<std::filesystem::path>& data_dir) {
  if (data_dir) return ingest(*data_dir, DatasetFormat::Canonical, {config.run.seed, std::nullopt});
  if (dataset != "synthetic")
    throw UsageError("dataset '" + dataset + "' needs --data pointing at an ingested corpus");
  const auto world = gen_world(config.world);
  DatasetBundle b;
  b.train = world.records;
  std::mt19937_64 rng(mix_seed(config.world.seed, 1));
  b.dev = sample_records(world, config.run.test_records, rng);
  b.test = sample_records(world, config.run.test_records, rng);
  for (std::size_t s = 0; s < world.symptom_count(); ++s) b.vocab.symptoms.push_back("s" + std::to_string(s));
  for (std::size_t d = 0; d < world.disease_count(); ++d) b.vocab.diseases.push_back("d" + std::to_string(d));
  return b;
}

System::System(const Config& config, const DatasetBundle& data) : config_(config) {
  const std::size_t m = data.vocab.symptom_count(), n = data.vocab.disease_count();
  kb_ = std::make_unique<KnowledgeBase>(KnowledgeBase::build(data.train, m, n));
  kb_->set_names(data.vocab.symptoms, data.vocab.diseases);
  scorer_ = std::make_unique<ReferenceScorer>(*kb_, Adapter::zeros(n, m, config.adapter_rank), config.backend.smoothing);
  plain_ = std::make_unique<ReferenceScorer>(scorer_->without_adapter());
  if (config.backend.kind == "remote") {
    RemoteOptions opts;
    opts.timeout = std::chrono::milliseconds(config.backend.timeout_ms);
    opts.max_in_flight = config.backend.max_in_flight;
    remote_ = std::make_unique<RemoteScorer>(config.backend.endpoint, opts);
  } else if (config.backend.kind != "reference") {
    throw InvalidConfig("backend.kind must be reference or remote");
  }
  cooc_ = std::make_unique<Eigen::MatrixXd>(cooccurrence(data.train, m));
  policy_ = std::make_unique<PolicyNet>(m, n, config.network, mix_seed(config.run.seed, 7));
}

void System::set_adapter(Adapter adapter) {
  if (adapter.disease_count() != kb_->disease_count() || adapter.symptom_count() != kb_->symptom_count())
    throw ComponentShapeMismatch("adapter shape does not match the knowledge base");
  scorer_ = std::make_unique<ReferenceScorer>(scorer_->with_adapter(std::move(adapter)));
}

void System::set_policy(PolicyNet policy) {
  if (policy.symptom_count() != kb_->symptom_count() ||
      policy.input_size() != kb_->symptom_count() + kb_->disease_count())
    throw ComponentShapeMismatch("policy shape does not match the knowledge base");
  *policy_ = std::move(policy);
}

const ScoringBackend& System::backend() const noexcept {
  if (remote_) return *remote_;
  return *scorer_;
}

Components System::components(const Patient* patient) const {
  Components c;
  c.kb = kb_.get();
  c.backend = &backend();
  c.plain_backend = remote_ ? nullptr : plain_.get();
  c.policy = policy_.get();
  c.cooc = cooc_.get();
  c.patient = patient;
  return c;
}

CalibrationResult System::calibrate(const Config& config, const DatasetBundle& data) {
  const auto items = build_calibration_set(data.train);
  CalibrationConfig cc = config.calibration;
  cc.seed = mix_seed(config.run.seed, 3);
  auto start = Adapter::initialized(kb_->disease_count(), kb_->symptom_count(), config.adapter_rank,
                                    mix_seed(config.run.seed, 4));
  auto result = dualmc::calibrate(std::move(start), items, *kb_, *plain_, cc);
  set_adapter(result.adapter);
  return result;
}

std::vector<PpoDiagnostics> System::train(const Config& config, const DatasetBundle& data,
                                          const std::function<void(std::size_t, const PpoDiagnostics&)>& on_update) {
  const ConsultationEnv env(*kb_, backend(), config.consultation.environment(true));
  return train_policy(*policy_, env, data.train, config.training, mix_seed(config.run.seed, 5), on_update);
}

}  // namespace dualmc
