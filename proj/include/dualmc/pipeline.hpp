#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "dualmc/config.hpp"
#include "dualmc/dataset.hpp"
#include "dualmc/diagnosis.hpp"
#include "dualmc/knowledge_base.hpp"
#include "dualmc/orchestrator.hpp"
#include "dualmc/policy.hpp"

namespace dualmc {

nlohmann::json kb_to_json(const KnowledgeBase& kb);
KnowledgeBase kb_from_json(const nlohmann::json& j);
void save_kb(const std::filesystem::path& path, const KnowledgeBase& kb);
KnowledgeBase load_kb(const std::filesystem::path& path);

// Train/dev/test records for a run. With no data directory and the synthetic
// preset, a world is generated from config.world: its records are the train
// split and dev/test are fresh draws from the same generator.
DatasetBundle load_dataset(const Config& config, const std::string& dataset,
                           const std::optional<std::filesystem::path>& data_dir);

// Knowledge base, scorers, co-occurrence table and policy, wired together.
// Heap-held so the references handed to Components stay valid when moved.
class System {
 public:
  // Builds the knowledge base and co-occurrence table from `train`. The
  // adapter defaults to zeros; the policy to a fresh seeded network.
  System(const Config& config, const DatasetBundle& data);

  void set_adapter(Adapter adapter);
  void set_policy(PolicyNet policy);

  const KnowledgeBase& kb() const noexcept { return *kb_; }
  const ReferenceScorer& reference() const noexcept { return *scorer_; }
  const ScoringBackend& backend() const noexcept;
  const PolicyNet& policy() const noexcept { return *policy_; }
  PolicyNet& policy() noexcept { return *policy_; }
  const Eigen::MatrixXd& cooc() const noexcept { return *cooc_; }
  Components components(const Patient* patient = nullptr) const;

  // Adapter training on the train split's sub-trajectories.
  CalibrationResult calibrate(const Config& config, const DatasetBundle& data);
  // PPO on the train split with the current scorer.
  std::vector<PpoDiagnostics> train(const Config& config, const DatasetBundle& data,
                                    const std::function<void(std::size_t, const PpoDiagnostics&)>& on_update = {});

 private:
  std::unique_ptr<KnowledgeBase> kb_;
  std::unique_ptr<ReferenceScorer> scorer_;
  std::unique_ptr<ReferenceScorer> plain_;
  std::unique_ptr<ScoringBackend> remote_;
  std::unique_ptr<Eigen::MatrixXd> cooc_;
  std::unique_ptr<PolicyNet> policy_;
  Config config_;
};

}  // namespace dualmc
