#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "dualmc/nn.hpp"

namespace dualmc {

// [p, c]: ternary symptom vector followed by disease confidences.
struct ObservationState {
  std::vector<std::int8_t> symptoms;  // length m, values in {-1, 0, 1}
  std::vector<double> confidence;     // length n

  std::size_t input_size() const noexcept { return symptoms.size() + confidence.size(); }
  // Flattened network input.
  std::vector<double> features() const;
  bool operator==(const ObservationState&) const = default;
};

// m inquiry bits followed by the termination bit.
struct ActionMask {
  std::vector<std::uint8_t> bits;

  std::size_t size() const noexcept { return bits.size(); }
  bool enabled(std::size_t a) const { return bits.at(a) != 0; }
  std::size_t enabled_count() const noexcept;
  std::size_t termination_action() const noexcept { return bits.size() - 1; }
  bool operator==(const ActionMask&) const = default;
};

// Softmax restricted to enabled actions; disabled entries are exactly 0.
// Throws AllMasked when nothing is enabled, LengthMismatch on size mismatch.
std::vector<double> masked_distribution(std::span<const double> logits, const ActionMask& mask);

// Draws one index from a probability vector (entries with probability 0 are
// never returned).
std::size_t sample_index(std::span<const double> probs, std::mt19937_64& rng);

struct PolicyConfig {
  std::vector<std::size_t> actor_hidden{256, 128, 128};
  std::vector<std::size_t> critic_hidden{64};
};

// Separate actor and critic MLPs over the flattened observation.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(std::size_t m, std::size_t n, const PolicyConfig& config, std::uint64_t seed);
  PolicyNet(Mlp actor, Mlp critic);

  std::size_t symptom_count() const noexcept { return actor_.output_size() - 1; }
  std::size_t input_size() const noexcept { return actor_.input_size(); }
  std::size_t action_count() const noexcept { return actor_.output_size(); }

  std::vector<double> logits(const ObservationState& s) const;
  double value(const ObservationState& s) const;
  std::vector<double> action_probs(const ObservationState& s, const ActionMask& mask) const;

  Mlp& actor() noexcept { return actor_; }
  Mlp& critic() noexcept { return critic_; }
  const Mlp& actor() const noexcept { return actor_; }
  const Mlp& critic() const noexcept { return critic_; }
  std::size_t param_count() const noexcept { return actor_.param_count() + critic_.param_count(); }

  bool operator==(const PolicyNet&) const = default;

 private:
  Mlp actor_;
  Mlp critic_;
};

// Text checkpoint: header with layer sizes, then the flat weight arrays.
void save_policy(const std::filesystem::path& path, const PolicyNet& net);
PolicyNet load_policy(const std::filesystem::path& path);

// N independent masked draws, deduplicated. Reproducible for a given rng state.
std::set<std::size_t> sample_candidates(const PolicyNet& net, const ObservationState& state,
                                        const ActionMask& mask, std::size_t draws, std::mt19937_64& rng);

struct Transition {
  ObservationState state;
  ActionMask mask;
  std::size_t action = 0;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

struct AdvantageEstimate {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation; the value after a done step is 0.
AdvantageEstimate gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const bool> dones, double gamma, double lambda);

struct PpoConfig {
  double clip_range = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 5e-5;
  std::size_t batch_size = 64;
  std::size_t epochs = 5;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double max_grad_norm = 0.5;
  bool normalize_advantage = true;
};

// One minibatch worth of PPO inputs.
struct PpoBatch {
  std::vector<const Transition*> items;
  std::vector<double> advantages;  // already normalized if requested
  std::vector<double> returns;
};

struct PpoLoss {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Clipped surrogate + value MSE - entropy bonus for a minibatch, with the
// analytic gradient (actor params followed by critic params) when grad is
// non-null. grad must then have net.param_count() entries; it is overwritten.
PpoLoss ppo_loss(const PolicyNet& net, const PpoBatch& batch, const PpoConfig& config,
                 std::vector<double>* grad = nullptr);

struct PpoDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_reward = 0.0;
  std::size_t episodes = 0;
  std::size_t transitions = 0;
};

// Stateful trainer: owns the optimizer so moment estimates persist across
// updates. Transitions must form complete episodes.
class PpoTrainer {
 public:
  PpoTrainer(PpoConfig config, std::uint64_t seed);

  PpoDiagnostics update(PolicyNet& net, std::span<const Transition> transitions);
  const PpoConfig& config() const noexcept { return config_; }

 private:
  PpoConfig config_;
  Adam adam_;
  std::mt19937_64 rng_;
};

}  // namespace dualmc
