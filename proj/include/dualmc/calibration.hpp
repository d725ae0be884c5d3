#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dualmc/core.hpp"
#include "dualmc/diagnosis.hpp"
#include "dualmc/knowledge_base.hpp"

namespace dualmc {

// An evidence prefix of a training record, labelled with the record's disease.
struct SubTrajectory {
  Evidence evidence_prefix;
  DiseaseId label;
};

// For each record with k recorded symptoms and l_self explicit ones, emits the
// prefixes of length l_self, l_self + 1, ..., k (explicit first, then implicit
// in record order). Each record contributes k - l_self + 1 items.
std::vector<SubTrajectory> build_calibration_set(std::span<const PatientRecord> records);

// Smoothed one-hot target: epsilon everywhere, 1 - epsilon at label_pos, then
// renormalized to sum to 1. Throws InvalidEpsilon unless 0 <= epsilon <
// 1/group_size (epsilon = 0 gives the exact one-hot).
std::vector<double> target_distribution(std::size_t group_size, std::size_t label_pos, double epsilon);

// sum_i t_i ln(t_i / q_i) with 0 ln(0/q) = 0. Throws LengthMismatch, and
// ZeroPrediction if any q_i <= 0.
double kl_loss(std::span<const double> target, std::span<const double> predicted);

enum class Optimizer { Sgd, Adam };

struct CalibrationConfig {
  double learning_rate = 5e-5;
  std::size_t epochs = 5;
  std::size_t batch_size = 8;
  double epsilon = 0.01;
  double tau = 1.0;
  std::size_t group_size = 5;  // the true disease plus group_size - 1 similar ones
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 0;
};

struct CalibrationResult {
  Adapter adapter;
  std::vector<double> loss_trace;  // mean KL per epoch
};

// Contrastive group for a label: the label first, then the most similar
// diseases; clipped to the disease count.
std::vector<DiseaseId> contrast_group(const KnowledgeBase& kb, DiseaseId label, std::size_t group_size);

// Loss and analytic gradient of the in-batch KL objective for one
// sub-trajectory. Gradients are accumulated (added) into the grad adapter.
struct GroupEvaluation {
  double loss = 0.0;
  std::vector<double> distribution;  // normalized group confidences, label first
};
GroupEvaluation group_loss(const SubTrajectory& item, std::span<const DiseaseId> group,
                           const ReferenceScorer& base, const Adapter& adapter,
                           const CalibrationConfig& config, Adapter* grad = nullptr);

// Trains the adapter by stochastic gradient steps on the group KL objective.
// The base scorer supplies log-ratios and any fixed offset; its own adapter
// is ignored in favour of `adapter`.
CalibrationResult calibrate(Adapter adapter, std::span<const SubTrajectory> items,
                            const KnowledgeBase& kb, const ReferenceScorer& base,
                            const CalibrationConfig& config);

struct CalibrationMetrics {
  double mean_kl = 0.0;
  double group_top1 = 0.0;  // share of items where the label has the largest group confidence
};
CalibrationMetrics evaluate_calibration(std::span<const SubTrajectory> items, const KnowledgeBase& kb,
                                        const ReferenceScorer& base, const Adapter& adapter,
                                        const CalibrationConfig& config);

}  // namespace dualmc
