#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dualmc/core.hpp"
#include "dualmc/knowledge_base.hpp"

namespace dualmc {

struct BinaryLogits {
  double logit_true = 0.0;
  double logit_false = 0.0;
};

// Produces the True/False logit pair for "is disease d a plausible diagnosis
// given this evidence". Each disease is scored in isolation; implementations
// must be deterministic for fixed inputs and safe for concurrent callers.
class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;
  virtual BinaryLogits score(const Evidence& evidence, DiseaseId disease,
                             const KnowledgeBase& kb) const = 0;
};

// Low-rank additive correction to the per-(disease, symptom) evidence weights:
// delta = U * V^T (n x m), plus a per-disease bias on the logit margin.
struct Adapter {
  Eigen::MatrixXd u;     // n x r
  Eigen::MatrixXd v;     // m x r
  Eigen::VectorXd bias;  // n

  static constexpr std::size_t kDefaultRank = 16;

  // All-zero adapter; contributes nothing.
  static Adapter zeros(std::size_t n, std::size_t m, std::size_t rank = kDefaultRank);
  // U = 0, V ~ U(-1/sqrt(r), 1/sqrt(r)), bias = 0: starts as a no-op but has a
  // non-degenerate gradient path, the usual low-rank adapter start.
  static Adapter initialized(std::size_t n, std::size_t m, std::size_t rank, std::uint64_t seed);

  std::size_t disease_count() const noexcept { return static_cast<std::size_t>(u.rows()); }
  std::size_t symptom_count() const noexcept { return static_cast<std::size_t>(v.rows()); }
  std::size_t rank() const noexcept { return static_cast<std::size_t>(u.cols()); }
  Eigen::MatrixXd delta() const { return u * v.transpose(); }

  bool operator==(const Adapter& o) const { return u == o.u && v == o.v && bias == o.bias; }
};

// Text checkpoint: "dualmc-adapter 1" / "n m r" / bias / U rows / V rows.
void save_adapter(const std::filesystem::path& path, const Adapter& a);
Adapter load_adapter(const std::filesystem::path& path);

// Desk-scale stand-in for an LLM scorer: a log frequency-ratio evidence model.
//   logit_T - logit_F = bias[d] + offset[d] + sum_{(s, sigma)} sigma * (lambda(d, s) + delta[d][s])
//   lambda(d, s) = ln((freq[d][s] + alpha) / (bg[s] + alpha)),  logit_F = 0
// `offset` is a fixed, non-trainable per-disease shift used to simulate a
// miscalibrated base scorer; it is zero unless set.
class ReferenceScorer final : public ScoringBackend {
 public:
  static constexpr double kDefaultSmoothing = 0.01;

  explicit ReferenceScorer(const KnowledgeBase& kb, double smoothing = kDefaultSmoothing);
  ReferenceScorer(const KnowledgeBase& kb, Adapter adapter, double smoothing = kDefaultSmoothing);

  BinaryLogits score(const Evidence& evidence, DiseaseId disease,
                     const KnowledgeBase& kb) const override;

  // Same scorer with a different adapter snapshot (offsets are kept).
  ReferenceScorer with_adapter(Adapter adapter) const;
  ReferenceScorer without_adapter() const;
  void set_offset(Eigen::VectorXd offset);

  const Eigen::MatrixXd& log_ratio() const noexcept { return lambda_; }
  const Eigen::VectorXd& offset() const noexcept { return offset_; }
  const Adapter& adapter() const noexcept { return adapter_; }
  double smoothing() const noexcept { return smoothing_; }
  std::size_t symptom_count() const noexcept { return static_cast<std::size_t>(lambda_.cols()); }
  std::size_t disease_count() const noexcept { return static_cast<std::size_t>(lambda_.rows()); }

 private:
  double smoothing_;
  Eigen::MatrixXd lambda_;  // n x m
  Eigen::VectorXd offset_;  // n
  Adapter adapter_;
  Eigen::MatrixXd weights_;  // lambda + delta, cached for the frozen adapter
};

// Temperature-scaled two-way softmax: exp(T/tau) / (exp(T/tau) + exp(F/tau)).
// Throws NonPositiveTemperature for tau <= 0.
double confidence(const BinaryLogits& logits, double tau);

// Confidence for every disease, each queried independently.
std::vector<double> diagnose(const Evidence& evidence, const KnowledgeBase& kb,
                             const ScoringBackend& backend, double tau);

// Argmax, ties to the lowest index. Throws EmptyVector.
DiseaseId final_diagnosis(std::span<const double> confidence);

}  // namespace dualmc
