#include "dualmc/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dualmc/error.hpp"
#include "dualmc/nn.hpp"

namespace dualmc {

std::vector<SubTrajectory> build_calibration_set(std::span<const PatientRecord> records) {
  std::vector<SubTrajectory> out;
  for (const auto& r : records) {
    const auto all = r.all_symptoms();
    const std::size_t l_self = r.self_reported();
    Evidence prefix;
    for (std::size_t i = 0; i < all.size(); ++i) {
      prefix.append(all[i]);
      if (i + 1 >= l_self) out.push_back({prefix, r.label});
    }
  }
  return out;
}

std::vector<double> target_distribution(std::size_t group_size, std::size_t label_pos, double epsilon) {
  if (group_size == 0 || label_pos >= group_size)
    throw InvalidEpsilon("label position outside the group");
  if (!(epsilon >= 0.0) || !(epsilon < 1.0 / static_cast<double>(group_size)))
    throw InvalidEpsilon("epsilon must satisfy 0 <= epsilon < 1/group_size");
  std::vector<double> t(group_size, epsilon);
  t[label_pos] = 1.0 - epsilon;
  const double total = std::accumulate(t.begin(), t.end(), 0.0);
  for (double& x : t) x /= total;
  return t;
}

double kl_loss(std::span<const double> target, std::span<const double> predicted) {
  if (target.size() != predicted.size()) throw LengthMismatch("target and prediction lengths differ");
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!(predicted[i] > 0.0)) throw ZeroPrediction("predicted probability must be positive");
    if (target[i] > 0.0) loss += target[i] * std::log(target[i] / predicted[i]);
  }
  return loss;
}

std::vector<DiseaseId> contrast_group(const KnowledgeBase& kb, DiseaseId label, std::size_t group_size) {
  const std::size_t n = kb.disease_count();
  const std::size_t k = std::min(group_size, n) - 1;
  std::vector<DiseaseId> group{label};
  for (auto d : similar_diseases(kb, label, k)) group.push_back(d);
  return group;
}

GroupEvaluation group_loss(const SubTrajectory& item, std::span<const DiseaseId> group,
                           const ReferenceScorer& base, const Adapter& adapter,
                           const CalibrationConfig& config, Adapter* grad) {
  const auto& lambda = base.log_ratio();
  const auto rank = static_cast<Eigen::Index>(adapter.rank());
  const std::size_t g = group.size();

  // Signed evidence sums shared by every disease in the group.
  Eigen::RowVectorXd v_sum = Eigen::RowVectorXd::Zero(rank);
  for (const auto& e : item.evidence_prefix)
    v_sum += sign(e.status) * adapter.v.row(static_cast<Eigen::Index>(e.symptom.index));

  std::vector<double> conf(g);
  for (std::size_t j = 0; j < g; ++j) {
    const auto d = static_cast<Eigen::Index>(group[j].index);
    double z = adapter.bias(d) + base.offset()(d) + adapter.u.row(d).dot(v_sum);
    for (const auto& e : item.evidence_prefix)
      z += sign(e.status) * lambda(d, static_cast<Eigen::Index>(e.symptom.index));
    conf[j] = confidence(BinaryLogits{z, 0.0}, config.tau);
  }
  const double total = std::accumulate(conf.begin(), conf.end(), 0.0);
  GroupEvaluation out;
  out.distribution.resize(g);
  for (std::size_t j = 0; j < g; ++j) out.distribution[j] = conf[j] / total;
  const auto target = target_distribution(g, 0, config.epsilon);
  out.loss = kl_loss(target, out.distribution);

  if (grad) {
    for (std::size_t j = 0; j < g; ++j) {
      // dL/dconf_j = (1 - t_j / dist_j) / S, using sum(t) = 1.
      const double dl_dconf = (1.0 - target[j] / out.distribution[j]) / total;
      const double dl_dz = dl_dconf * conf[j] * (1.0 - conf[j]) / config.tau;
      const auto d = static_cast<Eigen::Index>(group[j].index);
      grad->bias(d) += dl_dz;
      grad->u.row(d) += dl_dz * v_sum;
      for (const auto& e : item.evidence_prefix)
        grad->v.row(static_cast<Eigen::Index>(e.symptom.index)) +=
            dl_dz * sign(e.status) * adapter.u.row(d);
    }
  }
  return out;
}

namespace {

// bias | U (row-major) | V (row-major)
std::vector<double> flatten(const Adapter& a) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(a.bias.size() + a.u.size() + a.v.size()));
  for (Eigen::Index i = 0; i < a.bias.size(); ++i) out.push_back(a.bias(i));
  for (Eigen::Index i = 0; i < a.u.rows(); ++i)
    for (Eigen::Index k = 0; k < a.u.cols(); ++k) out.push_back(a.u(i, k));
  for (Eigen::Index i = 0; i < a.v.rows(); ++i)
    for (Eigen::Index k = 0; k < a.v.cols(); ++k) out.push_back(a.v(i, k));
  return out;
}

void unflatten(std::span<const double> flat, Adapter& a) {
  std::size_t p = 0;
  for (Eigen::Index i = 0; i < a.bias.size(); ++i) a.bias(i) = flat[p++];
  for (Eigen::Index i = 0; i < a.u.rows(); ++i)
    for (Eigen::Index k = 0; k < a.u.cols(); ++k) a.u(i, k) = flat[p++];
  for (Eigen::Index i = 0; i < a.v.rows(); ++i)
    for (Eigen::Index k = 0; k < a.v.cols(); ++k) a.v(i, k) = flat[p++];
}

}  // namespace

CalibrationResult calibrate(Adapter adapter, std::span<const SubTrajectory> items,
                            const KnowledgeBase& kb, const ReferenceScorer& base,
                            const CalibrationConfig& config) {
  const auto n = static_cast<Eigen::Index>(kb.disease_count());
  const auto m = static_cast<Eigen::Index>(kb.symptom_count());
  if (adapter.u.rows() != n || adapter.v.rows() != m || adapter.bias.size() != n ||
      base.disease_count() != kb.disease_count() || base.symptom_count() != kb.symptom_count())
    throw ComponentShapeMismatch("adapter, scorer and knowledge base disagree on shape");
  if (config.batch_size == 0) throw InvalidConfig("batch size must be positive");
  if (config.group_size < 2) throw InvalidConfig("group size must be at least 2");

  std::vector<std::vector<DiseaseId>> groups(kb.disease_count());
  for (std::size_t d = 0; d < kb.disease_count(); ++d)
    groups[d] = contrast_group(kb, DiseaseId{d}, config.group_size);

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  Adam adam(config.learning_rate);

  CalibrationResult result{std::move(adapter), {}};
  Adapter& a = result.adapter;
  Adapter grad = Adapter::zeros(kb.disease_count(), kb.symptom_count(), a.rank());
  std::vector<double> params = flatten(a);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      grad.u.setZero();
      grad.v.setZero();
      grad.bias.setZero();
      for (std::size_t i = start; i < stop; ++i) {
        const auto& item = items[order[i]];
        epoch_loss += group_loss(item, groups.at(item.label.index), base, a, config, &grad).loss;
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      auto g = flatten(grad);
      for (double& x : g) x *= scale;
      if (config.optimizer == Optimizer::Adam) {
        adam.step(params, g);
      } else {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * g[i];
      }
      unflatten(params, a);
    }
    result.loss_trace.push_back(items.empty() ? 0.0 : epoch_loss / static_cast<double>(items.size()));
  }
  return result;
}

CalibrationMetrics evaluate_calibration(std::span<const SubTrajectory> items, const KnowledgeBase& kb,
                                        const ReferenceScorer& base, const Adapter& adapter,
                                        const CalibrationConfig& config) {
  CalibrationMetrics out;
  if (items.empty()) return out;
  std::size_t hits = 0;
  for (const auto& item : items) {
    const auto group = contrast_group(kb, item.label, config.group_size);
    const auto ev = group_loss(item, group, base, adapter, config);
    out.mean_kl += ev.loss;
    const bool strict_top = std::all_of(ev.distribution.begin() + 1, ev.distribution.end(),
                                        [&](double q) { return q < ev.distribution.front(); });
    if (strict_top) ++hits;
  }
  out.mean_kl /= static_cast<double>(items.size());
  out.group_top1 = static_cast<double>(hits) / static_cast<double>(items.size());
  return out;
}

}  // namespace dualmc
