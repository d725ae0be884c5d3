#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dualmc/core.hpp"

namespace dualmc {

struct WorldParams {
  std::size_t diseases = 6;
  std::size_t symptoms = 20;
  std::uint64_t seed = 0;
  double sharpness = 0.85;
  std::size_t records = 500;
  bool operator==(const WorldParams&) const = default;
};

// Generative disease model with known parameters, so the Bayes posterior of
// any evidence set is computable exactly.
//
// Only the first min(m, 2n) symptoms are informative; the rest never occur
// (theta = 0) and act as distractors for inquiry. Disease d owns a signature
// of consecutive informative symptoms starting at stride * d, wrapping around,
// so neighbouring diseases overlap and have to be told apart by inquiry.
// Signature symptoms occur with probability `sharpness`, other informative
// symptoms with 1 - sharpness.
struct SyntheticWorld {
  WorldParams params;
  Eigen::MatrixXd theta;  // n x m occurrence probabilities
  std::vector<double> prior;
  std::vector<PatientRecord> records;

  std::size_t disease_count() const noexcept { return static_cast<std::size_t>(theta.rows()); }
  std::size_t symptom_count() const noexcept { return static_cast<std::size_t>(theta.cols()); }
  std::vector<SymptomId> signature(DiseaseId d) const;
  bool operator==(const SyntheticWorld&) const = default;
};

// Throws InvalidConfig unless n >= 2, m >= n and 0.5 < sharpness <= 1.
SyntheticWorld gen_world(const WorldParams& params);

// One patient: a full symptom draw from theta[d]. The explicit part is a single
// random Present symptom; the implicit part lists the remaining Present
// symptoms and the signature symptoms that came out Absent, in id order.
PatientRecord sample_record(const SyntheticWorld& world, DiseaseId d, std::mt19937_64& rng);
std::vector<PatientRecord> sample_records(const SyntheticWorld& world, std::size_t count, std::mt19937_64& rng);

// Random evidence set: a disease drawn from the prior, a full symptom draw,
// then the statuses of between min_size and max_size distinct random symptoms.
Evidence sample_evidence(const SyntheticWorld& world, std::size_t min_size, std::size_t max_size,
                         std::mt19937_64& rng);

// P(d | E) proportional to prior[d] * prod theta or (1 - theta) over the
// evidence. Throws IdOutOfRange for bad ids and ImpossibleEvidence when every
// disease has zero likelihood.
std::vector<double> exact_posterior(const SyntheticWorld& world, const Evidence& evidence);

nlohmann::json world_to_json(const SyntheticWorld& world);
SyntheticWorld world_from_json(const nlohmann::json& j);
void save_world(const std::filesystem::path& path, const SyntheticWorld& world);
SyntheticWorld load_world(const std::filesystem::path& path);

}  // namespace dualmc
