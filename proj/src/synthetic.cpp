#include "dualmc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "dualmc/error.hpp"
#include "dualmc/record_io.hpp"

namespace dualmc {
namespace {

struct Layout {
  std::size_t live, stride, width;
};

Layout layout_of(std::size_t n, std::size_t m) {
  const std::size_t live = std::min(m, 2 * n);
  const std::size_t stride = std::max<std::size_t>(1, live / n);
  const std::size_t width = std::min(stride + 3, live - 1);
  return {live, stride, width};
}

double uniform01(std::mt19937_64& rng) { return std::generate_canonical<double, 53>(rng); }

}  // namespace

std::vector<SymptomId> SyntheticWorld::signature(DiseaseId d) const {
  const auto lay = layout_of(disease_count(), symptom_count());
  std::vector<SymptomId> sig;
  for (std::size_t j = 0; j < lay.width; ++j) sig.push_back(SymptomId{(lay.stride * d.index + j) % lay.live});
  std::sort(sig.begin(), sig.end());
  return sig;
}

SyntheticWorld gen_world(const WorldParams& params) {
  const std::size_t n = params.diseases, m = params.symptoms;
  if (n < 2 || m < n) throw InvalidConfig("synthetic world needs n >= 2 and m >= n");
  if (!(params.sharpness > 0.5 && params.sharpness <= 1.0))
    throw InvalidConfig("sharpness must lie in (0.5, 1]");

  SyntheticWorld w;
  w.params = params;
  const auto lay = layout_of(n, m);
  w.theta = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  w.theta.leftCols(static_cast<Eigen::Index>(lay.live)).setConstant(1.0 - params.sharpness);
  w.prior.assign(n, 1.0 / static_cast<double>(n));
  for (std::size_t d = 0; d < n; ++d)
    for (auto s : w.signature(DiseaseId{d})) w.theta(d, s.index) = params.sharpness;

  std::mt19937_64 rng(params.seed);
  w.records = sample_records(w, params.records, rng);
  return w;
}

namespace {

std::vector<bool> draw_symptoms(const SyntheticWorld& w, DiseaseId d, std::mt19937_64& rng) {
  std::vector<bool> x(w.symptom_count());
  for (std::size_t s = 0; s < x.size(); ++s) x[s] = uniform01(rng) < w.theta(d.index, s);
  return x;
}

DiseaseId draw_disease(const SyntheticWorld& w, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> pick(w.prior.begin(), w.prior.end());
  return DiseaseId{pick(rng)};
}

}  // namespace

PatientRecord sample_record(const SyntheticWorld& world, DiseaseId d, std::mt19937_64& rng) {
  std::vector<bool> x;
  std::vector<std::size_t> present;
  // Every disease has signature symptoms with positive probability, so this terminates.
  do {
    x = draw_symptoms(world, d, rng);
    present.clear();
    for (std::size_t s = 0; s < x.size(); ++s)
      if (x[s]) present.push_back(s);
  } while (present.empty());

  PatientRecord r;
  r.label = d;
  const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, present.size() - 1)(rng);
  r.explicit_symptoms.push_back({SymptomId{present[pick]}, SymptomStatus::Present});
  for (std::size_t s = 0; s < x.size(); ++s) {
    if (s == present[pick]) continue;
    if (x[s])
      r.implicit_symptoms.push_back({SymptomId{s}, SymptomStatus::Present});
    else if (world.theta(d.index, s) >= 0.5)
      r.implicit_symptoms.push_back({SymptomId{s}, SymptomStatus::Absent});
  }
  return r;
}

std::vector<PatientRecord> sample_records(const SyntheticWorld& world, std::size_t count, std::mt19937_64& rng) {
  std::vector<PatientRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_record(world, draw_disease(world, rng), rng));
  return out;
}

Evidence sample_evidence(const SyntheticWorld& world, std::size_t min_size, std::size_t max_size,
                         std::mt19937_64& rng) {
  const std::size_t m = world.symptom_count();
  max_size = std::min(max_size, m);
  min_size = std::min(min_size, max_size);
  const DiseaseId d = draw_disease(world, rng);
  const auto x = draw_symptoms(world, d, rng);
  const std::size_t k = std::uniform_int_distribution<std::size_t>(min_size, max_size)(rng);
  std::vector<std::size_t> ids(m);
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: the first k entries become a uniform random subset.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, m - 1)(rng);
    std::swap(ids[i], ids[j]);
  }
  Evidence e;
  for (std::size_t i = 0; i < k; ++i)
    e.append({SymptomId{ids[i]}, x[ids[i]] ? SymptomStatus::Present : SymptomStatus::Absent});
  return e;
}

std::vector<double> exact_posterior(const SyntheticWorld& world, const Evidence& evidence) {
  const std::size_t n = world.disease_count(), m = world.symptom_count();
  std::vector<double> logp(n);
  for (std::size_t d = 0; d < n; ++d) {
    double lp = std::log(world.prior[d]);
    for (const auto& e : evidence) {
      if (e.symptom.index >= m) throw IdOutOfRange("evidence symptom out of range");
      const double th = world.theta(d, e.symptom.index);
      lp += std::log(e.status == SymptomStatus::Present ? th : 1.0 - th);
    }
    logp[d] = lp;
  }
  const double top = *std::max_element(logp.begin(), logp.end());
  if (!std::isfinite(top)) throw ImpossibleEvidence("evidence has zero likelihood under every disease");
  double total = 0.0;
  for (auto& v : logp) total += (v = std::exp(v - top));
  for (auto& v : logp) v /= total;
  return logp;
}

nlohmann::json world_to_json(const SyntheticWorld& w) {
  nlohmann::json j;
  j["params"] = {{"diseases", w.params.diseases}, {"symptoms", w.params.symptoms}, {"seed", w.params.seed},
                 {"sharpness", w.params.sharpness}, {"records", w.params.records}};
  auto theta = nlohmann::json::array();
  for (Eigen::Index d = 0; d < w.theta.rows(); ++d) {
    auto row = nlohmann::json::array();
    for (Eigen::Index s = 0; s < w.theta.cols(); ++s) row.push_back(w.theta(d, s));
    theta.push_back(std::move(row));
  }
  j["theta"] = std::move(theta);
  j["prior"] = w.prior;
  auto recs = nlohmann::json::array();
  for (const auto& r : w.records) recs.push_back(record_to_json(r));
  j["records"] = std::move(recs);
  return j;
}

SyntheticWorld world_from_json(const nlohmann::json& j) {
  try {
    SyntheticWorld w;
    const auto& p = j.at("params");
    w.params = {p.at("diseases").get<std::size_t>(), p.at("symptoms").get<std::size_t>(),
                p.at("seed").get<std::uint64_t>(), p.at("sharpness").get<double>(),
                p.at("records").get<std::size_t>()};
    const auto& theta = j.at("theta");
    const auto n = static_cast<Eigen::Index>(theta.size());
    const auto m = n ? static_cast<Eigen::Index>(theta.at(0).size()) : 0;
    w.theta.resize(n, m);
    for (Eigen::Index d = 0; d < n; ++d) {
      if (static_cast<Eigen::Index>(theta[d].size()) != m) throw InvalidConfig("ragged theta matrix");
      for (Eigen::Index s = 0; s < m; ++s) w.theta(d, s) = theta[d][s].get<double>();
    }
    w.prior = j.at("prior").get<std::vector<double>>();
    if (w.prior.size() != static_cast<std::size_t>(n)) throw InvalidConfig("prior length != disease count");
    for (const auto& r : j.at("records")) {
      auto rec = record_from_json(r);
      validate_record(rec, static_cast<std::size_t>(m), static_cast<std::size_t>(n));
      w.records.push_back(std::move(rec));
    }
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("malformed world file: ") + e.what());
  }
}

void save_world(const std::filesystem::path& path, const SyntheticWorld& world) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << world_to_json(world).dump() << '\n';
}

SyntheticWorld load_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  return world_from_json(j);
}

}  // namespace dualmc
