#include "dualmc/diagnosis.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

#include "dualmc/error.hpp"

namespace dualmc {

Adapter Adapter::zeros(std::size_t n, std::size_t m, std::size_t rank) {
  if (rank == 0) throw InvalidConfig("adapter rank must be >= 1");
  const auto rn = static_cast<Eigen::Index>(n);
  const auto rm = static_cast<Eigen::Index>(m);
  const auto rr = static_cast<Eigen::Index>(rank);
  return Adapter{Eigen::MatrixXd::Zero(rn, rr), Eigen::MatrixXd::Zero(rm, rr), Eigen::VectorXd::Zero(rn)};
}

Adapter Adapter::initialized(std::size_t n, std::size_t m, std::size_t rank, std::uint64_t seed) {
  Adapter a = zeros(n, m, rank);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(rank));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < a.v.rows(); ++i)
    for (Eigen::Index k = 0; k < a.v.cols(); ++k) a.v(i, k) = dist(rng);
  return a;
}

namespace {

void write_matrix(std::ostream& out, const Eigen::MatrixXd& mat) {
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) out << (j ? " " : "") << mat(i, j);
    out << '\n';
  }
}

void read_matrix(std::istream& in, Eigen::MatrixXd& mat, const std::string& src) {
  for (Eigen::Index i = 0; i < mat.rows(); ++i)
    for (Eigen::Index j = 0; j < mat.cols(); ++j)
      if (!(in >> mat(i, j))) throw ParseError(src, 0, "truncated adapter matrix");
}

}  // namespace

void save_adapter(const std::filesystem::path& path, const Adapter& a) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  out << "dualmc-adapter 1\n"
      << a.disease_count() << ' ' << a.symptom_count() << ' ' << a.rank() << '\n';
  write_matrix(out, a.bias.transpose());
  write_matrix(out, a.u);
  write_matrix(out, a.v);
}

Adapter load_adapter(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  int version = 0;
  std::size_t n = 0, m = 0, r = 0;
  if (!(in >> magic >> version) || magic != "dualmc-adapter" || version != 1)
    throw ParseError(path.string(), 1, "not an adapter checkpoint");
  if (!(in >> n >> m >> r) || r == 0) throw ParseError(path.string(), 2, "bad adapter header");
  Adapter a = Adapter::zeros(n, m, r);
  Eigen::MatrixXd bias(1, static_cast<Eigen::Index>(n));
  read_matrix(in, bias, path.string());
  a.bias = bias.row(0).transpose();
  read_matrix(in, a.u, path.string());
  read_matrix(in, a.v, path.string());
  return a;
}

ReferenceScorer::ReferenceScorer(const KnowledgeBase& kb, double smoothing)
    : ReferenceScorer(kb, Adapter::zeros(kb.disease_count(), kb.symptom_count(), 1), smoothing) {}

ReferenceScorer::ReferenceScorer(const KnowledgeBase& kb, Adapter adapter, double smoothing)
    : smoothing_(smoothing), adapter_(std::move(adapter)) {
  if (!(smoothing > 0.0)) throw InvalidConfig("smoothing must be positive");
  const auto n = static_cast<Eigen::Index>(kb.disease_count());
  const auto m = static_cast<Eigen::Index>(kb.symptom_count());
  if (adapter_.u.rows() != n || adapter_.v.rows() != m || adapter_.bias.size() != n)
    throw ComponentShapeMismatch("adapter shape does not match knowledge base");
  lambda_.resize(n, m);
  for (Eigen::Index d = 0; d < n; ++d)
    for (Eigen::Index s = 0; s < m; ++s) {
      const double bg = kb.background(SymptomId{static_cast<std::size_t>(s)});
      lambda_(d, s) = std::log((kb.freq_matrix()(d, s) + smoothing) / (bg + smoothing));
    }
  offset_ = Eigen::VectorXd::Zero(n);
  weights_ = lambda_ + adapter_.delta();
}

BinaryLogits ReferenceScorer::score(const Evidence& evidence, DiseaseId disease,
                                    const KnowledgeBase& kb) const {
  if (kb.disease_count() != disease_count() || kb.symptom_count() != symptom_count())
    throw ComponentShapeMismatch("scorer was built for a different knowledge base");
  kb.check_disease(disease);
  const auto d = static_cast<Eigen::Index>(disease.index);
  double margin = adapter_.bias(d) + offset_(d);
  for (const auto& e : evidence) {
    kb.check_symptom(e.symptom);
    margin += sign(e.status) * weights_(d, static_cast<Eigen::Index>(e.symptom.index));
  }
  return BinaryLogits{margin, 0.0};
}

ReferenceScorer ReferenceScorer::with_adapter(Adapter adapter) const {
  if (adapter.u.rows() != lambda_.rows() || adapter.v.rows() != lambda_.cols() ||
      adapter.bias.size() != lambda_.rows())
    throw ComponentShapeMismatch("adapter shape does not match scorer");
  ReferenceScorer copy = *this;
  copy.adapter_ = std::move(adapter);
  copy.weights_ = copy.lambda_ + copy.adapter_.delta();
  return copy;
}

ReferenceScorer ReferenceScorer::without_adapter() const {
  return with_adapter(Adapter::zeros(disease_count(), symptom_count(), 1));
}

void ReferenceScorer::set_offset(Eigen::VectorXd offset) {
  if (offset.size() != lambda_.rows()) throw LengthMismatch("offset length != disease count");
  offset_ = std::move(offset);
}

double confidence(const BinaryLogits& logits, double tau) {
  if (!(tau > 0.0)) throw NonPositiveTemperature("temperature must be positive");
  const double a = logits.logit_true / tau;
  const double b = logits.logit_false / tau;
  const double hi = std::max(a, b);
  const double ea = std::exp(a - hi);
  const double eb = std::exp(b - hi);
  return ea / (ea + eb);
}

std::vector<double> diagnose(const Evidence& evidence, const KnowledgeBase& kb,
                             const ScoringBackend& backend, double tau) {
  std::vector<double> c(kb.disease_count());
  for (std::size_t d = 0; d < c.size(); ++d)
    c[d] = confidence(backend.score(evidence, DiseaseId{d}, kb), tau);
  return c;
}

DiseaseId final_diagnosis(std::span<const double> confidence) {
  if (confidence.empty()) throw EmptyVector("cannot diagnose from an empty confidence vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < confidence.size(); ++i)
    if (confidence[i] > confidence[best]) best = i;
  return DiseaseId{best};
}

}  // namespace dualmc
