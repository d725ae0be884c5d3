#include "dualmc/record_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "dualmc/error.hpp"

namespace dualmc {
namespace {

nlohmann::json entries_to_json(const std::vector<SymptomEntry>& entries) {
  auto arr = nlohmann::json::array();
  for (const auto& e : entries) arr.push_back({e.symptom.index, sign(e.status)});
  return arr;
}

std::vector<SymptomEntry> entries_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw InvalidRecord(std::string("field '") + field + "' is not an array");
  std::vector<SymptomEntry> out;
  out.reserve(j.size());
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer())
      throw InvalidRecord(std::string("field '") + field + "' entries must be [symptom, +-1]");
    const auto sym = pair[0].get<long long>();
    const auto status = status_from_int(pair[1].get<int>());
    if (sym < 0) throw InvalidRecord("negative symptom id");
    if (!status || *status == SymptomStatus::Unknown)
      throw InvalidRecord("symptom status must be +1 or -1");
    out.push_back({SymptomId{static_cast<std::size_t>(sym)}, *status});
  }
  return out;
}

}  // namespace

nlohmann::json record_to_json(const PatientRecord& r) {
  return {{"explicit", entries_to_json(r.explicit_symptoms)},
          {"implicit", entries_to_json(r.implicit_symptoms)},
          {"label", r.label.index}};
}

PatientRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidRecord("record is not an object");
  if (!j.contains("explicit") || !j.contains("label"))
    throw InvalidRecord("record requires 'explicit' and 'label'");
  PatientRecord r;
  r.explicit_symptoms = entries_from_json(j.at("explicit"), "explicit");
  if (j.contains("implicit")) r.implicit_symptoms = entries_from_json(j.at("implicit"), "implicit");
  const auto& label = j.at("label");
  if (!label.is_number_integer() || label.get<long long>() < 0)
    throw InvalidRecord("label must be a non-negative integer");
  r.label = DiseaseId{label.get<std::size_t>()};
  return r;
}

std::vector<PatientRecord> read_records(std::istream& in, const std::string& source) {
  std::vector<PatientRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const InvalidRecord& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

std::vector<PatientRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_records(in, path.string());
}

void write_records(std::ostream& out, std::span<const PatientRecord> records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

void write_records(const std::filesystem::path& path, std::span<const PatientRecord> records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_records(out, records);
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return Vocabulary{j.at("symptoms").get<std::vector<std::string>>(),
                      j.at("diseases").get<std::vector<std::string>>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << nlohmann::json{{"symptoms", vocab.symptoms}, {"diseases", vocab.diseases}}.dump(2) << '\n';
}

}  // namespace dualmc
