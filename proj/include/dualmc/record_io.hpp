#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualmc/core.hpp"

namespace dualmc {

struct Vocabulary {
  std::vector<std::string> symptoms;
  std::vector<std::string> diseases;

  std::size_t symptom_count() const noexcept { return symptoms.size(); }
  std::size_t disease_count() const noexcept { return diseases.size(); }
  bool operator==(const Vocabulary&) const = default;
};

// Canonical record line:
//   {"explicit": [[sym, 1], [sym, -1]], "implicit": [...], "label": d}
nlohmann::json record_to_json(const PatientRecord& r);
PatientRecord record_from_json(const nlohmann::json& j);

// Line-delimited record files. Blank lines are skipped; malformed lines raise
// ParseError carrying the 1-based line number.
std::vector<PatientRecord> read_records(std::istream& in, const std::string& source = "<stream>");
std::vector<PatientRecord> read_records(const std::filesystem::path& path);
void write_records(std::ostream& out, std::span<const PatientRecord> records);
void write_records(const std::filesystem::path& path, std::span<const PatientRecord> records);

Vocabulary read_vocabulary(const std::filesystem::path& path);
void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace dualmc
