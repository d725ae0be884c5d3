#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dualmc/core.hpp"
#include "dualmc/knowledge_base.hpp"
#include "dualmc/record_io.hpp"

namespace dualmc {

// Supported on-disk layouts.
//   canonical: directory with train.jsonl, test.jsonl, optional dev.jsonl and vocab.json
//   goal:      JSON object {"train": [...], "test": [...], "dev"?: [...]} of
//              {"disease_tag", "goal": {"explicit_inform_slots", "implicit_inform_slots"}}
//              entries with name -> true/false slots (also accepted as a directory
//              holding train.json / test.json / dev.json)
//   sxs:       directory with train.jsonl / test.jsonl / dev.jsonl? of
//              {"exp_sxs": {name: "1"|"0"}, "imp_sxs": {...}, "label": name}
enum class DatasetFormat { Canonical, Goal, Sxs };

DatasetFormat parse_format(const std::string& name);
const char* to_string(DatasetFormat f) noexcept;

struct FilterReport {
  std::size_t read = 0;
  std::size_t dropped_no_explicit = 0;
  std::size_t dropped_unknown_status = 0;  // individual slot entries skipped as "not sure"
};

struct DatasetStats {
  std::size_t train = 0, dev = 0, test = 0;
  std::size_t diseases = 0, symptoms = 0;
  double avg_symptoms = 0.0;  // explicit + implicit entries per record, over all splits
  double avg_explicit = 0.0;
};

struct DatasetBundle {
  std::vector<PatientRecord> train, dev, test;
  Vocabulary vocab;
  FilterReport filter;
  bool dev_generated = false;

  // Recomputed from the records on every call.
  DatasetStats stats() const;
};

struct IngestOptions {
  std::uint64_t seed = 0;  // for the generated dev split
  // When set, names must resolve against this vocabulary (UnknownSymbol
  // otherwise); when absent, the vocabulary is built from sorted names.
  std::optional<Vocabulary> vocabulary;
};

// Reads a corpus, drops records without explicit symptoms, and carves a
// label-stratified dev split of |test| records out of train when the source
// has none. Throws ParseError, UnknownSymbol, IoError.
DatasetBundle ingest(const std::filesystem::path& path, DatasetFormat format, const IngestOptions& options = {});

// Writes the canonical layout (train/dev/test.jsonl + vocab.json).
void write_bundle(const std::filesystem::path& dir, const DatasetBundle& bundle);

// Takes `count` records out of `pool` with per-label quotas proportional to
// the label distribution (largest remainder). Returns {rest, taken}.
std::pair<std::vector<PatientRecord>, std::vector<PatientRecord>> stratified_split(
    std::span<const PatientRecord> pool, std::size_t count, std::uint64_t seed);

// Pads short records to min_len symptoms. Unused symptoms are visited in a
// seeded random order; each is appended as Present with probability
// freq[label][s], as Absent when freq[label][s] < low_frequency, and skipped
// otherwise, until the record reaches min_len or the vocabulary runs out.
std::vector<PatientRecord> augment(std::span<const PatientRecord> records, const KnowledgeBase& kb,
                                   std::size_t min_len, std::uint64_t seed, double low_frequency = 0.05);

}  // namespace dualmc
