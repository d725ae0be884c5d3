#include "dualmc/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dualmc/error.hpp"

namespace fs = std::filesystem;

namespace dualmc {

DatasetFormat parse_format(const std::string& name) {
  if (name == "canonical") return DatasetFormat::Canonical;
  if (name == "goal") return DatasetFormat::Goal;
  if (name == "sxs") return DatasetFormat::Sxs;
  throw UsageError("unknown dataset format '" + name + "' (canonical, goal, sxs)");
}

const char* to_string(DatasetFormat f) noexcept {
  switch (f) {
    case DatasetFormat::Canonical: return "canonical";
    case DatasetFormat::Goal: return "goal";
    case DatasetFormat::Sxs: return "sxs";
  }
  return "?";
}

DatasetStats DatasetBundle::stats() const {
  DatasetStats s;
  s.train = train.size();
  s.dev = dev.size();
  s.test = test.size();
  std::set<std::size_t> diseases, symptoms;
  std::size_t entries = 0, explicit_entries = 0;
  for (const auto* split : {&train, &dev, &test})
    for (const auto& r : *split) {
      diseases.insert(r.label.index);
      for (const auto& e : r.all_symptoms()) symptoms.insert(e.symptom.index);
      entries += r.total_symptoms();
      explicit_entries += r.self_reported();
    }
  s.diseases = vocab.diseases.empty() ? diseases.size() : vocab.disease_count();
  s.symptoms = vocab.symptoms.empty() ? symptoms.size() : vocab.symptom_count();
  const std::size_t total = s.train + s.dev + s.test;
  if (total) {
    s.avg_symptoms = static_cast<double>(entries) / static_cast<double>(total);
    s.avg_explicit = static_cast<double>(explicit_entries) / static_cast<double>(total);
  }
  return s;
}

namespace {

// A record whose symptoms and label are still names.
struct NamedRecord {
  std::vector<std::pair<std::string, SymptomStatus>> explicit_symptoms, implicit_symptoms;
  std::string label;
};

struct RawSplits {
  std::vector<NamedRecord> train, dev, test;
  bool has_dev = false;
};

nlohmann::json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offset -> line number
    std::ifstream again(path);
    std::size_t line = 1, pos = 0;
    for (char ch; pos < e.byte && again.get(ch); ++pos)
      if (ch == '\n') ++line;
    throw ParseError(path.string(), line, e.what());
  }
}

template <typename F>
void for_each_json_line(const fs::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string(), line, e.what());
    }
    try {
      f(j);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line, e.what());
    } catch (const InvalidRecord& e) {
      throw ParseError(path.string(), line, e.what());
    }
  }
}

// Slot values in the public corpora: booleans, 0/1 numbers or strings; "2" and
// other values mean "not sure" and are skipped.
std::optional<SymptomStatus> slot_status(const nlohmann::json& v) {
  if (v.is_boolean()) return v.get<bool>() ? SymptomStatus::Present : SymptomStatus::Absent;
  std::string s;
  if (v.is_number_integer()) s = std::to_string(v.get<long long>());
  else if (v.is_string()) s = v.get<std::string>();
  else return std::nullopt;
  if (s == "1" || s == "True" || s == "true") return SymptomStatus::Present;
  if (s == "0" || s == "False" || s == "false") return SymptomStatus::Absent;
  return std::nullopt;
}

std::vector<std::pair<std::string, SymptomStatus>> read_slots(const nlohmann::json& slots, FilterReport& report) {
  std::vector<std::pair<std::string, SymptomStatus>> out;
  if (slots.is_null()) return out;
  if (!slots.is_object()) throw InvalidRecord("symptom slots must be an object of name -> status");
  for (const auto& [name, value] : slots.items()) {
    if (auto st = slot_status(value)) out.emplace_back(name, *st);
    else ++report.dropped_unknown_status;
  }
  return out;
}

NamedRecord goal_record(const nlohmann::json& j, FilterReport& report) {
  NamedRecord r;
  const auto& goal = j.contains("goal") ? j.at("goal") : j;
  r.explicit_symptoms = read_slots(goal.value("explicit_inform_slots", nlohmann::json()), report);
  r.implicit_symptoms = read_slots(goal.value("implicit_inform_slots", nlohmann::json()), report);
  r.label = j.at("disease_tag").get<std::string>();
  return r;
}

NamedRecord sxs_record(const nlohmann::json& j, FilterReport& report) {
  NamedRecord r;
  r.explicit_symptoms = read_slots(j.value("exp_sxs", nlohmann::json()), report);
  r.implicit_symptoms = read_slots(j.value("imp_sxs", nlohmann::json()), report);
  const auto& label = j.at("label");
  r.label = label.is_string() ? label.get<std::string>() : std::to_string(label.get<long long>());
  return r;
}

std::vector<NamedRecord> read_goal_array(const nlohmann::json& arr, const fs::path& source, FilterReport& report) {
  if (!arr.is_array()) throw ParseError(source.string(), 1, "expected an array of records");
  std::vector<NamedRecord> out;
  for (const auto& j : arr) {
    try {
      out.push_back(goal_record(j, report));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source.string(), 1, std::string("record ") + std::to_string(out.size()) + ": " + e.what());
    } catch (const InvalidRecord& e) {
      throw ParseError(source.string(), 1, std::string("record ") + std::to_string(out.size()) + ": " + e.what());
    }
  }
  return out;
}

RawSplits read_goal(const fs::path& path, FilterReport& report) {
  RawSplits raw;
  if (fs::is_directory(path)) {
    for (auto [name, split] : {std::pair{"train", &raw.train}, {"dev", &raw.dev}, {"test", &raw.test}}) {
      const auto file = path / (std::string(name) + ".json");
      if (!fs::exists(file)) continue;
      *split = read_goal_array(parse_json_file(file), file, report);
      if (split == &raw.dev) raw.has_dev = true;
    }
  } else {
    const auto j = parse_json_file(path);
    if (!j.is_object()) throw ParseError(path.string(), 1, "expected {\"train\": [...], \"test\": [...]}");
    for (auto [name, split] : {std::pair{"train", &raw.train}, {"dev", &raw.dev}, {"test", &raw.test}}) {
      if (!j.contains(name)) continue;
      *split = read_goal_array(j.at(name), path, report);
      if (split == &raw.dev) raw.has_dev = true;
    }
  }
  if (raw.train.empty() && raw.test.empty()) throw IoError("no train/test records found under " + path.string());
  return raw;
}

RawSplits read_sxs(const fs::path& dir, FilterReport& report) {
  RawSplits raw;
  for (auto [name, split] : {std::pair{"train", &raw.train}, {"dev", &raw.dev}, {"test", &raw.test}}) {
    const auto file = dir / (std::string(name) + ".jsonl");
    if (!fs::exists(file)) continue;
    for_each_json_line(file, [&, split = split](const nlohmann::json& j) { split->push_back(sxs_record(j, report)); });
    if (split == &raw.dev) raw.has_dev = true;
  }
  if (raw.train.empty() && raw.test.empty()) throw IoError("no train/test records found under " + dir.string());
  return raw;
}

Vocabulary vocabulary_from(const RawSplits& raw) {
  std::set<std::string> symptoms, diseases;
  for (const auto* split : {&raw.train, &raw.dev, &raw.test})
    for (const auto& r : *split) {
      diseases.insert(r.label);
      for (const auto& e : r.explicit_symptoms) symptoms.insert(e.first);
      for (const auto& e : r.implicit_symptoms) symptoms.insert(e.first);
    }
  return {{symptoms.begin(), symptoms.end()}, {diseases.begin(), diseases.end()}};
}

std::map<std::string, std::size_t> index_of(const std::vector<std::string>& names) {
  std::map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < names.size(); ++i) m.emplace(names[i], i);
  return m;
}

std::vector<PatientRecord> resolve(const std::vector<NamedRecord>& named, const std::map<std::string, std::size_t>& sym,
                                   const std::map<std::string, std::size_t>& dis, FilterReport& report) {
  auto lookup = [](const auto& table, const std::string& name, const char* kind) {
    auto it = table.find(name);
    if (it == table.end()) throw UnknownSymbol(std::string("unknown ") + kind + " '" + name + "'");
    return it->second;
  };
  std::vector<PatientRecord> out;
  for (const auto& nr : named) {
    ++report.read;
    if (nr.explicit_symptoms.empty()) {
      ++report.dropped_no_explicit;
      continue;
    }
    PatientRecord r;
    r.label = DiseaseId{lookup(dis, nr.label, "disease")};
    std::set<std::size_t> seen;
    auto add = [&](const auto& entries, std::vector<SymptomEntry>& dst) {
      for (const auto& [name, st] : entries) {
        const std::size_t id = lookup(sym, name, "symptom");
        // A symptom listed in both parts keeps its explicit status.
        if (seen.insert(id).second) dst.push_back({SymptomId{id}, st});
      }
    };
    add(nr.explicit_symptoms, r.explicit_symptoms);
    add(nr.implicit_symptoms, r.implicit_symptoms);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PatientRecord> keep_with_explicit(std::vector<PatientRecord> in, FilterReport& report) {
  std::vector<PatientRecord> out;
  for (auto& r : in) {
    ++report.read;
    if (r.explicit_symptoms.empty()) ++report.dropped_no_explicit;
    else out.push_back(std::move(r));
  }
  return out;
}

DatasetBundle read_canonical(const fs::path& dir) {
  DatasetBundle b;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  if (fs::exists(dir / "vocab.json")) b.vocab = read_vocabulary(dir / "vocab.json");
  auto load = [&](const char* name, std::vector<PatientRecord>& dst) {
    const auto file = dir / (std::string(name) + ".jsonl");
    if (!fs::exists(file)) return false;
    dst = keep_with_explicit(read_records(file), b.filter);
    return true;
  };
  load("train", b.train);
  const bool has_dev = load("dev", b.dev);
  load("test", b.test);
  if (b.train.empty() && b.test.empty()) throw IoError("no train/test records found under " + dir.string());
  b.dev_generated = !has_dev;

  std::size_t m = b.vocab.symptom_count(), n = b.vocab.disease_count();
  if (b.vocab.symptoms.empty() || b.vocab.diseases.empty()) {
    // Without a vocabulary, ids are taken at face value.
    for (const auto* split : {&b.train, &b.dev, &b.test})
      for (const auto& r : *split) {
        n = std::max(n, r.label.index + 1);
        for (const auto& e : r.all_symptoms()) m = std::max(m, e.symptom.index + 1);
      }
    if (b.vocab.symptoms.empty())
      for (std::size_t s = 0; s < m; ++s) b.vocab.symptoms.push_back("s" + std::to_string(s));
    if (b.vocab.diseases.empty())
      for (std::size_t d = 0; d < n; ++d) b.vocab.diseases.push_back("d" + std::to_string(d));
  }
  for (const auto* split : {&b.train, &b.dev, &b.test})
    for (const auto& r : *split) {
      try {
        validate_record(r, m, n);
      } catch (const IdOutOfRange& e) {
        throw UnknownSymbol(e.what());
      }
    }
  return b;
}

}  // namespace

std::pair<std::vector<PatientRecord>, std::vector<PatientRecord>> stratified_split(
    std::span<const PatientRecord> pool, std::size_t count, std::uint64_t seed) {
  count = std::min(count, pool.size());
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < pool.size(); ++i) by_label[pool[i].label.index].push_back(i);

  // Largest-remainder quotas; remainder ties go to the smaller label id.
  struct Quota {
    std::size_t label, take;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [label, idx] : by_label) {
    const double exact = static_cast<double>(count) * idx.size() / pool.size();
    const auto take = static_cast<std::size_t>(exact);
    quotas.push_back({label, take, exact - take});
    assigned += take;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
  for (std::size_t k = 0; assigned < count; k = (k + 1) % order.size()) {
    auto& q = quotas[order[k]];
    if (q.take < by_label[q.label].size()) {
      ++q.take;
      ++assigned;
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<bool> taken(pool.size(), false);
  for (const auto& q : quotas) {
    auto idx = by_label[q.label];
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < q.take; ++k) taken[idx[k]] = true;
  }
  std::pair<std::vector<PatientRecord>, std::vector<PatientRecord>> out;
  for (std::size_t i = 0; i < pool.size(); ++i) (taken[i] ? out.second : out.first).push_back(pool[i]);
  return out;
}

DatasetBundle ingest(const fs::path& path, DatasetFormat format, const IngestOptions& options) {
  DatasetBundle b;
  if (format == DatasetFormat::Canonical) {
    b = read_canonical(path);
    if (options.vocabulary && !(b.vocab == *options.vocabulary))
      throw UnknownSymbol("corpus vocabulary differs from the supplied vocabulary");
  } else {
    FilterReport report;
    RawSplits raw = format == DatasetFormat::Goal ? read_goal(path, report) : read_sxs(path, report);
    b.vocab = options.vocabulary ? *options.vocabulary : vocabulary_from(raw);
    const auto sym = index_of(b.vocab.symptoms);
    const auto dis = index_of(b.vocab.diseases);
    b.train = resolve(raw.train, sym, dis, report);
    b.dev = resolve(raw.dev, sym, dis, report);
    b.test = resolve(raw.test, sym, dis, report);
    b.filter = report;
    b.dev_generated = !raw.has_dev;
  }
  if (b.dev_generated) {
    auto [rest, dev] = stratified_split(b.train, b.test.size(), options.seed);
    b.train = std::move(rest);
    b.dev = std::move(dev);
  }
  return b;
}

void write_bundle(const fs::path& dir, const DatasetBundle& bundle) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_records(dir / "train.jsonl", bundle.train);
  write_records(dir / "dev.jsonl", bundle.dev);
  write_records(dir / "test.jsonl", bundle.test);
  write_vocabulary(dir / "vocab.json", bundle.vocab);
}

std::vector<PatientRecord> augment(std::span<const PatientRecord> records, const KnowledgeBase& kb,
                                   std::size_t min_len, std::uint64_t seed, double low_frequency) {
  std::mt19937_64 rng(seed);
  std::vector<PatientRecord> out(records.begin(), records.end());
  std::vector<std::size_t> unused;
  for (auto& r : out) {
    if (r.total_symptoms() >= min_len) continue;
    kb.check_disease(r.label);
    std::vector<bool> present(kb.symptom_count(), false);
    for (const auto& e : r.all_symptoms()) present.at(e.symptom.index) = true;
    unused.clear();
    for (std::size_t s = 0; s < present.size(); ++s)
      if (!present[s]) unused.push_back(s);
    std::shuffle(unused.begin(), unused.end(), rng);
    for (auto s : unused) {
      if (r.total_symptoms() >= min_len) break;
      const double f = kb.freq(r.label, SymptomId{s});
      if (std::generate_canonical<double, 53>(rng) < f)
        r.implicit_symptoms.push_back({SymptomId{s}, SymptomStatus::Present});
      else if (f < low_frequency)
        r.implicit_symptoms.push_back({SymptomId{s}, SymptomStatus::Absent});
    }
  }
  return out;
}

}  // namespace dualmc
