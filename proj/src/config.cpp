#include "dualmc/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dualmc/error.hpp"

namespace dualmc {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(std::uint64_t v, int) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw InvalidConfig("bad value '" + text + "' for " + key);
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw InvalidConfig("");
    return v;
  } catch (const std::exception&) {
    throw InvalidConfig("bad value '" + text + "' for " + key);
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InvalidConfig("bad value '" + text + "' for " + key);
}

std::vector<std::size_t> parse_sizes(const std::string& key, std::string text) {
  std::vector<std::size_t> out;
  if (!text.empty() && text.front() == '[' && text.back() == ']') text = text.substr(1, text.size() - 2);
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw InvalidConfig("bad layer list '" + text + "' for " + key);
    out.push_back(parse_number<std::size_t>(key, item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw InvalidConfig("empty layer list for " + key);
  return out;
}

// One row per key: its printed value and its setter.
struct Field {
  std::string key;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> put;
};

#define DUALMC_SIZE(KEY, MEMBER) \
  Field{KEY, [](const Config& c) { return fmt(c.MEMBER); }, \
        [](Config& c, const std::string& v) { c.MEMBER = parse_number<std::size_t>(KEY, v); }}
#define DUALMC_U64(KEY, MEMBER) \
  Field{KEY, [](const Config& c) { return fmt(c.MEMBER, 0); }, \
        [](Config& c, const std::string& v) { c.MEMBER = parse_number<std::uint64_t>(KEY, v); }}
#define DUALMC_REAL(KEY, MEMBER) \
  Field{KEY, [](const Config& c) { return fmt(c.MEMBER); }, \
        [](Config& c, const std::string& v) { c.MEMBER = parse_double(KEY, v); }}
#define DUALMC_BOOL(KEY, MEMBER) \
  Field{KEY, [](const Config& c) { return fmt(c.MEMBER); }, \
        [](Config& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); }}
#define DUALMC_SIZES(KEY, MEMBER) \
  Field{KEY, [](const Config& c) { return fmt(c.MEMBER); }, \
        [](Config& c, const std::string& v) { c.MEMBER = parse_sizes(KEY, v); }}
#define DUALMC_TEXT(KEY, MEMBER) \
  Field{KEY, [](const Config& c) { return c.MEMBER; }, [](Config& c, const std::string& v) { c.MEMBER = v; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      DUALMC_SIZE("calibration.epochs", calibration.epochs),
      DUALMC_SIZE("calibration.batch_size", calibration.batch_size),
      DUALMC_REAL("calibration.learning_rate", calibration.learning_rate),
      DUALMC_SIZE("calibration.rank", adapter_rank),
      DUALMC_SIZE("calibration.group_length", calibration.group_size),
      DUALMC_REAL("calibration.epsilon", calibration.epsilon),
      DUALMC_REAL("calibration.tau", calibration.tau),
      Field{"calibration.optimizer",
            [](const Config& c) { return std::string(c.calibration.optimizer == Optimizer::Adam ? "adam" : "sgd"); },
            [](Config& c, const std::string& v) {
              if (v == "adam") c.calibration.optimizer = Optimizer::Adam;
              else if (v == "sgd") c.calibration.optimizer = Optimizer::Sgd;
              else throw InvalidConfig("calibration.optimizer must be adam or sgd");
            }},
      DUALMC_SIZE("policy.masking_window", consultation.mask_window),
      DUALMC_SIZE("policy.sampling_times", consultation.samples),
      DUALMC_SIZES("policy.actor_hidden", network.actor_hidden),
      DUALMC_SIZES("policy.critic_hidden", network.critic_hidden),
      DUALMC_REAL("policy.learning_rate", training.ppo.learning_rate),
      DUALMC_SIZE("policy.batch_size", training.ppo.batch_size),
      DUALMC_SIZE("policy.steps_per_update", training.steps_per_update),
      DUALMC_SIZE("policy.epochs", training.ppo.epochs),
      DUALMC_SIZE("policy.total_steps", training.total_steps),
      DUALMC_REAL("policy.clip_range", training.ppo.clip_range),
      DUALMC_REAL("policy.gamma", training.ppo.gamma),
      DUALMC_REAL("policy.gae_lambda", training.ppo.gae_lambda),
      DUALMC_REAL("policy.entropy_coef", training.ppo.entropy_coef),
      DUALMC_REAL("policy.value_coef", training.ppo.value_coef),
      DUALMC_REAL("policy.max_grad_norm", training.ppo.max_grad_norm),
      DUALMC_BOOL("policy.normalize_advantage", training.ppo.normalize_advantage),
      DUALMC_REAL("reward.hitting", consultation.rewards.hit),
      DUALMC_REAL("reward.ranking", consultation.rewards.rank),
      DUALMC_REAL("reward.diagnosis", consultation.rewards.diagnosis),
      DUALMC_REAL("reward.frequency_penalty", consultation.rewards.freq_penalty),
      DUALMC_SIZE("consultation.max_turns", consultation.max_turns),
      DUALMC_SIZE("consultation.typicality_k", consultation.typicality_k),
      DUALMC_REAL("consultation.tau", consultation.tau),
      DUALMC_BOOL("consultation.terminate_on_sample", consultation.terminate_on_sample),
      DUALMC_REAL("inquiry.margin", consultation.inquiry.margin),
      DUALMC_REAL("inquiry.relevance_floor", consultation.inquiry.relevance_floor),
      DUALMC_SIZE("inquiry.max_retries", consultation.inquiry.max_retries),
      DUALMC_TEXT("backend.kind", backend.kind),
      DUALMC_TEXT("backend.endpoint", backend.endpoint),
      DUALMC_SIZE("backend.timeout_ms", backend.timeout_ms),
      DUALMC_SIZE("backend.max_in_flight", backend.max_in_flight),
      DUALMC_REAL("backend.smoothing", backend.smoothing),
      DUALMC_U64("run.seed", run.seed),
      DUALMC_SIZE("run.threads", run.threads),
      DUALMC_SIZE("run.test_records", run.test_records),
      DUALMC_SIZE("world.diseases", world.diseases),
      DUALMC_SIZE("world.symptoms", world.symptoms),
      DUALMC_U64("world.seed", world.seed),
      DUALMC_REAL("world.sharpness", world.sharpness),
      DUALMC_SIZE("world.records", world.records),
  };
  return table;
}

#undef DUALMC_SIZE
#undef DUALMC_U64
#undef DUALMC_REAL
#undef DUALMC_BOOL
#undef DUALMC_SIZES
#undef DUALMC_TEXT

}  // namespace

Config Config::preset(const std::string& dataset) {
  Config c;
  if (dataset == "dxy" || dataset == "synthetic") return c;
  if (dataset == "gmd" || dataset == "cmd") {
    c.calibration.epochs = 1;
    c.consultation.mask_window = dataset == "gmd" ? 4 : 5;
    c.training.ppo.batch_size = 128;
    c.training.steps_per_update = 2048;
    c.training.total_steps = 102400;
    if (dataset == "cmd") {
      c.consultation.samples = 7;
      c.network.actor_hidden = {512, 256, 256};
      c.network.critic_hidden = {128};
    }
    return c;
  }
  throw UsageError("unknown dataset preset '" + dataset + "' (dxy, gmd, cmd, synthetic)");
}

std::vector<std::pair<std::string, std::string>> Config::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

void Config::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields())
    if (f.key == key) {
      f.put(*this, value);
      return;
    }
  throw InvalidConfig("unknown config key '" + key + "'");
}

std::string Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : entries())
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Config::to_ini() const {
  std::string out, section;
  for (const auto& [k, v] : entries()) {
    const auto dot = k.find('.');
    if (k.substr(0, dot) != section) {
      section = k.substr(0, dot);
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += k.substr(dot + 1) + " = " + v + "\n";
  }
  return out;
}

Config load_config(const std::filesystem::path& path, Config base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(path.string(), e.line(), e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw InvalidConfig("config key '" + section + "' is outside any section");
    for (const auto& [key, value] : body) base.set(section + "." + key, value.get_value<std::string>());
  }
  return base;
}

void save_config(const std::filesystem::path& path, const Config& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << config.to_ini();
}

void apply_override(Config& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("override must be section.key=value, got '" + assignment + "'");
  config.set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

}  // namespace dualmc
