#include "dualmc/cli.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dualmc/calibration.hpp"
#include "dualmc/dataset.hpp"
#include "dualmc/error.hpp"
#include "dualmc/pipeline.hpp"
#include "dualmc/synthetic.hpp"

namespace fs = std::filesystem;

namespace dualmc {
namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string dataset = "synthetic";
  std::optional<std::string> data;
};

struct Paths {
  std::optional<std::string> adapter, policy;
};

Config resolve_config(const Common& c) {
  Config cfg = Config::preset(c.dataset);
  if (!c.config_file.empty()) cfg = load_config(c.config_file, cfg);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed) cfg.run.seed = *c.seed;
  if (c.threads) cfg.run.threads = *c.threads;
  return cfg;
}

void log_header(std::ostream& err, const std::string& command, const Config& cfg) {
  err << "# dualmc " << kVersion << " (eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
      << EIGEN_MINOR_VERSION << ", boost " << BOOST_VERSION / 100000 << '.' << BOOST_VERSION / 100 % 1000 << ") "
      << command << " seed=" << cfg.run.seed << " world_seed=" << cfg.world.seed
      << " config_hash=" << cfg.hash() << '\n';
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nlohmann::json metrics_json(const SuiteMetrics& m, const KnowledgeBase& kb) {
  auto per = nlohmann::json::array();
  for (const auto& row : m.per_disease)
    per.push_back({{"disease", kb.disease_name(row.disease)}, {"cases", row.cases}, {"correct", row.correct},
                   {"acc", row.accuracy()}});
  return {{"acc", m.acc}, {"acc_init", m.acc_init}, {"avg_n", m.avg_n}, {"cases", m.cases}, {"per_disease", per}};
}

void load_components(System& sys, const Config& cfg, const DatasetBundle& data, const Paths& paths,
                     std::ostream& err) {
  if (paths.adapter) sys.set_adapter(load_adapter(*paths.adapter));
  if (paths.policy) {
    sys.set_policy(load_policy(*paths.policy));
  } else {
    err << "# no --policy given; training one (" << cfg.training.total_steps << " steps)\n";
    sys.train(cfg, data);
  }
}

void write_traces(const fs::path& dir, const SuiteMetrics& m) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < m.results.size(); ++i) {
    std::ofstream out(dir / ("case_" + std::to_string(i) + ".jsonl"));
    if (!out) throw IoError("cannot write traces under " + dir.string());
    out << m.results[i].trace_jsonl();
  }
}

// Reads Present/Absent answers from a terminal.
class ConsolePatient final : public Patient {
 public:
  ConsolePatient(const KnowledgeBase& kb, std::istream& in, std::ostream& out) : kb_(kb), in_(in), out_(out) {}

  SymptomStatus answer(const EpisodeState&, SymptomId s) const override {
    for (;;) {
      out_ << "Do you have " << kb_.symptom_name(s) << "? [y/n] " << std::flush;
      std::string line;
      if (!std::getline(in_, line)) throw IoError("input closed during interactive consultation");
      if (line == "y" || line == "yes") return SymptomStatus::Present;
      if (line == "n" || line == "no") return SymptomStatus::Absent;
    }
  }

 private:
  const KnowledgeBase& kb_;
  std::istream& in_;
  std::ostream& out_;
};

SymptomId symptom_by_name(const KnowledgeBase& kb, const std::string& name) {
  for (std::size_t s = 0; s < kb.symptom_count(); ++s)
    if (kb.symptom_name(SymptomId{s}) == name) return SymptomId{s};
  throw UnknownSymbol("unknown symptom '" + name + "'");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Dual-agent medical consultation toolkit", "dualmc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Common common;
  Paths paths;

  auto add_common = [&](CLI::App* sub, bool with_data) {
    sub->add_option("--config", common.config_file, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "override, section.key=value (repeatable)");
    sub->add_option("--seed", common.seed, "run seed (run.seed)");
    sub->add_option("--threads", common.threads, "worker threads for evaluation");
    if (with_data) {
      sub->add_option("--dataset", common.dataset, "preset: dxy, gmd, cmd, synthetic")
          ->check(CLI::IsMember({"dxy", "gmd", "cmd", "synthetic"}));
      sub->add_option("--data", common.data, "ingested corpus directory");
    }
  };

  // gen-world
  auto* gen = app.add_subcommand("gen-world", "generate a synthetic world and its canonical dataset");
  add_common(gen, false);
  std::string out_dir;
  std::optional<std::size_t> world_n, world_m, world_records;
  std::optional<double> sharpness;
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--n", world_n, "disease count");
  gen->add_option("--m", world_m, "symptom count");
  gen->add_option("--records", world_records, "training records");
  gen->add_option("--sharpness", sharpness, "signature symptom probability");

  // ingest
  auto* ing = app.add_subcommand("ingest", "normalize a corpus into the canonical layout");
  add_common(ing, false);
  std::string input, format = "goal", vocab_file;
  std::optional<std::size_t> augment_min;
  ing->add_option("--input", input, "corpus file or directory")->required();
  ing->add_option("--format", format, "canonical, goal or sxs");
  ing->add_option("--out", out_dir, "output directory")->required();
  ing->add_option("--vocab", vocab_file, "vocabulary to resolve names against");
  ing->add_option("--augment-min", augment_min, "pad training records to this many symptoms");

  // build-kb
  auto* bkb = app.add_subcommand("build-kb", "build the disease-symptom knowledge base");
  add_common(bkb, true);
  std::string out_file;
  bkb->add_option("--out", out_file, "knowledge base JSON")->required();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "train the diagnostic adapter");
  add_common(cal, true);
  cal->add_option("--out", out_file, "adapter checkpoint")->required();

  // train-policy
  auto* trn = app.add_subcommand("train-policy", "train the inquiry policy with PPO");
  add_common(trn, true);
  trn->add_option("--adapter", paths.adapter, "adapter checkpoint")->check(CLI::ExistingFile);
  trn->add_option("--out", out_file, "policy checkpoint")->required();
  std::string log_file;
  trn->add_option("--log", log_file, "per-update diagnostics as CSV");

  // consult
  auto* con = app.add_subcommand("consult", "run one consultation and print its trace");
  add_common(con, true);
  std::size_t record_index = 0;
  std::string split = "test", trace_file;
  bool interactive = false;
  std::vector<std::string> complaints;
  std::optional<std::size_t> turns;
  con->add_option("--adapter", paths.adapter, "adapter checkpoint")->check(CLI::ExistingFile);
  con->add_option("--policy", paths.policy, "policy checkpoint")->check(CLI::ExistingFile);
  con->add_option("--record", record_index, "record index within the split");
  con->add_option("--split", split, "train, dev or test")->check(CLI::IsMember({"train", "dev", "test"}));
  con->add_option("--L", turns, "maximum inquiry turns");
  con->add_flag("--interactive", interactive, "answer inquiries yourself");
  con->add_option("--explicit", complaints, "self-reported symptom names (interactive)");
  con->add_option("--trace", trace_file, "write the JSON-lines trace here");

  // bench / ablate share most options
  std::string baseline = "system", trace_dir, metrics_file;
  std::vector<std::string> without;
  auto add_eval = [&](CLI::App* sub) {
    add_common(sub, true);
    sub->add_option("--L", turns, "maximum inquiry turns");
    sub->add_option("--adapter", paths.adapter, "adapter checkpoint")->check(CLI::ExistingFile);
    sub->add_option("--policy", paths.policy, "policy checkpoint")->check(CLI::ExistingFile);
    sub->add_option("--trace-dir", trace_dir, "write one trace file per case");
    sub->add_option("--metrics", metrics_file, "write metrics JSON");
  };
  auto* ben = app.add_subcommand("bench", "evaluate on the test split");
  add_eval(ben);
  ben->add_option("--baseline", baseline, "system or random")->check(CLI::IsMember({"system", "random"}));
  auto* abl = app.add_subcommand("ablate", "evaluate with components removed");
  add_eval(abl);
  abl->add_option("--without", without, "adapter, policy, masking, retry, decision or all")
      ->required()
      ->check(CLI::IsMember({"adapter", "policy", "masking", "retry", "decision", "all"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    Config cfg = resolve_config(common);
    const std::string command = app.get_subcommands().front()->get_name();
    if (turns) cfg.consultation.max_turns = *turns;
    if (command == "gen-world") {
      if (world_n) cfg.world.diseases = *world_n;
      if (world_m) cfg.world.symptoms = *world_m;
      if (world_records) cfg.world.records = *world_records;
      if (sharpness) cfg.world.sharpness = *sharpness;
      if (common.seed) cfg.world.seed = *common.seed;
    }
    log_header(err, command, cfg);

    if (command == "gen-world") {
      const auto bundle = load_dataset(cfg, "synthetic", std::nullopt);
      write_bundle(out_dir, bundle);
      save_world(fs::path(out_dir) / "world.json", gen_world(cfg.world));
      save_config(fs::path(out_dir) / "config.ini", cfg);
      const auto st = bundle.stats();
      out << "world n=" << st.diseases << " m=" << st.symptoms << " train=" << st.train << " dev=" << st.dev
          << " test=" << st.test << " avg_symptoms=" << fixed(st.avg_symptoms, 2) << '\n';
      return 0;
    }
    if (command == "ingest") {
      IngestOptions opts;
      opts.seed = cfg.run.seed;
      if (!vocab_file.empty()) opts.vocabulary = read_vocabulary(vocab_file);
      auto bundle = ingest(input, parse_format(format), opts);
      if (augment_min) {
        const auto kb = KnowledgeBase::build(bundle.train, bundle.vocab.symptom_count(), bundle.vocab.disease_count());
        bundle.train = augment(bundle.train, kb, *augment_min, cfg.run.seed);
      }
      write_bundle(out_dir, bundle);
      const auto st = bundle.stats();
      out << "records read=" << bundle.filter.read << " dropped_no_explicit=" << bundle.filter.dropped_no_explicit
          << " skipped_unsure_slots=" << bundle.filter.dropped_unknown_status << '\n'
          << "splits train/dev/test=" << st.train << '/' << st.dev << '/' << st.test
          << (bundle.dev_generated ? " (dev carved from train)" : "") << '\n'
          << "diseases=" << st.diseases << " symptoms=" << st.symptoms
          << " avg_symptoms=" << fixed(st.avg_symptoms, 2) << " avg_explicit=" << fixed(st.avg_explicit, 2) << '\n';
      if (augment_min) out << "calibration items=" << build_calibration_set(bundle.train).size() << '\n';
      return 0;
    }

    const auto data = load_dataset(cfg, common.dataset, common.data);
    System sys(cfg, data);

    if (command == "build-kb") {
      save_kb(out_file, sys.kb());
      out << "knowledge base n=" << sys.kb().disease_count() << " m=" << sys.kb().symptom_count() << '\n';
      return 0;
    }
    if (command == "calibrate") {
      const auto dev = build_calibration_set(data.dev.empty() ? data.test : data.dev);
      const auto before = evaluate_calibration(dev, sys.kb(), sys.reference(), sys.reference().adapter(), cfg.calibration);
      const auto result = sys.calibrate(cfg, data);
      const auto after = evaluate_calibration(dev, sys.kb(), sys.reference(), sys.reference().adapter(), cfg.calibration);
      for (std::size_t e = 0; e < result.loss_trace.size(); ++e)
        out << "epoch " << e + 1 << " loss=" << fixed(result.loss_trace[e], 6) << '\n';
      out << "dev kl " << fixed(before.mean_kl, 6) << " -> " << fixed(after.mean_kl, 6) << ", group top-1 "
          << fixed(before.group_top1) << " -> " << fixed(after.group_top1) << '\n';
      save_adapter(out_file, result.adapter);
      return 0;
    }
    if (command == "train-policy") {
      if (paths.adapter) sys.set_adapter(load_adapter(*paths.adapter));
      std::ofstream csv;
      if (!log_file.empty()) {
        csv.open(log_file);
        if (!csv) throw IoError("cannot write " + log_file);
        csv << "update,transitions,episodes,mean_reward,policy_loss,value_loss,entropy,clip_fraction\n";
        csv << std::setprecision(10);
      }
      sys.train(cfg, data, [&](std::size_t i, const PpoDiagnostics& d) {
        if (csv.is_open())
          csv << i + 1 << ',' << d.transitions << ',' << d.episodes << ',' << d.mean_reward << ',' << d.policy_loss
              << ',' << d.value_loss << ',' << d.entropy << ',' << d.clip_fraction << '\n';
        out << "update " << i + 1 << " episodes=" << d.episodes << " return=" << fixed(d.mean_reward)
            << " policy_loss=" << fixed(d.policy_loss, 6) << " value_loss=" << fixed(d.value_loss, 6)
            << " entropy=" << fixed(d.entropy) << " clip=" << fixed(d.clip_fraction) << '\n';
      });
      save_policy(out_file, sys.policy());
      return 0;
    }
    if (command == "consult") {
      load_components(sys, cfg, data, paths, err);
      PatientRecord record;
      std::unique_ptr<ConsolePatient> human;
      if (interactive) {
        human = std::make_unique<ConsolePatient>(sys.kb(), in, out);
        if (complaints.empty()) throw UsageError("--interactive needs at least one --explicit symptom");
        for (const auto& name : complaints)
          record.explicit_symptoms.push_back({symptom_by_name(sys.kb(), name), SymptomStatus::Present});
      } else {
        const auto& pool = split == "train" ? data.train : split == "dev" ? data.dev : data.test;
        if (record_index >= pool.size()) throw UsageError("--record out of range for split " + split);
        record = pool[record_index];
      }
      std::mt19937_64 rng(mix_seed(cfg.run.seed, record_index));
      const auto result = run_consultation(record, sys.components(human.get()), cfg.consultation, {}, rng);
      if (!trace_file.empty()) {
        std::ofstream t(trace_file);
        if (!t) throw IoError("cannot write " + trace_file);
        t << result.trace_jsonl();
      }
      if (!interactive) out << result.trace_jsonl();
      out << "prediction=" << sys.kb().disease_name(result.prediction) << " turns=" << result.turns_used;
      if (!interactive) out << " label=" << sys.kb().disease_name(result.label) << " correct=" << result.correct;
      out << '\n';
      return 0;
    }

    // bench / ablate
    if (baseline == "system" || command == "ablate") load_components(sys, cfg, data, paths, err);
    else if (paths.adapter) sys.set_adapter(load_adapter(*paths.adapter));
    SuiteOptions opts;
    opts.seed = cfg.run.seed;
    opts.threads = cfg.run.threads;
    opts.keep_results = !trace_dir.empty();
    std::vector<std::pair<std::string, AblationConfig>> variants;
    if (command == "bench") {
      variants.emplace_back(baseline == "random" ? "random" : "full", AblationConfig{});
      if (baseline == "random") opts.mode = InquiryMode::Random;
    } else {
      variants.emplace_back("full", AblationConfig{});
      std::vector<std::string> names = without;
      if (std::find(names.begin(), names.end(), "all") != names.end())
        names = {"adapter", "policy", "masking", "retry", "decision"};
      for (const auto& n : names) variants.emplace_back("w/o " + n, AblationConfig::without(n));
    }
    nlohmann::json all = nlohmann::json::object();
    out << "variant\tacc\tacc_init\tavg_n\n";
    for (const auto& [name, ablation] : variants) {
      const auto m = run_suite(data.test, sys.components(), cfg.consultation, ablation, opts);
      out << name << '\t' << fixed(m.acc) << '\t' << fixed(m.acc_init) << '\t' << fixed(m.avg_n, 2) << '\n';
      all[name] = metrics_json(m, sys.kb());
      if (!trace_dir.empty()) {
        std::string sub = name;
        std::replace(sub.begin(), sub.end(), '/', '_');
        std::replace(sub.begin(), sub.end(), ' ', '_');
        write_traces(fs::path(trace_dir) / sub, m);
      }
    }
    if (command == "bench") {
      out << "per-disease accuracy\n";
      for (const auto& row : all.begin()->at("per_disease"))
        out << "  " << row["disease"].get<std::string>() << '\t' << row["correct"] << '/' << row["cases"] << '\n';
    }
    if (!metrics_file.empty()) {
      std::ofstream mf(metrics_file);
      if (!mf) throw IoError("cannot write " + metrics_file);
      all["config_hash"] = cfg.hash();
      all["seed"] = cfg.run.seed;
      mf << all.dump(2) << '\n';
    }
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace dualmc
