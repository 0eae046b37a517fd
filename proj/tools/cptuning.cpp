// Command-line entry point: binds schema, templating, model, decoding,
// training, and evaluation into reproducible experiment runs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cptuning/data_io.hpp"
#include "cptuning/decoding.hpp"
#include "cptuning/errors.hpp"
#include "cptuning/evaluation.hpp"
#include "cptuning/model.hpp"
#include "cptuning/schema.hpp"
#include "cptuning/training.hpp"

namespace fs = std::filesystem;
using namespace cptuning;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Plain key-value config file: `key = value` per line, '#' comments.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw DataError("config " + path + ":" + std::to_string(line_no) +
                        ": expected `key = value`");
      }
      continue;
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw DataError("config " + path + ":" + std::to_string(line_no) + ": empty key");
    }
    out[key] = value;
  }
  return out;
}

// Flags override config-file values override built-in defaults. The seed may
// additionally come from CPTUNING_SEED when nothing else sets it.
class Settings {
 public:
  explicit Settings(CLI::App* cmd) : cmd_(cmd) {
    cmd->add_option("--config", config_path_, "plain key-value config file");
  }

  void resolve() {
    if (!config_path_.empty()) file_ = read_config_file(config_path_);
    for (auto& apply : appliers_) apply();
    for (const auto& [key, value] : file_) {
      if (!known_.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    }
  }

  template <typename T>
  void bind(const std::string& flag, const std::string& key, T& value,
            const std::string& help) {
    CLI::Option* opt = cmd_->add_option(flag, value, help)->capture_default_str();
    known_.insert(key);
    appliers_.push_back([this, opt, key, &value] {
      if (opt->count() > 0) return;  // explicit flag wins
      auto it = file_.find(key);
      if (it == file_.end()) return;
      std::stringstream ss(it->second);
      T parsed;
      if constexpr (std::is_same_v<T, bool>) {
        std::string word = it->second;
        parsed = (word == "1" || word == "true" || word == "yes");
      } else {
        if (!(ss >> parsed)) throw ConfigError("bad value for config key '" + key + "'");
      }
      value = parsed;
    });
  }

  void bind_seed(std::uint64_t& seed) {
    CLI::Option* opt = cmd_->add_option("--seed", seed, "random seed")->capture_default_str();
    known_.insert("seed");
    appliers_.push_back([this, opt, &seed] {
      if (opt->count() > 0) return;
      if (auto it = file_.find("seed"); it != file_.end()) {
        seed = std::stoull(it->second);
        return;
      }
      if (const char* env = std::getenv("CPTUNING_SEED")) seed = std::stoull(env);
    });
  }

 private:
  CLI::App* cmd_;
  std::string config_path_;
  std::map<std::string, std::string> file_;
  std::set<std::string> known_;
  std::vector<std::function<void()>> appliers_;
};

void write_snapshot(const fs::path& run_dir,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  fs::create_directories(run_dir);
  std::ofstream out(run_dir / "config.snapshot", std::ios::binary);
  if (!out) throw DataError("cannot write config snapshot in " + run_dir.string());
  for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

Dataset load_data(const std::string& path, const std::string& format,
                  const RelationSchema* schema, const std::string& split) {
  if (format == "tacred") return load_tacred_style(path);
  if (format == "nyt") return load_nyt_style(path);
  if (format == "interchange") {
    if (!schema) throw ConfigError("interchange format requires --schema");
    return load_interchange(path, *schema, split);
  }
  throw ConfigError("unknown data format '" + format + "'");
}

struct CommonTrainFlags {
  TrainConfig config;
  std::string convention = "likelihood_consistent";
  std::string support = "layer";
  std::string style = "s1";

  void bind(Settings& settings) {
    settings.bind("--ablation", "ablation", config.ablation,
                  "loss variant: ce | lbls | ctl | lbls+ctl");
    settings.bind("--template", "template", style, "template style: s1 | s2");
    settings.bind("--epochs", "epochs", config.epochs, "training epochs");
    settings.bind("--batch", "batch_size", config.batch_size, "batch size");
    settings.bind("--peak-lr", "peak_lr", config.peak_step_size, "peak step size");
    settings.bind("--alpha", "alpha", config.alpha, "length penalty exponent");
    settings.bind("--lambda", "lambda", config.lambda, "selection borderline");
    settings.bind("--zeta", "zeta", config.zeta, "contrastive margin threshold");
    settings.bind("--mu", "mu", config.mu, "balance factor");
    settings.bind("--beta", "beta", config.lbls.beta, "label smoothing mass");
    settings.bind("--support", "support", support, "smoothing support: layer | siblings");
    settings.bind("--pool", "pool_size", config.pool_size,
                  "contrastive pool size (golds + fakes)");
    settings.bind("--pool-is-total", "pool_is_total", config.pool_is_total,
                  "pool size counts golds (otherwise fakes only)");
    settings.bind("--convention", "convention", convention,
                  "likelihood_consistent | paper_literal");
    settings.bind("-K,--beam", "beam_size", config.beam_size, "beam size K");
    settings.bind_seed(config.seed);
  }

  void resolve() {
    config.convention = parse_convention(convention);
    config.lbls.support = parse_smoothing_support(support);
    config.style = parse_template_style(style);
  }

  std::vector<std::pair<std::string, std::string>> snapshot() const {
    return {
        {"ablation", config.ablation},
        {"template", to_string(config.style)},
        {"epochs", std::to_string(config.epochs)},
        {"batch_size", std::to_string(config.batch_size)},
        {"peak_lr", fmt(config.peak_step_size)},
        {"alpha", fmt(config.alpha)},
        {"lambda", fmt(config.lambda)},
        {"zeta", fmt(config.zeta)},
        {"mu", fmt(config.mu)},
        {"beta", fmt(config.lbls.beta)},
        {"support", to_string(config.lbls.support)},
        {"pool_size", std::to_string(config.pool_size)},
        {"pool_is_total", config.pool_is_total ? "true" : "false"},
        {"convention", to_string(config.convention)},
        {"beam_size", std::to_string(config.beam_size)},
        {"seed", std::to_string(config.seed)},
    };
  }
};

void write_metrics(const fs::path& path, const std::vector<EpochMetrics>& epochs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write metrics file: " + path.string());
  for (const auto& m : epochs) {
    out << "{\"epoch\":" << m.epoch << ",\"mean_loss\":" << m.mean_loss
        << ",\"dev_micro_f1\":" << m.dev_micro_f1 << ",\"mean_gold_f\":" << m.mean_gold_f
        << ",\"mean_fake_f\":" << m.mean_fake_f << "}\n";
  }
}

template <typename Fn>
void parallel_over(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::size_t workers = std::min(jobs, n);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& out_dir, const SynthSpec& spec) {
  auto corpus = generate_synthetic(spec);
  fs::path dir(out_dir);
  fs::create_directories(dir);
  save_interchange(corpus.train, (dir / "train.jsonl").string());
  save_interchange(corpus.dev, (dir / "dev.jsonl").string());
  save_interchange(corpus.test, (dir / "test.jsonl").string());
  {
    std::ofstream out(dir / "relations.txt", std::ios::binary);
    for (const auto& rel : corpus.schema.relations) out << rel.label.raw << "\n";
  }
  write_snapshot(dir, {
                          {"command", "gen-data"},
                          {"relations", std::to_string(spec.relation_count)},
                          {"vocab_size", std::to_string(spec.vocab_size)},
                          {"train_instances", std::to_string(spec.train_instances)},
                          {"dev_instances", std::to_string(spec.dev_instances)},
                          {"test_instances", std::to_string(spec.test_instances)},
                          {"epo_rate", fmt(spec.epo_rate)},
                          {"seed", std::to_string(spec.seed)},
                      });
  std::cout << "wrote " << corpus.train.instances.size() << "/"
            << corpus.dev.instances.size() << "/" << corpus.test.instances.size()
            << " train/dev/test instances to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& train_path, const std::string& dev_path,
              const std::string& schema_path, const std::string& out_dir,
              std::size_t low_resource_n, const CommonTrainFlags& flags) {
  RelationSchema schema = load_schema(schema_path);
  RelationTrie trie = RelationTrie::build(schema);
  Dataset train_set = load_interchange(train_path, schema, "train");
  Dataset dev_set;
  dev_set.schema = schema;
  if (!dev_path.empty()) dev_set = load_interchange(dev_path, schema, "dev");
  if (low_resource_n > 0) {
    train_set = low_resource_sample(train_set, low_resource_n, flags.config.seed);
  }

  auto result = train(train_set, dev_set, schema, trie, flags.config);

  fs::path dir(out_dir);
  fs::create_directories(dir);
  result.params.save((dir / "checkpoint.txt").string());
  write_metrics(dir / "metrics.jsonl", result.epochs);
  auto snapshot = flags.snapshot();
  snapshot.insert(snapshot.begin(), {"command", "train"});
  snapshot.emplace_back("train_data", train_path);
  snapshot.emplace_back("dev_data", dev_path);
  snapshot.emplace_back("schema", schema_path);
  if (low_resource_n > 0) {
    snapshot.emplace_back("low_resource_n", std::to_string(low_resource_n));
  }
  write_snapshot(dir, snapshot);

  if (!result.epochs.empty()) {
    const auto& last = result.epochs.back();
    std::cout << "final epoch " << last.epoch << ": mean loss " << last.mean_loss
              << ", dev micro-F1 " << last.dev_micro_f1 << "\n";
  }
  std::cout << "checkpoint written to " << (dir / "checkpoint.txt").string() << "\n";
  return 0;
}

int cmd_decode(const std::string& model_path, const std::string& data_path,
               const std::string& format, const std::string& schema_path,
               const std::string& out_dir, const std::string& style_name,
               const DecodeConfig& config, std::size_t jobs) {
  ModelParams params = ModelParams::load(model_path);
  RelationSchema schema = load_schema(schema_path);
  RelationTrie trie = RelationTrie::build(schema);
  Dataset data = load_data(data_path, format, &schema, "test");
  TemplateStyle style = parse_template_style(style_name);

  const std::size_t n = data.instances.size();
  std::vector<std::vector<CandidateRelation>> results(n);
  parallel_over(n, jobs, [&](std::size_t i) {
    auto sample = render(data.instances[i], schema, style);
    auto candidates = pgc_decode(params, sample, trie, schema, config);
    auto established = select(candidates, config);
    for (auto& cand : candidates) {
      for (const auto& est : established) {
        if (est.tokens == cand.tokens) cand.established = true;
      }
    }
    results[i] = std::move(candidates);
  });

  fs::path dir(out_dir);
  fs::create_directories(dir);
  std::ofstream out(dir / "candidates.jsonl", std::ios::binary);
  if (!out) throw DataError("cannot write candidates file");
  for (std::size_t i = 0; i < n; ++i) {
    export_candidates(out, data.instances[i].id, results[i]);
  }
  write_snapshot(dir, {
                          {"command", "decode"},
                          {"model", model_path},
                          {"data", data_path},
                          {"format", format},
                          {"schema", schema_path},
                          {"template", style_name},
                          {"beam_size", std::to_string(config.beam_size)},
                          {"alpha", fmt(config.alpha)},
                          {"lambda", fmt(config.lambda)},
                          {"convention", to_string(config.convention)},
                      });
  std::cout << "decoded " << n << " instances to "
            << (dir / "candidates.jsonl").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& format, const std::string& schema_path,
             const std::string& out_dir, const std::string& style_name,
             const std::string& mode, bool exclude_no_relation,
             const std::vector<std::size_t>& h_at, const DecodeConfig& config,
             std::size_t jobs) {
  ModelParams params = ModelParams::load(model_path);
  RelationSchema schema = load_schema(schema_path);
  RelationTrie trie = RelationTrie::build(schema);
  Dataset data = load_data(data_path, format, &schema, "test");
  TemplateStyle style = parse_template_style(style_name);

  const std::size_t n = data.instances.size();
  std::vector<std::vector<CandidateRelation>> decoded(n);
  parallel_over(n, jobs, [&](std::size_t i) {
    auto sample = render(data.instances[i], schema, style);
    decoded[i] = pgc_decode(params, sample, trie, schema, config);
  });
  std::map<std::string, std::vector<CandidateRelation>> by_id;
  for (std::size_t i = 0; i < n; ++i) by_id[data.instances[i].id] = decoded[i];

  PredictionMap golds = gold_map(data);
  PredictionMap preds;
  bool truncated = false;
  if (mode == "threshold") {
    for (std::size_t i = 0; i < n; ++i) {
      std::set<RelationLabel>& p = preds[data.instances[i].id];
      for (const auto& cand : select(decoded[i], config)) p.insert(cand.label);
    }
  } else if (mode == "ranking") {
    preds = ranking_mode(by_id, golds, &truncated);
  } else {
    throw ConfigError("unknown eval mode '" + mode + "'");
  }

  EvalReport report = micro_f1(preds, golds, exclude_no_relation);
  report.mode = mode;
  report.truncated_ranking = truncated;

  if (!h_at.empty()) {
    SimilarityProvider provider = SimilarityProvider::lexical();
    for (std::size_t m : h_at) {
      double total = 0.0;
      std::size_t count = 0;
      for (const auto& inst : data.instances) {
        auto sample = render(inst, schema, style);
        for (const auto& gold : inst.gold_relations) {
          total += h_index(params, sample, gold, schema, m, provider);
          ++count;
        }
      }
      report.h_at[m] = count ? total / static_cast<double>(count) : 0.0;
    }
  }

  fs::path dir(out_dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "report.jsonl", std::ios::binary);
    write_report_json(out, report);
  }
  {
    std::ofstream out(dir / "summary.txt", std::ios::binary);
    write_report_summary(out, report);
  }
  write_snapshot(dir, {
                          {"command", "eval"},
                          {"model", model_path},
                          {"data", data_path},
                          {"format", format},
                          {"schema", schema_path},
                          {"template", style_name},
                          {"mode", mode},
                          {"exclude_no_relation", exclude_no_relation ? "true" : "false"},
                          {"beam_size", std::to_string(config.beam_size)},
                          {"alpha", fmt(config.alpha)},
                          {"lambda", fmt(config.lambda)},
                          {"convention", to_string(config.convention)},
                      });
  write_report_summary(std::cout, report);
  return 0;
}

int cmd_ablate(const std::string& train_path, const std::string& dev_path,
               const std::string& test_path, const std::string& schema_path,
               const std::string& out_dir, const std::vector<std::string>& grid,
               bool exclude_no_relation, const CommonTrainFlags& flags) {
  RelationSchema schema = load_schema(schema_path);
  RelationTrie trie = RelationTrie::build(schema);
  Dataset train_set = load_interchange(train_path, schema, "train");
  Dataset dev_set;
  dev_set.schema = schema;
  if (!dev_path.empty()) dev_set = load_interchange(dev_path, schema, "dev");
  Dataset test_set = load_interchange(test_path, schema, "test");

  auto rows = run_ablation(train_set, dev_set, test_set, schema, trie, flags.config,
                           grid, exclude_no_relation);

  fs::path dir(out_dir);
  fs::create_directories(dir);
  std::ofstream jout(dir / "ablation.jsonl", std::ios::binary);
  std::ofstream tout(dir / "ablation.txt", std::ios::binary);
  tout << "variant    micro-F1  precision  recall\n";
  for (const auto& [variant, report] : rows) {
    jout << "{\"variant\":\"" << variant << "\",\"f1\":" << report.f1
         << ",\"precision\":" << report.precision << ",\"recall\":" << report.recall
         << "}\n";
    tout << variant;
    for (std::size_t i = variant.size(); i < 11; ++i) tout << ' ';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f    %.4f     %.4f\n", report.f1,
                  report.precision, report.recall);
    tout << buf;
  }
  auto snapshot = flags.snapshot();
  snapshot.insert(snapshot.begin(), {"command", "ablate"});
  write_snapshot(dir, snapshot);
  std::cout << "wrote " << rows.size() << " ablation rows to " << out_dir << "\n";
  return 0;
}

int cmd_sweep_mu(const std::string& train_path, const std::string& dev_path,
                 const std::string& test_path, const std::string& schema_path,
                 const std::string& out_dir, const std::vector<double>& values,
                 bool exclude_no_relation, const CommonTrainFlags& flags) {
  RelationSchema schema = load_schema(schema_path);
  RelationTrie trie = RelationTrie::build(schema);
  Dataset train_set = load_interchange(train_path, schema, "train");
  Dataset dev_set;
  dev_set.schema = schema;
  if (!dev_path.empty()) dev_set = load_interchange(dev_path, schema, "dev");
  Dataset test_set = load_interchange(test_path, schema, "test");

  auto rows = sweep_mu(train_set, dev_set, test_set, schema, trie, flags.config,
                       values, exclude_no_relation);

  fs::path dir(out_dir);
  fs::create_directories(dir);
  std::ofstream csv(dir / "sweep.csv", std::ios::binary);
  csv << "mu,f1,precision,recall\n";
  std::ofstream jout(dir / "sweep.jsonl", std::ios::binary);
  for (const auto& [mu, report] : rows) {
    csv << mu << "," << report.f1 << "," << report.precision << "," << report.recall
        << "\n";
    jout << "{\"mu\":" << mu << ",\"f1\":" << report.f1 << "}\n";
  }
  auto snapshot = flags.snapshot();
  snapshot.insert(snapshot.begin(), {"command", "sweep-mu"});
  write_snapshot(dir, snapshot);
  std::cout << "wrote " << rows.size() << " sweep records to " << out_dir << "\n";
  return 0;
}

int cmd_inspect_trie(const std::string& schema_path) {
  RelationSchema schema = load_schema(schema_path);
  RelationTrie trie = RelationTrie::build(schema);
  std::cout << schema.relations.size() << " relations, trie depth " << trie.depth()
            << "\n";
  for (int d = 1; d <= trie.depth(); ++d) {
    std::cout << "layer " << d << ":";
    for (const Token& t : trie.layer_tokens(d)) std::cout << " " << t;
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPTuning: generative relation extraction with trie-constrained "
               "decoding and contrastive training"};
  app.require_subcommand(1);

  // gen-data -----------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic EPO corpus");
  SynthSpec synth;
  std::string gen_out = "run";
  Settings gen_settings(gen);
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();
  gen_settings.bind("--relations", "relations", synth.relation_count,
                    "number of relations (incl. no_relation)");
  gen_settings.bind("--vocab-size", "vocab_size", synth.vocab_size, "vocabulary size");
  gen_settings.bind("--train-instances", "train_instances", synth.train_instances,
                    "train split size");
  gen_settings.bind("--dev-instances", "dev_instances", synth.dev_instances,
                    "dev split size");
  gen_settings.bind("--test-instances", "test_instances", synth.test_instances,
                    "test split size");
  gen_settings.bind("--epo-rate", "epo_rate", synth.epo_rate,
                    "fraction of multi-relation instances");
  gen_settings.bind_seed(synth.seed);

  // train --------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train a model");
  std::string tr_train, tr_dev, tr_schema, tr_out = "run";
  std::size_t tr_low_n = 0;
  Settings tr_settings(tr);
  tr->add_option("--train", tr_train, "train split (interchange JSONL)")->required();
  tr->add_option("--dev", tr_dev, "dev split (interchange JSONL)");
  tr->add_option("--schema", tr_schema, "relation schema file")->required();
  tr->add_option("--out", tr_out, "run directory")->capture_default_str();
  tr->add_option("--low-resource", tr_low_n,
                 "sample N instances per relation class before training");
  CommonTrainFlags tr_flags;
  tr_flags.bind(tr_settings);

  // decode -------------------------------------------------------------
  auto* de = app.add_subcommand("decode", "decode candidate relations");
  std::string de_model, de_data, de_schema, de_out = "run";
  std::string de_format = "interchange", de_style = "s1";
  std::string de_convention = "likelihood_consistent";
  DecodeConfig de_config;
  std::size_t de_jobs = 1;
  Settings de_settings(de);
  de->add_option("--model", de_model, "checkpoint file")->required();
  de->add_option("--data", de_data, "dataset file")->required();
  de->add_option("--format", de_format, "tacred | nyt | interchange")->capture_default_str();
  de->add_option("--schema", de_schema, "relation schema file")->required();
  de->add_option("--out", de_out, "run directory")->capture_default_str();
  de->add_option("--jobs", de_jobs, "worker threads")->capture_default_str();
  de_settings.bind("--template", "template", de_style, "template style: s1 | s2");
  de_settings.bind("-K,--beam", "beam_size", de_config.beam_size, "beam size K");
  de_settings.bind("--alpha", "alpha", de_config.alpha, "length penalty exponent");
  de_settings.bind("--lambda", "lambda", de_config.lambda, "selection borderline");
  de_settings.bind("--convention", "convention", de_convention,
                   "likelihood_consistent | paper_literal");

  // eval ---------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "evaluate a model");
  std::string ev_model, ev_data, ev_schema, ev_out = "run";
  std::string ev_format = "interchange", ev_style = "s1", ev_mode = "threshold";
  std::string ev_convention = "likelihood_consistent";
  bool ev_exclude_no_relation = false;
  std::vector<std::size_t> ev_h_at;
  DecodeConfig ev_config;
  std::size_t ev_jobs = 1;
  Settings ev_settings(ev);
  ev->add_option("--model", ev_model, "checkpoint file")->required();
  ev->add_option("--data", ev_data, "dataset file")->required();
  ev->add_option("--format", ev_format, "tacred | nyt | interchange")->capture_default_str();
  ev->add_option("--schema", ev_schema, "relation schema file")->required();
  ev->add_option("--out", ev_out, "run directory")->capture_default_str();
  ev->add_option("--mode", ev_mode, "threshold | ranking")->capture_default_str();
  ev->add_flag("--exclude-no-relation", ev_exclude_no_relation,
               "drop no-relation pairs before counting");
  ev->add_option("--h-at", ev_h_at, "H@M values of M to report");
  ev->add_option("--jobs", ev_jobs, "worker threads")->capture_default_str();
  ev_settings.bind("--template", "template", ev_style, "template style: s1 | s2");
  ev_settings.bind("-K,--beam", "beam_size", ev_config.beam_size, "beam size K");
  ev_settings.bind("--alpha", "alpha", ev_config.alpha, "length penalty exponent");
  ev_settings.bind("--lambda", "lambda", ev_config.lambda, "selection borderline");
  ev_settings.bind("--convention", "convention", ev_convention,
                   "likelihood_consistent | paper_literal");

  // ablate -------------------------------------------------------------
  auto* ab = app.add_subcommand("ablate", "train/evaluate every loss variant");
  std::string ab_train, ab_dev, ab_test, ab_schema, ab_out = "run";
  std::vector<std::string> ab_grid = {"ce", "lbls", "ctl", "lbls+ctl"};
  bool ab_exclude_no_relation = false;
  Settings ab_settings(ab);
  ab->add_option("--train", ab_train, "train split")->required();
  ab->add_option("--dev", ab_dev, "dev split");
  ab->add_option("--test", ab_test, "test split")->required();
  ab->add_option("--schema", ab_schema, "relation schema file")->required();
  ab->add_option("--out", ab_out, "run directory")->capture_default_str();
  ab->add_option("--grid", ab_grid, "variants to run");
  ab->add_flag("--exclude-no-relation", ab_exclude_no_relation,
               "drop no-relation pairs before counting");
  CommonTrainFlags ab_flags;
  ab_flags.bind(ab_settings);

  // sweep-mu -----------------------------------------------------------
  auto* sw = app.add_subcommand("sweep-mu", "train/evaluate over balance factors");
  std::string sw_train, sw_dev, sw_test, sw_schema, sw_out = "run";
  std::vector<double> sw_values = {0.001, 0.01, 0.1, 1.0, 10.0, 100.0};
  bool sw_exclude_no_relation = false;
  Settings sw_settings(sw);
  sw->add_option("--train", sw_train, "train split")->required();
  sw->add_option("--dev", sw_dev, "dev split");
  sw->add_option("--test", sw_test, "test split")->required();
  sw->add_option("--schema", sw_schema, "relation schema file")->required();
  sw->add_option("--out", sw_out, "run directory")->capture_default_str();
  sw->add_option("--values", sw_values, "balance factor grid");
  sw->add_flag("--exclude-no-relation", sw_exclude_no_relation,
               "drop no-relation pairs before counting");
  CommonTrainFlags sw_flags;
  sw_flags.bind(sw_settings);

  // inspect-trie -------------------------------------------------------
  auto* it = app.add_subcommand("inspect-trie", "print the relation trie layers");
  std::string it_schema;
  it->add_option("--schema", it_schema, "relation schema file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      gen_settings.resolve();
      return cmd_gen_data(gen_out, synth);
    }
    if (*tr) {
      tr_settings.resolve();
      tr_flags.resolve();
      return cmd_train(tr_train, tr_dev, tr_schema, tr_out, tr_low_n, tr_flags);
    }
    if (*de) {
      de_settings.resolve();
      de_config.convention = parse_convention(de_convention);
      return cmd_decode(de_model, de_data, de_format, de_schema, de_out, de_style,
                        de_config, de_jobs);
    }
    if (*ev) {
      ev_settings.resolve();
      ev_config.convention = parse_convention(ev_convention);
      return cmd_eval(ev_model, ev_data, ev_format, ev_schema, ev_out, ev_style,
                      ev_mode, ev_exclude_no_relation, ev_h_at, ev_config, ev_jobs);
    }
    if (*ab) {
      ab_settings.resolve();
      ab_flags.resolve();
      return cmd_ablate(ab_train, ab_dev, ab_test, ab_schema, ab_out, ab_grid,
                        ab_exclude_no_relation, ab_flags);
    }
    if (*sw) {
      sw_settings.resolve();
      sw_flags.resolve();
      return cmd_sweep_mu(sw_train, sw_dev, sw_test, sw_schema, sw_out, sw_values,
                          sw_exclude_no_relation, sw_flags);
    }
    if (*it) {
      return cmd_inspect_trie(it_schema);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
