// coqan: command-line front end for training, evaluation and the experiments.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coqan/attention_export.hpp"
#include "coqan/disturb.hpp"
#include "coqan/synthetic.hpp"
#include "coqan/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace coqan;

namespace {

using Model = Classifier<float>;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

struct Options {
  Common common;
  std::string train, val, test, data, model;
  std::string subnets;
  std::optional<std::size_t> max_epochs, batch_size, patience;
  std::optional<double> lr_text, lr_other;
  std::string spec = "layout-signal";
  std::size_t n = 1000, n_val = 0, n_test = 0;
  std::string mode = "blocks";
  std::size_t repeats = 5;
  std::string id;
  bool attention = false;
};

// Config file keys are flat; paths and the seed sit next to the model and
// training keys. Flags win over the file.
struct Resolved {
  ModelConfig model;
  TrainConfig train;
  json file = json::object();
  std::uint64_t seed = 7;
};

std::string file_string(const json& j, const char* key, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (auto it = j.find(key); it != j.end()) return it->get<std::string>();
  return {};
}

Resolved resolve(Options& o) {
  Resolved r;
  if (!o.common.config_path.empty()) {
    std::ifstream in(o.common.config_path);
    if (!in) throw ConfigError("cannot open config '" + o.common.config_path + "'");
    try {
      r.file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config '" + o.common.config_path + "' is not valid JSON: " + e.what());
    }
    if (!r.file.is_object()) throw ConfigError("config must be a JSON object");
    update_from_json(r.model, r.file);
    update_from_json(r.train, r.file);
  }
  if (o.common.seed) r.train.seed = *o.common.seed;
  if (!o.subnets.empty()) r.model.active = Subnets::parse(o.subnets);
  if (o.max_epochs) r.train.max_epochs = *o.max_epochs;
  if (o.batch_size) r.train.batch_size = *o.batch_size;
  if (o.patience) r.train.patience = *o.patience;
  if (o.lr_text) r.train.lr_text = *o.lr_text;
  if (o.lr_other) r.train.lr_other = *o.lr_other;
  r.seed = r.train.seed;
  o.train = file_string(r.file, "train", o.train);
  o.val = file_string(r.file, "val", o.val);
  o.test = file_string(r.file, "test", o.test);
  o.data = file_string(r.file, "data", o.data);
  o.model = file_string(r.file, "model", o.model);
  r.train.validate();
  return r;
}

std::string require_path(const std::string& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string("missing required --") + flag);
  if (!fs::exists(p)) throw ConfigError(std::string("--") + flag + " path does not exist: " + p);
  return p;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << body;
}

// Echo of everything that determines a command's artifacts.
struct Run {
  std::string command;
  json config;
  std::uint64_t seed;
  std::uint64_t hash;
  fs::path out;
  std::vector<std::string> artifacts;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  Run(std::string cmd, json cfg, std::uint64_t s, const std::string& dir)
      : command(std::move(cmd)), config(std::move(cfg)), seed(s), out(dir) {
    config["command"] = command;
    config["seed"] = seed;
    hash = config_hash(config);
    fs::create_directories(out);
  }

  json stamp(json j) const {
    j["seed"] = seed;
    j["config_hash"] = hex64(hash);
    return j;
  }

  void put(const std::string& name, const std::string& body) {
    write_text(out / name, body);
    artifacts.push_back(name);
  }

  void finish() const {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json m{{"command", command},   {"version", COQAN_VERSION}, {"seed", seed},
           {"config_hash", hex64(hash)}, {"config", config},   {"artifacts", artifacts},
           {"wall_seconds", wall}};
    write_text(out / "run_manifest.json", m.dump(2) + "\n");
  }
};

json model_echo(const Resolved& r) {
  json j;
  to_json(j, r.model);
  json t;
  to_json(t, r.train);
  j.update(t);
  return j;
}

// Holds out every tenth consecutive pair when no validation corpus is given.
std::pair<std::vector<ArticleDocument>, std::vector<ArticleDocument>> holdout(std::vector<ArticleDocument> docs) {
  std::vector<ArticleDocument> train, val;
  for (std::size_t i = 0; i < docs.size(); ++i) ((i / 2) % 10 == 9 ? val : train).push_back(std::move(docs[i]));
  if (val.empty() || train.empty()) throw ValidationError("training corpus too small to hold out a validation split");
  return {std::move(train), std::move(val)};
}

int cmd_train(Options& o) {
  auto r = resolve(o);
  auto train_docs = read_corpus(require_path(o.train, "train"));
  std::vector<ArticleDocument> val_docs;
  if (o.val.empty()) std::tie(train_docs, val_docs) = holdout(std::move(train_docs));
  else val_docs = read_corpus(require_path(o.val, "val"));
  json echo = model_echo(r);
  echo["train"] = o.train;
  echo["val"] = o.val;
  echo["test"] = o.test;
  Run run("train", echo, r.seed, o.common.out);
  auto fit = fit_classifier<float>(train_docs, val_docs, r.model, r.train, [](const EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss " << e.val_loss
              << " val_acc " << e.val_acc << "\n";
  });
  run.put("epoch_log.csv", epoch_log_csv(fit.training.log, r.seed, run.hash));
  run.put("timing.csv", timing_csv(fit.training.log, r.seed, run.hash));
  json meta = run.stamp({{"train_config", r.train}, {"best_epoch", fit.training.best_epoch}});
  run.put("model.coqan", fit.classifier.encode(meta));
  if (!o.test.empty()) {
    const auto test = fit.classifier.preprocessor().prepare_all<float>(read_corpus(require_path(o.test, "test")));
    run.put("metrics.json", run.stamp({{"metrics", evaluate(fit.classifier.model(), test).to_json()}}).dump(2) + "\n");
  }
  run.finish();
  return 0;
}

int cmd_eval(Options& o) {
  auto r = resolve(o);
  const Model clf = Model::load(require_path(o.model, "model"));
  const auto data = clf.preprocessor().prepare_all<float>(read_corpus(require_path(o.data, "data")));
  Run run("eval", {{"model", o.model}, {"data", o.data}}, r.seed, o.common.out);
  const auto m = evaluate(clf.model(), data);
  run.put("metrics.json", run.stamp({{"subnets", clf.model().config().active.str()}, {"metrics", m.to_json()}}).dump(2) + "\n");
  run.finish();
  return 0;
}

int cmd_predict(Options& o) {
  auto r = resolve(o);
  const Model clf = Model::load(require_path(o.model, "model"));
  const auto docs = read_corpus(require_path(o.data, "data"));
  Run run("predict", {{"model", o.model}, {"data", o.data}, {"attention", o.attention}}, r.seed, o.common.out);
  json preds = json::array();
  for (const auto& d : docs) {
    WritingAttention<float> maps;
    const bool capture = o.attention && clf.model().writing();
    auto p = clf.predict(d, capture ? &maps : nullptr);
    if (capture) {
      const fs::path dir = fs::path("attention") / d.id;
      write_attention(run.out / dir, d.id, maps, run.stamp(json::object()));
      p.attention_path = dir.string();
    }
    preds.push_back(p.to_json());
  }
  run.put("predictions.json", run.stamp({{"predictions", preds}}).dump(2) + "\n");
  run.finish();
  return 0;
}

int cmd_extract(Options& o) {
  auto r = resolve(o);
  const auto docs = read_corpus(require_path(o.data, "data"));
  Run run("extract-features", {{"data", o.data}, {"model", o.model}}, r.seed, o.common.out);
  Preprocessor pre;
  if (!o.model.empty()) pre = Model::load(require_path(o.model, "model")).preprocessor();
  else pre.keywords = KeywordModel::fit(docs);
  std::string csv = "# seed=" + std::to_string(r.seed) + " config_hash=" + hex64(run.hash) + "\n";
  for (std::size_t i = 1; i <= kNumFeatures; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "feat_%02zu,", i);
    csv += buf;
  }
  csv += "id,label\n";
  for (const auto& d : docs) {
    const auto f = pre.raw_features(split_sentences(d, pre.max_sentences));
    for (std::size_t i = 1; i <= kNumFeatures; ++i) csv += format_double(f[i]) + ",";
    csv += d.id + "," + (d.label ? std::to_string(*d.label) : std::string()) + "\n";
  }
  run.put("features.csv", csv);
  run.finish();
  return 0;
}

int cmd_disturb(Options& o) {
  auto r = resolve(o);
  const Model clf = Model::load(require_path(o.model, "model"));
  const auto docs = read_corpus(require_path(o.data, "data"));
  const auto mode = disturb_mode_from_string(o.mode);
  Run run("disturb", {{"model", o.model}, {"data", o.data}, {"mode", o.mode}, {"repeats", o.repeats}}, r.seed,
          o.common.out);
  const auto rep = shuffle_disturb([&](const ArticleDocument& d) { return clf.probability(d); }, docs, mode,
                                   o.repeats, r.seed, clf.preprocessor().max_sentences);
  run.put("disturb.json", run.stamp(rep.to_json()).dump(2) + "\n");
  run.finish();
  return 0;
}

int cmd_export_attention(Options& o) {
  auto r = resolve(o);
  const Model clf = Model::load(require_path(o.model, "model"));
  const auto docs = read_corpus(require_path(o.data, "data"));
  Run run("export-attention", {{"model", o.model}, {"data", o.data}, {"id", o.id}}, r.seed, o.common.out);
  json all = json::array();
  for (const auto& d : docs) {
    if (!o.id.empty() && d.id != o.id) continue;
    const auto maps = capture_attention(clf, d);
    write_attention(run.out / "attention" / d.id, d.id, maps, run.stamp(json::object()));
    all.push_back("attention/" + d.id);
  }
  if (all.empty()) throw ValidationError("no article matched --id " + o.id);
  run.put("attention_index.json", run.stamp({{"articles", all}}).dump(2) + "\n");
  run.finish();
  return 0;
}

int cmd_gen_synthetic(Options& o) {
  auto r = resolve(o);
  const auto kind = synthetic_kind_from_string(o.spec);
  Run run("gen-synthetic", {{"spec", to_string(kind)}, {"n", o.n}, {"n_val", o.n_val}, {"n_test", o.n_test}}, r.seed,
          o.common.out);
  auto emit = [&](const char* name, std::size_t n, std::uint64_t stream, const char* prefix) {
    if (n == 0) return;
    const std::uint64_t seed = stream == 0 ? r.seed : derive_seed(r.seed, stream);
    std::string body;
    for (const auto& d : generate_synthetic({kind, n, seed, prefix})) body += serialize_article(d) + "\n";
    run.put(name, body);
  };
  if (o.n == 0) throw ConfigError("--n must be positive");
  emit("corpus.jsonl", o.n, 0, "train");
  emit("val.jsonl", o.n_val, 1, "val");
  emit("test.jsonl", o.n_test, 2, "test");
  run.finish();
  return 0;
}

int cmd_ablate(Options& o) {
  const std::string list = std::exchange(o.subnets, {});
  auto r = resolve(o);
  auto train_docs = read_corpus(require_path(o.train, "train"));
  std::vector<ArticleDocument> val_docs;
  if (o.val.empty()) std::tie(train_docs, val_docs) = holdout(std::move(train_docs));
  else val_docs = read_corpus(require_path(o.val, "val"));
  const auto test_docs = read_corpus(require_path(o.test, "test"));
  std::vector<Subnets> subsets;
  if (list.empty()) {
    subsets = Subnets::all_subsets();
  } else {
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ';')) subsets.push_back(Subnets::parse(item));
  }
  json echo = model_echo(r);
  echo["train"] = o.train;
  echo["val"] = o.val;
  echo["test"] = o.test;
  Run run("ablate", echo, r.seed, o.common.out);
  json results = json::array();
  for (const auto& s : subsets) {
    std::cerr << "ablation " << s.str() << "\n";
    results.push_back(ablation_run<float>(s, train_docs, val_docs, test_docs, r.model, r.train).to_json());
  }
  run.put("ablation.json", run.stamp({{"results", results}}).dump(2) + "\n");
  run.finish();
  return 0;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse_error";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation_error";
  if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape_error";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric_error";
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coqan: article quality classification"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", o.common.config_path, "JSON config with flat keys");
    c->add_option("--seed", o.common.seed, "Random seed");
    c->add_option("--out", o.common.out, "Output directory");
  };
  auto training = [&](CLI::App* c) {
    c->add_option("--train", o.train, "Training corpus (JSON lines)");
    c->add_option("--val", o.val, "Validation corpus");
    c->add_option("--test", o.test, "Test corpus");
    c->add_option("--max-epochs", o.max_epochs);
    c->add_option("--batch-size", o.batch_size);
    c->add_option("--patience", o.patience);
    c->add_option("--lr-text", o.lr_text);
    c->add_option("--lr-other", o.lr_other);
  };

  auto* train = app.add_subcommand("train", "Train a model and save the best checkpoint");
  common(train);
  training(train);
  train->add_option("--subnets", o.subnets, "Active subnetworks, e.g. LO,WC,TS");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled corpus");
  common(eval);
  eval->add_option("--model", o.model, "Checkpoint file");
  eval->add_option("--data", o.data, "Corpus");

  auto* predict = app.add_subcommand("predict", "Score articles");
  common(predict);
  predict->add_option("--model", o.model, "Checkpoint file");
  predict->add_option("--data", o.data, "Corpus");
  predict->add_flag("--attention", o.attention, "Also export writing-field attention per article");

  auto* extract = app.add_subcommand("extract-features", "Write the 48 writing features as CSV");
  common(extract);
  extract->add_option("--data", o.data, "Corpus");
  extract->add_option("--model", o.model, "Checkpoint whose keyword statistics to use");

  auto* disturb = app.add_subcommand("disturb", "Shuffle-disturbance experiment");
  common(disturb);
  disturb->add_option("--model", o.model, "Checkpoint file");
  disturb->add_option("--data", o.data, "Labeled corpus");
  disturb->add_option("--mode", o.mode, "sentences, blocks or both");
  disturb->add_option("--repeats", o.repeats, "Number of repeats");

  auto* attention = app.add_subcommand("export-attention", "Export writing-field attention maps");
  common(attention);
  attention->add_option("--model", o.model, "Checkpoint file");
  attention->add_option("--data", o.data, "Corpus");
  attention->add_option("--id", o.id, "Only this article");

  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic labeled corpus");
  common(gen);
  gen->add_option("--spec", o.spec, "layout-signal, text-signal, feature-signal or mixed-signal");
  gen->add_option("--n", o.n, "Training articles");
  gen->add_option("--n-val", o.n_val, "Validation articles");
  gen->add_option("--n-test", o.n_test, "Test articles");

  auto* ablate = app.add_subcommand("ablate", "Train and test subnetwork subsets");
  common(ablate);
  training(ablate);
  ablate->add_option("--subnets", o.subnets, "Subsets separated by ';' (default: all seven)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*predict) return cmd_predict(o);
    if (*extract) return cmd_extract(o);
    if (*disturb) return cmd_disturb(o);
    if (*attention) return cmd_export_attention(o);
    if (*gen) return cmd_gen_synthetic(o);
    if (*ablate) return cmd_ablate(o);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << json{{"error", error_kind(e)}, {"message", msg}}.dump() << "\n";
    return 1;
  }
  return 1;
}
