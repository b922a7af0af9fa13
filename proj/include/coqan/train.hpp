#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coqan/metrics.hpp"
#include "coqan/model.hpp"
#include "coqan/optim.hpp"
#include "coqan/random.hpp"

namespace coqan {

struct TrainConfig {
  double lr_text = 2e-5;
  double lr_other = 1e-3;
  double dropout_text = 0.1;
  double dropout_other = 0.2;
  std::size_t batch_size = 8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t patience = 3;
  std::size_t max_epochs = 20;
  std::uint64_t seed = 7;

  void validate() const {
    if (!(lr_text > 0) || !(lr_other > 0)) throw ConfigError("train: learning rates must be positive");
    if (dropout_text < 0 || dropout_text >= 1 || dropout_other < 0 || dropout_other >= 1)
      throw ConfigError("train: dropout must lie in [0,1)");
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (patience == 0) throw ConfigError("train: patience must be at least 1");
    if (max_epochs == 0) throw ConfigError("train: max_epochs must be positive");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr_text", c.lr_text},       {"lr_other", c.lr_other},
                     {"dropout_text", c.dropout_text}, {"dropout_other", c.dropout_other},
                     {"batch_size", c.batch_size}, {"adam_beta1", c.beta1},
                     {"adam_beta2", c.beta2},      {"adam_eps", c.eps},
                     {"patience", c.patience},     {"max_epochs", c.max_epochs},
                     {"seed", c.seed}};
}

inline void update_from_json(TrainConfig& c, const nlohmann::json& j) {
  auto get = [&](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) it->get_to(field);
  };
  get("lr_text", c.lr_text);
  get("lr_other", c.lr_other);
  get("dropout_text", c.dropout_text);
  get("dropout_other", c.dropout_other);
  get("batch_size", c.batch_size);
  get("adam_beta1", c.beta1);
  get("adam_beta2", c.beta2);
  get("adam_eps", c.eps);
  get("patience", c.patience);
  get("max_epochs", c.max_epochs);
  get("seed", c.seed);
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  update_from_json(c, j);
}

// 64-bit FNV-1a over the canonical (sorted-key, compact) JSON dump.
inline std::uint64_t config_hash(const nlohmann::json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Validation-loss early stopping: an epoch counts as an improvement only
// when its loss is strictly below the best so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience == 0) throw ConfigError("early stopping: patience must be at least 1");
  }

  // Returns true when this epoch is the new best.
  bool update(double val_loss) {
    ++epoch_;
    if (val_loss < best_) {
      best_ = val_loss;
      best_epoch_ = epoch_;
      bad_ = 0;
      return true;
    }
    ++bad_;
    return false;
  }

  bool should_stop() const { return bad_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t bad_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  std::optional<double> val_auc;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

// Epoch log without wall-clock time so identical runs give identical files.
inline std::string epoch_log_csv(const std::vector<EpochRecord>& log, std::uint64_t seed, std::uint64_t hash) {
  std::ostringstream os;
  os << "# seed=" << seed << " config_hash=" << hex64(hash) << "\n";
  os << "epoch,train_loss,val_loss,val_acc,val_auc\n";
  for (const auto& r : log)
    os << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss) << ','
       << format_double(r.val_acc) << ',' << (r.val_auc ? format_double(*r.val_auc) : "") << "\n";
  return os.str();
}

inline std::string timing_csv(const std::vector<EpochRecord>& log, std::uint64_t seed, std::uint64_t hash) {
  std::ostringstream os;
  os << "# seed=" << seed << " config_hash=" << hex64(hash) << "\n";
  os << "epoch,seconds\n";
  for (const auto& r : log) os << r.epoch << ',' << format_double(r.seconds) << "\n";
  return os.str();
}

template <class T>
std::vector<int> labels_of(const std::vector<ModelInput<T>>& data) {
  std::vector<int> y;
  y.reserve(data.size());
  for (const auto& in : data) {
    if (!in.label) throw ValidationError("article '" + in.id + "' has no label");
    y.push_back(*in.label);
  }
  return y;
}

template <class T>
std::vector<double> predict_all(const CoqanModel<T>& model, const std::vector<ModelInput<T>>& data) {
  std::vector<double> p;
  p.reserve(data.size());
  for (const auto& in : data) p.push_back(model.probability(in));
  return p;
}

// Mean clamped cross entropy of probabilities against labels.
inline double mean_bce(const std::vector<double>& p, const std::vector<int>& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], 1e-7, 1.0 - 1e-7);
    total -= y[i] ? std::log(q) : std::log(1.0 - q);
  }
  return p.empty() ? 0.0 : total / static_cast<double>(p.size());
}

template <class T>
MetricsReport evaluate(const CoqanModel<T>& model, const std::vector<ModelInput<T>>& data) {
  return compute_metrics(predict_all(model, data), labels_of(data));
}

namespace detail {
template <class T>
void check_gradients(const nn::ParameterStore<T>& store, const std::string& where) {
  for (std::size_t i = 0; i < store.size(); ++i)
    if (!store[i].grad.allFinite())
      throw NumericError("non-finite gradient in parameter '" + store[i].name + "' " + where);
}
}  // namespace detail

// One optimizer step on a batch: per-sample forward/backward accumulating
// into the parameter gradients, then both Adam groups step on the mean.
// Returns the mean batch loss.
template <class T>
double train_step(CoqanModel<T>& model, const std::vector<const ModelInput<T>*>& batch,
                  nn::Adam<T>& text_opt, nn::Adam<T>& other_opt, const ForwardOptions& opt) {
  auto& store = model.params();
  store.zero_grad();
  double loss_sum = 0.0;
  for (const auto* in : batch) {
    if (!in->label) throw ValidationError("article '" + in->id + "' has no label");
    nn::Tape<T> tape;
    try {
      auto tr = model.forward(tape, *in, opt);
      nn::Var<T> loss = nn::binary_cross_entropy(tr.probability, {*in->label});
      loss_sum += static_cast<double>(loss.value()(0, 0));
      tape.backward(loss);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (article '" + in->id + "')");
    }
  }
  detail::check_gradients(store, "(batch ending at article '" + batch.back()->id + "')");
  const double scale = 1.0 / static_cast<double>(batch.size());
  text_opt.step(store, scale);
  other_opt.step(store, scale);
  return loss_sum * scale;
}

template <class T>
TrainResult train(CoqanModel<T>& model, const std::vector<ModelInput<T>>& train_set,
                  const std::vector<ModelInput<T>>& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("train: empty training split");
  if (val_set.empty()) throw ValidationError("train: empty validation split");
  const auto val_labels = labels_of(val_set);
  nn::Adam<T> text_opt({cfg.lr_text, cfg.beta1, cfg.beta2, cfg.eps}, nn::Group::text_encoder);
  nn::Adam<T> other_opt({cfg.lr_other, cfg.beta1, cfg.beta2, cfg.eps}, nn::Group::other);
  Rng order_rng(derive_seed(cfg.seed, 1));
  Rng dropout_rng(derive_seed(cfg.seed, 2));
  ForwardOptions opt{true, &dropout_rng, cfg.dropout_text, cfg.dropout_other};

  EarlyStopping stopper(cfg.patience);
  std::optional<nn::ParameterStore<T>> best;
  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    fisher_yates(order, order_rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      std::vector<const ModelInput<T>*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch_size); ++i)
        batch.push_back(&train_set[order[i]]);
      loss_sum += train_step(model, batch, text_opt, other_opt, opt) * static_cast<double>(batch.size());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    const auto probs = predict_all(model, val_set);
    rec.val_loss = mean_bce(probs, val_labels);
    const auto m = compute_metrics(probs, val_labels);
    rec.val_acc = m.accuracy;
    rec.val_auc = m.auc;
    if (stopper.update(rec.val_loss)) best = model.params().clone();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  if (best) model.params().copy_values_from(*best);
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best();
  return result;
}

// Preprocessing fitted on the training split, a freshly initialized model
// and a full training run.
template <class T>
struct FitResult {
  Classifier<T> classifier;
  TrainResult training;
};

template <class T>
FitResult<T> fit_classifier(const std::vector<ArticleDocument>& train_docs,
                            const std::vector<ArticleDocument>& val_docs, const ModelConfig& model_cfg,
                            const TrainConfig& train_cfg,
                            const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  Classifier<T> clf(model_cfg, Preprocessor::fit(train_docs));
  clf.model().initialize(train_cfg.seed);
  const auto train_in = clf.preprocessor().template prepare_all<T>(train_docs);
  const auto val_in = clf.preprocessor().template prepare_all<T>(val_docs);
  auto res = train(clf.model(), train_in, val_in, train_cfg, on_epoch);
  return {std::move(clf), std::move(res)};
}

struct AblationResult {
  Subnets subnets;
  MetricsReport metrics;
  TrainResult training;

  nlohmann::json to_json() const {
    return {{"subnets", subnets.str()},
            {"metrics", metrics.to_json()},
            {"best_epoch", training.best_epoch},
            {"epochs_run", training.log.size()}};
  }
};

template <class T>
AblationResult ablation_run(const Subnets& active, const std::vector<ArticleDocument>& train_docs,
                            const std::vector<ArticleDocument>& val_docs,
                            const std::vector<ArticleDocument>& test_docs, ModelConfig model_cfg,
                            const TrainConfig& train_cfg) {
  if (!active.any()) throw ConfigError("ablation: empty subnetwork subset");
  model_cfg.active = active;
  auto fit = fit_classifier<T>(train_docs, val_docs, model_cfg, train_cfg);
  const auto test_in = fit.classifier.preprocessor().template prepare_all<T>(test_docs);
  return {active, evaluate(fit.classifier.model(), test_in), std::move(fit.training)};
}

}  // namespace coqan
