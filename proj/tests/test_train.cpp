#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "coqan/synthetic.hpp"
#include "coqan/train.hpp"

using namespace coqan;
using nn::Group;

namespace {

ModelConfig small_model(const std::string& subnets = "LO,WC,TS") {
  ModelConfig c;
  c.layout.gru_hidden = 8;
  c.layout.windows = {2, 3};
  c.layout.filters_per_window = 4;
  c.writing.embed_dim = 8;
  c.writing.heads = 2;
  c.writing.head_dim = 4;
  c.writing.layers = 2;
  c.text.vocab_size = 20;
  c.text.layers_sent = 1;
  c.text.heads_sent = 2;
  c.text.d_model_sent = 8;
  c.text.d_ff_sent = 16;
  c.text.layers_doc = 1;
  c.text.heads_doc = 2;
  c.text.d_model_doc = 8;
  c.text.d_ff_doc = 16;
  c.fusion = {4, 4, 8};
  c.active = Subnets::parse(subnets);
  return c;
}

struct Prepared {
  Preprocessor pre;
  std::vector<ModelInput<double>> train, val;
};

Prepared prepared(SyntheticKind kind, std::size_t n, std::uint64_t seed) {
  const auto train = generate_synthetic({kind, n, seed, "tr"});
  const auto val = generate_synthetic({kind, n / 2, seed + 1, "va"});
  Prepared p{Preprocessor::fit(train), {}, {}};
  p.train = p.pre.prepare_all<double>(train);
  p.val = p.pre.prepare_all<double>(val);
  return p;
}

ModelConfig with_vocab(ModelConfig c, const Preprocessor& pre) {
  c.text.vocab_size = pre.vocab.size();
  return c;
}

// Brute-force AUC: the fraction of (positive, negative) pairs ordered
// correctly, ties counting one half.
double pairwise_auc(const std::vector<double>& p, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += p[i] > p[j] ? 1.0 : p[i] == p[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

}  // namespace

// ---------------------------------------------------------------------------
// Adam

TEST(Adam, SingleStepHandOracle) {
  nn::ParameterStore<double> s;
  auto& w = s.declare("w", {1}, Group::other, nn::InitKind::zeros);
  w.value(0, 0) = 0.5;
  w.grad(0, 0) = 1.0;
  nn::Adam<double> opt({0.001, 0.9, 0.999, 1e-8}, Group::other);
  opt.step(s);
  // m = 0.1 and v = 0.001, so both bias-corrected moments are 1.
  EXPECT_NEAR(w.value(0, 0), 0.5 - 0.001 / (1.0 + 1e-8), 1e-9);
  opt.step(s);
  EXPECT_NEAR(w.value(0, 0), 0.5 - 2 * 0.001 / (1.0 + 1e-8), 1e-9);
  EXPECT_EQ(opt.steps(), 2u);
}

TEST(Adam, GroupsUseTheirOwnLearningRate) {
  nn::ParameterStore<double> s;
  auto& a = s.declare("text.a", {1}, Group::text_encoder, nn::InitKind::zeros);
  auto& b = s.declare("fusion.b", {1}, Group::other, nn::InitKind::zeros);
  a.grad(0, 0) = 1.0;
  b.grad(0, 0) = 1.0;
  nn::Adam<double> text({2e-5}, Group::text_encoder), other({1e-3}, Group::other);
  text.step(s);
  other.step(s);
  EXPECT_NEAR(b.value(0, 0) / a.value(0, 0), 50.0, 1e-6);
}

TEST(Adam, InvalidHyperparameters) {
  EXPECT_THROW(nn::Adam<float>({0.0}, Group::other), ConfigError);
  EXPECT_THROW(nn::Adam<float>({1e-3, 1.0}, Group::other), ConfigError);
}

TEST(Adam, GroupsPartitionEveryParameter) {
  CoqanModel<double> model(small_model());
  model.initialize(1);
  auto& s = model.params();
  const auto before = s.clone();
  for (std::size_t i = 0; i < s.size(); ++i) s[i].grad.setOnes();
  nn::Adam<double> text({1e-3}, Group::text_encoder), other({1e-3}, Group::other);
  text.step(s);
  std::vector<int> moved(s.size(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].value != before[i].value) ++moved[i];
    EXPECT_EQ(s[i].value != before[i].value, s[i].group == Group::text_encoder) << s[i].name;
  }
  const auto mid = s.clone();
  other.step(s);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i].value != mid[i].value) ++moved[i];
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(moved[i], 1) << s[i].name;
}

// ---------------------------------------------------------------------------
// Early stopping and the training loop

TEST(EarlyStopping, PatienceTwoRisingLosses) {
  EarlyStopping es(2);
  EXPECT_TRUE(es.update(1.0));
  EXPECT_FALSE(es.should_stop());
  EXPECT_FALSE(es.update(1.1));
  EXPECT_FALSE(es.should_stop());
  EXPECT_FALSE(es.update(1.2));
  EXPECT_TRUE(es.should_stop());
  EXPECT_EQ(es.best_epoch(), 1u);
}

TEST(EarlyStopping, EqualLossIsNotAnImprovement) {
  EarlyStopping es(1);
  es.update(0.5);
  EXPECT_FALSE(es.update(0.5));
  EXPECT_TRUE(es.should_stop());
  EXPECT_THROW(EarlyStopping(0), ConfigError);
}

TEST(TrainStep, SmallStepDecreasesLossOnFiveSeeds) {
  auto data = prepared(SyntheticKind::mixed, 10, 3);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CoqanModel<double> model(with_vocab(small_model(), data.pre));
    model.initialize(seed);
    const auto& sample = data.train[seed];
    auto loss = [&] {
      nn::Tape<double> t;
      return nn::binary_cross_entropy(model.forward(t, sample).probability, {*sample.label}).value()(0, 0);
    };
    const double before = loss();
    nn::Adam<double> text({1e-4}, Group::text_encoder), other({1e-4}, Group::other);
    const double reported = train_step(model, {&sample}, text, other, ForwardOptions{});
    EXPECT_DOUBLE_EQ(reported, before);
    EXPECT_LT(loss(), before) << seed;
  }
}

TEST(TrainStep, MissingLabelIsError) {
  auto data = prepared(SyntheticKind::layout, 6, 4);
  CoqanModel<double> model(with_vocab(small_model("LO"), data.pre));
  auto in = data.train[0];
  in.label.reset();
  nn::Adam<double> text({1e-4}, Group::text_encoder), other({1e-4}, Group::other);
  EXPECT_THROW(train_step(model, {&in}, text, other, ForwardOptions{}), ValidationError);
}

TEST(Train, RestoresBestValidationCheckpoint) {
  auto data = prepared(SyntheticKind::layout, 24, 5);
  CoqanModel<double> model(with_vocab(small_model("LO,WC"), data.pre));
  model.initialize(7);
  TrainConfig cfg;
  cfg.max_epochs = 4;
  cfg.patience = 1;
  cfg.lr_other = 0.05;
  const auto res = train(model, data.train, data.val, cfg);
  ASSERT_GE(res.log.size(), 1u);
  EXPECT_LE(res.log.size(), 4u);
  EXPECT_EQ(res.best_val_loss, res.log[res.best_epoch - 1].val_loss);
  EXPECT_DOUBLE_EQ(mean_bce(predict_all(model, data.val), labels_of(data.val)), res.best_val_loss);
  if (res.stopped_early) EXPECT_EQ(res.log.size(), res.best_epoch + cfg.patience);
}

TEST(Train, DeterministicUnderFixedSeed) {
  const auto train_docs = generate_synthetic({SyntheticKind::layout, 16, 8, "tr"});
  const auto val_docs = generate_synthetic({SyntheticKind::layout, 8, 9, "va"});
  TrainConfig cfg;
  cfg.max_epochs = 2;
  auto a = fit_classifier<float>(train_docs, val_docs, small_model(), cfg);
  auto b = fit_classifier<float>(train_docs, val_docs, small_model(), cfg);
  EXPECT_EQ(epoch_log_csv(a.training.log, 7, 1), epoch_log_csv(b.training.log, 7, 1));
  EXPECT_EQ(a.classifier.encode(), b.classifier.encode());
}

TEST(Train, EmptySplitsRejected) {
  auto data = prepared(SyntheticKind::layout, 6, 4);
  CoqanModel<double> model(with_vocab(small_model("LO"), data.pre));
  EXPECT_THROW(train(model, {}, data.val, TrainConfig{}), ValidationError);
  EXPECT_THROW(train(model, data.train, {}, TrainConfig{}), ValidationError);
}

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c;
  EXPECT_EQ(c.lr_text, 2e-5);
  EXPECT_EQ(c.lr_other, 1e-3);
  EXPECT_EQ(c.dropout_text, 0.1);
  EXPECT_EQ(c.dropout_other, 0.2);
  EXPECT_EQ(c.batch_size, 8u);
  c.patience = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr_other = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.seed = 99;
  c.batch_size = 3;
  nlohmann::json j = c;
  const auto back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(config_hash(j), config_hash(nlohmann::json(back)));
  j["seed"] = 100;
  EXPECT_NE(config_hash(j), config_hash(nlohmann::json(back)));
}

TEST(EpochLog, HeaderCarriesSeedAndHash) {
  std::vector<EpochRecord> log{{1, 0.5, 0.25, 0.75, std::nullopt, 1.5}};
  const auto csv = epoch_log_csv(log, 7, 0xabc);
  EXPECT_EQ(csv, "# seed=7 config_hash=0000000000000abc\nepoch,train_loss,val_loss,val_acc,val_auc\n1,0.5,0.25,0.75,\n");
  EXPECT_NE(timing_csv(log, 7, 0xabc).find("1,1.5"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Metrics

TEST(Metrics, SmallExample) {
  const auto m = compute_metrics({0.9, 0.2, 0.8}, {1, 0, 0});
  EXPECT_DOUBLE_EQ(m.accuracy, 2.0 / 3.0);
  EXPECT_EQ(m.confusion, (Confusion{1, 1, 1, 0}));
  EXPECT_DOUBLE_EQ(m.precision, 1.0 / 3.0 * 0.5 + 2.0 / 3.0 * 1.0);
  EXPECT_DOUBLE_EQ(m.recall, 1.0 / 3.0 * 1.0 + 2.0 / 3.0 * 0.5);
  EXPECT_DOUBLE_EQ(*m.auc, 1.0);
}

TEST(Metrics, PerfectSeparationAndTies) {
  EXPECT_DOUBLE_EQ(*compute_metrics({0.1, 0.2, 0.7, 0.9}, {0, 0, 1, 1}).auc, 1.0);
  EXPECT_DOUBLE_EQ(*compute_metrics({0.9, 0.7, 0.2, 0.1}, {0, 0, 1, 1}).auc, 0.0);
  EXPECT_DOUBLE_EQ(*compute_metrics({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}).auc, 0.5);
  const auto m = compute_metrics({0.5}, {1});
  EXPECT_EQ(m.confusion.tp, 1u);
}

TEST(Metrics, RandomPredictorAucNearHalf) {
  Rng rng(123);
  std::vector<double> p(10000);
  std::vector<int> y(10000);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = uniform_unit(rng);
    y[i] = static_cast<int>(i % 2);
  }
  const double auc = *compute_metrics(p, y).auc;
  EXPECT_GE(auc, 0.47);
  EXPECT_LE(auc, 0.53);
}

TEST(Metrics, SingleClassAucIsNull) {
  const auto m = compute_metrics({0.2, 0.9}, {1, 1});
  EXPECT_FALSE(m.auc.has_value());
  EXPECT_TRUE(m.to_json()["auc"].is_null());
}

TEST(Metrics, InvalidInputs) {
  EXPECT_THROW(compute_metrics({}, {}), ValidationError);
  EXPECT_THROW(compute_metrics({0.5}, {0, 1}), ShapeError);
  EXPECT_THROW(compute_metrics({0.5}, {2}), ValidationError);
}

TEST(Metrics, MatchBruteForceOnRandomSets) {
  Rng rng(77);
  for (int set = 0; set < 100; ++set) {
    const std::size_t n = 1 + uniform_index(rng, 50);
    std::vector<double> p(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<double>(uniform_index(rng, 11)) / 10.0;
      y[i] = static_cast<int>(uniform_index(rng, 2));
    }
    const auto m = compute_metrics(p, y);
    std::size_t correct = 0, tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int pred = p[i] >= 0.5;
      correct += pred == y[i];
      tp += pred && y[i];
      fp += pred && !y[i];
      tn += !pred && !y[i];
      fn += !pred && y[i];
    }
    EXPECT_EQ(m.accuracy, static_cast<double>(correct) / static_cast<double>(n));
    EXPECT_EQ(m.confusion, (Confusion{tp, fp, tn, fn}));
    EXPECT_GE(m.precision, 0.0);
    EXPECT_LE(m.precision, 1.0);
    EXPECT_GE(m.f1, 0.0);
    EXPECT_LE(m.f1, 1.0);
    if (tp + fn == 0 || tn + fp == 0) {
      EXPECT_FALSE(m.auc.has_value());
    } else {
      EXPECT_DOUBLE_EQ(*m.auc, pairwise_auc(p, y));
    }
  }
}

TEST(Evaluate, RepeatableBitwise) {
  auto data = prepared(SyntheticKind::mixed, 12, 6);
  CoqanModel<double> model(with_vocab(small_model(), data.pre));
  model.initialize(3);
  const auto a = predict_all(model, data.val), b = predict_all(model, data.val);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
  EXPECT_EQ(evaluate(model, data.val).to_json().dump(), evaluate(model, data.val).to_json().dump());
}

// ---------------------------------------------------------------------------
// Ablation

TEST(Ablation, EverySubsetRunsAndEmptyIsRejected) {
  const auto train_docs = generate_synthetic({SyntheticKind::mixed, 8, 1, "tr"});
  const auto val_docs = generate_synthetic({SyntheticKind::mixed, 4, 2, "va"});
  TrainConfig cfg;
  cfg.max_epochs = 1;
  for (const auto& sub : Subnets::all_subsets()) {
    const auto r = ablation_run<float>(sub, train_docs, val_docs, val_docs, small_model(), cfg);
    EXPECT_EQ(r.subnets, sub);
    EXPECT_EQ(r.metrics.samples, 4u);
    EXPECT_EQ(r.to_json()["subnets"], sub.str());
  }
  EXPECT_THROW(ablation_run<float>(Subnets{false, false, false}, train_docs, val_docs, val_docs, small_model(), cfg),
               ConfigError);
  EXPECT_THROW(Subnets::parse("LO,XX"), ConfigError);
  EXPECT_EQ(Subnets::parse("TS,LO").str(), "LO,TS");
}
