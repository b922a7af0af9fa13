#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "coqan/grad_check.hpp"
#include "coqan/model.hpp"

using namespace coqan;
using nn::Group;
using nn::Tape;
using nn::Var;

using Mat = nn::Matrix<double>;
using MatF = nn::Matrix<float>;

namespace {

Mat random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

FeatureRecord random_record(std::uint64_t seed, std::int64_t category = 5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureRecord r;
  for (std::size_t i = 1; i < kNumFeatures; ++i) r[i] = normal(rng);
  r[kCategoryFeature] = static_cast<double>(category);
  return r;
}

TokenizedSentence sentence(const std::vector<std::int32_t>& tokens, std::size_t max_tokens) {
  TokenizedSentence s;
  s.ids.assign(max_tokens, Vocabulary::kPad);
  s.ids[0] = Vocabulary::kHead;
  for (std::size_t i = 0; i < tokens.size(); ++i) s.ids[i + 1] = tokens[i];
  s.length = tokens.size() + 1;
  return s;
}

TextEncoderConfig toy_text() {
  TextEncoderConfig c;
  c.vocab_size = 12;
  c.layers_sent = 1;
  c.heads_sent = 2;
  c.d_model_sent = 4;
  c.d_ff_sent = 6;
  c.layers_doc = 1;
  c.heads_doc = 2;
  c.d_model_doc = 4;
  c.d_ff_doc = 6;
  c.max_tokens = 6;
  c.max_sentences = 4;
  return c;
}

ModelConfig toy_model() {
  ModelConfig c;
  c.layout.gru_hidden = 3;
  c.layout.windows = {2, 3};
  c.layout.filters_per_window = 2;
  c.writing.embed_dim = 3;
  c.writing.heads = 2;
  c.writing.head_dim = 2;
  c.writing.layers = 2;
  c.writing.num_categories = 8;
  c.text = toy_text();
  c.fusion = {3, 3, 4};
  c.init_std = 0.5;
  return c;
}

ModelConfig full_size_model(std::size_t vocab = 40) {
  ModelConfig c;
  c.text.vocab_size = vocab;
  return c;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

// Key biases shift every score in a softmax row equally, so their gradient
// is exactly zero and the relative error would only measure round-off.
bool key_bias(const std::string& name) { return name.find(".attn.k.b") != std::string::npos; }

// Copies a tape value; references into the tape do not survive later ops.
template <class T>
nn::Matrix<T> val(Var<T> v) {
  return v.value();
}

}  // namespace

// ---------------------------------------------------------------------------
// Layout

TEST(LayoutNet, OutputDimIs228ForAnyLength) {
  nn::ParameterStore<float> s;
  LayoutNet<float> net(s, LayoutConfig{});
  s.initialize(1);
  EXPECT_EQ(net.output_dim(), 228u);
  for (Eigen::Index m : {1, 4, 25, 256}) {
    Tape<float> t;
    EXPECT_EQ(net.forward(t, MatF::Random(m, 13)).cols(), 228);
  }
}

TEST(LayoutNet, SingleBlockUsesSingleCellAndPaddedWindow) {
  nn::ParameterStore<double> s;
  LayoutConfig cfg;
  cfg.gru_hidden = 4;
  cfg.windows = {1, 3};
  cfg.filters_per_window = 2;
  LayoutNet<double> net(s, cfg);
  s.initialize(2, 0.3);
  const Mat x = random_matrix(1, 13, 3);
  Tape<double> t;
  const Mat h = net.forward(t, x).value();
  const Mat gru_part = net.gru().sequence(t.constant(x)).back().value();
  const Mat conv_part = net.conv()(t.constant(x)).value();
  EXPECT_EQ(h.leftCols(4), gru_part);
  EXPECT_EQ(h.rightCols(4), conv_part);
}

TEST(LayoutNet, BlockTranspositionChangesOutput) {
  nn::ParameterStore<double> s;
  LayoutNet<double> net(s, LayoutConfig{});
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    s.initialize(100 + trial, 0.1);
    const Mat x = random_matrix(6, 13, 200 + trial);
    Mat y = x;
    y.row(1) = x.row(4);
    y.row(4) = x.row(1);
    Tape<double> t;
    EXPECT_GT(max_abs(val(net.forward(t, x)) - val(net.forward(t, y))), 1e-9) << trial;
  }
}

TEST(LayoutNet, EmptyArticleRejected) {
  nn::ParameterStore<float> s;
  LayoutNet<float> net(s, LayoutConfig{});
  Tape<float> t;
  EXPECT_THROW(net.forward(t, MatF(0, 13)), ValidationError);
}

TEST(LayoutNet, GradCheck) {
  nn::ParameterStore<double> s;
  LayoutConfig cfg;
  cfg.gru_hidden = 3;
  cfg.windows = {2, 5};
  cfg.filters_per_window = 2;
  LayoutNet<double> net(s, cfg);
  auto& x = s.declare("x", {4, 13}, Group::other, nn::InitKind::gaussian);
  s.initialize(4, 0.4);
  for (const auto& bank : net.conv().banks) bank.b->value.setConstant(0.5);
  const Mat proj = random_matrix(1, 7, 5);
  auto res = nn::grad_check_params(s, [&](Tape<double>& t) { return nn::weighted_sum(net.forward(t.param(x)), proj); });
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst << " " << res.worst_analytic << " " << res.worst_numeric;
}

// ---------------------------------------------------------------------------
// Writing characteristics

TEST(WritingNet, EmbeddingIsLinearPerField) {
  nn::ParameterStore<double> s;
  WritingNet<double> net(s, WritingConfig{});
  s.initialize(6);
  FeatureRecord one, two;
  one[3] = 1.0;
  two[3] = 2.0;
  Tape<double> t;
  const Mat a = net.embed(t, one).value(), b = net.embed(t, two).value();
  EXPECT_EQ(b.row(2), (2.0 * a.row(2)).eval());
  EXPECT_EQ(a.row(0), Mat::Zero(1, 128));
  EXPECT_EQ(a.row(2), s.at("writing.field_embedding").value.row(2));
}

TEST(WritingNet, CategoryRowIsTableRow) {
  nn::ParameterStore<double> s;
  WritingNet<double> net(s, WritingConfig{});
  s.initialize(7);
  const auto& table = s.at("writing.category_table").value;
  for (int c : {5, 7}) {
    FeatureRecord r;
    r[kCategoryFeature] = c;
    Tape<double> t;
    EXPECT_EQ(net.embed(t, r).value().row(47), table.row(c));
  }
}

TEST(WritingNet, CategoryOutOfRangeIsError) {
  nn::ParameterStore<float> s;
  WritingNet<float> net(s, WritingConfig{});
  Tape<float> t;
  FeatureRecord r;
  r[kCategoryFeature] = 64;
  EXPECT_THROW(net.embed(t, r), ValidationError);
  r[kCategoryFeature] = -1;
  EXPECT_THROW(net.embed(t, r), ValidationError);
}

TEST(InteractingLayer, ThreeFieldLoopOracle) {
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    nn::ParameterStore<double> s;
    auto layer = InteractingLayer<double>::declare(s, "l", 3, 2, 2);
    s.initialize(inst, 0.7);
    const Mat e = random_matrix(3, 3, 1000 + inst);
    const Mat &Wq = layer.wq->value, &Wk = layer.wk->value, &Wv = layer.wv->value, &Wr = layer.wres->value;
    Mat expect(3, 4);
    for (int i = 0; i < 3; ++i) {
      for (int h = 0; h < 2; ++h) {
        double psi[3], z = 0.0, mx = -1e300;
        for (int j = 0; j < 3; ++j) {
          psi[j] = 0.0;
          for (int c = 0; c < 2; ++c) {
            double q = 0.0, k = 0.0;
            for (int d = 0; d < 3; ++d) {
              q += e(i, d) * Wq(d, 2 * h + c);
              k += e(j, d) * Wk(d, 2 * h + c);
            }
            psi[j] += q * k;
          }
          mx = std::max(mx, psi[j]);
        }
        for (int j = 0; j < 3; ++j) z += std::exp(psi[j] - mx);
        for (int c = 0; c < 2; ++c) {
          double r = 0.0;
          for (int j = 0; j < 3; ++j) {
            double v = 0.0;
            for (int d = 0; d < 3; ++d) v += e(j, d) * Wv(d, 2 * h + c);
            r += std::exp(psi[j] - mx) / z * v;
          }
          double res = 0.0;
          for (int d = 0; d < 3; ++d) res += e(i, d) * Wr(d, 2 * h + c);
          expect(i, 2 * h + c) = std::max(0.0, r + res);
        }
      }
    }
    Tape<double> t;
    EXPECT_LT(max_abs(layer(t.constant(e)).value() - expect), 1e-6) << inst;
  }
}

TEST(InteractingLayer, ZeroProjectionsLeaveResidual) {
  nn::ParameterStore<double> s;
  auto layer = InteractingLayer<double>::declare(s, "l", 5, 2, 3);
  s.initialize(3, 0.5);
  layer.wq->value.setZero();
  layer.wk->value.setZero();
  layer.wv->value.setZero();
  const Mat e = random_matrix(4, 5, 4);
  Tape<double> t;
  const Mat expect = (e * layer.wres->value).cwiseMax(0.0);
  EXPECT_LT(max_abs(layer(t.constant(e)).value() - expect), 1e-12);
}

TEST(InteractingLayer, GradCheck) {
  nn::ParameterStore<double> s;
  auto layer = InteractingLayer<double>::declare(s, "l", 3, 2, 2);
  auto& x = s.declare("x", {4, 3}, Group::other, nn::InitKind::gaussian);
  s.initialize(8, 0.6);
  const Mat proj = random_matrix(4, 4, 9);
  auto res = nn::grad_check_params(s, [&](Tape<double>& t) { return nn::weighted_sum(layer(t.param(x)), proj); });
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst << " " << res.worst_analytic << " " << res.worst_numeric;
}

TEST(WritingNet, OutputDimAndAttentionShape) {
  nn::ParameterStore<float> s;
  WritingNet<float> net(s, WritingConfig{});
  s.initialize(10);
  EXPECT_EQ(net.output_dim(), 12288u);
  WritingAttention<float> maps;
  Tape<float> t;
  EXPECT_EQ(net.forward(t, random_record(1), &maps).cols(), 12288);
  ASSERT_EQ(maps.size(), 3u);
  for (const auto& layer : maps) {
    ASSERT_EQ(layer.size(), 4u);
    for (const auto& a : layer) {
      EXPECT_EQ(a.rows(), 48);
      EXPECT_EQ(a.cols(), 48);
      for (Eigen::Index i = 0; i < 48; ++i) EXPECT_NEAR(a.row(i).sum(), 1.0f, 1e-6f);
    }
  }
}

TEST(WritingNet, ZeroRecordWithZeroTableGivesZeroVector) {
  nn::ParameterStore<float> s;
  WritingNet<float> net(s, WritingConfig{});
  s.initialize(11);
  s.at("writing.category_table").value.setZero();
  Tape<float> t;
  EXPECT_EQ(net.forward(t, FeatureRecord{}).value().cwiseAbs().maxCoeff(), 0.0f);
}

TEST(WritingNet, LayerOrderMatters) {
  nn::ParameterStore<double> s;
  WritingNet<double> net(s, WritingConfig{});
  s.initialize(12, 0.1);
  const auto rec = random_record(2);
  Tape<double> t;
  const Mat before = net.forward(t, rec).value();
  for (const char* w : {".Wq", ".Wk", ".Wv", ".Wres"})
    std::swap(s.at(std::string("writing.layer1") + w).value, s.at(std::string("writing.layer2") + w).value);
  Tape<double> t2;
  EXPECT_GT(max_abs(net.forward(t2, rec).value() - before), 1e-9);
}

TEST(WritingNet, CapturedAttentionIsWhatTheForwardPassUsed) {
  nn::ParameterStore<double> s;
  WritingConfig cfg;
  cfg.layers = 1;
  WritingNet<double> net(s, cfg);
  s.initialize(13, 0.1);
  const auto rec = random_record(3);
  WritingAttention<double> maps;
  Tape<double> t;
  const Mat out = net.field_rows(t, rec, &maps).value();
  // Rebuild the layer output from the captured coefficients alone.
  const auto& layer = net.layers()[0];
  const Mat e = net.embed(t, rec).value();
  const Mat v = e * layer.wv->value;
  Mat combined(48, 256);
  for (int h = 0; h < 4; ++h) combined.middleCols(h * 64, 64) = maps[0][h] * v.middleCols(h * 64, 64);
  const Mat expect = (combined + e * layer.wres->value).cwiseMax(0.0);
  EXPECT_LT(max_abs(out - expect), 1e-12);
  WritingAttention<double> again;
  Tape<double> t2;
  net.field_rows(t2, rec, &again);
  EXPECT_EQ(again[0][2], maps[0][2]);
}

// ---------------------------------------------------------------------------
// Text semantics

TEST(TextNet, IdenticalSentencesGiveIdenticalVectors) {
  nn::ParameterStore<double> s;
  TextNet<double> net(s, toy_text());
  s.initialize(1, 0.3);
  Tape<double> t;
  const auto a = net.encode_sentence(t, sentence({4, 5, 6}, 6)).value();
  const auto b = net.encode_sentence(t, sentence({4, 5, 6}, 6)).value();
  EXPECT_EQ(a, b);
  const auto c = net.encode_sentence(t, sentence({6, 5, 4}, 6)).value();
  EXPECT_GT(max_abs(a - c), 1e-9);
}

TEST(TextNet, TrimmedAndMaskedSentenceAgree) {
  nn::ParameterStore<double> s;
  TextNet<double> net(s, toy_text());
  s.initialize(2, 0.3);
  Tape<double> t;
  for (const auto& tokens : std::vector<std::vector<std::int32_t>>{{7}, {3, 9}, {4, 5, 6, 7}}) {
    const auto st = sentence(tokens, 6);
    EXPECT_LT(max_abs(val(net.encode_sentence(t, st, {}, true)) - val(net.encode_sentence(t, st, {}, false))),
              1e-12);
  }
}

TEST(TextNet, SingleTokenHeadAttendsOverTwoPositions) {
  nn::ParameterStore<double> s;
  TextNet<double> net(s, toy_text());
  s.initialize(3, 0.3);
  Tape<double> t;
  std::vector<nn::Matrix<double>> attn;
  net.encode_sentence(t, sentence({5}, 6), {}, false, &attn);
  ASSERT_FALSE(attn.empty());
  for (const auto& a : attn) {
    EXPECT_NEAR(a(0, 0) + a(0, 1), 1.0, 1e-12);
    for (Eigen::Index j = 2; j < a.cols(); ++j) EXPECT_EQ(a(0, j), 0.0);
  }
}

TEST(TextNet, TiedDirectionsSwapRolesUnderReversal) {
  nn::ParameterStore<double> s;
  TextNet<double> net(s, toy_text());
  s.initialize(4, 0.3);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::string& name = s[i].name;
    if (name.rfind("text.doc.bwd.", 0) == 0)
      s[i].value = s.at("text.doc.fwd." + name.substr(13)).value;
  }
  Tape<double> t;
  std::vector<Var<double>> seq{t.constant(random_matrix(1, 4, 1)), t.constant(random_matrix(1, 4, 2)),
                               t.constant(random_matrix(1, 4, 3))};
  std::vector<Var<double>> rev(seq.rbegin(), seq.rend());
  const Mat h = net.encode_document(seq).value(), hr = net.encode_document(rev).value();
  EXPECT_LT(max_abs(h.rightCols(4) - hr.leftCols(4)), 1e-12);
  EXPECT_LT(max_abs(h.leftCols(4) - hr.rightCols(4)), 1e-12);
}

TEST(TextNet, SingleSentenceDocument) {
  nn::ParameterStore<double> s;
  TextNet<double> net(s, toy_text());
  s.initialize(5, 0.3);
  Tape<double> t;
  const auto sv = net.encode_sentence(t, sentence({4, 4}, 6));
  const Mat h = net.encode_document({sv}).value();
  EXPECT_EQ(h.cols(), 8);
  EXPECT_TRUE(h.allFinite());
  EXPECT_THROW(net.encode_document({}), ValidationError);
}

TEST(TextNet, DimsAtDeskScale) {
  nn::ParameterStore<float> s;
  TextEncoderConfig cfg;
  cfg.vocab_size = 30;
  TextNet<float> net(s, cfg);
  s.initialize(6);
  EXPECT_EQ(net.output_dim(), 128u);
  Tape<float> t;
  EXPECT_EQ(net.forward(t, {sentence({3, 4}, 128), sentence({5}, 128)}).cols(), 128);
}

TEST(TextNet, SentenceOrderAndTruncation) {
  nn::ParameterStore<double> s;
  TextNet<double> net(s, toy_text());
  s.initialize(7, 0.3);
  std::vector<TokenizedSentence> doc{sentence({3}, 6), sentence({4, 5}, 6), sentence({6, 7, 8}, 6)};
  auto swapped = doc;
  std::swap(swapped[1], swapped[2]);
  Tape<double> t;
  EXPECT_GT(max_abs(val(net.forward(t, doc)) - val(net.forward(t, swapped))), 1e-9);
  auto longer = doc;
  for (int i = 0; i < 5; ++i) longer.push_back(sentence({9}, 6));
  auto first = std::vector<TokenizedSentence>(longer.begin(), longer.begin() + 4);
  EXPECT_EQ(val(net.forward(t, longer)), val(net.forward(t, first)));
}

TEST(TextNet, GradCheck) {
  nn::ParameterStore<double> s;
  TextNet<double> net(s, toy_text());
  s.initialize(8, 0.4);
  const std::vector<TokenizedSentence> doc{sentence({3, 4}, 6), sentence({5, 6, 7}, 6)};
  const Mat proj = random_matrix(1, 8, 9);
  auto res = nn::grad_check_params(s, [&](Tape<double>& t) { return nn::weighted_sum(net.forward(t, doc), proj); },
                                   1e-5, 24, key_bias);
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst << " " << res.worst_analytic << " " << res.worst_numeric;
}

TEST(TextNet, LossReachesSentenceEncoder) {
  CoqanModel<double> model([] {
    auto c = toy_model();
    c.active = Subnets::parse("TS");
    return c;
  }());
  model.initialize(9);
  ModelInput<double> in;
  in.sentences = {sentence({3, 4}, 6), sentence({5}, 6)};
  Tape<double> t;
  auto loss = nn::binary_cross_entropy(model.forward(t, in).probability, {1});
  t.backward(loss);
  for (const char* name : {"text.sent.token_embedding", "text.sent.block0.attn.q.W", "text.sent.block0.ff1.W"})
    EXPECT_GT(model.params().at(name).grad.cwiseAbs().maxCoeff(), 0.0) << name;
}

TEST(Model, GroupTagsFollowModule) {
  CoqanModel<float> model(full_size_model());
  const auto& s = model.params();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool text = s[i].name.rfind("text.", 0) == 0;
    EXPECT_EQ(s[i].group, text ? Group::text_encoder : Group::other) << s[i].name;
  }
}

// ---------------------------------------------------------------------------
// Fusion head and loss

TEST(FusionHead, ZeroHeadGivesHalfAndLabelOne) {
  nn::ParameterStore<double> s;
  FusionHead<double> head(s, FusionConfig{}, Subnets{}, 5, 6, 7);
  s.initialize(1, 0.3);
  head.head().w->value.setZero();
  Tape<double> t;
  const auto hf = head.fuse(t.constant(random_matrix(1, 5, 1)), t.constant(random_matrix(1, 6, 2)),
                            t.constant(random_matrix(1, 7, 3)));
  const double p = head.predict(hf).value()(0, 0);
  EXPECT_EQ(p, 0.5);
  EXPECT_EQ(label_from_probability(p), 1);
}

TEST(FusionHead, CascadeDims) {
  nn::ParameterStore<float> s;
  FusionHead<float> full(s, FusionConfig{}, Subnets{}, 228, 12288, 128);
  EXPECT_EQ(full.fused_dim(), 256u);
  nn::ParameterStore<float> s2;
  FusionHead<float> lo(s2, FusionConfig{}, Subnets::parse("LO"), 228, 0, 0);
  EXPECT_EQ(lo.fused_dim(), 64u);
  for (const auto& sub : Subnets::all_subsets()) {
    nn::ParameterStore<float> s3;
    FusionHead<float> h(s3, FusionConfig{}, sub, 228, 12288, 128);
    EXPECT_EQ(h.fused_dim(), (sub.layout ? 64u : 0u) + (sub.writing ? 64u : 0u) + (sub.text ? 128u : 0u));
  }
}

TEST(FusionHead, MissingActiveInputIsError) {
  nn::ParameterStore<double> s;
  FusionHead<double> head(s, FusionConfig{}, Subnets{}, 5, 6, 7);
  Tape<double> t;
  EXPECT_THROW(head.fuse(t.constant(random_matrix(1, 5, 1)), std::nullopt, t.constant(random_matrix(1, 7, 3))),
               ValidationError);
}

TEST(Loss, Examples) {
  Tape<double> t;
  Mat p(2, 1);
  p << 0.9, 0.2;
  EXPECT_NEAR(nn::binary_cross_entropy(t.constant(p), {1, 0}).value()(0, 0), 0.1643, 5e-5);
  Mat half(1, 1);
  half << 0.5;
  EXPECT_NEAR(nn::binary_cross_entropy(t.constant(half), {1}).value()(0, 0), 0.6931, 5e-5);
  Mat zero(1, 1);
  zero << 0.0;
  EXPECT_LT(nn::binary_cross_entropy(t.constant(zero), {0}).value()(0, 0), 1e-6);
}

TEST(FusionHead, GradCheckThroughLoss) {
  nn::ParameterStore<double> s;
  FusionHead<double> head(s, FusionConfig{4, 3, 5}, Subnets{}, 5, 6, 7);
  auto& hl = s.declare("hl", {5}, Group::other, nn::InitKind::gaussian);
  auto& hw = s.declare("hw", {6}, Group::other, nn::InitKind::gaussian);
  auto& hd = s.declare("hd", {7}, Group::other, nn::InitKind::gaussian);
  s.initialize(2, 0.5);
  head.head().b->value.setConstant(0.1);
  auto res = nn::grad_check_params(s, [&](Tape<double>& t) {
    return nn::binary_cross_entropy(head.predict(head.fuse(t.param(hl), t.param(hw), t.param(hd))), {1});
  });
  EXPECT_LT(res.max_rel_error, 1e-5) << res.worst << " " << res.worst_analytic << " " << res.worst_numeric;
}

TEST(Model, JointGradCheck) {
  CoqanModel<double> model(toy_model());
  model.initialize(3);
  ModelInput<double> in;
  in.layout = random_matrix(3, 13, 4);
  in.features = random_record(5, 2);
  in.sentences = {sentence({3, 4}, 6), sentence({5, 6, 7}, 6)};
  auto res = nn::grad_check_params(
      model.params(), [&](Tape<double>& t) { return nn::binary_cross_entropy(model.forward(t, in).probability, {0}); },
      1e-5, 12, key_bias);
  EXPECT_LT(res.max_rel_error, 5e-4) << res.worst << " " << res.worst_analytic << " " << res.worst_numeric;
  EXPECT_GT(res.checked, 100u);
}

TEST(Model, FullSizeShapes) {
  CoqanModel<float> model(full_size_model());
  model.initialize(1);
  ModelInput<float> in;
  in.layout = MatF::Random(5, 13);
  in.features = random_record(6);
  in.sentences = {sentence({3, 4}, 128)};
  Tape<float> t;
  const auto tr = model.forward(t, in);
  EXPECT_EQ(tr.h_l->cols(), 228);
  EXPECT_EQ(tr.h_w->cols(), 12288);
  EXPECT_EQ(tr.h_d->cols(), 128);
  EXPECT_EQ(tr.h_f.cols(), 256);
  EXPECT_EQ(tr.probability.rows(), 1);
  EXPECT_EQ(tr.probability.cols(), 1);
}
