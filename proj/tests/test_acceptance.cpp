// Acceptance suite. One test per release criterion; each prints a
// [ACCEPT] line on success so the run reads as a checklist.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "stancefusion/stancefusion.hpp"

#include "helpers/eigen_compare.hpp"
#include "helpers/oracles.hpp"
#include "helpers/run_cli.hpp"
#include "helpers/synthetic_corpus.hpp"
#include "helpers/temp_dir.hpp"

namespace fs = std::filesystem;
using namespace stancefusion;
using testhelpers::run_cli;
using testhelpers::TempDir;

namespace {

void accept(int criterion, const std::string& what) {
  ASSERT_FALSE(::testing::Test::HasFailure());
  std::cout << "[ACCEPT] criterion " << criterion << ": " << what << " -- PASS\n";
}

SequencePair make_labeled(std::string first, std::string second, Label label, std::string id) {
  SequencePair p;
  p.first = std::move(first);
  p.second = std::move(second);
  p.label = label;
  p.post_id = std::move(id);
  return p;
}

}  // namespace

// 1. Metrics oracle: the published confusion matrix reproduces the
// headline metrics (macro-F1 63.94, accuracy 86.69) and the per-class F1
// column within one rounding unit.
TEST(Acceptance, Criterion1_MetricsOracle) {
  ConfusionMatrix cm;
  cm.counts = {{{53, 4, 1, 99}, {1, 52, 3, 45}, {14, 6, 52, 21}, {1, 26, 22, 1427}}};
  const Scores s = scores(cm);
  ASSERT_NEAR(s.macro_f1, 0.6394, 0.0005);
  ASSERT_NEAR(s.accuracy, 0.8669, 0.0005);
  ASSERT_NEAR(s.per_class_f1[label_index(Label::deny)], 0.55, 0.01);
  ASSERT_NEAR(s.per_class_f1[label_index(Label::query)], 0.60, 0.01);
  ASSERT_NEAR(s.per_class_f1[label_index(Label::comment)], 0.93, 0.01);
  accept(1, "confusion-matrix oracle reproduces macro-F1 63.94 / accuracy 86.69");
}

// 2. Golden rendering tests: the four training-example strings, byte for
// byte (single-space join for nested replies).
TEST(Acceptance, Criterion2_GoldenTrainingExamples) {
  const char* source_text =
      "Darren Wilson is a six year veteran of the #Ferguson Police and had no disciplinary "
      "actions against him.";
  Thread thread;
  thread.source = Post{"te1", source_text, std::nullopt, Platform::twitter, Label::support};
  thread.replies = {
      Post{"te2", "Can we see video proof", "te1", Platform::twitter, Label::query},
      Post{"te3", "HE ISN'T THE SHOOTER RT [MENTION]", "te1", Platform::twitter, Label::comment},
      Post{"te4", "[MENTION] well who is #Ferguson", "te3", Platform::twitter, Label::comment},
  };

  const std::string te1 = render_encoder_input(build_training_example(thread.source, thread));
  const std::string te2 = render_encoder_input(build_training_example(thread.replies[0], thread));
  const std::string te3 = render_encoder_input(build_training_example(thread.replies[1], thread));
  const std::string te4 = render_encoder_input(build_training_example(thread.replies[2], thread));

  ASSERT_EQ(te1,
            "<s> Darren Wilson is a six year veteran of the #Ferguson Police and had no "
            "disciplinary actions against him. </s> </s> </s>");
  ASSERT_EQ(te2,
            "<s> Can we see video proof </s> </s> Darren Wilson is a six year veteran of the "
            "#Ferguson Police and had no disciplinary actions against him. </s>");
  ASSERT_EQ(te3,
            "<s> HE ISN'T THE SHOOTER RT [MENTION] </s> </s> Darren Wilson is a six year "
            "veteran of the #Ferguson Police and had no disciplinary actions against him. </s>");
  ASSERT_EQ(te4,
            "<s> [MENTION] well who is #Ferguson HE ISN'T THE SHOOTER RT [MENTION] </s> </s> "
            "Darren Wilson is a six year veteran of the #Ferguson Police and had no "
            "disciplinary actions against him. </s>");
  accept(2, "all four golden training-example strings render byte-for-byte");
}

// 3. TF-IDF oracle equivalence on >= 100 random corpora within 1e-12.
TEST(Acceptance, Criterion3_TfidfOracleEquivalence) {
  Rng rng(777);
  const std::vector<std::string> terms = {"t0", "t1", "t2", "t3", "t4",
                                          "t5", "t6", "t7", "t8", "t9"};
  int corpora_checked = 0;
  while (corpora_checked < 100) {
    const std::size_t n_docs = 1 + rng.uniform_index(5);
    std::vector<std::string> docs;
    bool any = false;
    for (std::size_t d = 0; d < n_docs; ++d) {
      std::string doc;
      const std::size_t len = rng.uniform_index(8);
      for (std::size_t i = 0; i < len; ++i) {
        if (!doc.empty()) doc += ' ';
        doc += terms[rng.uniform_index(terms.size())];
      }
      any = any || !doc.empty();
      docs.push_back(std::move(doc));
    }
    if (!any) continue;
    ++corpora_checked;

    const TfidfModel model = fit_tfidf(docs);
    const auto oracle = oracles::TfidfOracle::fit(docs);
    for (const std::string& doc : docs) {
      const Eigen::VectorXd ours = transform_tfidf(model, doc).dense();
      const auto expected = oracle.transform(doc);
      ASSERT_EQ(ours.size(), static_cast<Eigen::Index>(expected.size()));
      for (Eigen::Index i = 0; i < ours.size(); ++i) {
        ASSERT_NEAR(ours[i], expected[static_cast<std::size_t>(i)], 1e-12);
      }
    }
  }
  accept(3, "TF-IDF matches the brute-force oracle on 100 random corpora (1e-12)");
}

// 4. Gradient checks: analytic vs central finite differences, relative
// error < 1e-4, >= 20 random small instances across MLP and fusion paths.
TEST(Acceptance, Criterion4_GradientChecks) {
  Rng rng(888);
  int instances = 0;

  // MLP parameters
  for (int trial = 0; trial < 12; ++trial) {
    const int input_dim = 2 + static_cast<int>(rng.uniform_index(9));
    const int hidden = 2 + static_cast<int>(rng.uniform_index(5));
    MlpModel model = init_mlp(input_dim, hidden, rng.next_u64());
    for (Eigen::Index i = 0; i < model.b1.size(); ++i) model.b1[i] = rng.uniform(-0.3, 0.3);
    CostWeights weights;
    for (int i = 0; i < 4; ++i) weights.w[i] = rng.uniform(0.2, 2.0);
    std::vector<LabeledVector> batch;
    for (std::size_t i = 0; i < 1 + rng.uniform_index(4); ++i) {
      SparseVec x;
      x.dim = input_dim;
      for (int d = 0; d < input_dim; ++d) {
        if (rng.uniform() < 0.7) x.entries.emplace_back(d, rng.uniform(-1.0, 1.0));
      }
      batch.push_back({std::move(x), label_from_index(static_cast<int>(rng.uniform_index(4)))});
    }
    std::vector<const LabeledVector*> ptrs;
    for (const auto& ex : batch) ptrs.push_back(&ex);
    MlpGradients grads;
    mlp_batch_loss_and_gradients(model, ptrs, weights, &grads);
    const Eigen::VectorXd numeric = oracles::finite_difference_gradient(
        detail::flatten_mlp_params(model),
        [&](const Eigen::VectorXd& p) {
          MlpModel probe = model;
          detail::unflatten_mlp_params(p, probe);
          return mlp_batch_loss_and_gradients(probe, ptrs, weights, nullptr);
        },
        1e-5);
    ASSERT_LT(oracles::max_relative_error(detail::flatten_mlp(grads), numeric), 1e-4);
    ++instances;
  }

  // fusion head (+ encoder parameters through the trainable toy backend)
  const auto pairs = std::vector<SequencePair>{
      make_labeled("confirmed official evidence", "", Label::support, "a1"),
      make_labeled("fake hoax lies", "confirmed story", Label::deny, "a2"),
      make_labeled("really proof when", "some target", Label::query, "a3"),
      make_labeled("wow interesting anyway", "another", Label::comment, "a4"),
  };
  std::vector<std::string> docs;
  for (const auto& p : pairs) docs.push_back(pair_text(p, TfidfConfig{}));
  auto tfidf = std::make_shared<const TfidfModel>(fit_tfidf(docs));

  for (int trial = 0; trial < 10; ++trial) {
    auto encoder = std::make_shared<TrainableToyEncoder>(4);
    Eigen::VectorXd perturbed = encoder->params();
    for (Eigen::Index i = 0; i < perturbed.size(); ++i) perturbed[i] += rng.uniform(-0.2, 0.2);
    encoder->set_params(perturbed);
    auto mlp = std::make_shared<MlpModel>(
        init_mlp(tfidf->vocab_size(), 4, rng.next_u64(), tfidf));

    FusionModel model;
    model.encoder = encoder;
    model.source = FeatureSource{FeatureSourceKind::joint_mlp_output, tfidf, nullptr, mlp};
    const Eigen::Index width = 4 + 4;
    model.w = Eigen::MatrixXd(width, 4);
    for (Eigen::Index r = 0; r < width; ++r) {
      for (int c = 0; c < 4; ++c) model.w(r, c) = rng.uniform(-0.5, 0.5);
    }
    CostWeights weights;
    std::vector<const SequencePair*> batch;
    for (const auto& p : pairs) batch.push_back(&p);

    FusionGradients grads;
    fusion_batch_loss_and_gradients(model, batch, weights, true, true, &grads);

    // head
    Eigen::VectorXd head_analytic(width * 4 + 4);
    head_analytic.head(width * 4) = Eigen::Map<const Eigen::VectorXd>(grads.w.data(), width * 4);
    head_analytic.tail(4) = grads.b;
    Eigen::VectorXd head_params(width * 4 + 4);
    head_params.head(width * 4) = Eigen::Map<const Eigen::VectorXd>(model.w.data(), width * 4);
    head_params.tail(4) = model.b;
    Eigen::VectorXd head_numeric = oracles::finite_difference_gradient(
        head_params,
        [&](const Eigen::VectorXd& p) {
          FusionModel probe = model;
          probe.w = Eigen::Map<const Eigen::MatrixXd>(p.data(), width, 4);
          probe.b = p.tail(4);
          return fusion_batch_loss_and_gradients(probe, batch, weights, false, false, nullptr);
        },
        1e-5);
    ASSERT_LT(oracles::max_relative_error(head_analytic, head_numeric), 1e-4);

    // joint MLP
    ASSERT_TRUE(grads.mlp.has_value());
    Eigen::VectorXd mlp_numeric = oracles::finite_difference_gradient(
        detail::flatten_mlp_params(*mlp),
        [&](const Eigen::VectorXd& p) {
          MlpModel probe_mlp = *mlp;
          detail::unflatten_mlp_params(p, probe_mlp);
          FusionModel probe = model;
          probe.source.mlp = std::make_shared<MlpModel>(std::move(probe_mlp));
          return fusion_batch_loss_and_gradients(probe, batch, weights, false, false, nullptr);
        },
        1e-5);
    ASSERT_LT(oracles::max_relative_error(detail::flatten_mlp(*grads.mlp), mlp_numeric), 1e-4);

    // encoder parameters
    ASSERT_GT(grads.encoder.size(), 0);
    Eigen::VectorXd enc_numeric = oracles::finite_difference_gradient(
        encoder->params(),
        [&](const Eigen::VectorXd& p) {
          auto probe_enc = std::make_shared<TrainableToyEncoder>(4);
          probe_enc->set_params(p);
          FusionModel probe = model;
          probe.encoder = probe_enc;
          return fusion_batch_loss_and_gradients(probe, batch, weights, false, false, nullptr);
        },
        1e-5);
    ASSERT_LT(oracles::max_relative_error(grads.encoder, enc_numeric), 1e-4);
    ++instances;
  }

  ASSERT_GE(instances, 20);
  accept(4, "analytic gradients match finite differences (<1e-4) on " +
                std::to_string(instances) + " instances");
}

// 5. Width invariant: encoder 768 + frozen hidden 128 = 896; all six
// feature sources report their declared widths.
TEST(Acceptance, Criterion5_FusionWidths) {
  auto tfidf = std::make_shared<const TfidfModel>(
      fit_tfidf({"alpha beta gamma", "delta epsilon", "zeta eta theta", "iota kappa"}));
  std::vector<LabeledVector> vecs;
  int i = 0;
  for (const char* doc : {"alpha beta", "delta zeta", "eta iota", "kappa gamma"}) {
    vecs.push_back({transform_tfidf(*tfidf, std::string(doc)), label_from_index(i++ % 4)});
  }
  MlpHyperparams hp;
  hp.hidden_units = 128;
  hp.epochs = 1;
  auto mlp = std::make_shared<MlpModel>(train_mlp(vecs, {}, hp, tfidf).model);
  std::vector<SparseVec> raw;
  for (const auto& v : vecs) raw.push_back(v.x);
  auto pca = std::make_shared<const PcaModel>(reduce_pca(raw, 3).model);

  EXPECT_EQ(FeatureSource{}.feature_dim(), 0);
  EXPECT_EQ((FeatureSource{FeatureSourceKind::raw_tfidf, tfidf, nullptr, nullptr}).feature_dim(),
            tfidf->vocab_size());
  EXPECT_EQ((FeatureSource{FeatureSourceKind::pca_tfidf, tfidf, pca, nullptr}).feature_dim(), 3);
  EXPECT_EQ((FeatureSource{FeatureSourceKind::joint_mlp_output, tfidf, nullptr, mlp}).feature_dim(),
            4);
  EXPECT_EQ(
      (FeatureSource{FeatureSourceKind::frozen_mlp_output, tfidf, nullptr, mlp}).feature_dim(), 4);
  FeatureSource hidden{FeatureSourceKind::frozen_mlp_hidden, tfidf, nullptr, mlp};
  EXPECT_EQ(hidden.feature_dim(), 128);

  FusionModel model;
  model.encoder = std::make_shared<ToyEncoder>(768);
  model.source = hidden;
  model.w = Eigen::MatrixXd::Zero(896, 4);
  SequencePair probe;
  probe.first = "alpha";
  probe.label = Label::support;
  ASSERT_NO_THROW(fusion_forward(model, probe));
  ASSERT_EQ(model.encoder->dim() + model.source.feature_dim(), 896);

  model.w = Eigen::MatrixXd::Zero(895, 4);
  ASSERT_THROW(fusion_forward(model, probe), DimensionMismatch);
  accept(5, "encoder 768 + hidden 128 gives head width 896; all six source widths declared");
}

// 6. Frozen-MLP contract: training the ensemble leaves the MLP bit-identical
// and feature vectors unchanged on a probe set.
TEST(Acceptance, Criterion6_FrozenMlpContract) {
  Rng rng(606);
  std::vector<SequencePair> train;
  for (int i = 0; i < 24; ++i) {
    const Label label = label_from_index(i % 4);
    train.push_back(make_labeled(testhelpers::class_text(label, rng), "", label,
                                 "fz" + std::to_string(i)));
  }
  std::vector<std::string> docs;
  for (const auto& p : train) docs.push_back(pair_text(p, TfidfConfig{}));
  auto tfidf = std::make_shared<const TfidfModel>(fit_tfidf(docs));
  std::vector<LabeledVector> vecs;
  for (const auto& p : train) vecs.push_back({transform_tfidf(*tfidf, p), *p.label});
  MlpHyperparams mlp_hp;
  mlp_hp.hidden_units = 12;
  mlp_hp.epochs = 20;
  auto mlp = std::make_shared<MlpModel>(train_mlp(vecs, {}, mlp_hp, tfidf).model);

  const std::uint64_t checksum_before = mlp_param_checksum(*mlp);
  FeatureSource source{FeatureSourceKind::frozen_mlp_hidden, tfidf, nullptr, mlp};
  std::vector<Eigen::VectorXd> probe_before;
  for (int i = 0; i < 6; ++i) probe_before.push_back(feature_vector(source, train[static_cast<std::size_t>(i)]));

  EnsembleHyperparams hp;
  hp.learning_rate = 1e-2;
  hp.freeze_mlp = true;
  const auto result = train_ensemble(train, {}, std::make_shared<ToyEncoder>(8), source, hp);

  ASSERT_EQ(mlp_param_checksum(*mlp), checksum_before);
  for (int i = 0; i < 6; ++i) {
    ASSERT_TRUE(testhelpers::exact_equal(
        feature_vector(result.model.source, train[static_cast<std::size_t>(i)]),
        probe_before[static_cast<std::size_t>(i)]));
  }
  accept(6, "freeze_mlp keeps MLP parameters bit-identical and probe features unchanged");
}

// 7. End-to-end toy pipeline through the CLI on a bundled synthetic corpus:
// convert -> train-mlp -> train-ensemble (2 seeds) -> evaluate, exit 0,
// train accuracy >= 0.9, bit-identical reruns.
TEST(Acceptance, Criterion7_EndToEndToyPipeline) {
  TempDir dir("accept_e2e");
  const fs::path raw = dir / "raw";
  // ~60 posts: 8 train threads + 2 dev + 2 test, 5 posts each
  testhelpers::write_split_dir(raw / "train", Split::train,
                               testhelpers::make_separable_threads(8, "tr", 4101));
  testhelpers::write_split_dir(raw / "dev", Split::dev,
                               testhelpers::make_separable_threads(2, "dv", 4202));
  testhelpers::write_split_dir(raw / "test", Split::test,
                               testhelpers::make_separable_threads(2, "te", 4303));

  auto run_pipeline = [&](const fs::path& workdir) {
    const fs::path canonical = workdir / "canonical";
    const fs::path artifacts = workdir / "artifacts";
    nlohmann::ordered_json cfg;
    cfg["data"] = {{"raw_dir", raw.string()}, {"canonical_dir", canonical.string()}};
    cfg["encoder"] = {{"name", "toy"}, {"dim", 16}};
    cfg["feature_source"] = "frozen_mlp_hidden";
    // opinion-only vectorization keeps the synthetic classes separable
    cfg["tfidf"] = {{"include_pair_second", false}};
    cfg["mlp"] = {{"learning_rate", 0.02}, {"epochs", 55}, {"hidden_units", 16},
                  {"batch_size", 8}, {"seed", 7}};
    cfg["ensemble"] = {{"epochs", 6}, {"learning_rate", 1e-2}, {"batch_size", 4},
                       {"seeds", {1, 2}}};
    cfg["cost_weights"] = {{"mode", "auto"}};
    cfg["output_dir"] = artifacts.string();
    fs::create_directories(workdir);
    const fs::path config_path = workdir / "config.json";
    std::ofstream(config_path) << cfg.dump(2);

    for (const Split split : {Split::train, Split::dev, Split::test}) {
      const std::string name(split_name(split));
      const auto convert = run_cli("convert --raw " + (raw / name).string() + " --split " + name +
                                   " --out " + (canonical / (name + ".jsonl")).string());
      EXPECT_EQ(convert.exit_code, 0) << convert.output;
    }
    const auto mlp = run_cli("train-mlp --config " + config_path.string());
    EXPECT_EQ(mlp.exit_code, 0) << mlp.output;
    const auto ensemble = run_cli("train-ensemble --config " + config_path.string());
    EXPECT_EQ(ensemble.exit_code, 0) << ensemble.output;
    const auto eval_test = run_cli("evaluate --config " + config_path.string() + " --split test");
    EXPECT_EQ(eval_test.exit_code, 0) << eval_test.output;
    const auto eval_train =
        run_cli("evaluate --config " + config_path.string() + " --split train");
    EXPECT_EQ(eval_train.exit_code, 0) << eval_train.output;
    return artifacts;
  };

  const auto started = std::chrono::steady_clock::now();
  const fs::path first = run_pipeline(dir / "run1");
  const fs::path second = run_pipeline(dir / "run2");
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  EXPECT_LT(seconds, 120.0);

  // train accuracy of the selected ensemble on the separable corpus
  const auto train_report = read_json_artifact(first / "eval" / "train_report.json");
  EXPECT_GE(train_report.at("accuracy").get<double>(), 0.9);

  // bit-identical artifacts across reruns with identical seeds
  for (const char* name :
       {"tfidf.json", "mlp.json", "fusion.json", "dev_report.json", "seeds/seed-1/fusion.json",
        "seeds/seed-2/fusion.json", "eval/train_report.json", "eval/test_report.json"}) {
    ASSERT_TRUE(fs::exists(first / name)) << name;
    EXPECT_EQ(checksum_file(first / name), checksum_file(second / name)) << name;
  }
  accept(7, "CLI pipeline runs end-to-end, train accuracy >= 0.9, reruns bit-identical");
}

// 8. Selection protocol: argmax dev macro-F1, low-seed tie-break,
// permutation invariance.
TEST(Acceptance, Criterion8_SeedSelectionProtocol) {
  struct Run {
    std::uint64_t seed;
    EvalReport dev_report;
  };
  auto with = [](std::uint64_t seed, double macro) {
    Run r;
    r.seed = seed;
    r.dev_report.macro_f1 = macro;
    return r;
  };
  std::vector<Run> runs = {with(1, 0.50), with(2, 0.58), with(3, 0.55), with(4, 0.58),
                           with(5, 0.52)};
  ASSERT_EQ(runs[select_best_seed(runs)].seed, 2u);
  Rng rng(808);
  for (int trial = 0; trial < 20; ++trial) {
    rng.shuffle(runs);
    ASSERT_EQ(runs[select_best_seed(runs)].seed, 2u);
  }
  const std::vector<Run> single = {with(9, 0.01)};
  ASSERT_EQ(select_best_seed(single), 0u);
  accept(8, "best-on-dev selection with low-seed tie-break is permutation-invariant");
}

// 9. Full-scale reproduction is out of desk reach (licensed dataset + GPU
// fine-tuning); the README documents the exact commands, and criterion 1
// stands in as the metric-side oracle. This test pins the documentation.
TEST(Acceptance, Criterion9_FullScaleRunIsDocumentedNotAsserted) {
  const fs::path readme = fs::path(STANCEFUSION_SOURCE_DIR) / "README.md";
  ASSERT_TRUE(fs::exists(readme));
  std::ifstream in(readme);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  for (const char* needle : {"roberta-large", "train-ensemble", "RumourEval", "63.94"}) {
    ASSERT_NE(text.find(needle), std::string::npos) << "README must mention " << needle;
  }
  accept(9, "full-scale run documented as out of desk scope; metrics oracle stands in");
}
