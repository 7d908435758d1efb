#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "stancefusion/eval.hpp"
#include "stancefusion/hashing.hpp"

using namespace stancefusion;

namespace {

// published confusion matrix of the strongest reported model
// (rows gold, columns predicted, canonical label order)
ConfusionMatrix reference_matrix() {
  ConfusionMatrix cm;
  cm.counts = {{{53, 4, 1, 99}, {1, 52, 3, 45}, {14, 6, 52, 21}, {1, 26, 22, 1427}}};
  return cm;
}

struct FakeRun {
  std::uint64_t seed;
  EvalReport dev_report;
};

FakeRun run_with(std::uint64_t seed, double macro) {
  FakeRun run;
  run.seed = seed;
  run.dev_report.macro_f1 = macro;
  return run;
}

}  // namespace

TEST(ConfusionMatrixOp, IdentityDiagonalForPerfectPreds) {
  const std::vector<Label> labels = {Label::support, Label::deny, Label::query, Label::comment};
  const ConfusionMatrix cm = confusion_matrix(labels, labels);
  for (std::size_t g = 0; g < 4; ++g) {
    for (std::size_t p = 0; p < 4; ++p) {
      EXPECT_EQ(cm.counts[g][p], g == p ? 1 : 0);
    }
  }
}

TEST(ConfusionMatrixOp, HandCountedCommentRow) {
  const std::vector<Label> golds = {Label::comment, Label::comment, Label::comment};
  const std::vector<Label> preds = {Label::comment, Label::deny, Label::query};
  const ConfusionMatrix cm = confusion_matrix(preds, golds);
  const std::size_t row = static_cast<std::size_t>(label_index(Label::comment));
  EXPECT_EQ(cm.counts[row][0], 0);
  EXPECT_EQ(cm.counts[row][1], 1);
  EXPECT_EQ(cm.counts[row][2], 1);
  EXPECT_EQ(cm.counts[row][3], 1);
}

TEST(ConfusionMatrixOp, PermutationInvariant) {
  Rng rng(71);
  std::vector<Label> preds;
  std::vector<Label> golds;
  for (int i = 0; i < 40; ++i) {
    preds.push_back(label_from_index(static_cast<int>(rng.uniform_index(4))));
    golds.push_back(label_from_index(static_cast<int>(rng.uniform_index(4))));
  }
  const ConfusionMatrix base = confusion_matrix(preds, golds);
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<Label> preds2;
  std::vector<Label> golds2;
  for (std::size_t i : order) {
    preds2.push_back(preds[i]);
    golds2.push_back(golds[i]);
  }
  EXPECT_EQ(confusion_matrix(preds2, golds2), base);
}

TEST(ConfusionMatrixOp, ErrorsOnBadInput) {
  EXPECT_THROW(confusion_matrix({Label::deny}, {}), LengthMismatch);
  EXPECT_THROW(confusion_matrix({}, {}), EmptyInput);
}

TEST(Scores, ReferenceMatrixReproducesPublishedMetrics) {
  const Scores s = scores(reference_matrix());
  EXPECT_NEAR(s.macro_f1, 0.6394, 0.0005);
  EXPECT_NEAR(s.accuracy, 0.8670, 0.0005);
  EXPECT_NEAR(s.per_class_f1[label_index(Label::support)], 0.469, 0.001);
  EXPECT_NEAR(s.per_class_f1[label_index(Label::deny)], 0.550, 0.001);
  EXPECT_NEAR(s.per_class_f1[label_index(Label::query)], 0.608, 0.001);
  EXPECT_NEAR(s.per_class_f1[label_index(Label::comment)], 0.930, 0.001);
}

TEST(Scores, PerfectMatrixScoresOne) {
  ConfusionMatrix cm;
  cm.counts = {{{5, 0, 0, 0}, {0, 7, 0, 0}, {0, 0, 2, 0}, {0, 0, 0, 9}}};
  const Scores s = scores(cm);
  for (double f1 : s.per_class_f1) EXPECT_DOUBLE_EQ(f1, 1.0);
  EXPECT_DOUBLE_EQ(s.macro_f1, 1.0);
  EXPECT_DOUBLE_EQ(s.accuracy, 1.0);
}

TEST(Scores, ZeroDenominatorsYieldZeroF1) {
  ConfusionMatrix cm;
  // no gold deny, nothing predicted deny
  cm.counts = {{{3, 0, 0, 1}, {0, 0, 0, 0}, {0, 0, 2, 0}, {1, 0, 0, 5}}};
  const Scores s = scores(cm);
  EXPECT_DOUBLE_EQ(s.per_class_f1[label_index(Label::deny)], 0.0);
  EXPECT_GT(s.per_class_f1[label_index(Label::support)], 0.0);
}

TEST(Scores, ScaleFree) {
  const ConfusionMatrix base = reference_matrix();
  ConfusionMatrix scaled = base;
  for (auto& row : scaled.counts) {
    for (auto& c : row) c *= 7;
  }
  const Scores a = scores(base);
  const Scores b = scores(scaled);
  EXPECT_DOUBLE_EQ(a.macro_f1, b.macro_f1);
  EXPECT_DOUBLE_EQ(a.accuracy, b.accuracy);
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    EXPECT_DOUBLE_EQ(a.per_class_f1[c], b.per_class_f1[c]);
  }
}

TEST(Scores, MacroIsExactlyTheMeanOfPerClassF1) {
  Rng rng(72);
  for (int trial = 0; trial < 30; ++trial) {
    ConfusionMatrix cm;
    for (auto& row : cm.counts) {
      for (auto& c : row) c = static_cast<std::int64_t>(rng.uniform_index(20));
    }
    if (cm.total() == 0) continue;
    const Scores s = scores(cm);
    const double mean =
        (s.per_class_f1[0] + s.per_class_f1[1] + s.per_class_f1[2] + s.per_class_f1[3]) / 4.0;
    EXPECT_DOUBLE_EQ(s.macro_f1, mean);
  }
}

TEST(Scores, MatchesBruteForceRecomputationFromRawPairs) {
  Rng rng(73);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(30);
    std::vector<Label> preds;
    std::vector<Label> golds;
    for (std::size_t i = 0; i < n; ++i) {
      preds.push_back(label_from_index(static_cast<int>(rng.uniform_index(4))));
      golds.push_back(label_from_index(static_cast<int>(rng.uniform_index(4))));
    }
    const Scores s = scores(confusion_matrix(preds, golds));

    // independent recomputation straight from the pairs
    double f1_sum = 0.0;
    int correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += preds[i] == golds[i] ? 1 : 0;
    for (int c = 0; c < 4; ++c) {
      int tp = 0;
      int pred_c = 0;
      int gold_c = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool p = label_index(preds[i]) == c;
        const bool g = label_index(golds[i]) == c;
        tp += (p && g) ? 1 : 0;
        pred_c += p ? 1 : 0;
        gold_c += g ? 1 : 0;
      }
      const double precision = pred_c > 0 ? static_cast<double>(tp) / pred_c : 0.0;
      const double recall = gold_c > 0 ? static_cast<double>(tp) / gold_c : 0.0;
      const double f1 =
          precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
      ASSERT_NEAR(s.per_class_f1[static_cast<std::size_t>(c)], f1, 1e-12);
      f1_sum += f1;
    }
    ASSERT_NEAR(s.macro_f1, f1_sum / 4.0, 1e-12);
    ASSERT_NEAR(s.accuracy, static_cast<double>(correct) / static_cast<double>(n), 1e-12);
  }
}

TEST(SelectBestSeed, ArgmaxWithLowSeedTieBreak) {
  const std::vector<FakeRun> runs = {run_with(1, 0.50), run_with(2, 0.58), run_with(3, 0.55),
                                     run_with(4, 0.58), run_with(5, 0.52)};
  EXPECT_EQ(runs[select_best_seed(runs)].seed, 2u);
}

TEST(SelectBestSeed, SingleRunWins) {
  const std::vector<FakeRun> runs = {run_with(9, 0.1)};
  EXPECT_EQ(select_best_seed(runs), 0u);
}

TEST(SelectBestSeed, PermutationInvariant) {
  std::vector<FakeRun> runs = {run_with(5, 0.52), run_with(4, 0.58), run_with(2, 0.58),
                               run_with(1, 0.50), run_with(3, 0.55)};
  EXPECT_EQ(runs[select_best_seed(runs)].seed, 2u);
  std::reverse(runs.begin(), runs.end());
  EXPECT_EQ(runs[select_best_seed(runs)].seed, 2u);
}

TEST(SelectBestSeed, EmptyIsRejected) {
  const std::vector<FakeRun> runs;
  EXPECT_THROW(select_best_seed(runs), EmptyInput);
}

TEST(ErrorReportBuilder, PerfectPredictionsHaveNoExhibits) {
  std::vector<SequencePair> pairs;
  std::vector<Label> preds;
  for (int i = 0; i < 8; ++i) {
    SequencePair p;
    p.first = "text " + std::to_string(i);
    p.post_id = "id" + std::to_string(i);
    p.label = label_from_index(i % 4);
    pairs.push_back(p);
    preds.push_back(label_from_index(i % 4));
  }
  const EvalReport report = make_eval_report(preds, pairs, 5);
  EXPECT_TRUE(report.exhibits.empty());
  EXPECT_DOUBLE_EQ(report.accuracy, 1.0);
}

TEST(ErrorReportBuilder, SingleKnownMisclassificationIsExhibited) {
  std::vector<SequencePair> pairs;
  std::vector<Label> preds;
  for (int i = 0; i < 4; ++i) {
    SequencePair p;
    p.first = "reply " + std::to_string(i);
    p.second = "target " + std::to_string(i);
    p.post_id = "id" + std::to_string(i);
    p.label = label_from_index(i);
    pairs.push_back(p);
    preds.push_back(label_from_index(i));
  }
  preds[2] = Label::comment;  // gold query predicted comment
  const EvalReport report = make_eval_report(preds, pairs, 3);
  ASSERT_EQ(report.exhibits.size(), 1u);
  EXPECT_EQ(report.exhibits[0].post_id, "id2");
  EXPECT_EQ(report.exhibits[0].reply_text, "reply 2");
  EXPECT_EQ(report.exhibits[0].target_text, "target 2");
  EXPECT_EQ(report.exhibits[0].predicted, Label::comment);
  EXPECT_EQ(report.exhibits[0].gold, Label::query);
}

TEST(ErrorReportBuilder, KZeroKeepsMetricsOnly) {
  std::vector<SequencePair> pairs;
  std::vector<Label> preds;
  for (int i = 0; i < 4; ++i) {
    SequencePair p;
    p.first = "x";
    p.post_id = std::to_string(i);
    p.label = Label::support;
    pairs.push_back(p);
    preds.push_back(Label::deny);
  }
  const EvalReport report = make_eval_report(preds, pairs, 0);
  EXPECT_TRUE(report.exhibits.empty());
  EXPECT_DOUBLE_EQ(report.accuracy, 0.0);
}

TEST(ErrorReportBuilder, PerCellCapIsRespected) {
  std::vector<SequencePair> pairs;
  std::vector<Label> preds;
  for (int i = 0; i < 10; ++i) {
    SequencePair p;
    p.first = "x" + std::to_string(i);
    p.post_id = std::to_string(i);
    p.label = Label::support;
    pairs.push_back(p);
    preds.push_back(Label::deny);  // ten misses in the same (gold, pred) cell
  }
  const EvalReport report = make_eval_report(preds, pairs, 2);
  EXPECT_EQ(report.exhibits.size(), 2u);
}

TEST(FormatReport, RendersMatrixAndSummary) {
  EvalReport report;
  report.cm = reference_matrix();
  const Scores s = scores(report.cm);
  report.per_class_f1 = s.per_class_f1;
  report.macro_f1 = s.macro_f1;
  report.accuracy = s.accuracy;
  const std::string text = format_report(report);
  EXPECT_NE(text.find("1427"), std::string::npos);
  EXPECT_NE(text.find("macro_f1=0.639"), std::string::npos);
  EXPECT_NE(text.find("accuracy=0.86"), std::string::npos);
}
