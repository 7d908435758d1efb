#pragma once

#include <array>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "stancefusion/error.hpp"
#include "stancefusion/label.hpp"
#include "stancefusion/textprep.hpp"

namespace stancefusion {

/// 4x4 confusion matrix in canonical label order; rows are gold labels,
/// columns are predictions.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumLabels>, kNumLabels> counts{};

  std::int64_t total() const {
    std::int64_t n = 0;
    for (const auto& row : counts)
      for (std::int64_t c : row) n += c;
    return n;
  }

  std::int64_t diagonal() const {
    std::int64_t n = 0;
    for (std::size_t i = 0; i < kNumLabels; ++i) n += counts[i][i];
    return n;
  }

  std::int64_t row_sum(std::size_t gold) const {
    std::int64_t n = 0;
    for (std::int64_t c : counts[gold]) n += c;
    return n;
  }

  std::int64_t col_sum(std::size_t pred) const {
    std::int64_t n = 0;
    for (const auto& row : counts) n += row[pred];
    return n;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion_matrix(const std::vector<Label>& preds,
                                        const std::vector<Label>& golds) {
  if (preds.size() != golds.size()) {
    throw LengthMismatch("confusion_matrix: " + std::to_string(preds.size()) + " predictions vs " +
                         std::to_string(golds.size()) + " golds");
  }
  if (preds.empty()) throw EmptyInput("confusion_matrix on empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    cm.counts[static_cast<std::size_t>(label_index(golds[i]))]
             [static_cast<std::size_t>(label_index(preds[i]))]++;
  }
  return cm;
}

struct Scores {
  std::array<double, kNumLabels> per_class_f1{};
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

/// Per-class precision = diag/colsum, recall = diag/rowsum, F1 their
/// harmonic mean; any zero denominator yields 0 for that quantity. macro_f1
/// is the unweighted mean over the four classes.
inline Scores scores(const ConfusionMatrix& cm) {
  Scores s;
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const double tp = static_cast<double>(cm.counts[c][c]);
    const double col = static_cast<double>(cm.col_sum(c));
    const double row = static_cast<double>(cm.row_sum(c));
    const double precision = col > 0.0 ? tp / col : 0.0;
    const double recall = row > 0.0 ? tp / row : 0.0;
    const double denom = precision + recall;
    s.per_class_f1[c] = denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
    f1_sum += s.per_class_f1[c];
  }
  s.macro_f1 = f1_sum / static_cast<double>(kNumLabels);
  const std::int64_t total = cm.total();
  s.accuracy = total > 0 ? static_cast<double>(cm.diagonal()) / static_cast<double>(total) : 0.0;
  return s;
}

/// One misclassified example, in the layout of the error-analysis tables:
/// the reply text, the target it reacted to, and both labels.
struct Exhibit {
  std::string post_id;
  std::string reply_text;
  std::string target_text;
  Label predicted = Label::support;
  Label gold = Label::support;

  friend bool operator==(const Exhibit&, const Exhibit&) = default;
};

struct EvalReport {
  ConfusionMatrix cm;
  std::array<double, kNumLabels> per_class_f1{};
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<Exhibit> exhibits;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline EvalReport make_eval_report(const std::vector<Label>& preds,
                                   const std::vector<Label>& golds) {
  EvalReport report;
  report.cm = confusion_matrix(preds, golds);
  const Scores s = scores(report.cm);
  report.per_class_f1 = s.per_class_f1;
  report.macro_f1 = s.macro_f1;
  report.accuracy = s.accuracy;
  return report;
}

/// Report with up to k misclassification exhibits per (gold, predicted)
/// cell. pairs[i] must carry the gold label matched by golds[i].
inline EvalReport make_eval_report(const std::vector<Label>& preds,
                                   const std::vector<SequencePair>& pairs, int k) {
  if (preds.size() != pairs.size()) {
    throw LengthMismatch("make_eval_report: " + std::to_string(preds.size()) +
                         " predictions vs " + std::to_string(pairs.size()) + " pairs");
  }
  std::vector<Label> golds;
  golds.reserve(pairs.size());
  for (const SequencePair& p : pairs) {
    if (!p.label.has_value()) throw UnlabeledPost("pair " + p.post_id + " has no gold label");
    golds.push_back(*p.label);
  }
  EvalReport report = make_eval_report(preds, golds);
  std::array<std::array<int, kNumLabels>, kNumLabels> taken{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == golds[i]) continue;
    int& cell = taken[static_cast<std::size_t>(label_index(golds[i]))]
                     [static_cast<std::size_t>(label_index(preds[i]))];
    if (cell >= k) continue;
    ++cell;
    report.exhibits.push_back(Exhibit{pairs[i].post_id, pairs[i].first, pairs[i].second,
                                      preds[i], golds[i]});
  }
  return report;
}

/// Chooses the run with the best development macro-F1; ties break toward
/// the lowest seed. Returns an index so the caller keeps ownership of the
/// winning model. Run must expose `.seed` and `.dev_report`.
template <class Run>
std::size_t select_best_seed(const std::vector<Run>& runs) {
  if (runs.empty()) throw EmptyInput("select_best_seed on no runs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const double f1 = runs[i].dev_report.macro_f1;
    const double best_f1 = runs[best].dev_report.macro_f1;
    if (f1 > best_f1 || (f1 == best_f1 && runs[i].seed < runs[best].seed)) best = i;
  }
  return best;
}

/// Human-readable rendering: confusion matrix, per-class F1 row, summary
/// line, then any exhibits.
inline std::string format_report(const EvalReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "gold\\pred";
  for (Label l : kAllLabels) os << std::right << std::setw(9) << label_display_name(l);
  os << '\n';
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    os << std::left << std::setw(12) << label_display_name(label_from_index(static_cast<int>(g)));
    for (std::size_t p = 0; p < kNumLabels; ++p) {
      os << std::right << std::setw(9) << report.cm.counts[g][p];
    }
    os << '\n';
  }
  os << std::fixed << std::setprecision(4);
  os << "per-class F1:";
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    os << ' ' << label_display_name(label_from_index(static_cast<int>(c))) << '='
       << report.per_class_f1[c];
  }
  os << '\n';
  os << "macro_f1=" << report.macro_f1 << " accuracy=" << report.accuracy << '\n';
  if (!report.exhibits.empty()) {
    os << "misclassifications (" << report.exhibits.size() << "):\n";
    for (const Exhibit& e : report.exhibits) {
      os << "  [" << e.post_id << "] predicted=" << label_display_name(e.predicted)
         << " gold=" << label_display_name(e.gold) << "\n    reply: " << e.reply_text
         << "\n    target: " << e.target_text << '\n';
    }
  }
  return os.str();
}

}  // namespace stancefusion
