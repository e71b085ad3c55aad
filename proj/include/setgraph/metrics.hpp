#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace setgraph {

// Evaluation unit: one positive score against its sampled negatives.
struct RankedQueryScores {
  double pos_score = 0.0;
  std::vector<double> neg_scores;
};

// Mean reciprocal rank with half-credit ties:
// rank = 1 + #(neg > pos) + #(neg == pos) / 2.
double mrr(std::span<const RankedQueryScores> batch);

// Fraction of positives ranked within the top P, ties counted
// pessimistically (tied negatives placed first).
double hits_at(std::span<const RankedQueryScores> batch, std::uint32_t p);

// Mann-Whitney ROC-AUC: P(pos > neg) + P(pos == neg) / 2.
double auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace setgraph
