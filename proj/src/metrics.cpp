#include "setgraph/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "setgraph/error.hpp"

namespace setgraph {

namespace {

void check_batch(std::span<const RankedQueryScores> batch) {
  if (batch.empty()) throw ValidationError("metrics: empty batch");
  for (const auto& rq : batch) {
    if (rq.neg_scores.empty()) throw ValidationError("metrics: query without negatives");
    if (!std::isfinite(rq.pos_score)) throw ValidationError("metrics: non-finite positive score");
    for (double s : rq.neg_scores)
      if (!std::isfinite(s)) throw ValidationError("metrics: non-finite negative score");
  }
}

}  // namespace

double mrr(std::span<const RankedQueryScores> batch) {
  check_batch(batch);
  double sum = 0.0;
  for (const auto& rq : batch) {
    std::uint64_t greater = 0, equal = 0;
    for (double s : rq.neg_scores) {
      if (s > rq.pos_score)
        ++greater;
      else if (s == rq.pos_score)
        ++equal;
    }
    double rank = 1.0 + static_cast<double>(greater) + static_cast<double>(equal) / 2.0;
    sum += 1.0 / rank;
  }
  return sum / static_cast<double>(batch.size());
}

double hits_at(std::span<const RankedQueryScores> batch, std::uint32_t p) {
  if (p < 1) throw ValidationError("hits_at: p must be >= 1");
  check_batch(batch);
  std::uint64_t hits = 0;
  for (const auto& rq : batch) {
    std::uint64_t not_below = 0;  // negatives ranked ahead, ties pessimistic
    for (double s : rq.neg_scores)
      if (s >= rq.pos_score) ++not_below;
    if (not_below + 1 <= p) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int y : labels) {
    if (y == 1)
      ++n_pos;
    else if (y == 0)
      ++n_neg;
    else
      throw ValidationError("auc: labels must be 0 or 1");
  }
  if (n_pos == 0 || n_neg == 0) throw ValidationError("auc: both classes must be present");
  for (double s : scores)
    if (!std::isfinite(s)) throw ValidationError("auc: non-finite score");

  // rank-sum with average ranks over tie groups
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  double u_stat = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1) / 2.0;
  return u_stat / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace setgraph
