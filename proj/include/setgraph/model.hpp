#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_set>
#include <vector>

#include "setgraph/graph.hpp"
#include "setgraph/rng.hpp"
#include "setgraph/spg.hpp"
#include "setgraph/spjoin.hpp"

namespace setgraph {

enum class AggrKind { mean, attention };

struct LinearLayer {
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
  std::uint32_t in = 0, out = 0;

  void init(std::uint32_t in_dim, std::uint32_t out_dim, Rng& rng);
  void zero(std::uint32_t in_dim, std::uint32_t out_dim);
};

// Two-layer ReLU encoder applied per member row, a pooling step (mean or
// attention-weighted average), and a two-layer classifier head.
struct ModelParams {
  std::uint32_t input_dim = 0;
  std::uint32_t hidden = 0;
  AggrKind aggr = AggrKind::mean;
  LinearLayer enc1, enc2, attn, head1, head2;

  static ModelParams init(std::uint32_t input_dim, std::uint32_t hidden, AggrKind aggr,
                          std::uint64_t seed);
};

struct ParamRef {
  double* data;
  std::size_t size;
};

// Tensors in a fixed order (attn included only for attention pooling).
std::vector<ParamRef> param_tensors(ModelParams& p);

struct TrainConfig {
  std::uint32_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint32_t neg_per_pos = 10;
  std::uint32_t epochs = 50;
  std::uint32_t patience = 5;
  double dropout = 0.1;
  std::uint64_t rng_seed = 0;
};

// ---- forward / backward -------------------------------------------------

struct EncodeResult {
  std::vector<double> h;             // hidden-size pooled representation
  std::vector<double> attn_weights;  // per member, empty for mean pooling
};

// Eq-style single-query encoding (no dropout). Feature values are divided by
// feature_divisor; member attribute rows are appended when attrs is given.
EncodeResult encode_query(const JoinedQuery& jq, const AttrMatrix* attrs, const ModelParams& p,
                          double feature_divisor);

// Classifier head on a pooled representation; returns the logit.
double predict(std::span<const double> h, const ModelParams& p);

// Numerically stable mean binary cross entropy on logits.
double bce_loss(std::span<const double> logits, std::span<const int> labels);
double bce_loss_single(double logit, int label);

// Batched forward with deduplicated member rows (identical input rows are
// encoded once). Cache feeds the matching backward pass.
struct ForwardCache;

double model_forward(std::span<const JoinedQuery> joined, std::span<const int> labels,
                     const AttrMatrix* attrs, const ModelParams& p, double feature_divisor,
                     bool training, double dropout, Rng* dropout_rng, ForwardCache& cache);

void model_backward(const ForwardCache& cache, const ModelParams& p, ModelParams& grads);

ModelParams zero_like(const ModelParams& p);

// ---- optimizer -----------------------------------------------------------

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t step = 0;

  static AdamState init(ModelParams& p);
};

void adam_step(ModelParams& p, ModelParams& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// ---- negative sampling ----------------------------------------------------

// Canonicalized (order-insensitive) set of observed positive tuples.
class PositiveSet {
 public:
  void insert(std::span<const NodeId> nodes);
  bool contains(std::span<const NodeId> nodes) const;
  std::size_t size() const { return set_.size(); }

 private:
  struct VecHash {
    std::size_t operator()(const std::vector<NodeId>& v) const;
  };
  std::unordered_set<std::vector<NodeId>, VecHash> set_;
};

// For each positive, k_neg corrupted copies: one uniformly chosen position is
// replaced by a uniform node so that the result has no duplicate ids and is
// not an observed positive (graph edge for arity 2, or any tuple in `avoid`
// or in `positives`). After a bounded number of rejections the positivity
// constraint is dropped, never the duplicate-freeness.
std::vector<Query> negative_sample(const Graph& g, std::span<const Query> positives,
                                   std::uint32_t k_neg, Rng& rng,
                                   const PositiveSet* avoid = nullptr);

// ---- training -------------------------------------------------------------

struct EpochRecord {
  std::uint32_t epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;  // validation AUC; NaN when not computable
  double wall_seconds = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  std::uint32_t best_epoch = 0;
};

// Mini-batch loop: negative generation, batched join, encode, loss, backward,
// Adam step; early stopping on validation AUC. Deterministic for a fixed
// rng_seed at any thread count (threads only parallelize joins).
TrainResult train(const Graph& g, const SpG& spg, std::span<const LabeledQuery> train_set,
                  std::span<const LabeledQuery> valid_set, const TrainConfig& cfg, AggrKind aggr,
                  std::uint32_t hidden, double feature_divisor, int threads);

// Joins and scores queries in eval mode; returns one logit per query.
std::vector<double> score_queries(const SpG& spg, std::span<const Query> queries,
                                  const ModelParams& p, const AttrMatrix* attrs,
                                  double feature_divisor, int threads);

// ---- checkpoint -----------------------------------------------------------

void save_checkpoint(const ModelParams& p, double feature_divisor, std::ostream& out);

struct Checkpoint {
  ModelParams params;
  double feature_divisor = 1.0;
};

Checkpoint load_checkpoint(std::istream& in);

// ---- forward cache (exposed so tests can drive the training step) ---------

struct ForwardCache {
  std::uint32_t batch = 0, hidden = 0, dim = 0, n_unique = 0;
  bool training = false;
  double dropout = 0.0;
  AggrKind aggr = AggrKind::mean;
  std::vector<double> x;                  // n_unique x dim
  std::vector<std::uint32_t> slot_uid;    // member -> unique row
  std::vector<std::uint32_t> slot_off;    // batch + 1
  std::vector<double> z1, a1, z2, e;      // n_unique x hidden
  std::vector<std::uint8_t> drop1;        // n_unique x hidden (training only)
  std::vector<double> scores, weights;    // per slot (attention only)
  std::vector<double> hq, z3, a3;         // batch x hidden
  std::vector<std::uint8_t> drop3;        // batch x hidden (training only)
  std::vector<double> logits;             // batch
  std::vector<int> labels;                // batch
};

}  // namespace setgraph
