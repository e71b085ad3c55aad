#include "setgraph/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>

#include "setgraph/error.hpp"
#include "setgraph/metrics.hpp"

namespace setgraph {

namespace {

constexpr std::uint64_t kInitSalt = 0x494E4954ull << 20;
constexpr std::uint64_t kTrainSalt = 0x545241ull << 24;

constexpr std::uint32_t kCheckpointMagic = 0x5347434B;  // "SGCK"
constexpr std::uint32_t kCheckpointVersion = 1;

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double ez = std::exp(z);
  return ez / (1.0 + ez);
}

// y = W x + b
void affine(const LinearLayer& L, const double* x, double* y) {
  for (std::uint32_t o = 0; o < L.out; ++o) {
    const double* wrow = L.w.data() + static_cast<std::size_t>(o) * L.in;
    double acc = L.b[o];
    for (std::uint32_t i = 0; i < L.in; ++i) acc += wrow[i] * x[i];
    y[o] = acc;
  }
}

// dW += dy x^T, db += dy, dx = W^T dy (dx may be null)
void affine_backward(const LinearLayer& L, const double* x, const double* dy, LinearLayer& gL,
                     double* dx) {
  for (std::uint32_t o = 0; o < L.out; ++o) {
    double g = dy[o];
    gL.b[o] += g;
    double* gw = gL.w.data() + static_cast<std::size_t>(o) * L.in;
    for (std::uint32_t i = 0; i < L.in; ++i) gw[i] += g * x[i];
  }
  if (dx) {
    std::fill(dx, dx + L.in, 0.0);
    for (std::uint32_t o = 0; o < L.out; ++o) {
      double g = dy[o];
      const double* wrow = L.w.data() + static_cast<std::size_t>(o) * L.in;
      for (std::uint32_t i = 0; i < L.in; ++i) dx[i] += wrow[i] * g;
    }
  }
}

std::uint64_t hash_bytes(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError("checkpoint truncated");
}

void write_layer(std::ostream& out, const LinearLayer& L) {
  write_pod(out, L.in);
  write_pod(out, L.out);
  out.write(reinterpret_cast<const char*>(L.w.data()),
            static_cast<std::streamsize>(L.w.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(L.b.data()),
            static_cast<std::streamsize>(L.b.size() * sizeof(double)));
}

void read_layer(std::istream& in, LinearLayer& L) {
  read_pod(in, L.in);
  read_pod(in, L.out);
  L.w.resize(static_cast<std::size_t>(L.in) * L.out);
  L.b.resize(L.out);
  in.read(reinterpret_cast<char*>(L.w.data()),
          static_cast<std::streamsize>(L.w.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(L.b.data()),
          static_cast<std::streamsize>(L.b.size() * sizeof(double)));
  if (!in) throw ValidationError("checkpoint truncated");
}

}  // namespace

void LinearLayer::init(std::uint32_t in_dim, std::uint32_t out_dim, Rng& rng) {
  in = in_dim;
  out = out_dim;
  double a = 1.0 / std::sqrt(static_cast<double>(in_dim));
  w.resize(static_cast<std::size_t>(in) * out);
  b.resize(out);
  for (auto& x : w) x = (2.0 * rng.next_unit() - 1.0) * a;
  for (auto& x : b) x = (2.0 * rng.next_unit() - 1.0) * a;
}

void LinearLayer::zero(std::uint32_t in_dim, std::uint32_t out_dim) {
  in = in_dim;
  out = out_dim;
  w.assign(static_cast<std::size_t>(in) * out, 0.0);
  b.assign(out, 0.0);
}

ModelParams ModelParams::init(std::uint32_t input_dim, std::uint32_t hidden, AggrKind aggr,
                              std::uint64_t seed) {
  if (input_dim == 0 || hidden == 0)
    throw ValidationError("model dimensions must be positive");
  ModelParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.aggr = aggr;
  Rng rng = Rng::stream(seed, kInitSalt);
  p.enc1.init(input_dim, hidden, rng);
  p.enc2.init(hidden, hidden, rng);
  p.attn.init(hidden, 1, rng);
  p.head1.init(hidden, hidden, rng);
  p.head2.init(hidden, 1, rng);
  return p;
}

ModelParams zero_like(const ModelParams& p) {
  ModelParams g;
  g.input_dim = p.input_dim;
  g.hidden = p.hidden;
  g.aggr = p.aggr;
  g.enc1.zero(p.enc1.in, p.enc1.out);
  g.enc2.zero(p.enc2.in, p.enc2.out);
  g.attn.zero(p.attn.in, p.attn.out);
  g.head1.zero(p.head1.in, p.head1.out);
  g.head2.zero(p.head2.in, p.head2.out);
  return g;
}

std::vector<ParamRef> param_tensors(ModelParams& p) {
  std::vector<ParamRef> refs;
  auto add = [&](LinearLayer& L) {
    refs.push_back({L.w.data(), L.w.size()});
    refs.push_back({L.b.data(), L.b.size()});
  };
  add(p.enc1);
  add(p.enc2);
  if (p.aggr == AggrKind::attention) add(p.attn);
  add(p.head1);
  add(p.head2);
  return refs;
}

double bce_loss_single(double logit, int label) {
  // max(z,0) - z*y + log(1 + exp(-|z|))
  double z = logit;
  return std::max(z, 0.0) - z * static_cast<double>(label) + std::log1p(std::exp(-std::abs(z)));
}

double bce_loss(std::span<const double> logits, std::span<const int> labels) {
  if (logits.size() != labels.size() || logits.empty())
    throw ValidationError("bce_loss: size mismatch or empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += bce_loss_single(logits[i], labels[i]);
  return sum / static_cast<double>(logits.size());
}

namespace {

// Input row for member r of a joined query: feature blocks scaled by
// 1/divisor, then the member's attribute row if present.
void assemble_row(const JoinedQuery& jq, std::uint32_t r, const AttrMatrix* attrs,
                  double divisor, double* out) {
  auto feats = jq.feature_row(r);
  std::uint32_t fdim = jq.arity * jq.feature_dim;
  for (std::uint32_t i = 0; i < fdim; ++i) out[i] = static_cast<double>(feats[i]) / divisor;
  if (attrs && !attrs->empty()) {
    auto arow = attrs->row(jq.union_members[r]);
    for (std::uint32_t i = 0; i < arow.size(); ++i) out[fdim + i] = arow[i];
  }
}

void check_dims(const JoinedQuery& jq, const AttrMatrix* attrs, const ModelParams& p) {
  std::uint32_t dim = jq.arity * jq.feature_dim + (attrs && !attrs->empty() ? attrs->cols : 0);
  if (dim != p.input_dim)
    throw ValidationError("input dimension " + std::to_string(dim) +
                          " does not match model input_dim " + std::to_string(p.input_dim));
  if (jq.rows() == 0) throw ValidationError("joined query has no members");
}

}  // namespace

EncodeResult encode_query(const JoinedQuery& jq, const AttrMatrix* attrs, const ModelParams& p,
                          double feature_divisor) {
  check_dims(jq, attrs, p);
  const std::uint32_t h = p.hidden;
  const std::uint32_t n = jq.rows();

  std::vector<double> x(p.input_dim, 0.0), z1(h), a1(h), z2(h);
  std::vector<double> enc_out(static_cast<std::size_t>(n) * h);
  for (std::uint32_t r = 0; r < n; ++r) {
    assemble_row(jq, r, attrs, feature_divisor, x.data());
    affine(p.enc1, x.data(), z1.data());
    for (std::uint32_t i = 0; i < h; ++i) a1[i] = z1[i] > 0 ? z1[i] : 0.0;
    affine(p.enc2, a1.data(), z2.data());
    double* e = enc_out.data() + static_cast<std::size_t>(r) * h;
    for (std::uint32_t i = 0; i < h; ++i) e[i] = z2[i] > 0 ? z2[i] : 0.0;
  }

  EncodeResult res;
  res.h.assign(h, 0.0);
  if (p.aggr == AggrKind::mean) {
    for (std::uint32_t r = 0; r < n; ++r) {
      const double* e = enc_out.data() + static_cast<std::size_t>(r) * h;
      for (std::uint32_t i = 0; i < h; ++i) res.h[i] += e[i];
    }
    for (std::uint32_t i = 0; i < h; ++i) res.h[i] /= n;
  } else {
    std::vector<double> s(n);
    for (std::uint32_t r = 0; r < n; ++r) {
      double acc = p.attn.b[0];
      const double* e = enc_out.data() + static_cast<std::size_t>(r) * h;
      for (std::uint32_t i = 0; i < h; ++i) acc += p.attn.w[i] * e[i];
      s[r] = acc;
    }
    double mx = *std::max_element(s.begin(), s.end());
    double denom = 0.0;
    for (std::uint32_t r = 0; r < n; ++r) {
      s[r] = std::exp(s[r] - mx);
      denom += s[r];
    }
    res.attn_weights.resize(n);
    for (std::uint32_t r = 0; r < n; ++r) {
      res.attn_weights[r] = s[r] / denom;
      const double* e = enc_out.data() + static_cast<std::size_t>(r) * h;
      for (std::uint32_t i = 0; i < h; ++i) res.h[i] += res.attn_weights[r] * e[i];
    }
  }
  return res;
}

double predict(std::span<const double> h, const ModelParams& p) {
  if (h.size() != p.hidden) throw ValidationError("predict: representation size mismatch");
  std::vector<double> z3(p.hidden), a3(p.hidden);
  affine(p.head1, h.data(), z3.data());
  for (std::uint32_t i = 0; i < p.hidden; ++i) a3[i] = z3[i] > 0 ? z3[i] : 0.0;
  double logit = p.head2.b[0];
  for (std::uint32_t i = 0; i < p.hidden; ++i) logit += p.head2.w[i] * a3[i];
  return logit;
}

double model_forward(std::span<const JoinedQuery> joined, std::span<const int> labels,
                     const AttrMatrix* attrs, const ModelParams& p, double feature_divisor,
                     bool training, double dropout, Rng* dropout_rng, ForwardCache& cache) {
  if (joined.empty() || joined.size() != labels.size())
    throw ValidationError("model_forward: empty batch or label mismatch");
  if (training && (dropout < 0.0 || dropout >= 1.0))
    throw ValidationError("dropout must be in [0, 1)");
  if (training && dropout > 0.0 && dropout_rng == nullptr)
    throw ValidationError("dropout requires an rng");
  for (const auto& jq : joined) check_dims(jq, attrs, p);

  const std::uint32_t B = static_cast<std::uint32_t>(joined.size());
  const std::uint32_t h = p.hidden;
  const std::uint32_t dim = p.input_dim;

  cache = ForwardCache{};
  cache.batch = B;
  cache.hidden = h;
  cache.dim = dim;
  cache.training = training;
  cache.dropout = training ? dropout : 0.0;
  cache.aggr = p.aggr;
  cache.labels.assign(labels.begin(), labels.end());

  // Deduplicate member input rows across the whole batch. The raw float
  // feature row determines the assembled input, except that attributes vary
  // by member id, so the id joins the key whenever attributes are in play.
  const bool with_attrs = attrs && !attrs->empty();
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> intern;
  std::vector<const float*> uid_feat;
  std::vector<NodeId> uid_member;
  cache.slot_off.reserve(B + 1);
  cache.slot_off.push_back(0);
  const std::uint32_t fdim = joined[0].arity * joined[0].feature_dim;
  for (const auto& jq : joined) {
    for (std::uint32_t r = 0; r < jq.rows(); ++r) {
      const float* feat = jq.features.data() + static_cast<std::size_t>(r) * fdim;
      std::uint64_t key = hash_bytes(feat, fdim * sizeof(float));
      if (with_attrs) key ^= 0x9E3779B97F4A7C15ULL * (jq.union_members[r] + 1);
      auto& bucket = intern[key];
      std::uint32_t uid = cache.n_unique;
      for (std::uint32_t cand : bucket) {
        if ((!with_attrs || uid_member[cand] == jq.union_members[r]) &&
            std::memcmp(uid_feat[cand], feat, fdim * sizeof(float)) == 0) {
          uid = cand;
          break;
        }
      }
      if (uid == cache.n_unique) {
        bucket.push_back(uid);
        uid_feat.push_back(feat);
        uid_member.push_back(jq.union_members[r]);
        cache.x.resize(cache.x.size() + dim);
        assemble_row(jq, r, attrs, feature_divisor,
                     cache.x.data() + static_cast<std::size_t>(uid) * dim);
        ++cache.n_unique;
      }
      cache.slot_uid.push_back(uid);
    }
    cache.slot_off.push_back(static_cast<std::uint32_t>(cache.slot_uid.size()));
  }

  const std::uint32_t U = cache.n_unique;
  const double keep = 1.0 - cache.dropout;

  cache.z1.resize(static_cast<std::size_t>(U) * h);
  cache.a1.resize(static_cast<std::size_t>(U) * h);
  cache.z2.resize(static_cast<std::size_t>(U) * h);
  cache.e.resize(static_cast<std::size_t>(U) * h);
  if (training && cache.dropout > 0.0) cache.drop1.resize(static_cast<std::size_t>(U) * h);

  for (std::uint32_t u = 0; u < U; ++u) {
    const double* x = cache.x.data() + static_cast<std::size_t>(u) * dim;
    double* z1 = cache.z1.data() + static_cast<std::size_t>(u) * h;
    double* a1 = cache.a1.data() + static_cast<std::size_t>(u) * h;
    double* z2 = cache.z2.data() + static_cast<std::size_t>(u) * h;
    double* e = cache.e.data() + static_cast<std::size_t>(u) * h;
    affine(p.enc1, x, z1);
    for (std::uint32_t i = 0; i < h; ++i) a1[i] = z1[i] > 0 ? z1[i] : 0.0;
    if (training && cache.dropout > 0.0) {
      std::uint8_t* mask = cache.drop1.data() + static_cast<std::size_t>(u) * h;
      for (std::uint32_t i = 0; i < h; ++i) {
        mask[i] = dropout_rng->next_unit() >= cache.dropout ? 1 : 0;
        a1[i] = mask[i] ? a1[i] / keep : 0.0;
      }
    }
    affine(p.enc2, a1, z2);
    for (std::uint32_t i = 0; i < h; ++i) e[i] = z2[i] > 0 ? z2[i] : 0.0;
  }

  // pooling (sequential over members, in sorted member order)
  cache.hq.assign(static_cast<std::size_t>(B) * h, 0.0);
  if (p.aggr == AggrKind::attention) {
    cache.scores.resize(cache.slot_uid.size());
    cache.weights.resize(cache.slot_uid.size());
  }
  for (std::uint32_t q = 0; q < B; ++q) {
    std::uint32_t begin = cache.slot_off[q], end = cache.slot_off[q + 1];
    double* hq = cache.hq.data() + static_cast<std::size_t>(q) * h;
    if (p.aggr == AggrKind::mean) {
      for (std::uint32_t s = begin; s < end; ++s) {
        const double* e = cache.e.data() + static_cast<std::size_t>(cache.slot_uid[s]) * h;
        for (std::uint32_t i = 0; i < h; ++i) hq[i] += e[i];
      }
      double inv = 1.0 / static_cast<double>(end - begin);
      for (std::uint32_t i = 0; i < h; ++i) hq[i] *= inv;
    } else {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::uint32_t s = begin; s < end; ++s) {
        const double* e = cache.e.data() + static_cast<std::size_t>(cache.slot_uid[s]) * h;
        double acc = p.attn.b[0];
        for (std::uint32_t i = 0; i < h; ++i) acc += p.attn.w[i] * e[i];
        cache.scores[s] = acc;
        mx = std::max(mx, acc);
      }
      double denom = 0.0;
      for (std::uint32_t s = begin; s < end; ++s) {
        cache.weights[s] = std::exp(cache.scores[s] - mx);
        denom += cache.weights[s];
      }
      for (std::uint32_t s = begin; s < end; ++s) {
        cache.weights[s] /= denom;
        const double* e = cache.e.data() + static_cast<std::size_t>(cache.slot_uid[s]) * h;
        for (std::uint32_t i = 0; i < h; ++i) hq[i] += cache.weights[s] * e[i];
      }
    }
  }

  // head
  cache.z3.resize(static_cast<std::size_t>(B) * h);
  cache.a3.resize(static_cast<std::size_t>(B) * h);
  if (training && cache.dropout > 0.0) cache.drop3.resize(static_cast<std::size_t>(B) * h);
  cache.logits.resize(B);
  for (std::uint32_t q = 0; q < B; ++q) {
    const double* hq = cache.hq.data() + static_cast<std::size_t>(q) * h;
    double* z3 = cache.z3.data() + static_cast<std::size_t>(q) * h;
    double* a3 = cache.a3.data() + static_cast<std::size_t>(q) * h;
    affine(p.head1, hq, z3);
    for (std::uint32_t i = 0; i < h; ++i) a3[i] = z3[i] > 0 ? z3[i] : 0.0;
    if (training && cache.dropout > 0.0) {
      std::uint8_t* mask = cache.drop3.data() + static_cast<std::size_t>(q) * h;
      for (std::uint32_t i = 0; i < h; ++i) {
        mask[i] = dropout_rng->next_unit() >= cache.dropout ? 1 : 0;
        a3[i] = mask[i] ? a3[i] / keep : 0.0;
      }
    }
    double logit = p.head2.b[0];
    for (std::uint32_t i = 0; i < h; ++i) logit += p.head2.w[i] * a3[i];
    cache.logits[q] = logit;
  }
  return bce_loss(cache.logits, cache.labels);
}

void model_backward(const ForwardCache& cache, const ModelParams& p, ModelParams& grads) {
  const std::uint32_t B = cache.batch;
  const std::uint32_t h = cache.hidden;
  const std::uint32_t dim = cache.dim;
  const std::uint32_t U = cache.n_unique;
  const double keep = 1.0 - cache.dropout;
  const bool dropping = cache.training && cache.dropout > 0.0;

  std::vector<double> de(static_cast<std::size_t>(U) * h, 0.0);
  std::vector<double> da3(h), dz3(h), dhq(h);

  for (std::uint32_t q = 0; q < B; ++q) {
    double dlogit = (stable_sigmoid(cache.logits[q]) - cache.labels[q]) / B;
    const double* a3 = cache.a3.data() + static_cast<std::size_t>(q) * h;
    const double* z3 = cache.z3.data() + static_cast<std::size_t>(q) * h;
    const double* hq = cache.hq.data() + static_cast<std::size_t>(q) * h;

    grads.head2.b[0] += dlogit;
    for (std::uint32_t i = 0; i < h; ++i) {
      grads.head2.w[i] += dlogit * a3[i];
      da3[i] = dlogit * p.head2.w[i];
    }
    if (dropping) {
      const std::uint8_t* mask = cache.drop3.data() + static_cast<std::size_t>(q) * h;
      for (std::uint32_t i = 0; i < h; ++i) da3[i] = mask[i] ? da3[i] / keep : 0.0;
    }
    for (std::uint32_t i = 0; i < h; ++i) dz3[i] = z3[i] > 0 ? da3[i] : 0.0;
    affine_backward(p.head1, hq, dz3.data(), grads.head1, dhq.data());

    std::uint32_t begin = cache.slot_off[q], end = cache.slot_off[q + 1];
    if (cache.aggr == AggrKind::mean) {
      double inv = 1.0 / static_cast<double>(end - begin);
      for (std::uint32_t s = begin; s < end; ++s) {
        double* d = de.data() + static_cast<std::size_t>(cache.slot_uid[s]) * h;
        for (std::uint32_t i = 0; i < h; ++i) d[i] += dhq[i] * inv;
      }
    } else {
      // softmax-weighted sum: hq = sum_s w_s e_s
      double mean_dw = 0.0;
      std::vector<double> dw(end - begin);
      for (std::uint32_t s = begin; s < end; ++s) {
        const double* e = cache.e.data() + static_cast<std::size_t>(cache.slot_uid[s]) * h;
        double acc = 0.0;
        for (std::uint32_t i = 0; i < h; ++i) acc += dhq[i] * e[i];
        dw[s - begin] = acc;
        mean_dw += cache.weights[s] * acc;
      }
      for (std::uint32_t s = begin; s < end; ++s) {
        double ds = cache.weights[s] * (dw[s - begin] - mean_dw);
        const double* e = cache.e.data() + static_cast<std::size_t>(cache.slot_uid[s]) * h;
        grads.attn.b[0] += ds;
        double* d = de.data() + static_cast<std::size_t>(cache.slot_uid[s]) * h;
        for (std::uint32_t i = 0; i < h; ++i) {
          grads.attn.w[i] += ds * e[i];
          d[i] += cache.weights[s] * dhq[i] + ds * p.attn.w[i];
        }
      }
    }
  }

  // encoder backward over unique rows
  std::vector<double> dz2(h), da1(h), dz1(h);
  for (std::uint32_t u = 0; u < U; ++u) {
    const double* z2 = cache.z2.data() + static_cast<std::size_t>(u) * h;
    const double* a1 = cache.a1.data() + static_cast<std::size_t>(u) * h;
    const double* z1 = cache.z1.data() + static_cast<std::size_t>(u) * h;
    const double* x = cache.x.data() + static_cast<std::size_t>(u) * dim;
    const double* d = de.data() + static_cast<std::size_t>(u) * h;
    for (std::uint32_t i = 0; i < h; ++i) dz2[i] = z2[i] > 0 ? d[i] : 0.0;
    affine_backward(p.enc2, a1, dz2.data(), grads.enc2, da1.data());
    if (dropping) {
      const std::uint8_t* mask = cache.drop1.data() + static_cast<std::size_t>(u) * h;
      for (std::uint32_t i = 0; i < h; ++i) da1[i] = mask[i] ? da1[i] / keep : 0.0;
    }
    for (std::uint32_t i = 0; i < h; ++i) dz1[i] = z1[i] > 0 ? da1[i] : 0.0;
    affine_backward(p.enc1, x, dz1.data(), grads.enc1, nullptr);
  }
}

AdamState AdamState::init(ModelParams& p) {
  AdamState s;
  for (auto ref : param_tensors(p)) {
    s.m.emplace_back(ref.size, 0.0);
    s.v.emplace_back(ref.size, 0.0);
  }
  return s;
}

void adam_step(ModelParams& p, ModelParams& grads, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  auto params = param_tensors(p);
  auto gs = param_tensors(grads);
  if (params.size() != state.m.size())
    throw ValidationError("adam state does not match parameter shapes");
  ++state.step;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    double* w = params[t].data;
    const double* g = gs[t].data;
    double* m = state.m[t].data();
    double* v = state.v[t].data();
    for (std::size_t i = 0; i < params[t].size; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::size_t PositiveSet::VecHash::operator()(const std::vector<NodeId>& v) const {
  return static_cast<std::size_t>(hash_bytes(v.data(), v.size() * sizeof(NodeId)));
}

void PositiveSet::insert(std::span<const NodeId> nodes) {
  std::vector<NodeId> key(nodes.begin(), nodes.end());
  std::sort(key.begin(), key.end());
  set_.insert(std::move(key));
}

bool PositiveSet::contains(std::span<const NodeId> nodes) const {
  std::vector<NodeId> key(nodes.begin(), nodes.end());
  std::sort(key.begin(), key.end());
  return set_.count(key) > 0;
}

std::vector<Query> negative_sample(const Graph& g, std::span<const Query> positives,
                                   std::uint32_t k_neg, Rng& rng, const PositiveSet* avoid) {
  if (positives.empty()) throw ValidationError("negative_sample: no positives given");
  const std::uint32_t arity = static_cast<std::uint32_t>(positives[0].nodes.size());
  if (arity < 2) throw ValidationError("negative_sample: arity must be >= 2");
  const NodeId n = g.num_nodes();
  if (n <= arity) throw ValidationError("negative_sample: graph too small for arity");

  PositiveSet local;
  for (const auto& q : positives) local.insert(q.nodes);

  auto observed = [&](std::span<const NodeId> nodes) {
    if (nodes.size() == 2 && g.has_edge(nodes[0], nodes[1])) return true;
    if (local.contains(nodes)) return true;
    return avoid && avoid->contains(nodes);
  };
  auto has_dup = [](std::span<const NodeId> nodes) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = i + 1; j < nodes.size(); ++j)
        if (nodes[i] == nodes[j]) return true;
    return false;
  };

  constexpr int kMaxAttempts = 64;
  std::vector<Query> out;
  out.reserve(positives.size() * k_neg);
  for (const auto& pos : positives) {
    if (pos.nodes.size() != arity)
      throw ValidationError("negative_sample: mixed arity in positives");
    for (std::uint32_t j = 0; j < k_neg; ++j) {
      Query cand = pos;
      bool accepted = false;
      for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        cand = pos;
        std::uint32_t slot = rng.next_below(arity);
        cand.nodes[slot] = rng.next_below(n);
        if (has_dup(cand.nodes) || observed(cand.nodes)) continue;
        accepted = true;
        break;
      }
      if (!accepted) {
        // keep duplicate-freeness, drop the positivity constraint
        cand = pos;
        std::uint32_t slot = rng.next_below(arity);
        NodeId start = rng.next_below(n);
        for (NodeId off = 0; off < n; ++off) {
          cand.nodes[slot] = static_cast<NodeId>((static_cast<std::uint64_t>(start) + off) % n);
          if (!has_dup(cand.nodes)) break;
        }
        if (has_dup(cand.nodes))
          throw ValidationError("negative_sample: cannot build a duplicate-free tuple");
      }
      out.push_back(std::move(cand));
    }
  }
  return out;
}

namespace {

bool grads_finite(ModelParams& grads) {
  for (auto ref : param_tensors(grads))
    for (std::size_t i = 0; i < ref.size; ++i)
      if (!std::isfinite(ref.data[i])) return false;
  return true;
}

void zero_grads(ModelParams& grads) {
  for (auto ref : param_tensors(grads)) std::fill(ref.data, ref.data + ref.size, 0.0);
}

}  // namespace

TrainResult train(const Graph& g, const SpG& spg, std::span<const LabeledQuery> train_set,
                  std::span<const LabeledQuery> valid_set, const TrainConfig& cfg, AggrKind aggr,
                  std::uint32_t hidden, double feature_divisor, int threads) {
  if (cfg.batch_size < 1 || cfg.epochs < 1 || cfg.patience < 1 || cfg.neg_per_pos < 1)
    throw ValidationError("train config values must be positive");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw ValidationError("dropout must be in [0, 1)");
  if (train_set.empty()) throw ValidationError("train: empty training set");

  const std::uint32_t arity = static_cast<std::uint32_t>(train_set[0].query.nodes.size());
  for (const auto& lq : train_set)
    if (lq.query.nodes.size() != arity) throw ValidationError("train: inconsistent query arity");
  for (const auto& lq : valid_set)
    if (lq.query.nodes.size() != arity) throw ValidationError("train: inconsistent query arity");

  const AttrMatrix* attrs = g.attributes();
  const std::uint32_t input_dim = arity * spg.feature_dim() + (attrs ? attrs->cols : 0);
  ModelParams params = ModelParams::init(input_dim, hidden, aggr, cfg.rng_seed);
  ModelParams grads = zero_like(params);
  AdamState adam = AdamState::init(params);
  Rng rng = Rng::stream(cfg.rng_seed, kTrainSalt);

  PositiveSet observed;
  for (const auto& lq : train_set)
    if (lq.label == 1) observed.insert(lq.query.nodes);

  std::vector<Query> valid_queries;
  std::vector<int> valid_labels;
  bool valid_usable = false;
  for (const auto& lq : valid_set) {
    valid_queries.push_back(lq.query);
    valid_labels.push_back(lq.label);
  }
  if (!valid_set.empty()) {
    bool has_pos = std::find(valid_labels.begin(), valid_labels.end(), 1) != valid_labels.end();
    bool has_neg = std::find(valid_labels.begin(), valid_labels.end(), 0) != valid_labels.end();
    valid_usable = has_pos && has_neg;
  }
  // the validation set is fixed, so its joins can be reused across epochs
  std::vector<JoinedQuery> valid_joined;
  if (valid_usable) valid_joined = join_batch(spg, valid_queries, threads);

  TrainResult result;
  ModelParams best_params = params;
  double best_val = -std::numeric_limits<double>::infinity();
  std::uint32_t stale_epochs = 0;
  bool improved_once = false;

  std::vector<std::uint32_t> order(train_set.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;

  ForwardCache cache;
  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    // Fisher-Yates
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(static_cast<std::uint32_t>(i))]);

    double loss_sum = 0.0;
    std::uint64_t example_count = 0;
    std::uint32_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<Query> queries;
      std::vector<int> labels;
      std::vector<Query> batch_pos;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& lq = train_set[order[i]];
        queries.push_back(lq.query);
        labels.push_back(lq.label);
        if (lq.label == 1) batch_pos.push_back(lq.query);
      }
      if (!batch_pos.empty()) {
        auto negs = negative_sample(g, batch_pos, cfg.neg_per_pos, rng, &observed);
        for (auto& nq : negs) {
          queries.push_back(std::move(nq));
          labels.push_back(0);
        }
      }

      auto joined = join_batch(spg, queries, threads);
      double loss = model_forward(joined, labels, attrs, params, feature_divisor, true,
                                  cfg.dropout, &rng, cache);
      zero_grads(grads);
      model_backward(cache, params, grads);
      if (!std::isfinite(loss) || !grads_finite(grads))
        throw TrainError("non-finite gradient in epoch " + std::to_string(epoch) + " batch " +
                         std::to_string(batch_index));
      adam_step(params, grads, adam, cfg.learning_rate);
      loss_sum += loss * static_cast<double>(labels.size());
      example_count += labels.size();
    }

    double val_metric = std::numeric_limits<double>::quiet_NaN();
    if (valid_usable) {
      ForwardCache val_cache;
      model_forward(valid_joined, valid_labels, attrs, params, feature_divisor, false, 0.0,
                    nullptr, val_cache);
      val_metric = auc(val_cache.logits, valid_labels);
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(example_count), val_metric, wall});

    if (valid_usable) {
      if (val_metric > best_val) {
        best_val = val_metric;
        best_params = params;
        result.best_epoch = epoch;
        stale_epochs = 0;
        improved_once = true;
      } else if (++stale_epochs >= cfg.patience) {
        break;
      }
    }
  }

  result.params = improved_once ? best_params : params;
  if (!improved_once) result.best_epoch = static_cast<std::uint32_t>(result.history.size());
  return result;
}

std::vector<double> score_queries(const SpG& spg, std::span<const Query> queries,
                                  const ModelParams& p, const AttrMatrix* attrs,
                                  double feature_divisor, int threads) {
  if (queries.empty()) return {};
  auto joined = join_batch(spg, queries, threads);
  std::vector<int> dummy_labels(queries.size(), 0);
  ForwardCache cache;
  model_forward(joined, dummy_labels, attrs, p, feature_divisor, false, 0.0, nullptr, cache);
  return cache.logits;
}

void save_checkpoint(const ModelParams& p, double feature_divisor, std::ostream& out) {
  write_pod(out, kCheckpointMagic);
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint32_t>(p.aggr));
  write_pod(out, p.input_dim);
  write_pod(out, p.hidden);
  write_pod(out, feature_divisor);
  write_layer(out, p.enc1);
  write_layer(out, p.enc2);
  write_layer(out, p.attn);
  write_layer(out, p.head1);
  write_layer(out, p.head2);
}

Checkpoint load_checkpoint(std::istream& in) {
  std::uint32_t magic = 0, version = 0, aggr = 0;
  Checkpoint ck;
  read_pod(in, magic);
  if (magic != kCheckpointMagic) throw ValidationError("not a model checkpoint (bad magic)");
  read_pod(in, version);
  if (version != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  read_pod(in, aggr);
  if (aggr > 1) throw ValidationError("checkpoint has unknown pooling kind");
  ck.params.aggr = static_cast<AggrKind>(aggr);
  read_pod(in, ck.params.input_dim);
  read_pod(in, ck.params.hidden);
  read_pod(in, ck.feature_divisor);
  read_layer(in, ck.params.enc1);
  read_layer(in, ck.params.enc2);
  read_layer(in, ck.params.attn);
  read_layer(in, ck.params.head1);
  read_layer(in, ck.params.head2);
  if (ck.params.enc1.in != ck.params.input_dim || ck.params.enc1.out != ck.params.hidden ||
      ck.params.enc2.in != ck.params.hidden || ck.params.head2.out != 1)
    throw ValidationError("checkpoint layer shapes are inconsistent");
  return ck;
}

}  // namespace setgraph
