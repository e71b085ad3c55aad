#include "setgraph/spg.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>

#include "setgraph/error.hpp"

namespace setgraph {

namespace {

constexpr std::uint32_t kMagic = 0x53504731;  // "SPG1"
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const void* data, std::size_t len) {
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
  if (!in) throw ValidationError("spg snapshot truncated");
}

template <typename T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_vec(std::istream& in, std::vector<T>& v, std::size_t count) {
  v.resize(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw ValidationError("spg snapshot truncated");
}

}  // namespace

SpG SpG::build(std::span<const NodeSetSample> samples) {
  SpG spg;
  spg.n_ = static_cast<NodeId>(samples.size());
  spg.k_ = samples.empty() ? 0 : samples[0].features.cols;

  std::uint64_t total = 0;
  for (const auto& s : samples) {
    if (s.features.cols != spg.k_)
      throw ValidationError("inconsistent feature dimension across samples: " +
                            std::to_string(s.features.cols) + " vs " + std::to_string(spg.k_));
    if (s.features.rows != s.members.size())
      throw ValidationError("feature row count does not match member count");
    for (std::size_t i = 1; i < s.members.size(); ++i)
      if (s.members[i - 1] >= s.members[i])
        throw ValidationError("sample members must be strictly ascending");
    total += s.members.size();
  }
  if (total > static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max()))
    throw ValidationError("store exceeds 32-bit entry capacity");

  spg.indptr_.reserve(samples.size() + 1);
  spg.indices_.reserve(total);
  spg.sfptr_.reserve(total);

  const std::size_t row_bytes = static_cast<std::size_t>(spg.k_) * sizeof(float);
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> intern;

  for (const auto& s : samples) {
    spg.indices_.insert(spg.indices_.end(), s.members.begin(), s.members.end());
    for (std::uint32_t r = 0; r < s.features.rows; ++r) {
      const float* row = s.features.values.data() + static_cast<std::size_t>(r) * spg.k_;
      std::uint64_t h = fnv1a(row, row_bytes);
      auto& bucket = intern[h];
      std::uint32_t ptr = spg.c_;
      for (std::uint32_t cand : bucket) {
        if (std::memcmp(spg.bank_.data() + static_cast<std::size_t>(cand) * spg.k_, row,
                        row_bytes) == 0) {
          ptr = cand;
          break;
        }
      }
      if (ptr == spg.c_) {
        bucket.push_back(spg.c_);
        spg.bank_.insert(spg.bank_.end(), row, row + spg.k_);
        ++spg.c_;
      }
      spg.sfptr_.push_back(ptr);
    }
    spg.indptr_.push_back(static_cast<std::uint32_t>(spg.indices_.size()));
  }
  return spg;
}

SpG::RowView SpG::row(NodeId u) const {
  if (u >= n_)
    throw ValidationError("spg row " + std::to_string(u) + " out of range for n=" +
                          std::to_string(n_));
  std::uint32_t begin = indptr_[u], end = indptr_[u + 1];
  return {{indices_.data() + begin, end - begin}, {sfptr_.data() + begin, end - begin}};
}

std::span<const float> SpG::feature_row(std::uint32_t ptr) const {
  if (ptr >= c_) throw ValidationError("feature pointer out of range");
  return {bank_.data() + static_cast<std::size_t>(ptr) * k_, k_};
}

SpG::Stats SpG::stats() const {
  Stats s;
  s.total_entries = total_entries();
  s.unique_features = c_;
  s.bytes_structure = (static_cast<std::uint64_t>(n_) + 1 + s.total_entries) * sizeof(std::uint32_t);
  s.bytes_features = s.total_entries * sizeof(std::uint32_t) +
                     static_cast<std::uint64_t>(c_) * k_ * sizeof(float);
  s.dedup_ratio = c_ > 0 ? static_cast<double>(s.total_entries) / c_ : 0.0;
  return s;
}

void SpG::save(std::ostream& out) const {
  write_pod(out, kMagic);
  write_pod(out, kVersion);
  write_pod(out, n_);
  write_pod(out, k_);
  write_pod(out, c_);
  write_pod(out, static_cast<std::uint32_t>(total_entries()));
  write_pod(out, static_cast<std::uint32_t>(sizeof(std::uint32_t)));  // integer width
  write_pod(out, static_cast<std::uint32_t>(sizeof(float)));          // scalar width
  write_vec(out, indptr_);
  write_vec(out, indices_);
  write_vec(out, sfptr_);
  write_vec(out, bank_);
}

SpG SpG::load(std::istream& in) {
  std::uint32_t magic = 0, version = 0, total = 0, iw = 0, sw = 0;
  SpG spg;
  read_pod(in, magic);
  if (magic != kMagic) throw ValidationError("not an spg snapshot (bad magic)");
  read_pod(in, version);
  if (version != kVersion)
    throw ValidationError("unsupported spg snapshot version " + std::to_string(version));
  read_pod(in, spg.n_);
  read_pod(in, spg.k_);
  read_pod(in, spg.c_);
  read_pod(in, total);
  read_pod(in, iw);
  read_pod(in, sw);
  if (iw != sizeof(std::uint32_t) || sw != sizeof(float))
    throw ValidationError("unsupported spg snapshot widths");
  read_vec(in, spg.indptr_, static_cast<std::size_t>(spg.n_) + 1);
  read_vec(in, spg.indices_, total);
  read_vec(in, spg.sfptr_, total);
  read_vec(in, spg.bank_, static_cast<std::size_t>(spg.c_) * spg.k_);
  spg.validate();
  return spg;
}

void SpG::validate() const {
  if (indptr_.size() != static_cast<std::size_t>(n_) + 1)
    throw ValidationError("spg: indptr length mismatch");
  if (indptr_[0] != 0) throw ValidationError("spg: indptr[0] must be 0");
  for (NodeId u = 0; u < n_; ++u)
    if (indptr_[u] > indptr_[u + 1]) throw ValidationError("spg: indptr must be non-decreasing");
  if (indices_.size() != indptr_[n_] || sfptr_.size() != indptr_[n_])
    throw ValidationError("spg: array lengths do not match indptr[n]");
  if (c_ > indptr_[n_] && !(indptr_[n_] == 0 && c_ == 0))
    throw ValidationError("spg: more bank rows than entries");

  for (NodeId u = 0; u < n_; ++u) {
    bool seed_present = false;
    for (std::uint32_t i = indptr_[u]; i < indptr_[u + 1]; ++i) {
      if (i > indptr_[u] && indices_[i - 1] >= indices_[i])
        throw ValidationError("spg: row " + std::to_string(u) + " not strictly ascending");
      if (indices_[i] >= n_) throw ValidationError("spg: member id out of range");
      if (sfptr_[i] >= c_) throw ValidationError("spg: feature pointer out of range");
      if (indices_[i] == u) seed_present = true;
    }
    if (indptr_[u] < indptr_[u + 1] && !seed_present)
      throw ValidationError("spg: seed " + std::to_string(u) + " missing from its own row");
    if (indptr_[u] == indptr_[u + 1])
      throw ValidationError("spg: empty row " + std::to_string(u));
  }

  // bank rows must be pairwise distinct
  const std::size_t row_bytes = static_cast<std::size_t>(k_) * sizeof(float);
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> seen;
  for (std::uint32_t r = 0; r < c_; ++r) {
    const float* row = bank_.data() + static_cast<std::size_t>(r) * k_;
    auto& bucket = seen[fnv1a(row, row_bytes)];
    for (std::uint32_t other : bucket)
      if (std::memcmp(bank_.data() + static_cast<std::size_t>(other) * k_, row, row_bytes) == 0)
        throw ValidationError("spg: duplicate bank rows " + std::to_string(other) + " and " +
                              std::to_string(r));
    bucket.push_back(r);
  }
}

}  // namespace setgraph
