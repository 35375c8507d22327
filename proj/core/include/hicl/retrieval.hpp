#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "hicl/corpus.hpp"
#include "hicl/encoder.hpp"
#include "hicl/taxonomy.hpp"

namespace hicl {

/// One training document as stored for retrieval.
struct IndexedInstance {
  std::string doc_id;
  std::vector<float> vectors;  // m_1..m_C, level-major, C * dim floats
  LabelPath path;
  std::uint64_t ordinal = 0;

  friend bool operator==(const IndexedInstance&, const IndexedInstance&) = default;
};

/// Fingerprint of the params file an index was built with.
std::uint64_t params_fingerprint(const EncoderParams& params);

class RetrievalDatabase {
 public:
  RetrievalDatabase() = default;
  RetrievalDatabase(int depth, std::size_t dim, std::uint64_t encoder_fingerprint);

  int depth() const { return depth_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t encoder_fingerprint() const { return fingerprint_; }
  const std::vector<IndexedInstance>& instances() const { return instances_; }
  std::size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }
  const IndexedInstance& at(std::size_t i) const { return instances_.at(i); }

  /// Validates shape and finiteness and assigns ordinal = previous max + 1.
  void add(std::string doc_id, std::vector<float> vectors, LabelPath path);

  friend bool operator==(const RetrievalDatabase&, const RetrievalDatabase&) = default;

 private:
  int depth_ = 0;
  std::size_t dim_ = 0;
  std::uint64_t fingerprint_ = 0;
  std::vector<IndexedInstance> instances_;
};

/// Encodes every document in input order.
RetrievalDatabase build_database(const std::vector<Document>& trainset, const EncoderParams& params,
                                 const Taxonomy& taxonomy);

/// Level weights 2^(j-1) / (2^C - 1), j = 1..C.
std::vector<double> level_weights(int depth);

/// Level-weighted cosine: sum_j w_j cos(a_j, b_j). Throws NumericError
/// naming the level if any vector has zero norm.
double similarity(std::span<const float> a, std::span<const float> b, int depth, std::size_t dim);

struct ScoredInstance {
  std::size_t index = 0;  // position in the database
  double score = 0.0;
};

/// All instances by descending score, ties broken by lower ordinal.
std::vector<ScoredInstance> rank_all(const RetrievalDatabase& db, std::span<const float> query);

enum class DiversityKey { FullPath, LeafName };

/// Greedy top-k over rank_all that skips instances whose label (full path,
/// or leaf name) already appears in the result.
std::vector<ScoredInstance> search_topk_diverse(const RetrievalDatabase& db, std::span<const float> query,
                                                std::size_t k, DiversityKey key = DiversityKey::FullPath,
                                                const Taxonomy* taxonomy = nullptr);

/// Same filter applied to an existing ranking.
std::vector<ScoredInstance> diverse_prefix(const RetrievalDatabase& db, const std::vector<ScoredInstance>& ranked,
                                           std::size_t k, DiversityKey key = DiversityKey::FullPath,
                                           const Taxonomy* taxonomy = nullptr);

/// Returns a copy of `db` with the document encoded and appended. Throws
/// ConfigError when the params do not match the database fingerprint.
RetrievalDatabase append_instance(const RetrievalDatabase& db, const Document& doc, const EncoderParams& params);
RetrievalDatabase append_instance(const RetrievalDatabase& db, const Document& doc, const EncoderParams& params,
                                  std::uint64_t params_fp);

enum class FingerprintPolicy { Fail, Warn };

/// True when the fingerprints match. On mismatch throws (Fail) or returns
/// false (Warn).
bool check_fingerprint(const RetrievalDatabase& db, std::uint64_t params_fp, FingerprintPolicy policy);

/// Database file, little-endian:
///   "HRDB", version u16, C u8, dim u16, count u32, encoder fingerprint u64,
///   per instance: id length u32, id bytes (UTF-8), C path node ids u32,
///   C * dim f32; then CRC32 of all preceding bytes.
std::string serialize_db(const RetrievalDatabase& db);
RetrievalDatabase deserialize_db(std::string_view bytes, const Taxonomy* taxonomy = nullptr);
void save_db(const std::filesystem::path& file, const RetrievalDatabase& db);
/// When `taxonomy` is given, checks depth and every stored path against it.
RetrievalDatabase load_db(const std::filesystem::path& file, const Taxonomy* taxonomy = nullptr);

/// Holds the current immutable database. Readers take a shared_ptr and keep
/// a consistent view for as long as they hold it; writers publish whole
/// new snapshots.
class DatabaseSnapshot {
 public:
  explicit DatabaseSnapshot(RetrievalDatabase db)
      : current_(std::make_shared<const RetrievalDatabase>(std::move(db))) {}

  std::shared_ptr<const RetrievalDatabase> get() const {
    std::lock_guard lock(mu_);
    return current_;
  }

  void publish(std::shared_ptr<const RetrievalDatabase> next) {
    std::lock_guard lock(mu_);
    current_ = std::move(next);
  }

  /// Serializes writers: builds the successor from the current snapshot and
  /// publishes it.
  template <typename Fn>
  void update(Fn&& make_next) {
    std::lock_guard writer(writer_mu_);
    auto next = std::make_shared<const RetrievalDatabase>(make_next(*get()));
    publish(std::move(next));
  }

 private:
  mutable std::mutex mu_;
  std::mutex writer_mu_;
  std::shared_ptr<const RetrievalDatabase> current_;
};

}  // namespace hicl
