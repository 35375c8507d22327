#include "hicl/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "hicl/error.hpp"
#include "hicl/io.hpp"

namespace hicl {

namespace {

constexpr char kDbMagic[4] = {'H', 'R', 'D', 'B'};
constexpr std::uint16_t kDbVersion = 1;

}  // namespace

std::uint64_t params_fingerprint(const EncoderParams& params) { return fingerprint64(serialize_params(params)); }

RetrievalDatabase::RetrievalDatabase(int depth, std::size_t dim, std::uint64_t encoder_fingerprint)
    : depth_(depth), dim_(dim), fingerprint_(encoder_fingerprint) {
  if (depth < 1) throw ConfigError("retrieval database depth must be >= 1");
  if (dim == 0) throw ConfigError("retrieval database vector width must be >= 1");
}

void RetrievalDatabase::add(std::string doc_id, std::vector<float> vectors, LabelPath path) {
  if (vectors.size() != static_cast<std::size_t>(depth_) * dim_) {
    throw ConfigError("instance '" + doc_id + "' has " + std::to_string(vectors.size()) + " floats, expected " +
                      std::to_string(static_cast<std::size_t>(depth_) * dim_));
  }
  if (path.depth() != static_cast<std::size_t>(depth_)) {
    throw ConfigError("instance '" + doc_id + "' path depth does not match the database");
  }
  for (float v : vectors) {
    if (!std::isfinite(v)) throw NumericError("instance '" + doc_id + "' has a non-finite index vector");
  }
  IndexedInstance inst{std::move(doc_id), std::move(vectors), std::move(path), 0};
  inst.ordinal = instances_.empty() ? 0 : instances_.back().ordinal + 1;
  instances_.push_back(std::move(inst));
}

RetrievalDatabase build_database(const std::vector<Document>& trainset, const EncoderParams& params,
                                 const Taxonomy& taxonomy) {
  if (trainset.empty()) throw ConfigError("build_database: empty training set");
  if (params.depth() != taxonomy.depth()) {
    throw ConfigError("build_database: encoder depth " + std::to_string(params.depth()) +
                      " != taxonomy depth " + std::to_string(taxonomy.depth()));
  }
  RetrievalDatabase db(taxonomy.depth(), params.dim(), params_fingerprint(params));
  for (const Document& doc : trainset) {
    taxonomy.validate_path(doc.gold);
    db.add(doc.id, index_vectors(encode(doc.tokens, params)), doc.gold);
  }
  return db;
}

std::vector<double> level_weights(int depth) {
  if (depth < 1 || depth > 62) throw ConfigError("level_weights: depth out of range");
  const double denom = std::ldexp(1.0, depth) - 1.0;
  std::vector<double> w;
  for (int j = 1; j <= depth; ++j) w.push_back(std::ldexp(1.0, j - 1) / denom);
  return w;
}

double similarity(std::span<const float> a, std::span<const float> b, int depth, std::size_t dim) {
  const std::size_t expected = static_cast<std::size_t>(depth) * dim;
  if (a.size() != expected || b.size() != expected) throw ConfigError("similarity: vector sets have mismatched shapes");
  const auto weights = level_weights(depth);
  double sim = 0.0;
  for (int j = 0; j < depth; ++j) {
    const float* x = a.data() + static_cast<std::size_t>(j) * dim;
    const float* y = b.data() + static_cast<std::size_t>(j) * dim;
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      dot += static_cast<double>(x[k]) * y[k];
      nx += static_cast<double>(x[k]) * x[k];
      ny += static_cast<double>(y[k]) * y[k];
    }
    if (nx == 0.0 || ny == 0.0) {
      throw NumericError("similarity: zero-norm index vector at level " + std::to_string(j + 1));
    }
    sim += weights[static_cast<std::size_t>(j)] * dot / (std::sqrt(nx) * std::sqrt(ny));
  }
  return sim;
}

std::vector<ScoredInstance> rank_all(const RetrievalDatabase& db, std::span<const float> query) {
  std::vector<ScoredInstance> out;
  out.reserve(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    out.push_back({i, similarity(query, db.at(i).vectors, db.depth(), db.dim())});
  }
  std::sort(out.begin(), out.end(), [&](const ScoredInstance& x, const ScoredInstance& y) {
    if (x.score != y.score) return x.score > y.score;
    return db.at(x.index).ordinal < db.at(y.index).ordinal;
  });
  return out;
}

std::vector<ScoredInstance> diverse_prefix(const RetrievalDatabase& db, const std::vector<ScoredInstance>& ranked,
                                           std::size_t k, DiversityKey key, const Taxonomy* taxonomy) {
  if (key == DiversityKey::LeafName && taxonomy == nullptr) {
    throw ConfigError("leaf-name diversity needs the taxonomy");
  }
  std::vector<ScoredInstance> out;
  std::set<LabelPath> seen_paths;
  std::set<std::string> seen_names;
  for (const ScoredInstance& s : ranked) {
    if (out.size() >= k) break;
    const LabelPath& path = db.at(s.index).path;
    bool fresh = key == DiversityKey::FullPath ? seen_paths.insert(path).second
                                               : seen_names.insert(taxonomy->node(path.leaf()).name).second;
    if (fresh) out.push_back(s);
  }
  return out;
}

std::vector<ScoredInstance> search_topk_diverse(const RetrievalDatabase& db, std::span<const float> query,
                                                std::size_t k, DiversityKey key, const Taxonomy* taxonomy) {
  if (k == 0) throw ConfigError("search: k must be >= 1");
  if (db.empty()) throw ConfigError("search: retrieval database is empty");
  return diverse_prefix(db, rank_all(db, query), k, key, taxonomy);
}

RetrievalDatabase append_instance(const RetrievalDatabase& db, const Document& doc, const EncoderParams& params,
                                  std::uint64_t params_fp) {
  check_fingerprint(db, params_fp, FingerprintPolicy::Fail);
  RetrievalDatabase next = db;
  next.add(doc.id, index_vectors(encode(doc.tokens, params)), doc.gold);
  return next;
}

RetrievalDatabase append_instance(const RetrievalDatabase& db, const Document& doc, const EncoderParams& params) {
  return append_instance(db, doc, params, params_fingerprint(params));
}

bool check_fingerprint(const RetrievalDatabase& db, std::uint64_t params_fp, FingerprintPolicy policy) {
  if (db.encoder_fingerprint() == params_fp) return true;
  std::string msg = "encoder fingerprint mismatch: database built with " + to_hex(db.encoder_fingerprint()) +
                    ", params are " + to_hex(params_fp);
  if (policy == FingerprintPolicy::Fail) throw ConfigError(msg);
  std::cerr << "warning: " << msg << '\n';
  return false;
}

std::string serialize_db(const RetrievalDatabase& db) {
  ByteWriter w;
  w.bytes(std::string_view(kDbMagic, 4));
  w.u16(kDbVersion);
  w.u8(static_cast<std::uint8_t>(db.depth()));
  w.u16(static_cast<std::uint16_t>(db.dim()));
  w.u32(static_cast<std::uint32_t>(db.size()));
  w.u64(db.encoder_fingerprint());
  for (const IndexedInstance& inst : db.instances()) {
    w.u32(static_cast<std::uint32_t>(inst.doc_id.size()));
    w.bytes(inst.doc_id);
    for (NodeId id : inst.path.nodes) w.u32(id);
    for (float v : inst.vectors) w.f32(v);
  }
  w.u32(crc32(w.data()));
  return w.take();
}

RetrievalDatabase deserialize_db(std::string_view bytes, const Taxonomy* taxonomy) {
  if (bytes.size() < 4 + 2 + 1 + 2 + 4 + 8 + 4) throw FormatError("database file truncated");
  {
    ByteReader tail(bytes.substr(bytes.size() - 4), "database file");
    if (crc32(bytes.substr(0, bytes.size() - 4)) != tail.u32()) throw FormatError("database file: checksum mismatch");
  }
  ByteReader r(bytes.substr(0, bytes.size() - 4), "database file");
  if (r.bytes(4) != std::string_view(kDbMagic, 4)) throw FormatError("database file: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kDbVersion) throw FormatError("database file: unsupported version " + std::to_string(version));
  const int depth = r.u8();
  const std::size_t dim = r.u16();
  const std::uint32_t count = r.u32();
  const std::uint64_t fp = r.u64();
  if (taxonomy && depth != taxonomy->depth()) {
    throw FormatError("database depth " + std::to_string(depth) + " does not match taxonomy depth " +
                      std::to_string(taxonomy->depth()));
  }
  RetrievalDatabase db(depth, dim, fp);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string id(r.bytes(r.u32()));
    LabelPath path;
    for (int j = 0; j < depth; ++j) path.nodes.push_back(r.u32());
    if (taxonomy && !taxonomy->is_valid_path(path)) {
      throw FormatError("database instance '" + id + "' has a path that is not valid in the taxonomy");
    }
    std::vector<float> vectors(static_cast<std::size_t>(depth) * dim);
    for (float& v : vectors) v = r.f32();
    db.add(std::move(id), std::move(vectors), std::move(path));
  }
  if (r.remaining() != 0) throw FormatError("database file: trailing bytes after last instance");
  return db;
}

void save_db(const std::filesystem::path& file, const RetrievalDatabase& db) {
  write_file_atomic(file, serialize_db(db));
}

RetrievalDatabase load_db(const std::filesystem::path& file, const Taxonomy* taxonomy) {
  return deserialize_db(read_text_file(file), taxonomy);
}

}  // namespace hicl
