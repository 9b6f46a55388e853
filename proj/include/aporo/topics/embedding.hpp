#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace aporo::topics {

/// Row-major matrix of unit-length document vectors.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::string encoder_id, std::size_t dim);

  void add(std::string doc_id, std::span<const float> vector);

  std::size_t size() const { return doc_ids_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return doc_ids_.empty(); }
  const std::string& encoder_id() const { return encoder_id_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }

  std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  const std::vector<float>& values() const { return values_; }

  /// Row index of a document id; throws if absent.
  std::size_t index_of(const std::string& doc_id) const;
  bool contains(const std::string& doc_id) const { return index_.contains(doc_id); }

 private:
  std::string encoder_id_;
  std::size_t dim_ = 0;
  std::vector<std::string> doc_ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Pluggable text encoder. Implementations return one vector per input text.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::vector<float>> encode(std::span<const std::string> texts) const = 0;
};

/// Deterministic bag-of-features encoder: lower-cased word unigrams plus
/// character trigrams, signed feature hashing, sublinear TF, L2 normalised.
class HashingEncoder final : public TextEncoder {
 public:
  explicit HashingEncoder(std::size_t dim = 256) : dim_(dim) {}

  std::string id() const override;
  std::size_t dim() const override { return dim_; }
  std::vector<std::vector<float>> encode(std::span<const std::string> texts) const override;

 private:
  std::size_t dim_;
};

struct EmbedOptions {
  std::size_t batch_size = 64;
  /// Empty input is an error rather than an empty matrix.
  bool error_on_empty = false;
};

/// Encodes in batches and normalises every row to unit length (an all-zero
/// vector maps to the first basis vector). Encoder exceptions are rethrown
/// naming the failing batch.
EmbeddingMatrix embed_documents(std::span<const std::string> doc_ids, std::span<const std::string> texts,
                                const TextEncoder& encoder, const EmbedOptions& options = {});

/// Binary cache: magic "APEMB001", u32 encoder-id length + bytes, u64 rows,
/// u32 dim, then per row u32 id length + id bytes + dim little-endian float32.
void save_embedding_cache(const std::string& path, const EmbeddingMatrix& matrix);
EmbeddingMatrix load_embedding_cache(const std::string& path);

double cosine(std::span<const float> a, std::span<const float> b);

}  // namespace aporo::topics
