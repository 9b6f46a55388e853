#include "aporo/topics/embedding.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "aporo/common/error.hpp"
#include "aporo/common/hash.hpp"
#include "aporo/common/text.hpp"

namespace aporo::topics {

EmbeddingMatrix::EmbeddingMatrix(std::string encoder_id, std::size_t dim)
    : encoder_id_(std::move(encoder_id)), dim_(dim) {}

void EmbeddingMatrix::add(std::string doc_id, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw ContractViolation(fmt::format("vector for '{}' has dim {}, expected {}", doc_id, vector.size(), dim_));
  }
  if (!index_.emplace(doc_id, doc_ids_.size()).second) throw ContractViolation("duplicate doc id '" + doc_id + "'");
  doc_ids_.push_back(std::move(doc_id));
  values_.insert(values_.end(), vector.begin(), vector.end());
}

std::size_t EmbeddingMatrix::index_of(const std::string& doc_id) const {
  auto it = index_.find(doc_id);
  if (it == index_.end()) throw ContractViolation("no embedding for '" + doc_id + "'");
  return it->second;
}

std::string HashingEncoder::id() const { return fmt::format("hashing-v1-d{}", dim_); }

std::vector<std::vector<float>> HashingEncoder::encode(std::span<const std::string> texts) const {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::map<std::string, std::pair<double, int>> features;
    for (const auto& tok : text::word_tokens(t, 2)) {
      auto& w = features["w:" + tok];
      w.first = 1.0;
      ++w.second;
      const std::string padded = "<" + tok + ">";
      for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        auto& c = features["c:" + padded.substr(i, 3)];
        c.first = 0.5;
        ++c.second;
      }
    }
    std::vector<float> v(dim_, 0.0f);
    for (const auto& [key, wc] : features) {
      const std::uint64_t h = fnv1a64(key);
      const double sign = (h >> 63) ? -1.0 : 1.0;
      v[h % dim_] += static_cast<float>(sign * wc.first * (1.0 + std::log(static_cast<double>(wc.second))));
    }
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

void normalize(std::vector<float>& v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    std::fill(v.begin(), v.end(), 0.0f);
    if (!v.empty()) v[0] = 1.0f;
    return;
  }
  for (float& x : v) x = static_cast<float>(x / norm);
}

}  // namespace

EmbeddingMatrix embed_documents(std::span<const std::string> doc_ids, std::span<const std::string> texts,
                                const TextEncoder& encoder, const EmbedOptions& options) {
  if (doc_ids.size() != texts.size()) throw ContractViolation("doc_ids and texts differ in length");
  if (texts.empty() && options.error_on_empty) throw ContractViolation("no texts to embed");
  EmbeddingMatrix m(encoder.id(), encoder.dim());
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  for (std::size_t start = 0; start < texts.size(); start += batch) {
    const std::size_t count = std::min(batch, texts.size() - start);
    std::vector<std::vector<float>> vectors;
    try {
      vectors = encoder.encode(texts.subspan(start, count));
      if (vectors.size() != count) throw Error("encoder returned wrong number of vectors");
    } catch (const std::exception& e) {
      throw Error(fmt::format("encoder '{}' failed on batch {} (docs {}..{}): {}", encoder.id(), start / batch, start,
                              start + count - 1, e.what()));
    }
    for (std::size_t i = 0; i < count; ++i) {
      normalize(vectors[i]);
      m.add(std::string(doc_ids[start + i]), vectors[i]);
    }
  }
  return m;
}

namespace {

constexpr char kMagic[8] = {'A', 'P', 'E', 'M', 'B', '0', '0', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw ParseError("truncated embedding cache");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string read_string(std::istream& in, std::uint32_t len) {
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw ParseError("truncated embedding cache");
  return s;
}

}  // namespace

void save_embedding_cache(const std::string& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.encoder_id().size()));
  out.write(m.encoder_id().data(), static_cast<std::streamsize>(m.encoder_id().size()));
  write_le<std::uint64_t>(out, m.size());
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& id = m.doc_ids()[i];
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (float x : m.row(i)) write_le<float>(out, x);
  }
}

EmbeddingMatrix load_embedding_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot open embedding cache " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ParseError("not an embedding cache: " + path);
  const auto id_len = read_le<std::uint32_t>(in);
  std::string encoder_id = read_string(in, id_len);
  const auto rows = read_le<std::uint64_t>(in);
  const auto dim = read_le<std::uint32_t>(in);
  EmbeddingMatrix m(std::move(encoder_id), dim);
  std::vector<float> v(dim);
  for (std::uint64_t r = 0; r < rows; ++r) {
    const auto len = read_le<std::uint32_t>(in);
    std::string doc_id = read_string(in, len);
    for (auto& x : v) x = read_le<float>(in);
    m.add(std::move(doc_id), v);
  }
  return m;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace aporo::topics
