#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ccvqa::clients {

using Vector = std::vector<double>;

// u·v / (|u||v|). Throws ShapeError on a dimension mismatch and
// SimilarityError when either vector is all-zero.
double cosine(std::span<const double> u, std::span<const double> v);

void normalize_in_place(Vector& v);

// The embedding model role: one shared space for text and images.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dimension() const = 0;
  // Both return unit vectors of length dimension(); empty input is rejected.
  virtual Vector embed_text(const std::string& text) const = 0;
  virtual Vector embed_image(const std::string& image_ref) const = 0;
};

// Deterministic, locality-free embedder: the vector is drawn from a generator
// seeded by a 64-bit hash of the input. Similar strings do NOT get similar
// vectors.
class StubEmbedder final : public EmbeddingProvider {
 public:
  explicit StubEmbedder(std::size_t dimension = 64);

  std::size_t dimension() const override { return dimension_; }
  Vector embed_text(const std::string& text) const override;
  Vector embed_image(const std::string& image_ref) const override;

  // Raw hashed vector for a namespaced key, before normalization.
  Vector hashed(const std::string& key) const;

 private:
  std::size_t dimension_;
};

// Embedder for controlled scenarios. Named anchors occupy the leading axes of
// the space. A pinned input embeds as score·e_anchor + sqrt(1-score²)·u where
// u is a hashed unit vector orthogonal to every anchor axis, so its cosine
// with the pure anchor vector is exactly `score`. Unpinned inputs embed as u
// alone (cosine 0 with every anchor).
class PinnedEmbedder final : public EmbeddingProvider {
 public:
  explicit PinnedEmbedder(std::size_t dimension = 64);

  std::size_t dimension() const override { return hash_.dimension(); }
  Vector embed_text(const std::string& text) const override;
  Vector embed_image(const std::string& image_ref) const override;

  // Configuration; not safe to call concurrently with embedding.
  std::size_t add_anchor(const std::string& name);
  void pin_text(const std::string& text, const std::string& anchor, double score);
  void pin_image(const std::string& image_ref, const std::string& anchor, double score);
  void pin_text_vector(const std::string& text, Vector v);

  std::size_t anchor_count() const { return anchors_.size(); }
  std::size_t pin_count() const { return pins_.size(); }

 private:
  struct Pin {
    std::size_t axis = 0;
    double score = 0.0;
    Vector explicit_vector;
  };

  void pin(const std::string& key, const std::string& anchor, double score);
  Vector embed_key(const std::string& key) const;
  Vector residual(const std::string& key) const;

  StubEmbedder hash_;
  std::map<std::string, std::size_t> anchors_;
  std::unordered_map<std::string, Pin> pins_;
};

// Memoizes another provider, keyed by a content hash of (kind, input).
// Safe for concurrent reads and inserts.
class CachingEmbedder final : public EmbeddingProvider {
 public:
  explicit CachingEmbedder(std::shared_ptr<const EmbeddingProvider> inner);

  std::size_t dimension() const override { return inner_->dimension(); }
  Vector embed_text(const std::string& text) const override;
  Vector embed_image(const std::string& image_ref) const override;

  std::size_t misses() const;
  std::size_t size() const;

 private:
  template <typename Compute>
  Vector lookup(const std::string& key, Compute&& compute) const;

  std::shared_ptr<const EmbeddingProvider> inner_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::uint64_t, Vector> cache_;
  mutable std::size_t misses_ = 0;
};

}  // namespace ccvqa::clients
