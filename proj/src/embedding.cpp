#include "ccvqa/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>

#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::clients {
namespace {

constexpr std::string_view kTextPrefix = "text\x1f";
constexpr std::string_view kImagePrefix = "image\x1f";

std::string text_key(const std::string& text) {
  if (text.empty()) throw EmbeddingError("cannot embed empty text");
  return std::string(kTextPrefix) + text;
}

std::string image_key(const std::string& ref) {
  if (ref.empty()) throw EmbeddingError("cannot embed empty image reference");
  return std::string(kImagePrefix) + ref;
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  }
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    throw SimilarityError("cosine similarity is undefined for a zero vector");
  }
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

void normalize_in_place(Vector& v) {
  double n = 0.0;
  for (const double x : v) n += x * x;
  n = std::sqrt(n);
  if (n == 0.0) throw EmbeddingError("cannot normalize a zero vector");
  for (double& x : v) x /= n;
}

// ---------------------------------------------------------------------------

StubEmbedder::StubEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw ParameterError("embedding dimension must be positive");
}

Vector StubEmbedder::hashed(const std::string& key) const {
  std::mt19937_64 rng(fnv1a64(key));
  Vector v(dimension_);
  for (double& x : v) x = uniform_pm1(rng);
  return v;
}

Vector StubEmbedder::embed_text(const std::string& text) const {
  Vector v = hashed(text_key(text));
  normalize_in_place(v);
  return v;
}

Vector StubEmbedder::embed_image(const std::string& image_ref) const {
  Vector v = hashed(image_key(image_ref));
  normalize_in_place(v);
  return v;
}

// ---------------------------------------------------------------------------

PinnedEmbedder::PinnedEmbedder(std::size_t dimension) : hash_(dimension) {
  if (dimension < 2) throw ParameterError("pinned embedder needs dimension >= 2");
}

std::size_t PinnedEmbedder::add_anchor(const std::string& name) {
  if (auto it = anchors_.find(name); it != anchors_.end()) return it->second;
  if (anchors_.size() + 1 >= dimension()) {
    throw ParameterError("too many anchors for dimension " + std::to_string(dimension()));
  }
  const std::size_t axis = anchors_.size();
  anchors_.emplace(name, axis);
  return axis;
}

void PinnedEmbedder::pin(const std::string& key, const std::string& anchor, double score) {
  if (!(score >= -1.0 && score <= 1.0)) {
    throw ParameterError("pinned score must lie in [-1, 1]");
  }
  Pin p;
  p.axis = add_anchor(anchor);
  p.score = score;
  pins_[key] = std::move(p);
}

void PinnedEmbedder::pin_text(const std::string& text, const std::string& anchor, double score) {
  pin(text_key(text), anchor, score);
}

void PinnedEmbedder::pin_image(const std::string& image_ref, const std::string& anchor,
                               double score) {
  pin(image_key(image_ref), anchor, score);
}

void PinnedEmbedder::pin_text_vector(const std::string& text, Vector v) {
  if (v.size() != dimension()) {
    throw ShapeError("pinned vector has dimension " + std::to_string(v.size()));
  }
  normalize_in_place(v);
  Pin p;
  p.explicit_vector = std::move(v);
  pins_[text_key(text)] = std::move(p);
}

Vector PinnedEmbedder::residual(const std::string& key) const {
  Vector u = hash_.hashed(key);
  for (std::size_t i = 0; i < anchors_.size(); ++i) u[i] = 0.0;
  normalize_in_place(u);
  return u;
}

Vector PinnedEmbedder::embed_key(const std::string& key) const {
  const auto it = pins_.find(key);
  if (it == pins_.end()) return residual(key);
  const Pin& p = it->second;
  if (!p.explicit_vector.empty()) return p.explicit_vector;
  Vector v = residual(key);
  const double rest = std::sqrt(std::max(0.0, 1.0 - p.score * p.score));
  for (double& x : v) x *= rest;
  v[p.axis] = p.score;
  return v;
}

Vector PinnedEmbedder::embed_text(const std::string& text) const {
  return embed_key(text_key(text));
}

Vector PinnedEmbedder::embed_image(const std::string& image_ref) const {
  return embed_key(image_key(image_ref));
}

// ---------------------------------------------------------------------------

CachingEmbedder::CachingEmbedder(std::shared_ptr<const EmbeddingProvider> inner)
    : inner_(std::move(inner)) {
  if (!inner_) throw ParameterError("caching embedder needs an inner provider");
}

template <typename Compute>
Vector CachingEmbedder::lookup(const std::string& key, Compute&& compute) const {
  const std::uint64_t h = fnv1a64(key);
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(h); it != cache_.end()) return it->second;
  }
  Vector v = compute();
  std::unique_lock lock(mutex_);
  auto [it, inserted] = cache_.emplace(h, std::move(v));
  if (inserted) ++misses_;
  return it->second;
}

Vector CachingEmbedder::embed_text(const std::string& text) const {
  return lookup(text_key(text), [&] { return inner_->embed_text(text); });
}

Vector CachingEmbedder::embed_image(const std::string& image_ref) const {
  return lookup(image_key(image_ref), [&] { return inner_->embed_image(image_ref); });
}

std::size_t CachingEmbedder::misses() const {
  std::shared_lock lock(mutex_);
  return misses_;
}

std::size_t CachingEmbedder::size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

}  // namespace ccvqa::clients
