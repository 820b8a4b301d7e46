#pragma once

// Screenshot embeddings and visual-similarity matching.
//
// The embedder is an interface. BaselineEmbedder is a deterministic perceptual
// embedder (grayscale, 32x32 area average, mean-centred, L2-normalised).
// SpectralEmbedder keeps Fourier magnitudes of a windowed grayscale grid, which
// makes it tolerant to small translations. A learned model can be plugged in
// behind the same interface.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pt/image.hpp"

namespace pt {

struct PageEmbedding {
  std::vector<double> values;
  std::string embedder_id;

  bool operator==(const PageEmbedding&) const = default;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string_view id() const = 0;
  virtual std::size_t dimension() const = 0;
  /// Throws Error(DegenerateImage) for near-constant images and Error(InvalidImage) for
  /// images smaller than 16x16.
  virtual PageEmbedding embed(const Image& image) const = 0;
};

class BaselineEmbedder final : public Embedder {
 public:
  static constexpr int kGrid = 32;
  static constexpr int kMinSide = 16;
  /// Luma variance (in squared 8-bit levels) below which an image is degenerate.
  static constexpr double kMinVariance = 1.0;

  std::string_view id() const override { return "baseline-gray32-v1"; }
  std::size_t dimension() const override { return kGrid * kGrid; }
  PageEmbedding embed(const Image& image) const override;
};

/// Magnitudes of the low-frequency half-plane of the 2-D DFT of a 64x64 mean-centred,
/// sqrt-Hann windowed luma grid, raised to kPower and L2-normalised. Scaling the input
/// intensities leaves the embedding unchanged.
class SpectralEmbedder final : public Embedder {
 public:
  static constexpr int kGrid = 64;
  static constexpr int kMaxFrequency = 24;
  static constexpr double kPower = 0.35;
  static constexpr int kMinSide = BaselineEmbedder::kMinSide;
  static constexpr double kMinVariance = BaselineEmbedder::kMinVariance;

  SpectralEmbedder();
  std::string_view id() const override { return "spectral-dft64-v1"; }
  std::size_t dimension() const override;
  PageEmbedding embed(const Image& image) const override;

 private:
  std::vector<double> cos_;
  std::vector<double> sin_;
};

/// Built-in names: "baseline" and "spectral" (or their full ids). Throws Error(ConfigError) for unknown names.
std::unique_ptr<Embedder> make_embedder(std::string_view name);

/// Area-average resampling of a single-channel raster; exposed for tests.
std::vector<double> area_resize(std::span<const double> src, int width, int height, int out_w,
                                int out_h);

/// Euclidean distance. Throws Error(EmbedderMismatch) on differing ids or dimensions.
double distance(const PageEmbedding& a, const PageEmbedding& b);

struct StoredEmbedding {
  std::string domain;
  std::string url;
  PageEmbedding embedding;
  std::uint64_t sequence = 0;
};

struct SimilarityVerdict {
  bool matched = false;
  std::optional<std::string> nearest_domain;
  std::optional<std::string> nearest_url;
  std::optional<std::uint64_t> nearest_sequence;
  double distance = std::numeric_limits<double>::infinity();
  double threshold = 0.0;
};

/// Full scan for the minimum-distance entry; earliest entry wins ties. Entries whose domain
/// equals `exclude_domain` (case-insensitive) are skipped.
SimilarityVerdict nearest_match(const PageEmbedding& query, std::span<const StoredEmbedding> store,
                                double threshold,
                                std::optional<std::string_view> exclude_domain = std::nullopt);

class EmbeddingStoreBackend {
 public:
  virtual ~EmbeddingStoreBackend() = default;
  virtual std::vector<StoredEmbedding> load() = 0;
  virtual void append(const StoredEmbedding& entry) = 0;
};

/// One JSON object per line: {domain, url, embedder_id, values, sequence}.
class JsonlEmbeddingBackend final : public EmbeddingStoreBackend {
 public:
  explicit JsonlEmbeddingBackend(std::filesystem::path path) : path_(std::move(path)) {}
  std::vector<StoredEmbedding> load() override;
  void append(const StoredEmbedding& entry) override;

 private:
  std::filesystem::path path_;
};

/// Thread-safe embedding store: shared readers, exclusive appends. Vectors are kept in one
/// contiguous row-major matrix; every entry must share the first entry's embedder id and
/// dimension.
class EmbeddingStore {
 public:
  /// A null backend keeps the store in memory only.
  explicit EmbeddingStore(std::unique_ptr<EmbeddingStoreBackend> backend = nullptr);

  /// Throws Error(EmbedderMismatch) when the entry does not fit the store.
  void append(StoredEmbedding entry);
  /// Same result as nearest_match over snapshot(). Throws Error(EmbedderMismatch).
  SimilarityVerdict nearest(const PageEmbedding& query, double threshold,
                            std::optional<std::string_view> exclude_domain = std::nullopt) const;
  std::vector<StoredEmbedding> snapshot() const;
  std::size_t size() const;

 private:
  struct Row {
    std::string domain;
    std::string domain_lower;
    std::string url;
    std::uint64_t sequence;
  };

  void add_row(StoredEmbedding&& entry);

  std::unique_ptr<EmbeddingStoreBackend> backend_;
  mutable std::shared_mutex mutex_;
  std::string embedder_id_;
  std::size_t dimension_ = 0;
  std::vector<Row> rows_;
  std::vector<double> matrix_;
};

struct AugmentationSpec {
  enum class Kind { Shift, Brighten, Darken, GaussianNoise };

  Kind kind = Kind::Shift;
  int dx = 0;
  int dy = 0;
  double factor = 1.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  static AugmentationSpec shift(int dx, int dy) { return {Kind::Shift, dx, dy, 1.0, 0.0, 0}; }
  static AugmentationSpec brighten(double f) { return {Kind::Brighten, 0, 0, f, 0.0, 0}; }
  static AugmentationSpec darken(double f) { return {Kind::Darken, 0, 0, f, 0.0, 0}; }
  static AugmentationSpec gaussian_noise(double sigma, std::uint64_t seed = 0) {
    return {Kind::GaussianNoise, 0, 0, 1.0, sigma, seed};
  }

  std::string describe() const;
};

/// Throws Error(InvalidSpec) for shifts beyond the image size, f <= 0 or sigma < 0.
Image augment(const Image& image, const AugmentationSpec& spec);

struct CalibrationDomain {
  std::string domain;
  Image original;
  std::vector<Image> variants;  // positives: should match `original`
  std::vector<Image> foreign;   // negatives: must not match `original`
};

struct CalibrationResult {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double max_positive = 0.0;
  double min_negative = 0.0;
};

/// Threshold maximising F1 for the rule `distance < threshold`; candidates are midpoints
/// between adjacent distinct distances, ties go to the smaller threshold.
/// Throws Error(InsufficientCorpus) when either list is empty.
CalibrationResult calibrate_from_distances(std::span<const double> positives,
                                           std::span<const double> negatives);

/// Positives: variant vs its own original. Negatives: original vs other originals, variants
/// vs other domains' originals, and foreign images vs the original.
/// Throws Error(InsufficientCorpus) for fewer than two domains.
CalibrationResult calibrate_threshold(std::span<const CalibrationDomain> corpus,
                                      const Embedder& embedder);

}  // namespace pt
