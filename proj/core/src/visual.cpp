#include "pt/visual.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <numbers>
#include <random>

#include "pt/error.hpp"
#include "pt/html.hpp"

namespace pt {
namespace {

struct Tap {
  int index;
  double weight;
};

// For each output cell, the source samples it overlaps and the overlap length.
std::vector<std::vector<Tap>> area_taps(int in, int out) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
  double scale = static_cast<double>(in) / out;
  for (int j = 0; j < out; ++j) {
    double lo = j * scale;
    double hi = (j + 1) * scale;
    int first = static_cast<int>(std::floor(lo));
    int last = std::min(in - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int x = first; x <= last; ++x) {
      double w = std::min<double>(x + 1, hi) - std::max<double>(x, lo);
      if (w > 0) taps[static_cast<std::size_t>(j)].push_back({x, w});
    }
  }
  return taps;
}

}  // namespace

std::vector<double> area_resize(std::span<const double> src, int width, int height, int out_w,
                                int out_h) {
  auto htaps = area_taps(width, out_w);
  auto vtaps = area_taps(height, out_h);
  double sx = static_cast<double>(width) / out_w;
  double sy = static_cast<double>(height) / out_h;

  std::vector<double> rows(static_cast<std::size_t>(height) * out_w);
  for (int y = 0; y < height; ++y) {
    const double* line = src.data() + static_cast<std::size_t>(y) * width;
    for (int j = 0; j < out_w; ++j) {
      double acc = 0;
      for (const auto& t : htaps[static_cast<std::size_t>(j)]) acc += t.weight * line[t.index];
      rows[static_cast<std::size_t>(y) * out_w + j] = acc / sx;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
  for (int i = 0; i < out_h; ++i) {
    for (int j = 0; j < out_w; ++j) {
      double acc = 0;
      for (const auto& t : vtaps[static_cast<std::size_t>(i)]) {
        acc += t.weight * rows[static_cast<std::size_t>(t.index) * out_w + j];
      }
      out[static_cast<std::size_t>(i) * out_w + j] = acc / sy;
    }
  }
  return out;
}

PageEmbedding BaselineEmbedder::embed(const Image& image) const {
  if (image.width() < kMinSide || image.height() < kMinSide) {
    throw Error(ErrorCode::InvalidImage, "screenshot must be at least 16x16 pixels");
  }
  auto grid = area_resize(image.luma(), image.width(), image.height(), kGrid, kGrid);
  double mean = 0;
  for (double v : grid) mean += v;
  mean /= static_cast<double>(grid.size());
  double sumsq = 0;
  for (double& v : grid) {
    v -= mean;
    sumsq += v * v;
  }
  if (sumsq / static_cast<double>(grid.size()) < kMinVariance) {
    throw Error(ErrorCode::DegenerateImage, "screenshot is near-constant");
  }
  double norm = std::sqrt(sumsq);
  for (double& v : grid) v /= norm;
  return {std::move(grid), std::string(id())};
}

SpectralEmbedder::SpectralEmbedder() : cos_(kGrid), sin_(kGrid) {
  for (int k = 0; k < kGrid; ++k) {
    double a = 2.0 * std::numbers::pi * k / kGrid;
    cos_[static_cast<std::size_t>(k)] = std::cos(a);
    sin_[static_cast<std::size_t>(k)] = std::sin(a);
  }
}

std::size_t SpectralEmbedder::dimension() const {
  constexpr int kWidth = 2 * kMaxFrequency + 1;
  return kMaxFrequency + 1 + static_cast<std::size_t>(kMaxFrequency) * kWidth;
}

PageEmbedding SpectralEmbedder::embed(const Image& image) const {
  if (image.width() < kMinSide || image.height() < kMinSide) {
    throw Error(ErrorCode::InvalidImage, "screenshot must be at least 16x16 pixels");
  }
  constexpr int n = kGrid;
  constexpr int kf = kMaxFrequency;
  constexpr int width = 2 * kf + 1;
  auto grid = area_resize(image.luma(), image.width(), image.height(), n, n);
  double mean = 0;
  for (double v : grid) mean += v;
  mean /= static_cast<double>(grid.size());
  double sumsq = 0;
  for (double& v : grid) {
    v -= mean;
    sumsq += v * v;
  }
  if (sumsq / static_cast<double>(grid.size()) < kMinVariance) {
    throw Error(ErrorCode::DegenerateImage, "screenshot is near-constant");
  }
  std::vector<double> window(n);
  for (int i = 0; i < n; ++i) {
    window[static_cast<std::size_t>(i)] =
        std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 0.5) / n));
  }
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      grid[static_cast<std::size_t>(y * n + x)] *=
          window[static_cast<std::size_t>(x)] * window[static_cast<std::size_t>(y)];
    }
  }

  // Row transforms for horizontal frequencies -kf..kf, then column transforms for 0..kf.
  std::vector<double> re(static_cast<std::size_t>(n) * width);
  std::vector<double> im(re.size());
  for (int y = 0; y < n; ++y) {
    for (int u = -kf; u <= kf; ++u) {
      double sr = 0;
      double si = 0;
      for (int x = 0; x < n; ++x) {
        auto k = static_cast<std::size_t>(((u * x) % n + n) % n);
        double g = grid[static_cast<std::size_t>(y * n + x)];
        sr += g * cos_[k];
        si -= g * sin_[k];
      }
      re[static_cast<std::size_t>(y * width + u + kf)] = sr;
      im[static_cast<std::size_t>(y * width + u + kf)] = si;
    }
  }
  std::vector<double> out;
  out.reserve(dimension());
  double norm = 0;
  for (int v = 0; v <= kf; ++v) {
    for (int u = (v == 0 ? 0 : -kf); u <= kf; ++u) {
      double sr = 0;
      double si = 0;
      for (int y = 0; y < n; ++y) {
        auto k = static_cast<std::size_t>((v * y) % n);
        double ar = re[static_cast<std::size_t>(y * width + u + kf)];
        double ai = im[static_cast<std::size_t>(y * width + u + kf)];
        sr += ar * cos_[k] + ai * sin_[k];
        si += ai * cos_[k] - ar * sin_[k];
      }
      double m = std::pow(std::hypot(sr, si), kPower);
      out.push_back(m);
      norm += m * m;
    }
  }
  norm = std::sqrt(norm);
  for (double& v : out) v /= norm;
  return {std::move(out), std::string(id())};
}

std::unique_ptr<Embedder> make_embedder(std::string_view name) {
  if (name == "baseline" || name == "baseline-gray32-v1") return std::make_unique<BaselineEmbedder>();
  if (name == "spectral" || name == "spectral-dft64-v1") return std::make_unique<SpectralEmbedder>();
  throw Error(ErrorCode::ConfigError, "unknown embedder '" + std::string(name) + "'");
}

double distance(const PageEmbedding& a, const PageEmbedding& b) {
  if (a.embedder_id != b.embedder_id || a.values.size() != b.values.size()) {
    throw Error(ErrorCode::EmbedderMismatch,
                "cannot compare '" + a.embedder_id + "' with '" + b.embedder_id + "'");
  }
  double acc = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

SimilarityVerdict nearest_match(const PageEmbedding& query, std::span<const StoredEmbedding> store,
                                double threshold, std::optional<std::string_view> exclude_domain) {
  SimilarityVerdict verdict;
  verdict.threshold = threshold;
  std::string excluded = exclude_domain ? html::ascii_lower(*exclude_domain) : std::string();
  const StoredEmbedding* best = nullptr;
  for (const auto& entry : store) {
    if (exclude_domain && html::ascii_lower(entry.domain) == excluded) continue;
    double d = distance(query, entry.embedding);
    if (!best || d < verdict.distance) {
      best = &entry;
      verdict.distance = d;
    }
  }
  if (best) {
    verdict.nearest_domain = best->domain;
    verdict.nearest_url = best->url;
    verdict.nearest_sequence = best->sequence;
    verdict.matched = verdict.distance < threshold;
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// Persistence

std::vector<StoredEmbedding> JsonlEmbeddingBackend::load() {
  std::vector<StoredEmbedding> out;
  std::ifstream in(path_);
  if (!in) return out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      StoredEmbedding e;
      e.domain = j.at("domain").get<std::string>();
      e.url = j.at("url").get<std::string>();
      e.embedding.embedder_id = j.at("embedder_id").get<std::string>();
      e.embedding.values = j.at("values").get<std::vector<double>>();
      e.sequence = j.value("sequence", static_cast<std::uint64_t>(out.size() + 1));
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      // A torn final line from an interrupted append is dropped; anything else is corruption.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw Error(ErrorCode::ConfigError,
                  path_.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

void JsonlEmbeddingBackend::append(const StoredEmbedding& entry) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(ErrorCode::Internal, "cannot append to " + path_.string());
  nlohmann::json j = {{"domain", entry.domain},
                      {"url", entry.url},
                      {"embedder_id", entry.embedding.embedder_id},
                      {"values", entry.embedding.values},
                      {"sequence", entry.sequence}};
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::Internal, "write failed on " + path_.string());
}

EmbeddingStore::EmbeddingStore(std::unique_ptr<EmbeddingStoreBackend> backend)
    : backend_(std::move(backend)) {
  if (!backend_) return;
  for (auto& e : backend_->load()) add_row(std::move(e));
}

void EmbeddingStore::add_row(StoredEmbedding&& entry) {
  const auto& e = entry.embedding;
  if (rows_.empty()) {
    embedder_id_ = e.embedder_id;
    dimension_ = e.values.size();
  } else if (e.embedder_id != embedder_id_ || e.values.size() != dimension_) {
    throw Error(ErrorCode::EmbedderMismatch,
                "cannot store '" + e.embedder_id + "' next to '" + embedder_id_ + "'");
  }
  matrix_.insert(matrix_.end(), e.values.begin(), e.values.end());
  std::string lower = html::ascii_lower(entry.domain);
  rows_.push_back({std::move(entry.domain), std::move(lower), std::move(entry.url), entry.sequence});
}

void EmbeddingStore::append(StoredEmbedding entry) {
  std::unique_lock lock(mutex_);
  if (!rows_.empty() && (entry.embedding.embedder_id != embedder_id_ ||
                         entry.embedding.values.size() != dimension_)) {
    throw Error(ErrorCode::EmbedderMismatch, "cannot store '" + entry.embedding.embedder_id +
                                                 "' next to '" + embedder_id_ + "'");
  }
  if (backend_) backend_->append(entry);
  add_row(std::move(entry));
}

SimilarityVerdict EmbeddingStore::nearest(const PageEmbedding& query, double threshold,
                                          std::optional<std::string_view> exclude_domain) const {
  std::shared_lock lock(mutex_);
  SimilarityVerdict verdict;
  verdict.threshold = threshold;
  if (rows_.empty()) return verdict;
  if (query.embedder_id != embedder_id_ || query.values.size() != dimension_) {
    throw Error(ErrorCode::EmbedderMismatch,
                "cannot compare '" + query.embedder_id + "' with '" + embedder_id_ + "'");
  }
  std::string excluded = exclude_domain ? html::ascii_lower(*exclude_domain) : std::string();
  const double* q = query.values.data();
  const Row* best = nullptr;
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (exclude_domain && rows_[r].domain_lower == excluded) continue;
    const double* row = matrix_.data() + r * dimension_;
    double acc = 0;
    for (std::size_t i = 0; i < dimension_; ++i) {
      double d = q[i] - row[i];
      acc += d * d;
    }
    double dist = std::sqrt(acc);
    if (!best || dist < verdict.distance) {
      best = &rows_[r];
      verdict.distance = dist;
    }
  }
  if (best) {
    verdict.nearest_domain = best->domain;
    verdict.nearest_url = best->url;
    verdict.nearest_sequence = best->sequence;
    verdict.matched = verdict.distance < threshold;
  }
  return verdict;
}

std::vector<StoredEmbedding> EmbeddingStore::snapshot() const {
  std::shared_lock lock(mutex_);
  std::vector<StoredEmbedding> out;
  out.reserve(rows_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    auto first = matrix_.begin() + static_cast<std::ptrdiff_t>(r * dimension_);
    out.push_back({rows_[r].domain, rows_[r].url,
                   {std::vector<double>(first, first + static_cast<std::ptrdiff_t>(dimension_)),
                    embedder_id_},
                   rows_[r].sequence});
  }
  return out;
}

std::size_t EmbeddingStore::size() const {
  std::shared_lock lock(mutex_);
  return rows_.size();
}

// ---------------------------------------------------------------------------
// Augmentation

std::string AugmentationSpec::describe() const {
  auto num = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  switch (kind) {
    case Kind::Shift: return "shift(" + std::to_string(dx) + "," + std::to_string(dy) + ")";
    case Kind::Brighten: return "brighten(" + num(factor) + ")";
    case Kind::Darken: return "darken(" + num(factor) + ")";
    case Kind::GaussianNoise: return "gaussian_noise(" + num(sigma) + ")";
  }
  return "?";
}

Image augment(const Image& image, const AugmentationSpec& spec) {
  switch (spec.kind) {
    case AugmentationSpec::Kind::Shift: {
      if (std::abs(spec.dx) > image.width() || std::abs(spec.dy) > image.height()) {
        throw Error(ErrorCode::InvalidSpec, spec.describe() + " exceeds the image size");
      }
      Image out(image.width(), image.height(), 255.0f);
      for (int y = 0; y < image.height(); ++y) {
        int sy = y - spec.dy;
        if (sy < 0 || sy >= image.height()) continue;
        for (int x = 0; x < image.width(); ++x) {
          int sx = x - spec.dx;
          if (sx < 0 || sx >= image.width()) continue;
          const float* p = image.pixel(sx, sy);
          out.set(x, y, p[0], p[1], p[2]);
        }
      }
      return out;
    }
    case AugmentationSpec::Kind::Brighten:
    case AugmentationSpec::Kind::Darken: {
      if (!(spec.factor > 0) || !std::isfinite(spec.factor)) {
        throw Error(ErrorCode::InvalidSpec, spec.describe() + ": factor must be > 0");
      }
      Image out = image;
      auto f = static_cast<float>(spec.factor);
      for (float& v : out.data()) v = std::min(255.0f, v * f);
      return out;
    }
    case AugmentationSpec::Kind::GaussianNoise: {
      if (!(spec.sigma >= 0) || !std::isfinite(spec.sigma)) {
        throw Error(ErrorCode::InvalidSpec, spec.describe() + ": sigma must be >= 0");
      }
      Image out = image;
      if (spec.sigma == 0) return out;
      std::mt19937_64 rng(spec.seed);
      std::normal_distribution<double> noise(0.0, spec.sigma);
      for (float& v : out.data()) {
        v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 255.0));
      }
      return out;
    }
  }
  throw Error(ErrorCode::InvalidSpec, "unknown augmentation kind");
}

// ---------------------------------------------------------------------------
// Calibration

CalibrationResult calibrate_from_distances(std::span<const double> positives,
                                           std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorCode::InsufficientCorpus, "need at least one positive and one negative pair");
  }
  struct Sample {
    double d;
    bool positive;
  };
  std::vector<Sample> all;
  all.reserve(positives.size() + negatives.size());
  for (double d : positives) all.push_back({d, true});
  for (double d : negatives) all.push_back({d, false});
  std::sort(all.begin(), all.end(), [](const Sample& a, const Sample& b) { return a.d < b.d; });

  CalibrationResult best;
  best.positives = positives.size();
  best.negatives = negatives.size();
  best.max_positive = *std::max_element(positives.begin(), positives.end());
  best.min_negative = *std::min_element(negatives.begin(), negatives.end());
  best.f1 = -1;

  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    (all[i].positive ? tp : fp) += 1;
    // Only cut between distinct distances: `d < t` must classify equal values alike.
    if (i + 1 < all.size() && all[i + 1].d == all[i].d) continue;
    double t = i + 1 < all.size() ? 0.5 * (all[i].d + all[i + 1].d) : all[i].d + 1e-9;
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = static_cast<double>(tp) / static_cast<double>(positives.size());
    double f1 = tp == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
    if (f1 > best.f1) {
      best.f1 = f1;
      best.threshold = t;
      best.precision = precision;
      best.recall = recall;
    }
  }
  return best;
}

CalibrationResult calibrate_threshold(std::span<const CalibrationDomain> corpus,
                                      const Embedder& embedder) {
  if (corpus.size() < 2) {
    throw Error(ErrorCode::InsufficientCorpus, "calibration needs at least two domains");
  }
  struct Embedded {
    PageEmbedding original;
    std::vector<PageEmbedding> variants;
    std::vector<PageEmbedding> foreign;
  };
  std::vector<Embedded> embedded;
  embedded.reserve(corpus.size());
  for (const auto& d : corpus) {
    Embedded e{embedder.embed(d.original), {}, {}};
    for (const auto& v : d.variants) e.variants.push_back(embedder.embed(v));
    for (const auto& f : d.foreign) e.foreign.push_back(embedder.embed(f));
    embedded.push_back(std::move(e));
  }

  std::vector<double> positives;
  std::vector<double> negatives;
  for (std::size_t i = 0; i < embedded.size(); ++i) {
    for (const auto& v : embedded[i].variants) positives.push_back(distance(v, embedded[i].original));
    for (const auto& f : embedded[i].foreign) negatives.push_back(distance(f, embedded[i].original));
    for (std::size_t j = 0; j < embedded.size(); ++j) {
      if (j == i) continue;
      if (j > i) negatives.push_back(distance(embedded[i].original, embedded[j].original));
      for (const auto& v : embedded[j].variants) {
        negatives.push_back(distance(v, embedded[i].original));
      }
    }
  }
  return calibrate_from_distances(positives, negatives);
}

}  // namespace pt
