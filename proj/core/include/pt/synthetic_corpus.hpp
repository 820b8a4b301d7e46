#pragma once

// Procedurally rendered login-page screenshots for a fixed set of fictional brands.
// Rendering is deterministic, so the corpus is fully defined by this code.

#include <array>
#include <string>
#include <vector>

#include "pt/image.hpp"
#include "pt/visual.hpp"

namespace pt::synthetic {

struct Rgb {
  float r, g, b;
};

struct Rect {
  int x, y, w, h;
};

enum class LogoShape { Box, Disc, Bar, Ring };

struct BrandStyle {
  std::string domain;
  Rgb background;
  int header_height;
  Rgb header;
  LogoShape logo_shape;
  Rect logo;
  Rgb logo_color;
  int panel_col;  // 0..2, left/centre/right
  int panel_row;  // 0..2, top/middle/bottom
  int panel_w;
  int panel_h;
  Rgb panel;
  Rgb accent;
  Rect hero;  // w == 0 for none
  Rgb hero_color;
  int text_lines;
  Rect text_area;
  int footer_height;
  Rgb footer;
};

inline constexpr int kPageWidth = 320;
inline constexpr int kPageHeight = 240;

/// The 20 brands whose login pages are logged in the calibration corpus.
const std::vector<BrandStyle>& logged_brands();
/// 10 further brands that are never logged; used as unmatched screenshots.
const std::vector<BrandStyle>& unlogged_brands();

Image render_page(const BrandStyle& style, int width = kPageWidth, int height = kPageHeight);

/// Full augmentation set: shifts toward the four corners by 5% of each side, brighten,
/// darken and Gaussian noise. Seeds derive from `seed`.
std::vector<AugmentationSpec> standard_augmentations(int width, int height, std::uint64_t seed);
/// Mild variants (1% shifts, +/-10% intensity, sigma 5 noise) used for admission tests.
std::vector<AugmentationSpec> light_augmentations(int width, int height, std::uint64_t seed);

/// Calibration corpus: one CalibrationDomain per logged brand, with standard variants and the
/// unlogged brands as foreign images.
std::vector<CalibrationDomain> build_calibration_corpus(std::uint64_t seed = 1);

}  // namespace pt::synthetic
