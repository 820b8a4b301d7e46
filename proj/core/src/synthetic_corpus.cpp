#include "pt/synthetic_corpus.hpp"

#include <algorithm>
#include <cmath>

namespace pt::synthetic {
namespace {

using S = LogoShape;

constexpr Rgb kWhite{255, 255, 255};
constexpr Rect kNone{0, 0, 0, 0};

void fill(Image& img, const Rect& r, const Rgb& c) { img.fill_rect(r.x, r.y, r.w, r.h, c.r, c.g, c.b); }

void outline(Image& img, const Rect& r, const Rgb& c) {
  fill(img, {r.x, r.y, r.w, 1}, c);
  fill(img, {r.x, r.y + r.h - 1, r.w, 1}, c);
  fill(img, {r.x, r.y, 1, r.h}, c);
  fill(img, {r.x + r.w - 1, r.y, 1, r.h}, c);
}

void disc(Image& img, const Rect& r, const Rgb& c, double inner_ratio) {
  double cx = r.x + r.w / 2.0;
  double cy = r.y + r.h / 2.0;
  double rad = std::min(r.w, r.h) / 2.0;
  double inner = rad * inner_ratio;
  for (int y = std::max(0, r.y); y < std::min(img.height(), r.y + r.h); ++y) {
    for (int x = std::max(0, r.x); x < std::min(img.width(), r.x + r.w); ++x) {
      double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
      if (d <= rad && d >= inner) img.set(x, y, c.r, c.g, c.b);
    }
  }
}

double luma(const Rgb& c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

Rgb ink_for(const Rgb& background) {
  return luma(background) > 128 ? Rgb{70, 70, 70} : Rgb{200, 200, 200};
}

void text_lines(Image& img, const Rect& area, int count, const Rgb& ink) {
  for (int i = 0; i < count; ++i) {
    int y = area.y + i * 10;
    if (y + 3 > area.y + area.h) break;
    // Ragged right edge so lines do not form a solid block.
    int len = area.w - ((i * 37) % 5) * area.w / 10;
    fill(img, {area.x, y, len, 3}, ink);
  }
}

void draw_logo(Image& img, const BrandStyle& s) {
  switch (s.logo_shape) {
    case S::Box: fill(img, s.logo, s.logo_color); break;
    case S::Disc: disc(img, s.logo, s.logo_color, 0.0); break;
    case S::Ring: disc(img, s.logo, s.logo_color, 0.55); break;
    case S::Bar: {
      int sq = s.logo.h;
      fill(img, {s.logo.x, s.logo.y, sq, sq}, s.logo_color);
      fill(img, {s.logo.x + sq + 4, s.logo.y + s.logo.h / 4, s.logo.w - sq - 4, s.logo.h / 2},
           s.logo_color);
      break;
    }
  }
}

void draw_panel(Image& img, const BrandStyle& s) {
  int w = img.width();
  int h = img.height();
  int top = s.header_height + 8;
  int bottom = h - s.footer_height - 8;
  int x = s.panel_col == 0 ? 16 : s.panel_col == 1 ? (w - s.panel_w) / 2 : w - s.panel_w - 16;
  int room = std::max(0, bottom - top - s.panel_h);
  int y = top + (s.panel_row == 0 ? 0 : s.panel_row == 1 ? room / 2 : room);
  Rect panel{x, y, s.panel_w, s.panel_h};
  fill(img, panel, s.panel);
  Rgb border = ink_for(s.panel);
  auto mid = [](float a, float b) { return std::round((a + b) * 0.5f); };
  outline(img, panel, {mid(border.r, s.panel.r), mid(border.g, s.panel.g), mid(border.b, s.panel.b)});

  Rgb ink = ink_for(s.panel);
  int pad = 10;
  int inner_w = s.panel_w - 2 * pad;
  int cy = y + pad;
  fill(img, {x + pad, cy, inner_w / 2, 5}, ink);  // title
  cy += 14;
  for (int i = 0; i < 2; ++i) {
    Rect field{x + pad, cy, inner_w, 18};
    fill(img, field, kWhite);
    outline(img, field, {160, 160, 160});
    cy += 26;
  }
  fill(img, {x + pad, cy, inner_w, 20}, s.accent);
  cy += 28;
  if (cy + 3 < y + s.panel_h) fill(img, {x + pad, cy, inner_w / 3, 3}, ink);
}

const std::vector<BrandStyle> kLogged = {
    // domain, bg, header_h, header, logo shape, logo, logo colour, col, row, pw, ph, panel,
    // accent, hero, hero colour, text lines, text area, footer_h, footer
    {"bluebank.test", {255, 255, 255}, 36, {20, 40, 110}, S::Box, {12, 8, 60, 20}, kWhite,
     2, 1, 120, 130, {240, 240, 245}, {20, 40, 110}, {0, 36, 180, 180}, {120, 170, 230},
     0, kNone, 24, {60, 60, 60}},
    {"mailbox.test", {245, 245, 245}, 0, kWhite, S::Disc, {140, 12, 40, 40}, {220, 50, 40},
     1, 1, 140, 140, {255, 255, 255}, {30, 110, 230}, kNone, kWhite,
     2, {40, 214, 240, 20}, 0, kWhite},
    {"shopcart.test", {255, 255, 255}, 50, {250, 150, 30}, S::Bar, {10, 15, 90, 18}, {30, 30, 30},
     0, 1, 130, 150, {250, 250, 250}, {250, 150, 30}, {170, 60, 140, 160}, {255, 220, 180},
     4, {180, 180, 120, 40}, 20, {30, 30, 30}},
    {"videoflix.test", {20, 20, 20}, 40, {0, 0, 0}, S::Box, {12, 10, 70, 20}, {229, 9, 20},
     1, 1, 150, 150, {45, 45, 45}, {229, 9, 20}, kNone, kWhite,
     2, {20, 215, 200, 20}, 0, kWhite},
    {"codehub.test", {250, 250, 250}, 30, {36, 41, 46}, S::Ring, {148, 40, 24, 24}, {20, 20, 20},
     1, 2, 140, 120, {255, 255, 255}, {46, 160, 67}, kNone, kWhite,
     1, {100, 70, 120, 10}, 0, kWhite},
    {"socialnet.test", {240, 242, 245}, 0, kWhite, S::Bar, {20, 80, 120, 26}, {24, 119, 242},
     2, 1, 130, 150, {255, 255, 255}, {24, 119, 242}, kNone, kWhite,
     3, {20, 120, 130, 40}, 30, {255, 255, 255}},
    {"cloudstore.test", {255, 255, 255}, 44, {0, 97, 255}, S::Disc, {8, 6, 32, 32}, kWhite,
     0, 0, 140, 110, {255, 255, 255}, {0, 97, 255}, {0, 170, 320, 70}, {215, 230, 255},
     0, kNone, 0, kWhite},
    {"travelgo.test", {255, 250, 240}, 60, {0, 128, 128}, S::Box, {120, 15, 80, 30}, kWhite,
     2, 2, 120, 110, {255, 255, 255}, {0, 128, 128}, {0, 60, 190, 180}, {200, 160, 90},
     0, kNone, 0, kWhite},
    {"newsdaily.test", {255, 255, 255}, 24, {0, 0, 0}, S::Bar, {100, 30, 120, 24}, {0, 0, 0},
     0, 2, 120, 100, {240, 240, 240}, {0, 0, 0}, kNone, kWhite,
     14, {150, 66, 160, 150}, 16, {120, 120, 120}},
    {"payfast.test", {0, 48, 135}, 0, kWhite, S::Disc, {20, 20, 30, 30}, {0, 156, 222},
     1, 1, 150, 160, {255, 255, 255}, {0, 112, 186}, kNone, kWhite,
     0, kNone, 0, kWhite},
    {"learnhub.test", {255, 255, 255}, 56, {90, 40, 160}, S::Box, {14, 14, 80, 28}, kWhite,
     1, 2, 160, 100, {250, 248, 255}, {90, 40, 160}, {0, 56, 320, 60}, {200, 180, 240},
     0, kNone, 0, kWhite},
    {"gamezone.test", {30, 30, 60}, 36, {60, 20, 120}, S::Ring, {270, 4, 28, 28}, {255, 200, 0},
     0, 1, 130, 150, {50, 50, 90}, {255, 200, 0}, {165, 50, 145, 175}, {90, 70, 150},
     0, kNone, 0, kWhite},
    {"musicstream.test", {18, 18, 18}, 0, kWhite, S::Disc, {140, 8, 40, 40}, {30, 215, 96},
     1, 2, 170, 130, {45, 45, 45}, {30, 215, 96}, kNone, kWhite,
     2, {20, 60, 100, 20}, 24, {40, 40, 40}},
    {"hostingpro.test", {245, 248, 250}, 48, {20, 120, 100}, S::Bar, {200, 14, 100, 20}, kWhite,
     0, 2, 150, 120, {255, 255, 255}, {20, 120, 100}, {180, 60, 140, 140}, {200, 230, 220},
     5, {190, 70, 110, 50}, 0, kWhite},
    {"govportal.test", {255, 255, 255}, 70, {0, 50, 80}, S::Box, {10, 10, 50, 50}, {255, 200, 60},
     2, 0, 120, 110, {240, 240, 240}, {0, 50, 80}, kNone, kWhite,
     10, {10, 84, 170, 100}, 30, {0, 50, 80}},
    {"photoshare.test", {255, 255, 255}, 0, kWhite, S::Ring, {20, 20, 40, 40}, {225, 48, 108},
     2, 2, 130, 130, {255, 255, 255}, {225, 48, 108}, {0, 0, 165, 240}, {250, 200, 220},
     0, kNone, 0, kWhite},
    {"jobboard.test", {243, 242, 239}, 40, {10, 102, 194}, S::Box, {10, 8, 24, 24}, kWhite,
     1, 0, 200, 100, {255, 255, 255}, {10, 102, 194}, kNone, kWhite,
     4, {20, 170, 280, 40}, 0, kWhite},
    {"marketplace.test", {255, 255, 255}, 32, {230, 30, 30}, S::Bar, {10, 8, 60, 16},
     {255, 230, 0}, 0, 0, 120, 120, {255, 255, 255}, {230, 30, 30}, {145, 40, 175, 120},
     {255, 235, 190}, 3, {150, 172, 165, 30}, 20, {50, 50, 50}},
    {"insureco.test", {230, 240, 250}, 50, {255, 255, 255}, S::Disc, {10, 5, 40, 40},
     {200, 0, 0}, 2, 1, 120, 140, {255, 255, 255}, {200, 0, 0}, {0, 50, 180, 190},
     {40, 80, 140}, 0, kNone, 0, kWhite},
    {"cryptowallet.test", {10, 14, 30}, 0, kWhite, S::Box, {130, 16, 60, 14}, {240, 185, 11},
     1, 1, 160, 170, {24, 30, 50}, {240, 185, 11}, kNone, kWhite,
     0, kNone, 0, kWhite},
};

const std::vector<BrandStyle> kUnlogged = {
    {"fitnesstrack.test", {255, 255, 255}, 0, kWhite, S::Disc, {262, 10, 40, 40}, {255, 120, 0},
     0, 1, 140, 140, {250, 250, 250}, {255, 120, 0}, {170, 0, 150, 240}, {255, 225, 200},
     0, kNone, 0, kWhite},
    {"recipebox.test", {255, 248, 230}, 46, {120, 60, 20}, S::Bar, {100, 12, 120, 22}, kWhite,
     2, 2, 130, 120, {255, 255, 255}, {120, 60, 20}, {10, 60, 160, 110}, {230, 200, 160},
     4, {10, 185, 160, 40}, 0, kWhite},
    {"carrental.test", {255, 255, 255}, 28, {0, 0, 0}, S::Box, {8, 6, 40, 16}, {255, 210, 0},
     1, 0, 180, 110, {245, 245, 245}, {255, 210, 0}, {0, 160, 320, 80}, {60, 60, 60},
     0, kNone, 0, kWhite},
    {"petcare.test", {235, 250, 240}, 40, {60, 160, 90}, S::Ring, {140, 6, 28, 28}, kWhite,
     0, 0, 130, 130, {255, 255, 255}, {60, 160, 90}, kNone, kWhite,
     6, {170, 60, 130, 60}, 26, {60, 160, 90}},
    {"bookclub.test", {90, 30, 30}, 0, kWhite, S::Box, {20, 16, 100, 24}, {240, 220, 180},
     2, 1, 130, 170, {250, 240, 225}, {90, 30, 30}, kNone, kWhite,
     5, {20, 70, 140, 50}, 0, kWhite},
    {"weatherapp.test", {135, 190, 240}, 0, kWhite, S::Disc, {30, 20, 60, 60}, {255, 220, 60},
     2, 2, 140, 120, {255, 255, 255}, {20, 80, 160}, {0, 170, 160, 70}, {250, 250, 255},
     0, kNone, 0, kWhite},
    {"forumspace.test", {255, 255, 255}, 20, {255, 69, 0}, S::Disc, {6, 2, 16, 16}, kWhite,
     0, 2, 110, 120, {246, 247, 248}, {0, 121, 211}, kNone, kWhite,
     16, {140, 30, 170, 170}, 0, kWhite},
    {"ticketbooth.test", {20, 20, 40}, 50, {2, 108, 223}, S::Bar, {10, 12, 110, 24}, kWhite,
     1, 2, 220, 100, {255, 255, 255}, {2, 108, 223}, {0, 50, 320, 60}, {200, 40, 90},
     0, kNone, 0, kWhite},
    {"smarthome.test", {250, 250, 250}, 0, kWhite, S::Ring, {270, 190, 40, 40}, {0, 170, 200},
     0, 0, 150, 150, {0, 170, 200}, {255, 255, 255}, kNone, kWhite,
     3, {180, 40, 120, 30}, 0, kWhite},
    {"charityfund.test", {255, 255, 255}, 64, {230, 120, 40}, S::Box, {120, 12, 80, 40}, kWhite,
     2, 1, 110, 130, {252, 245, 235}, {230, 120, 40}, {0, 64, 190, 176}, {250, 210, 170},
     0, kNone, 0, kWhite},
};

}  // namespace

const std::vector<BrandStyle>& logged_brands() { return kLogged; }
const std::vector<BrandStyle>& unlogged_brands() { return kUnlogged; }

Image render_page(const BrandStyle& s, int width, int height) {
  Image img(width, height);
  // Layout is authored for 320x240 and scaled to the requested size.
  Image base(kPageWidth, kPageHeight);
  base.fill_rect(0, 0, kPageWidth, kPageHeight, s.background.r, s.background.g, s.background.b);
  if (s.hero.w > 0) fill(base, s.hero, s.hero_color);
  if (s.header_height > 0) fill(base, {0, 0, kPageWidth, s.header_height}, s.header);
  if (s.footer_height > 0) {
    fill(base, {0, kPageHeight - s.footer_height, kPageWidth, s.footer_height}, s.footer);
  }
  draw_logo(base, s);
  if (s.text_lines > 0) {
    Rgb under = s.background;
    if (s.hero.w > 0 && s.text_area.x >= s.hero.x && s.text_area.x < s.hero.x + s.hero.w &&
        s.text_area.y >= s.hero.y && s.text_area.y < s.hero.y + s.hero.h) {
      under = s.hero_color;
    }
    text_lines(base, s.text_area, s.text_lines, ink_for(under));
  }
  draw_panel(base, s);
  if (width == kPageWidth && height == kPageHeight) return base;

  // Nearest-neighbour upscale keeps edges crisp like a real screenshot.
  for (int y = 0; y < height; ++y) {
    int sy = std::min(kPageHeight - 1, y * kPageHeight / height);
    for (int x = 0; x < width; ++x) {
      int sx = std::min(kPageWidth - 1, x * kPageWidth / width);
      const float* p = base.pixel(sx, sy);
      img.set(x, y, p[0], p[1], p[2]);
    }
  }
  return img;
}

std::vector<AugmentationSpec> standard_augmentations(int width, int height, std::uint64_t seed) {
  int dx = static_cast<int>(std::lround(0.05 * width));
  int dy = static_cast<int>(std::lround(0.05 * height));
  return {
      AugmentationSpec::shift(-dx, -dy),
      AugmentationSpec::shift(dx, -dy),
      AugmentationSpec::shift(-dx, dy),
      AugmentationSpec::shift(dx, dy),
      AugmentationSpec::brighten(1.2),
      AugmentationSpec::brighten(1.4),
      AugmentationSpec::darken(0.8),
      AugmentationSpec::darken(0.6),
      AugmentationSpec::gaussian_noise(5.0, seed * 2 + 1),
      AugmentationSpec::gaussian_noise(10.0, seed * 2 + 2),
  };
}

std::vector<AugmentationSpec> light_augmentations(int width, int height, std::uint64_t seed) {
  int dx = std::max(1, static_cast<int>(std::lround(0.01 * width)));
  int dy = std::max(1, static_cast<int>(std::lround(0.01 * height)));
  return {
      AugmentationSpec::shift(dx, dy),
      AugmentationSpec::shift(-dx, -dy),
      AugmentationSpec::brighten(1.1),
      AugmentationSpec::darken(0.9),
      AugmentationSpec::gaussian_noise(5.0, seed),
  };
}

std::vector<CalibrationDomain> build_calibration_corpus(std::uint64_t seed) {
  std::vector<Image> foreign;
  for (const auto& b : unlogged_brands()) foreign.push_back(render_page(b));

  std::vector<CalibrationDomain> corpus;
  std::uint64_t i = 0;
  for (const auto& b : logged_brands()) {
    CalibrationDomain d;
    d.domain = b.domain;
    d.original = render_page(b);
    for (const auto& spec :
         standard_augmentations(d.original.width(), d.original.height(), seed * 1000 + i)) {
      d.variants.push_back(augment(d.original, spec));
    }
    d.foreign = foreign;
    corpus.push_back(std::move(d));
    ++i;
  }
  return corpus;
}

}  // namespace pt::synthetic
