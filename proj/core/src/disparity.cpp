#include "parallax/disparity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace parallax::disparity {

namespace {

struct Level {
  ImageGray image;
  Mask valid;  // whole window inside the valid region (image edges replicate)
  Raster<float> mean;
  Raster<float> inv_std;  // 0 where the window is too flat to match
};

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

Level make_level(ImageGray image, Mask valid, int radius, double min_texture) {
  Level lv{std::move(image), Mask(valid.width(), valid.height(), 0), {}, {}};
  const int w = lv.image.width(), h = lv.image.height();
  // Separable erosion by the window radius.
  Mask rows(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int dx = -radius; dx <= radius && all; ++dx) all = valid.at(clampi(x + dx, 0, w - 1), y) != 0;
      rows.at(x, y) = all;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int dy = -radius; dy <= radius && all; ++dy) all = rows.at(x, clampi(y + dy, 0, h - 1)) != 0;
      lv.valid.at(x, y) = all;
    }
  lv.mean = Raster<float>(w, h);
  lv.inv_std = Raster<float>(w, h);
  const double n = (2.0 * radius + 1) * (2.0 * radius + 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0, s2 = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = clampi(y + dy, 0, h - 1);
        for (int dx = -radius; dx <= radius; ++dx) {
          const double v = lv.image.at(clampi(x + dx, 0, w - 1), yy);
          s += v;
          s2 += v * v;
        }
      }
      const double m = s / n;
      const double var = std::max(0.0, s2 / n - m * m);
      lv.mean.at(x, y) = static_cast<float>(m);
      lv.inv_std.at(x, y) = var > min_texture * min_texture ? static_cast<float>(1.0 / std::sqrt(var)) : 0.0f;
    }
  }
  return lv;
}

std::pair<ImageGray, Mask> downsample(const ImageGray& img, const Mask& valid) {
  const int w = std::max(1, img.width() / 2), h = std::max(1, img.height() / 2);
  ImageGray out(w, h);
  Mask m(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::min(2 * x, img.width() - 1), x1 = std::min(2 * x + 1, img.width() - 1);
      const int y0 = std::min(2 * y, img.height() - 1), y1 = std::min(2 * y + 1, img.height() - 1);
      out.at(x, y) = 0.25f * (img.at(x0, y0) + img.at(x1, y0) + img.at(x0, y1) + img.at(x1, y1));
      m.at(x, y) = valid.at(x0, y0) && valid.at(x1, y0) && valid.at(x0, y1) && valid.at(x1, y1);
    }
  }
  return {std::move(out), std::move(m)};
}

// Normalised cross-correlation of the windows centred at (x, y) in `a` and
// (ox, oy) in `b`, with replicate borders.
float ncc(const Level& a, int x, int y, const Level& b, int ox, int oy, int radius) {
  const float ia = a.inv_std.at(x, y), ib = b.inv_std.at(ox, oy);
  if (ia == 0.0f || ib == 0.0f) return -1.0f;
  const int w = a.image.width(), h = a.image.height();
  const int bw = b.image.width(), bh = b.image.height();
  double s = 0.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    const int ya = clampi(y + dy, 0, h - 1);
    const int yb = clampi(oy + dy, 0, bh - 1);
    const float* ra = &a.image.at(0, ya);
    const float* rb = &b.image.at(0, yb);
    if (x - radius >= 0 && x + radius < w && ox - radius >= 0 && ox + radius < bw) {
      for (int dx = -radius; dx <= radius; ++dx) s += static_cast<double>(ra[x + dx]) * rb[ox + dx];
    } else {
      for (int dx = -radius; dx <= radius; ++dx)
        s += static_cast<double>(ra[clampi(x + dx, 0, w - 1)]) * rb[clampi(ox + dx, 0, bw - 1)];
    }
  }
  const double n = (2.0 * radius + 1) * (2.0 * radius + 1);
  return static_cast<float>((s / n - static_cast<double>(a.mean.at(x, y)) * b.mean.at(ox, oy)) * ia * ib);
}

struct Search {
  Raster<std::int16_t> lo;
  Raster<std::int16_t> hi;
};

RawMatch match_level(const Level& ref, const Level& other, int sign, const Search& range, int vr, int radius,
                     bool subpixel, float min_score, int dmax) {
  const int w = ref.image.width(), h = ref.image.height();
  RawMatch out{Raster<float>(w, h, 0.0f), Raster<std::int8_t>(w, h, 0), Mask(w, h, 0)};
  const int ow = other.image.width(), oh = other.image.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!ref.valid.at(x, y) || ref.inv_std.at(x, y) == 0.0f) continue;
      float best = -std::numeric_limits<float>::infinity();
      int best_d = -1, best_dy = 0;
      const int lo = range.lo.at(x, y), hi = range.hi.at(x, y);
      for (int k = 0; k <= 2 * vr; ++k) {
        // 0, -1, +1, -2, +2: prefer small vertical offsets on ties.
        const int dy = (k + 1) / 2 * (k % 2 ? -1 : 1);
        const int oy = y + dy;
        if (oy < 0 || oy >= oh) continue;
        for (int d = lo; d <= hi; ++d) {
          const int ox = x - sign * d;
          if (ox < 0 || ox >= ow || !other.valid.at(ox, oy)) continue;
          const float s = ncc(ref, x, y, other, ox, oy, radius);
          if (s > best) {
            best = s;
            best_d = d;
            best_dy = dy;
          }
        }
      }
      if (best_d < 0 || best < min_score) continue;
      double d = best_d;
      if (subpixel) {
        // The peak must be confirmed by every neighbouring candidate that the
        // search range allows; a neighbour lost to the valid region leaves it
        // unconfirmed.
        const int oy = y + best_dy;
        const auto candidate = [&](int dd, double& score) {
          const int ox = x - sign * dd;
          if (ox < 0 || ox >= ow || !other.valid.at(ox, oy)) return false;
          score = ncc(ref, x, y, other, ox, oy, radius);
          return true;
        };
        double sm = 0, sp = 0;
        const bool has_m = best_d > 0, has_p = best_d < dmax;
        if ((has_m && !candidate(best_d - 1, sm)) || (has_p && !candidate(best_d + 1, sp))) continue;
        if (has_m && has_p) {
          const double curv = sm - 2.0 * best + sp;
          if (curv < 0) d += std::clamp(0.5 * (sm - sp) / curv, -0.5, 0.5);
        }
      }
      out.disparity.at(x, y) = static_cast<float>(std::max(0.0, d));
      out.dy.at(x, y) = static_cast<std::int8_t>(best_dy);
      out.ok.at(x, y) = 1;
    }
  }
  return out;
}

Mask all_valid(const ImageGray& img) { return Mask(img.width(), img.height(), 1); }

}  // namespace

RawMatch match_one_way(const ImageGray& ref, const Mask& ref_valid_in, const ImageGray& other,
                       const Mask& other_valid_in, int sign, const DisparityConfig& cfg) {
  const int radius = cfg.patch / 2;
  const Mask ref_valid = ref_valid_in.empty() ? all_valid(ref) : ref_valid_in;
  const Mask other_valid = other_valid_in.empty() ? all_valid(other) : other_valid_in;

  std::vector<std::pair<ImageGray, Mask>> ref_pyr{{ref, ref_valid}}, oth_pyr{{other, other_valid}};
  for (int l = 1; l < std::max(cfg.levels, 1); ++l) {
    if (ref_pyr.back().first.width() < cfg.patch * 2 || ref_pyr.back().first.height() < cfg.patch * 2) break;
    ref_pyr.push_back(downsample(ref_pyr.back().first, ref_pyr.back().second));
    oth_pyr.push_back(downsample(oth_pyr.back().first, oth_pyr.back().second));
  }
  const int levels = static_cast<int>(ref_pyr.size());

  RawMatch coarse;
  for (int l = levels - 1; l >= 0; --l) {
    const Level a = make_level(ref_pyr[static_cast<std::size_t>(l)].first, ref_pyr[static_cast<std::size_t>(l)].second,
                               radius, cfg.min_texture);
    const Level b = make_level(oth_pyr[static_cast<std::size_t>(l)].first, oth_pyr[static_cast<std::size_t>(l)].second,
                               radius, cfg.min_texture);
    const int w = a.image.width(), h = a.image.height();
    const int dmax = static_cast<int>(std::ceil(cfg.max_disp / std::pow(2.0, l)));
    Search range{Raster<std::int16_t>(w, h, 0), Raster<std::int16_t>(w, h, static_cast<std::int16_t>(dmax))};
    if (l < levels - 1) {
      // Window spanned by the 3x3 coarse neighbourhood, doubled, ±2.
      const int cw = coarse.disparity.width(), ch = coarse.disparity.height();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int cx = std::min(x / 2, cw - 1), cy = std::min(y / 2, ch - 1);
          float lo = std::numeric_limits<float>::infinity(), hi = -lo;
          for (int j = -1; j <= 1; ++j)
            for (int i = -1; i <= 1; ++i) {
              const int nx = cx + i, ny = cy + j;
              if (nx < 0 || ny < 0 || nx >= cw || ny >= ch || !coarse.ok.at(nx, ny)) continue;
              lo = std::min(lo, coarse.disparity.at(nx, ny));
              hi = std::max(hi, coarse.disparity.at(nx, ny));
            }
          if (!std::isfinite(lo)) continue;  // keep the full range
          range.lo.at(x, y) = static_cast<std::int16_t>(clampi(static_cast<int>(std::floor(2 * lo)) - 2, 0, dmax));
          range.hi.at(x, y) = static_cast<std::int16_t>(clampi(static_cast<int>(std::ceil(2 * hi)) + 2, 0, dmax));
        }
      }
    }
    const int vr = l == 0 ? cfg.vertical_slack : std::min(cfg.vertical_slack, 1);
    coarse = match_level(a, b, sign, range, vr, radius, l == 0, static_cast<float>(cfg.min_score), dmax);
  }
  return coarse;
}

DisparityMap dense_disparity(const ImageGray& left, const Mask& left_valid_in, const ImageGray& right,
                             const Mask& right_valid_in, const DisparityConfig& cfg) {
  if (!left.same_shape(right)) throw std::invalid_argument("dense_disparity: image dimensions differ");
  if (left.width() < cfg.patch || left.height() < cfg.patch) throw Error("image smaller than patch");
  const Mask left_valid = left_valid_in.empty() ? all_valid(left) : left_valid_in;
  const Mask right_valid = right_valid_in.empty() ? all_valid(right) : right_valid_in;

  const RawMatch lr = match_one_way(left, left_valid, right, right_valid, +1, cfg);
  const RawMatch rl = match_one_way(right, right_valid, left, left_valid, -1, cfg);

  const int w = left.width(), h = left.height();
  DisparityMap out{Raster<float>(w, h, 0.0f), Mask(w, h, 0), Mask(w, h, 0), 0.0};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!lr.ok.at(x, y)) continue;
      const float d = lr.disparity.at(x, y);
      const int xr = static_cast<int>(std::lround(x - d));
      const int yr = y + lr.dy.at(x, y);
      if (xr < 0 || xr >= w || yr < 0 || yr >= h || !rl.ok.at(xr, yr)) continue;
      if (std::abs(d - rl.disparity.at(xr, yr)) > cfg.lr_tolerance) continue;
      out.data.at(x, y) = d;
      out.valid.at(x, y) = 1;
    }
  }

  // Median over the checked disparities in a square window; isolated
  // sub-pixel wobble otherwise turns into depth cracks far from the camera.
  if (cfg.median_radius > 0) {
    const int r = cfg.median_radius;
    Raster<float> smoothed = out.data;
    std::vector<float> window;
    window.reserve(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!out.valid.at(x, y)) continue;
        window.clear();
        for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
          for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx)
            if (out.valid.at(xx, yy)) window.push_back(out.data.at(xx, yy));
        const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
        std::nth_element(window.begin(), mid, window.end());
        float m = *mid;
        if (window.size() % 2 == 0) m = 0.5f * (m + *std::max_element(window.begin(), mid));
        smoothed.at(x, y) = m;
      }
    out.data = std::move(smoothed);
  }
  // Range-limited mean: averages away sub-pixel noise without crossing
  // depth edges.
  if (cfg.smooth_radius > 0) {
    const int r = cfg.smooth_radius;
    const auto range = static_cast<float>(cfg.smooth_range);
    Raster<float> smoothed = out.data;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!out.valid.at(x, y)) continue;
        const float c = out.data.at(x, y);
        double sum = 0.0;
        int n = 0;
        for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
          for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
            const float v = out.data.at(xx, yy);
            if (out.valid.at(xx, yy) && std::abs(v - c) <= range) {
              sum += v;
              ++n;
            }
          }
        smoothed.at(x, y) = static_cast<float>(sum / n);
      }
    out.data = std::move(smoothed);
  }
  if (cfg.median_radius > 0 || cfg.smooth_radius > 0) {
    // The smoothed value must still pass the left-right check.
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!out.valid.at(x, y)) continue;
        const float d = out.data.at(x, y);
        const int xr = static_cast<int>(std::lround(x - d));
        const int yr = y + lr.dy.at(x, y);
        if (xr < 0 || xr >= w || yr < 0 || yr >= h || !rl.ok.at(xr, yr) ||
            std::abs(d - rl.disparity.at(xr, yr)) > cfg.lr_tolerance) {
          out.valid.at(x, y) = 0;
          out.data.at(x, y) = 0.0f;
        }
      }
  }

  // Background extension along rows: short invalid runs inside the image's
  // valid region take the smaller (farther) of their bounding disparities.
  for (int y = 0; y < h; ++y) {
    int x = 0;
    while (x < w) {
      if (out.valid.at(x, y) || !left_valid.at(x, y)) {
        ++x;
        continue;
      }
      const int start = x;
      while (x < w && !out.valid.at(x, y) && left_valid.at(x, y)) ++x;
      const int end = x;  // exclusive
      if (end - start > cfg.max_fill) continue;
      const bool has_l = start > 0 && out.valid.at(start - 1, y);
      const bool has_r = end < w && out.valid.at(end, y);
      if (!has_l && !has_r) continue;
      float v = std::numeric_limits<float>::infinity();
      if (has_l) v = std::min(v, out.data.at(start - 1, y));
      if (has_r) v = std::min(v, out.data.at(end, y));
      for (int i = start; i < end; ++i) {
        out.data.at(i, y) = v;
        out.filled.at(i, y) = 1;
      }
    }
  }

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (out.usable(x, y)) out.d_max = std::max(out.d_max, static_cast<double>(out.data.at(x, y)));
  return out;
}

DisparityMap dense_disparity(const rectify::RectifiedPair& pair, const DisparityConfig& cfg) {
  return dense_disparity(pair.left, pair.left_valid, pair.right, pair.right_valid, cfg);
}

StereoDepth disparity_to_depth(const DisparityMap& disp, double focal, double baseline) {
  if (!(focal > 0) || !(baseline > 0)) throw std::invalid_argument("focal and baseline must be positive");
  const int w = disp.width(), h = disp.height();
  Raster<double> depth(w, h, 0.0);
  Mask valid(w, h, 0), clamped(w, h, 0);
  const double fb = focal * baseline;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!disp.usable(x, y)) continue;
      const double d = disp.data.at(x, y);
      valid.at(x, y) = 1;
      if (d > kZeroDisparity) {
        depth.at(x, y) = fb / d;
      } else {
        depth.at(x, y) = fb / kZeroDisparity;
        clamped.at(x, y) = 1;
      }
    }
  }
  return {DepthMap(std::move(depth), std::move(valid)), std::move(clamped)};
}

}  // namespace parallax::disparity
