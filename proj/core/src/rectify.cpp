#include "parallax/rectify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace parallax::rectify {

namespace {

Eigen::Matrix3d cross_matrix(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Similarity taking points to zero mean and mean distance sqrt(2).
Eigen::Matrix3d normaliser(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double s = dist > 1e-12 ? std::numbers::sqrt2 / dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

Eigen::Matrix3d canonical_sign(Eigen::Matrix3d f) {
  f /= f.norm();
  // Largest-magnitude entry positive; ties resolved by first in row-major order.
  int bi = 0, bj = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (std::abs(f(i, j)) > std::abs(f(bi, bj)) + 1e-12) {
        bi = i;
        bj = j;
      }
  if (f(bi, bj) < 0) f = -f;
  return f;
}

}  // namespace

double sampson_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& left, const Eigen::Vector2d& right) {
  const Eigen::Vector3d xl(left.x(), left.y(), 1.0);
  const Eigen::Vector3d xr(right.x(), right.y(), 1.0);
  const Eigen::Vector3d fl = f * xl;
  const Eigen::Vector3d fr = f.transpose() * xr;
  const double num = xr.dot(fl);
  const double den = fl.x() * fl.x() + fl.y() * fl.y() + fr.x() * fr.x() + fr.y() * fr.y();
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(num) / std::sqrt(den);
}

FundamentalMatrix fit_fundamental(std::span<const PointMatch> matches) {
  if (matches.size() < 8) throw Error("need at least 8 matches");
  std::vector<Eigen::Vector2d> pl, pr;
  pl.reserve(matches.size());
  pr.reserve(matches.size());
  for (const auto& m : matches) {
    pl.push_back(m.left);
    pr.push_back(m.right);
  }
  const Eigen::Matrix3d tl = normaliser(pl);
  const Eigen::Matrix3d tr = normaliser(pr);

  Eigen::MatrixXd a(static_cast<Eigen::Index>(matches.size()), 9);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Eigen::Vector3d l = tl * Eigen::Vector3d(pl[i].x(), pl[i].y(), 1.0);
    const Eigen::Vector3d r = tr * Eigen::Vector3d(pr[i].x(), pr[i].y(), 1.0);
    const auto row = static_cast<Eigen::Index>(i);
    a.row(row) << r.x() * l.x(), r.x() * l.y(), r.x(), r.y() * l.x(), r.y() * l.y(), r.y(), l.x(), l.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd v = svd.matrixV().col(8);
  Eigen::Matrix3d f;
  f << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);

  Eigen::JacobiSVD<Eigen::Matrix3d> fsvd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = fsvd.singularValues();
  s(2) = 0.0;
  f = fsvd.matrixU() * s.asDiagonal() * fsvd.matrixV().transpose();
  f = tr.transpose() * f * tl;
  return {canonical_sign(f)};
}

FundamentalEstimate estimate_fundamental(std::span<const PointMatch> matches, const RansacConfig& cfg) {
  const std::size_t n = matches.size();
  if (n < 8) throw Error("need at least 8 matches");

  auto collect_inliers = [&](const Eigen::Matrix3d& f) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (sampson_distance(f, matches[i].left, matches[i].right) <= cfg.threshold_px) idx.push_back(i);
    return idx;
  };

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> best;
  std::vector<PointMatch> sample(8);
  std::vector<std::size_t> order(n);
  long budget = cfg.max_iterations;
  for (long it = 0; it < budget; ++it) {
    // Partial Fisher-Yates draws 8 distinct indices.
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t k = 0; k < 8; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, n - 1);
      std::swap(order[k], order[pick(rng)]);
      sample[k] = matches[order[k]];
    }
    FundamentalMatrix f;
    try {
      f = fit_fundamental(sample);
    } catch (const Error&) {
      continue;
    }
    if (!f.m.allFinite()) continue;
    auto inl = collect_inliers(f.m);
    if (inl.size() > best.size()) {
      best = std::move(inl);
      const double ratio = static_cast<double>(best.size()) / static_cast<double>(n);
      const double miss = 1.0 - std::pow(ratio, 8.0);
      if (miss <= 1e-12) break;
      const double needed = std::log(1.0 - cfg.confidence) / std::log(miss);
      budget = std::min<long>(cfg.max_iterations, static_cast<long>(std::ceil(needed)) + it + 1);
    }
  }
  if (best.size() < 8 ||
      static_cast<double>(best.size()) < cfg.min_inlier_ratio * static_cast<double>(n))
    throw Error("degenerate geometry");

  // Refit on the consensus set until it stops changing.
  FundamentalEstimate est;
  est.inliers = best;
  for (int round = 0; round < 5; ++round) {
    std::vector<PointMatch> subset;
    subset.reserve(est.inliers.size());
    for (std::size_t i : est.inliers) subset.push_back(matches[i]);
    est.f = fit_fundamental(subset);
    auto next = collect_inliers(est.f.m);
    if (next.size() < 8) break;
    if (next == est.inliers) break;
    est.inliers = std::move(next);
  }
  if (static_cast<double>(est.inliers.size()) < cfg.min_inlier_ratio * static_cast<double>(n))
    throw Error("degenerate geometry");
  return est;
}

// ---------------------------------------------------------------------------
// Loop-Zhang

namespace {

Eigen::Vector3d null_vector(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullV);
  return svd.matrixV().col(2);
}

bool epipole_in_view(const Eigen::Vector3d& e, ImageSize size) {
  if (std::abs(e.z()) < 1e-12 * e.head<2>().norm()) return false;
  const double x = e.x() / e.z();
  const double y = e.y() / e.z();
  return x >= 0 && y >= 0 && x <= size.width - 1 && y <= size.height - 1;
}

// 2x2 blocks of the distortion quadratic forms for one image.
struct Distortion {
  Eigen::Matrix2d a;
  Eigen::Matrix2d b;
};

Distortion distortion_forms(const Eigen::Matrix3d& line_map, ImageSize size) {
  const double w = size.width;
  const double h = size.height;
  Eigen::Matrix3d ppt = Eigen::Matrix3d::Zero();
  ppt(0, 0) = w * h / 12.0 * (w * w - 1.0);
  ppt(1, 1) = w * h / 12.0 * (h * h - 1.0);
  const Eigen::Vector3d pc((w - 1.0) / 2.0, (h - 1.0) / 2.0, 1.0);
  const Eigen::Matrix3d pcpc = pc * pc.transpose();
  const Eigen::Matrix3d a = line_map.transpose() * ppt * line_map;
  const Eigen::Matrix3d b = line_map.transpose() * pcpc * line_map;
  return {a.topLeftCorner<2, 2>(), b.topLeftCorner<2, 2>()};
}

double rayleigh(const Distortion& d, const Eigen::Vector2d& z) {
  const double den = z.dot(d.b * z);
  if (den <= 1e-300) return std::numeric_limits<double>::infinity();
  return z.dot(d.a * z) / den;
}

Eigen::Vector2d minimise_distortion(const Distortion& left, const Distortion& right) {
  auto cost = [&](double theta) {
    const Eigen::Vector2d z(std::cos(theta), std::sin(theta));
    return rayleigh(left, z) + rayleigh(right, z);
  };
  constexpr int kSamples = 3600;
  const double step = std::numbers::pi / kSamples;
  double best_t = 0.0;
  double best_c = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kSamples; ++i) {
    const double t = i * step;
    const double c = cost(t);
    if (c < best_c) {
      best_c = c;
      best_t = t;
    }
  }
  if (!std::isfinite(best_c)) throw Error("near-singular decomposition");
  // Golden-section refinement within one sample of the best grid point.
  double lo = best_t - step, hi = best_t + step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = cost(x1), f2 = cost(x2);
  for (int i = 0; i < 60; ++i) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = cost(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = cost(x2);
    }
  }
  const double t = f1 < best_c || f2 < best_c ? 0.5 * (lo + hi) : best_t;
  return {std::cos(t), std::sin(t)};
}

Eigen::Matrix3d projective_part(const Eigen::Vector3d& line) {
  if (std::abs(line.z()) < 1e-12 * line.norm()) throw Error("near-singular decomposition");
  const Eigen::Vector3d w = line / line.z();
  Eigen::Matrix3d hp = Eigen::Matrix3d::Identity();
  hp(2, 0) = w.x();
  hp(2, 1) = w.y();
  return hp;
}

// In-plane rotation sending the (infinite) epipole onto the x axis, taking
// whichever of the two directions needs the smaller turn.
Eigen::Matrix3d align_epipole(const Eigen::Vector3d& e_inf) {
  double phi = -std::atan2(e_inf.y(), e_inf.x());
  if (phi > std::numbers::pi / 2) phi -= std::numbers::pi;
  if (phi <= -std::numbers::pi / 2) phi += std::numbers::pi;
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r(0, 0) = std::cos(phi);
  r(0, 1) = -std::sin(phi);
  r(1, 0) = std::sin(phi);
  r(1, 1) = std::cos(phi);
  return r;
}

Eigen::Vector2d map(const Eigen::Matrix3d& h, double x, double y) {
  const Eigen::Vector3d p = h * Eigen::Vector3d(x, y, 1.0);
  return p.head<2>() / p.z();
}

// x-only shear restoring perpendicularity and aspect ratio of the lines
// joining opposite edge midpoints.
Eigen::Matrix3d shear_part(const Eigen::Matrix3d& h, ImageSize size) {
  const double w = size.width - 1;
  const double hh = size.height - 1;
  const Eigen::Vector2d a = map(h, w / 2, 0);
  const Eigen::Vector2d b = map(h, w, hh / 2);
  const Eigen::Vector2d c = map(h, w / 2, hh);
  const Eigen::Vector2d d = map(h, 0, hh / 2);
  const Eigen::Vector2d x = b - d;
  const Eigen::Vector2d y = c - a;
  const double den = hh * w * (x.y() * y.x() - x.x() * y.y());
  if (std::abs(den) < 1e-12) throw Error("near-singular decomposition");
  double sa = (hh * hh * x.y() * x.y() + w * w * y.y() * y.y()) / den;
  double sb = (hh * hh * x.x() * x.y() + w * w * y.x() * y.y()) / -den;
  if (sa < 0) {
    sa = -sa;
    sb = -sb;
  }
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  s(0, 0) = sa;
  s(0, 1) = sb;
  return s;
}

struct Box {
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();
};

Box corners_box(const Eigen::Matrix3d& h, ImageSize size) {
  Box box;
  const double xs[2] = {0.0, static_cast<double>(size.width - 1)};
  const double ys[2] = {0.0, static_cast<double>(size.height - 1)};
  for (double x : xs)
    for (double y : ys) {
      const Eigen::Vector3d p = h * Eigen::Vector3d(x, y, 1.0);
      if (p.z() <= 0) throw Error("near-singular decomposition");
      const Eigen::Vector2d q = p.head<2>() / p.z();
      box.x0 = std::min(box.x0, q.x());
      box.y0 = std::min(box.y0, q.y());
      box.x1 = std::max(box.x1, q.x());
      box.y1 = std::max(box.y1, q.y());
    }
  return box;
}

Eigen::Matrix3d scale_translate(double k, double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = k;
  m(1, 1) = k;
  m(0, 2) = tx;
  m(1, 2) = ty;
  return m;
}

// Homographies are only defined up to scale; keep h(2,2) = 1 so the
// orientation test on p.z() in corners_box is meaningful.
Eigen::Matrix3d fix_scale(Eigen::Matrix3d h) {
  if (std::abs(h(2, 2)) < 1e-300) throw Error("near-singular decomposition");
  return h / h(2, 2);
}

}  // namespace

Homographies loop_zhang_rectify(const FundamentalMatrix& fm, ImageSize left, ImageSize right,
                                const std::optional<Principals>& principal, const RectifyOptions& opts) {
  if (left.width <= 0 || left.height <= 0 || right.width <= 0 || right.height <= 0)
    throw std::invalid_argument("loop_zhang_rectify: empty image");
  const Eigen::Matrix3d& f = fm.m;
  {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(f);
    const auto s = svd.singularValues();
    if (!(s(0) > 0) || s(1) / s(0) < 1e-9) throw Error("near-singular decomposition");
  }
  const Eigen::Vector3d el = null_vector(f);
  const Eigen::Vector3d er = null_vector(f.transpose());
  if (epipole_in_view(el, left) || epipole_in_view(er, right)) throw Error("epipole in view");

  // Projective parts: corresponding epipolar lines w = [e]x z and w' = F z
  // are sent to infinity, z chosen to minimise projective distortion.
  const Eigen::Matrix3d ex = cross_matrix(el);
  const Eigen::Vector2d z2 = minimise_distortion(distortion_forms(ex, left), distortion_forms(f, right));
  const Eigen::Vector3d z(z2.x(), z2.y(), 0.0);
  const Eigen::Matrix3d hp_l = projective_part(ex * z);
  const Eigen::Matrix3d hp_r = projective_part(f * z);

  // Similarity parts: rotate both epipoles onto the x axis, then scale and
  // shift the right image vertically so corresponding rows coincide.
  const Eigen::Matrix3d r_l = align_epipole(hp_l * el);
  const Eigen::Matrix3d r_r = align_epipole(hp_r * er);
  Eigen::Matrix3d h_l = r_l * hp_l;
  Eigen::Matrix3d h_r = r_r * hp_r;
  const Eigen::Matrix3d f1 = h_r.inverse().transpose() * f * h_l.inverse();
  // f1 ~ [[0,0,0],[0,0,b],[0,c,d]]: y_r * b + c * y_l + d = 0.
  const double b = f1(1, 2);
  const double c = f1(2, 1);
  const double d = f1(2, 2);
  if (std::abs(c) < 1e-12 * f1.norm() || std::abs(b) < 1e-12 * f1.norm())
    throw Error("near-singular decomposition");
  const double s = -b / c;
  Eigen::Matrix3d sim_r = Eigen::Matrix3d::Identity();
  sim_r(0, 0) = std::abs(s);
  sim_r(1, 1) = s;
  sim_r(1, 2) = -d / c;
  h_r = fix_scale(sim_r * h_r);
  h_l = fix_scale(h_l);

  h_l = fix_scale(shear_part(h_l, left) * h_l);
  h_r = fix_scale(shear_part(h_r, right) * h_r);

  // Common scale and vertical placement; per-image horizontal placement.
  const Box bl = corners_box(h_l, left);
  const Box br = corners_box(h_r, right);
  const double area_src = static_cast<double>(left.width) * left.height;
  const double area_dst = (bl.x1 - bl.x0 + 1) * (bl.y1 - bl.y0 + 1);
  double k = std::sqrt(area_src / area_dst);
  const double y0 = std::min(bl.y0, br.y0);
  const double y1 = std::max(bl.y1, br.y1);
  const double extent_w = std::max(bl.x1 - bl.x0, br.x1 - br.x0) + 1;
  const double extent_h = y1 - y0 + 1;
  if (opts.max_size > 0) k = std::min(k, opts.max_size / std::max(extent_w, extent_h));
  if (!std::isfinite(k) || k <= 0) throw Error("near-singular decomposition");

  Homographies out;
  out.left = fix_scale(scale_translate(k, -k * bl.x0, -k * y0) * h_l);
  double tx_r = -k * br.x0;
  if (principal) {
    const Eigen::Vector2d pl = map(out.left, principal->left.x(), principal->left.y());
    const Eigen::Vector2d pr = map(scale_translate(k, 0.0, -k * y0) * h_r, principal->right.x(), principal->right.y());
    tx_r = pl.x() - pr.x();
  }
  out.right = fix_scale(scale_translate(k, tx_r, -k * y0) * h_r);
  out.width = std::max(1, static_cast<int>(std::ceil(k * extent_w - 1e-9)));
  out.height = std::max(1, static_cast<int>(std::ceil(k * extent_h - 1e-9)));
  return out;
}

Eigen::Vector2d apply_h(const Eigen::Matrix3d& h, const Eigen::Vector2d& p) { return map(h, p.x(), p.y()); }

void warp_bilinear(const ImageGray& src, const Eigen::Matrix3d& h, int width, int height, ImageGray& out,
                   Mask& valid) {
  out = ImageGray(width, height, 0.0f);
  valid = Mask(width, height, 0);
  const Eigen::Matrix3d inv = h.inverse();
  const double xmax = src.width() - 1;
  const double ymax = src.height() - 1;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector3d p = inv * Eigen::Vector3d(x, y, 1.0);
      if (p.z() <= 0) continue;
      const double sx = p.x() / p.z();
      const double sy = p.y() / p.z();
      if (!(sx >= 0 && sy >= 0 && sx <= xmax && sy <= ymax)) continue;
      const int x0 = std::min(static_cast<int>(sx), src.width() - 1);
      const int y0 = std::min(static_cast<int>(sy), src.height() - 1);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const int y1 = std::min(y0 + 1, src.height() - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      const double v = (1 - fx) * (1 - fy) * src.at(x0, y0) + fx * (1 - fy) * src.at(x1, y0) +
                       (1 - fx) * fy * src.at(x0, y1) + fx * fy * src.at(x1, y1);
      out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      valid.at(x, y) = 1;
    }
  }
}

RectifiedPair apply_and_offset(const ImageGray& left, const ImageGray& right, const Homographies& h,
                               std::span<const PointMatch> inliers, const Eigen::Vector2d& principal_left) {
  if (std::abs(h.left.determinant()) < 1e-15 || std::abs(h.right.determinant()) < 1e-15)
    throw Error("homography not invertible");

  double min_d = std::numeric_limits<double>::infinity();
  for (const auto& m : inliers) {
    const double d = apply_h(h.left, m.left).x() - apply_h(h.right, m.right).x();
    min_d = std::min(min_d, d);
  }
  // No evidence: keep the geometric placement.
  const double offset = std::isfinite(min_d) && min_d < 0 ? -min_d : 0.0;

  RectifiedPair out;
  out.h_left = h.left;
  Eigen::Matrix3d shift = Eigen::Matrix3d::Identity();
  shift(0, 2) = -offset;
  out.h_right = fix_scale(shift * h.right);
  out.disparity_offset = offset;

  warp_bilinear(left, out.h_left, h.width, h.height, out.left, out.left_valid);
  warp_bilinear(right, out.h_right, h.width, h.height, out.right, out.right_valid);
  const auto any = [](const Mask& m) {
    return std::any_of(m.data().begin(), m.data().end(), [](std::uint8_t v) { return v != 0; });
  };
  if (!any(out.left_valid) || !any(out.right_valid)) throw Error("warped valid region empty");

  out.focal = infer_intrinsics(h.height);
  out.principal = apply_h(out.h_left, principal_left);
  if (!inliers.empty()) {
    out.min_disparity = std::numeric_limits<double>::infinity();
    out.max_disparity = -std::numeric_limits<double>::infinity();
    for (const auto& m : inliers) {
      const double d = apply_h(out.h_left, m.left).x() - apply_h(out.h_right, m.right).x();
      out.min_disparity = std::min(out.min_disparity, d);
      out.max_disparity = std::max(out.max_disparity, d);
    }
  }
  return out;
}

double infer_intrinsics(int height) {
  if (height <= 0) throw std::invalid_argument("infer_intrinsics: height must be positive");
  return (height / 2.0) / std::tan(22.5 * std::numbers::pi / 180.0);
}

}  // namespace parallax::rectify
