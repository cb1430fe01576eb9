#include "parallax/inpaint.hpp"

#include <algorithm>
#include <cmath>

#include "parallax/normalize.hpp"

namespace parallax::inpaint {

InpaintRequest make_request(const ImageGray& intensity, const NormalizedInverseDepth& nid,
                            const BoundaryMask& boundary, const Mask& known) {
  if (!intensity.same_shape(known) || !nid.values.same_shape(known) || !boundary.same_shape(known))
    throw std::invalid_argument("make_request: dimensions differ");
  InpaintRequest req{intensity, nid, boundary, known};
  for (std::size_t i = 0; i < known.size(); ++i) {
    if (known[i]) continue;
    req.intensity_masked[i] = 0.0f;
    req.nid_masked.values[i] = 0.0;
    req.nid_masked.valid[i] = 0;
    req.boundary_masked[i] = 0;
  }
  return req;
}

GDImage InpaintResult::gd() const { return GDImage(intensity, denormalize(nid)); }

namespace {

enum State : std::uint8_t { kHole = 0, kSource = 1, kBlocked = 2, kFilled = 3 };

}  // namespace

InpaintResult DiffusionInpainter::inpaint(const InpaintRequest& req) const {
  const int w = req.known.width(), h = req.known.height();
  if (!req.intensity_masked.same_shape(req.known) || !req.nid_masked.values.same_shape(req.known) ||
      !req.boundary_masked.same_shape(req.known))
    throw std::invalid_argument("inpaint: dimensions differ");
  const std::size_t n = req.known.size();

  InpaintResult out;
  out.intensity = req.intensity_masked;
  out.nid = req.nid_masked;
  out.nid.valid = Mask(w, h, 1);
  if (std::all_of(req.known.data().begin(), req.known.data().end(), [](std::uint8_t v) { return v != 0; }))
    return out;
  if (std::none_of(req.known.data().begin(), req.known.data().end(), [](std::uint8_t v) { return v != 0; }))
    throw Error("nothing to inpaint from");

  std::vector<std::uint8_t> state(n);
  for (std::size_t i = 0; i < n; ++i)
    state[i] = !req.known[i] ? kHole : (guided_ && req.boundary_masked[i] ? kBlocked : kSource);

  // Hole components; those without a background source may draw on boundary
  // pixels after all.
  std::vector<std::int32_t> comp(n, -1);
  std::vector<std::uint8_t> unguided;
  std::vector<std::size_t> stack;
  const auto neighbours = [&](std::size_t i, std::size_t* nb) {
    const int x = static_cast<int>(i % static_cast<std::size_t>(w)), y = static_cast<int>(i / static_cast<std::size_t>(w));
    int k = 0;
    if (x > 0) nb[k++] = i - 1;
    if (x + 1 < w) nb[k++] = i + 1;
    if (y > 0) nb[k++] = i - static_cast<std::size_t>(w);
    if (y + 1 < h) nb[k++] = i + static_cast<std::size_t>(w);
    return k;
  };
  std::size_t nb[4];
  for (std::size_t s = 0; s < n; ++s) {
    if (state[s] != kHole || comp[s] >= 0) continue;
    const auto id = static_cast<std::int32_t>(unguided.size());
    bool has_source = false;
    comp[s] = id;
    stack.assign(1, s);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int k = neighbours(i, nb);
      for (int j = 0; j < k; ++j) {
        if (state[nb[j]] == kSource) has_source = true;
        if (state[nb[j]] == kHole && comp[nb[j]] < 0) {
          comp[nb[j]] = id;
          stack.push_back(nb[j]);
        }
      }
    }
    unguided.push_back(!has_source);
    if (!has_source) out.foreground_sealed = true;
  }

  const auto usable = [&](std::size_t from, std::size_t hole) {
    const std::uint8_t s = state[from];
    return s == kSource || s == kFilled || (s == kBlocked && unguided[static_cast<std::size_t>(comp[hole])]);
  };

  std::vector<double> inten(n), depth(n);
  for (std::size_t i = 0; i < n; ++i) {
    inten[i] = req.intensity_masked[i];
    depth[i] = req.nid_masked.values[i];
  }

  // Onion peel: each layer reads only values settled in earlier layers.
  std::vector<std::size_t> front, next;
  std::vector<std::uint8_t> queued(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (state[i] != kHole) continue;
    const int k = neighbours(i, nb);
    for (int j = 0; j < k; ++j)
      if (usable(nb[j], i)) {
        front.push_back(i);
        queued[i] = 1;
        break;
      }
  }
  std::vector<std::pair<double, double>> values;
  while (!front.empty()) {
    values.clear();
    for (const std::size_t i : front) {
      long double si = 0, sd = 0;
      int c = 0;
      const int k = neighbours(i, nb);
      for (int j = 0; j < k; ++j)
        if (usable(nb[j], i)) {
          si += inten[nb[j]];
          sd += depth[nb[j]];
          ++c;
        }
      values.emplace_back(static_cast<double>(si / c), static_cast<double>(sd / c));
    }
    for (std::size_t f = 0; f < front.size(); ++f) {
      inten[front[f]] = values[f].first;
      depth[front[f]] = values[f].second;
      state[front[f]] = kFilled;
    }
    next.clear();
    for (const std::size_t i : front) {
      const int k = neighbours(i, nb);
      for (int j = 0; j < k; ++j)
        if (state[nb[j]] == kHole && !queued[nb[j]]) {
          queued[nb[j]] = 1;
          next.push_back(nb[j]);
        }
    }
    front.swap(next);
  }

  // Relaxation: alternating forward / backward over-relaxed Gauss-Seidel
  // sweeps. An axis with a blocked (boundary) neighbour is left out of a
  // pixel's stencil, so the fill runs parallel to the foreground edge
  // instead of flattening against it.
  struct Stencil {
    std::size_t at;
    std::array<std::size_t, 4> from;
    int count;
  };
  std::vector<Stencil> stencils;
  for (std::size_t i = 0; i < n; ++i) {
    if (state[i] != kFilled) continue;
    Stencil st{i, {}, 0};
    const int x = static_cast<int>(i % static_cast<std::size_t>(w)), y = static_cast<int>(i / static_cast<std::size_t>(w));
    const std::size_t sw = static_cast<std::size_t>(w);
    const std::array<std::pair<bool, std::size_t>, 4> around = {
        std::pair{x > 0, i - 1}, {x + 1 < w, i + 1}, {y > 0, i - sw}, {y + 1 < h, i + sw}};
    for (int axis = 0; axis < 2; ++axis) {
      const auto& a = around[static_cast<std::size_t>(2 * axis)];
      const auto& b = around[static_cast<std::size_t>(2 * axis + 1)];
      const bool blocked = (a.first && !usable(a.second, i) && state[a.second] == kBlocked) ||
                           (b.first && !usable(b.second, i) && state[b.second] == kBlocked);
      if (blocked) continue;
      for (const auto& nbr : {a, b})
        if (nbr.first && usable(nbr.second, i)) st.from[static_cast<std::size_t>(st.count++)] = nbr.second;
    }
    if (st.count == 0) {
      const int k = neighbours(i, nb);
      for (int j = 0; j < k; ++j)
        if (usable(nb[j], i)) st.from[static_cast<std::size_t>(st.count++)] = nb[j];
    }
    stencils.push_back(st);
  }
  constexpr double kOmega = 1.8;
  const int max_sweeps = w + h;
  for (int sweep = 0; sweep < max_sweeps && !stencils.empty(); ++sweep) {
    double change = 0.0;
    const bool forward = sweep % 2 == 0;
    for (std::size_t t = 0; t < stencils.size(); ++t) {
      const Stencil& st = forward ? stencils[t] : stencils[stencils.size() - 1 - t];
      long double si = 0, sd = 0;
      for (int j = 0; j < st.count; ++j) {
        si += inten[st.from[static_cast<std::size_t>(j)]];
        sd += depth[st.from[static_cast<std::size_t>(j)]];
      }
      const double mi = static_cast<double>(si / st.count), md = static_cast<double>(sd / st.count);
      const double vi = inten[st.at] + kOmega * (mi - inten[st.at]);
      const double vd = depth[st.at] + kOmega * (md - depth[st.at]);
      change = std::max({change, std::abs(vi - inten[st.at]), std::abs(vd - depth[st.at])});
      inten[st.at] = vi;
      depth[st.at] = vd;
    }
    out.sweeps = sweep + 1;
    if (change < 1e-6) break;
  }

  std::vector<std::size_t> holes;
  for (const auto& st : stencils) holes.push_back(st.at);
  for (const std::size_t i : holes) {
    out.intensity[i] = static_cast<float>(std::clamp(inten[i], 0.0, 1.0));
    out.nid.values[i] = std::clamp(depth[i], 0.0, 1.0);
  }
  return out;
}

InpaintResult inpaint_gd(const InpaintRequest& req, bool guided) { return DiffusionInpainter(guided).inpaint(req); }

namespace {

void check_same(const Mask& known, int w, int h) {
  if (known.width() != w || known.height() != h) throw std::invalid_argument("loss: dimensions differ");
}

}  // namespace

InpaintMetrics depth_loss(const NormalizedInverseDepth& pred, const NormalizedInverseDepth& truth,
                          const Mask& known) {
  const int w = known.width(), h = known.height();
  check_same(known, pred.width(), pred.height());
  check_same(known, truth.width(), truth.height());

  double sv = 0, sh = 0;
  std::size_t nv = 0, nh = 0;
  std::vector<double> comp(known.size());
  for (std::size_t i = 0; i < known.size(); ++i) {
    const double d = std::abs(pred.values[i] - truth.values[i]);
    if (known[i]) {
      sv += d;
      ++nv;
      comp[i] = truth.values[i];  // composite masked by M keeps known pixels
    } else {
      sh += d;
      ++nh;
      comp[i] = 0.0;
    }
  }
  InpaintMetrics m;
  m.l_valid = nv ? sv / static_cast<double>(nv) : 0.0;
  m.l_hole = nh ? sh / static_cast<double>(nh) : 0.0;

  double tx = 0, ty = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x + 1 < w; ++x) tx += std::abs(comp[known.index(x + 1, y)] - comp[known.index(x, y)]);
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x < w; ++x) ty += std::abs(comp[known.index(x, y + 1)] - comp[known.index(x, y)]);
  const double px = static_cast<double>(w - 1) * h, py = static_cast<double>(w) * (h - 1);
  m.tv_term = (px > 0 ? tx / px : 0.0) + (py > 0 ? ty / py : 0.0);
  m.total = m.l_valid + kLambdaHole * m.l_hole + kLambdaTv * m.tv_term;
  return m;
}

IntensityLoss intensity_loss(const ImageGray& pred, const ImageGray& truth, const Mask& known) {
  check_same(known, pred.width(), pred.height());
  check_same(known, truth.width(), truth.height());
  double sv = 0, sh = 0;
  std::size_t nv = 0, nh = 0;
  for (std::size_t i = 0; i < known.size(); ++i) {
    const double d = std::abs(static_cast<double>(pred[i]) - static_cast<double>(truth[i]));
    if (known[i]) {
      sv += d;
      ++nv;
    } else {
      sh += d;
      ++nh;
    }
  }
  return {nv ? sv / static_cast<double>(nv) : 0.0, nh ? sh / static_cast<double>(nh) : 0.0};
}

std::array<CornerGD, 4> corner_gds(const GDImage& ref_gd, const geometry::QuadRig& rig, const Inpainter& inpainter) {
  if (!ref_gd.hole_free()) throw std::invalid_argument("corner_gds: reference must be hole-free");
  const CameraView& ref = rig.views[0];
  const geometry::DepthMesh mesh = geometry::depth_to_mesh(ref_gd, ref);
  std::array<CornerGD, 4> out;
  for (std::size_t c = 0; c < 4; ++c) {
    const CameraView& view = rig.views[c + 1];
    if (view.position == ref.position && view.rotation == ref.rotation) {
      out[c].gd = ref_gd;
      out[c].known = Mask(ref_gd.width(), ref_gd.height(), 1);
      continue;
    }
    const GDImage rendered = geometry::render(mesh, view);
    Mask holes(rendered.width(), rendered.height(), 0);
    for (std::size_t i = 0; i < holes.size(); ++i) holes[i] = !rendered.valid()[i];
    out[c].hole_pixels = static_cast<std::size_t>(std::count(holes.data().begin(), holes.data().end(), 1));
    out[c].known = rendered.valid();
    if (out[c].hole_pixels == 0) {
      out[c].gd = rendered;
      continue;
    }
    const BoundaryMask boundary = geometry::boundary_mask(rendered, holes);
    out[c].boundary_pixels = static_cast<std::size_t>(std::count(boundary.data().begin(), boundary.data().end(), 1));
    const NormalizedInverseDepth nid = normalize_inverse_depth(rendered.depth());
    const InpaintResult res = inpainter.inpaint(make_request(rendered.intensity(), nid, boundary, rendered.valid()));
    out[c].foreground_sealed = res.foreground_sealed;

    // Known pixels keep their rendered depth; holes come from the fill.
    const DepthMap filled = denormalize(res.nid);
    Raster<double> depth = rendered.depth().depth();
    for (std::size_t i = 0; i < depth.size(); ++i)
      if (holes[i]) depth[i] = filled.depth()[i];
    out[c].gd = GDImage(res.intensity, DepthMap(std::move(depth), Mask(rendered.width(), rendered.height(), 1)));
  }
  return out;
}

std::array<CornerGD, 4> corner_gds(const GDImage& ref_gd, const geometry::QuadRig& rig) {
  return corner_gds(ref_gd, rig, DiffusionInpainter(true));
}

}  // namespace parallax::inpaint
