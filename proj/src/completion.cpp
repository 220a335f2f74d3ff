#include "pcflow/completion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "pcflow/neighbor_grid.hpp"

namespace pcflow {

namespace {

struct HullFace {
  std::array<int, 3> v;
  Vec3 normal;  // unit outward
  double offset;
  std::vector<int> conflicts;
  bool alive = true;

  double dist(const Vec3& p) const { return normal.dot(p) - offset; }
};

HullFace make_face(int a, int b, int c, const std::vector<Vec3>& pts, const Vec3& inside) {
  HullFace f;
  f.v = {a, b, c};
  Vec3 n = (pts[std::size_t(b)] - pts[std::size_t(a)])
               .cross(pts[std::size_t(c)] - pts[std::size_t(a)]);
  const double len = n.norm();
  if (len > 0.0) n = n / len;
  if (n.dot(inside - pts[std::size_t(a)]) > 0.0) {
    std::swap(f.v[1], f.v[2]);
    n = -n;
  }
  f.normal = n;
  f.offset = n.dot(pts[std::size_t(a)]);
  return f;
}

}  // namespace

std::vector<std::uint32_t> convex_hull_vertices(const std::vector<Vec3>& points) {
  const int n = int(points.size());
  std::vector<std::uint32_t> all(points.size());
  std::iota(all.begin(), all.end(), 0u);
  if (n < 4) return all;

  double scale = 0.0;
  for (const Vec3& p : points)
    scale = std::max({scale, std::abs(p.x), std::abs(p.y), std::abs(p.z)});
  const double eps = 1e-9 * std::max(1.0, scale);

  // Initial simplex: extreme pair, then max line distance, then max plane
  // distance, first-index tie-breaking throughout.
  int i0 = 0, i1 = 0;
  for (int axis = 0; axis < 3 && i0 == i1; ++axis) {
    auto coord = [&](int i) {
      const Vec3& p = points[std::size_t(i)];
      return axis == 0 ? p.x : axis == 1 ? p.y : p.z;
    };
    int lo = 0, hi = 0;
    for (int i = 1; i < n; ++i) {
      if (coord(i) < coord(lo)) lo = i;
      if (coord(i) > coord(hi)) hi = i;
    }
    if (coord(hi) - coord(lo) > eps) {
      i0 = lo;
      i1 = hi;
      break;
    }
  }
  if (i0 == i1) return all;  // all points coincide

  const Vec3 dir = (points[std::size_t(i1)] - points[std::size_t(i0)]).normalized();
  int i2 = -1;
  double best = eps;
  for (int i = 0; i < n; ++i) {
    const Vec3 d = points[std::size_t(i)] - points[std::size_t(i0)];
    const double dist = (d - dir * d.dot(dir)).norm();
    if (dist > best) {
      best = dist;
      i2 = i;
    }
  }
  if (i2 < 0) return all;  // collinear

  Vec3 pn = (points[std::size_t(i1)] - points[std::size_t(i0)])
                .cross(points[std::size_t(i2)] - points[std::size_t(i0)])
                .normalized();
  int i3 = -1;
  best = eps;
  for (int i = 0; i < n; ++i) {
    const double dist = std::abs(pn.dot(points[std::size_t(i)] - points[std::size_t(i0)]));
    if (dist > best) {
      best = dist;
      i3 = i;
    }
  }
  if (i3 < 0) return all;  // coplanar

  const Vec3 inside = (points[std::size_t(i0)] + points[std::size_t(i1)] +
                       points[std::size_t(i2)] + points[std::size_t(i3)]) *
                      0.25;
  std::vector<HullFace> faces;
  faces.push_back(make_face(i0, i1, i2, points, inside));
  faces.push_back(make_face(i0, i1, i3, points, inside));
  faces.push_back(make_face(i0, i2, i3, points, inside));
  faces.push_back(make_face(i1, i2, i3, points, inside));

  for (int i = 0; i < n; ++i) {
    if (i == i0 || i == i1 || i == i2 || i == i3) continue;
    for (HullFace& f : faces) {
      if (f.dist(points[std::size_t(i)]) > eps) {
        f.conflicts.push_back(i);
        break;
      }
    }
  }

  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    if (!faces[fi].alive || faces[fi].conflicts.empty()) continue;
    // Apex: farthest conflict point of this face, lowest index on ties.
    int apex = -1;
    double apex_d = -1.0;
    for (int c : faces[fi].conflicts) {
      const double d = faces[fi].dist(points[std::size_t(c)]);
      if (d > apex_d) {
        apex_d = d;
        apex = c;
      }
    }
    const Vec3& ap = points[std::size_t(apex)];

    std::vector<std::size_t> visible;
    std::vector<int> orphans;
    for (std::size_t gi = 0; gi < faces.size(); ++gi) {
      if (!faces[gi].alive) continue;
      if (faces[gi].dist(ap) > eps) {
        visible.push_back(gi);
        for (int c : faces[gi].conflicts)
          if (c != apex) orphans.push_back(c);
      }
    }

    // Horizon = directed edges of visible faces whose reverse edge is not
    // itself on a visible face.
    std::map<std::pair<int, int>, int> edge_count;
    for (std::size_t gi : visible) {
      const auto& v = faces[gi].v;
      for (int e = 0; e < 3; ++e) {
        const int a = v[std::size_t(e)], b = v[std::size_t((e + 1) % 3)];
        edge_count[{std::min(a, b), std::max(a, b)}]++;
      }
    }
    std::vector<std::pair<int, int>> horizon;
    for (std::size_t gi : visible) {
      const auto& v = faces[gi].v;
      for (int e = 0; e < 3; ++e) {
        const int a = v[std::size_t(e)], b = v[std::size_t((e + 1) % 3)];
        if (edge_count[{std::min(a, b), std::max(a, b)}] == 1) horizon.push_back({a, b});
      }
    }
    for (std::size_t gi : visible) {
      faces[gi].alive = false;
      faces[gi].conflicts.clear();
    }

    const std::size_t first_new = faces.size();
    for (const auto& [a, b] : horizon) {
      HullFace f = make_face(a, b, apex, points, inside);
      faces.push_back(std::move(f));
    }
    std::sort(orphans.begin(), orphans.end());
    orphans.erase(std::unique(orphans.begin(), orphans.end()), orphans.end());
    for (int c : orphans) {
      for (std::size_t gi = first_new; gi < faces.size(); ++gi) {
        if (faces[gi].dist(points[std::size_t(c)]) > eps) {
          faces[gi].conflicts.push_back(c);
          break;
        }
      }
    }
    // Re-scan from the current face: new faces were appended after it.
  }

  std::vector<bool> on_hull(points.size(), false);
  for (const HullFace& f : faces) {
    if (!f.alive) continue;
    for (int v : f.v) on_hull[std::size_t(v)] = true;
  }
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (on_hull[i]) out.push_back(std::uint32_t(i));
  return out;
}

PointCloud simulate_partial(const PointCloud& cloud, const Vec3& viewpoint) {
  if (cloud.empty()) throw std::invalid_argument("simulate_partial: empty cloud");
  const Bounds3 b = cloud_bounds(cloud);
  if (b.contains(viewpoint))
    throw std::invalid_argument("simulate_partial: viewpoint inside bounding box");

  const double diameter = std::max(b.diagonal(), 1e-9);
  double max_norm = 0.0;
  std::vector<Vec3> flipped(cloud.size() + 1);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    max_norm = std::max(max_norm, (cloud.position(i) - viewpoint).norm());
  // Spec radius; widened only when the viewpoint is farther than the sphere.
  const double radius = std::max(100.0 * diameter, 2.0 * max_norm);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 q = cloud.position(i) - viewpoint;
    const double len = std::max(q.norm(), 1e-12);
    flipped[i] = q * (2.0 * radius / len - 1.0);
  }
  flipped[cloud.size()] = {0, 0, 0};  // the viewpoint itself

  const auto hull = convex_hull_vertices(flipped);
  std::vector<bool> keep(cloud.size(), false);
  for (std::uint32_t idx : hull)
    if (idx < cloud.size()) keep[idx] = true;

  PointCloud out;
  out.frame_tag = cloud.frame_tag;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (keep[i]) out.push(cloud.position(i), cloud.colors[i], cloud.flags[i]);
  return out;
}

std::vector<Vec3> standard_viewpoints(const PointCloud& cloud, int n, double elevation_deg,
                                      double radius_scale) {
  const Bounds3 b = cloud_bounds(cloud);
  const Vec3 center = (b.min + b.max) * 0.5;
  const double r = radius_scale * std::max(b.diagonal(), 1e-9);
  const double elev = elevation_deg * kDegToRad;
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) {
    const double az = 2.0 * 3.141592653589793 * double(i) / n;
    out.push_back(center + Vec3{r * std::cos(elev) * std::cos(az),
                                r * std::cos(elev) * std::sin(az), r * std::sin(elev)});
  }
  return out;
}

PointCloud resample(const PointCloud& cloud, int n, std::uint64_t seed) {
  if (cloud.empty()) throw std::invalid_argument("resample: empty cloud");
  if (n < 1) throw std::invalid_argument("resample: n must be >= 1");
  Rng rng = Rng(seed).fork("resample");
  PointCloud out;
  out.frame_tag = cloud.frame_tag;
  out.reserve(std::size_t(n));
  const std::uint32_t N = std::uint32_t(cloud.size());
  if (N >= std::uint32_t(n)) {
    // Partial Fisher-Yates: first n entries of a uniform permutation.
    std::vector<std::uint32_t> idx(N);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::uint32_t i = 0; i < std::uint32_t(n); ++i) {
      const std::uint32_t j = i + rng.below(N - i);
      std::swap(idx[i], idx[j]);
      out.push(cloud.position(idx[i]), cloud.colors[idx[i]], cloud.flags[idx[i]]);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const std::uint32_t j = rng.below(N);
      out.push(cloud.position(j), cloud.colors[j], cloud.flags[j]);
    }
  }
  return out;
}

PointCloud augment_cloud(const PointCloud& cloud, CloudAugmentation kind, double sigma,
                         std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("augment_cloud: sigma must be >= 0");
  PointCloud out = cloud;
  switch (kind) {
    case CloudAugmentation::kRangeNoise: {
      if (sigma == 0.0) return out;
      Rng rng = Rng(seed).fork("cloud-noise");
      for (auto& p : out.positions) {
        p[0] = float(double(p[0]) + rng.normal(0.0, sigma));
        p[1] = float(double(p[1]) + rng.normal(0.0, sigma));
        p[2] = float(double(p[2]) + rng.normal(0.0, sigma));
      }
      return out;
    }
    case CloudAugmentation::kMirrorX:
      for (auto& p : out.positions) p[0] = -p[0];
      return out;
    case CloudAugmentation::kMirrorZ:
      for (auto& p : out.positions) p[2] = -p[2];
      return out;
  }
  throw std::invalid_argument("augment_cloud: unknown kind");
}

PointCloud complete_vehicle(const PointCloud& cloud, const CompletionParams& params) {
  if (int(cloud.size()) < kCompletionMinPoints)
    throw std::invalid_argument("complete_vehicle: too few points (need >= " +
                                std::to_string(kCompletionMinPoints) + ")");
  if (cloud.frame_tag.kind != FrameTag::Kind::kCanonical)
    throw std::invalid_argument("complete_vehicle: cloud must be canonical-frame");
  const double delta = params.near_duplicate;

  NeighborGrid observed_grid(cloud, std::max(delta, 1e-3) * 2.0);

  // (a) lateral mirror across y = 0, dropping near-duplicates of observations.
  PointCloud unioned = cloud;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Vec3 m = cloud.position(i);
    m.y = -m.y;
    if (observed_grid.any_within(m, delta)) continue;
    unioned.push(m, kBlack, PointFlag::kCompleted);
  }

  // (b) face infill of the canonical box in uncovered regions.
  Vec3 half;
  if (params.box_dims) {
    half = *params.box_dims * 0.5;
  } else {
    const Bounds3 b = cloud_bounds(unioned);
    half = {std::max(std::abs(b.min.x), std::abs(b.max.x)),
            std::max(std::abs(b.min.y), std::abs(b.max.y)),
            std::max(std::abs(b.min.z), std::abs(b.max.z))};
  }
  NeighborGrid union_grid(unioned, std::max(delta, 1e-3) * 2.0);
  PointCloud infill;
  infill.frame_tag = cloud.frame_tag;
  auto sample_face = [&](int axis, double sign) {
    const double hu = axis == 0 ? half.y : half.x;
    const double hv = axis == 2 ? half.y : half.z;
    const double hn = axis == 0 ? half.x : (axis == 1 ? half.y : half.z);
    const int nu = std::max(2, int(std::round(2.0 * hu / params.infill_spacing)) + 1);
    const int nv = std::max(2, int(std::round(2.0 * hv / params.infill_spacing)) + 1);
    for (int iu = 0; iu < nu; ++iu)
      for (int iv = 0; iv < nv; ++iv) {
        const double u = -hu + 2.0 * hu * iu / (nu - 1);
        const double v = -hv + 2.0 * hv * iv / (nv - 1);
        Vec3 p;
        switch (axis) {
          case 0: p = {sign * hn, u, v}; break;
          case 1: p = {u, sign * hn, v}; break;
          default: p = {u, v, sign * hn}; break;
        }
        if (union_grid.any_within(p, delta)) continue;
        infill.push(p, kBlack, PointFlag::kCompleted);
      }
  };
  for (int axis = 0; axis < 3; ++axis)
    for (double sign : {1.0, -1.0}) sample_face(axis, sign);
  unioned.append(infill);

  return resample(unioned, params.out_n, 0x9d0cf3u);
}

}  // namespace pcflow
