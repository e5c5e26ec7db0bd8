#include "satsweep/tensor_warp.h"

#include <algorithm>
#include <cmath>

#include "satsweep/parallel.h"

namespace satsweep {

namespace {

// the 20 index multisets {a<=b<=c} of a symmetric 4x4x4 tensor with the
// number of distinct permutations of each
struct Multiset {
  int a, b, c;
  double mult;
};
constexpr Multiset kMultisets[20] = {
    {0, 0, 0, 1}, {0, 0, 1, 3}, {0, 0, 2, 3}, {0, 0, 3, 3}, {0, 1, 1, 3},
    {0, 1, 2, 6}, {0, 1, 3, 6}, {0, 2, 2, 3}, {0, 2, 3, 6}, {0, 3, 3, 3},
    {1, 1, 1, 1}, {1, 1, 2, 3}, {1, 1, 3, 3}, {1, 2, 2, 3}, {1, 2, 3, 6},
    {1, 3, 3, 3}, {2, 2, 2, 1}, {2, 2, 3, 3}, {2, 3, 3, 3}, {3, 3, 3, 1},
};

inline double contract_kernel(const CoeffTensor& t, const double x[4]) {
  double sum = 0.0;
  for (const Multiset& s : kMultisets)
    sum += s.mult * t.t[s.a][s.b][s.c] * x[s.a] * x[s.b] * x[s.c];
  return sum;
}

// sum_jk t[m][j][k] x_j x_k; the partial of the contraction w.r.t. x_m is 3x
// this value when t is symmetric
inline double contract_partial(const CoeffTensor& t, const double x[4], int m) {
  double sum = 0.0;
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) sum += t.t[m][j][k] * x[j] * x[k];
  return sum;
}

}  // namespace

CoeffTensor build_coeff_tensor(const Poly20& p) {
  CoeffTensor t;
  for (int term = 0; term < 20; ++term) {
    const int* e = kPoly20Exp[term];
    // index multiset: slot 0 repeated (3 - total degree), slot 1 x e[0],
    // slot 2 x e[1], slot 3 x e[2]
    int idx[3];
    int n = 0;
    for (int r = 0; r < 3 - (e[0] + e[1] + e[2]); ++r) idx[n++] = 0;
    for (int r = 0; r < e[0]; ++r) idx[n++] = 1;
    for (int r = 0; r < e[1]; ++r) idx[n++] = 2;
    for (int r = 0; r < e[2]; ++r) idx[n++] = 3;

    double weight;
    if (idx[0] == idx[1] && idx[1] == idx[2])
      weight = p.c[term];
    else if (idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2])
      weight = p.c[term] / 3.0;
    else
      weight = p.c[term] / 6.0;

    std::sort(idx, idx + 3);
    do {
      t.t[idx[0]][idx[1]][idx[2]] = weight;
    } while (std::next_permutation(idx, idx + 3));
  }
  return t;
}

double contract(const CoeffTensor& t, const PointTensor& x) {
  return contract_kernel(t, x.x);
}

void contract_batch(const std::vector<CoeffTensor>& tensors,
                    const std::vector<double>& points, int batch_count,
                    int point_count, std::vector<double>& out, int threads) {
  if (static_cast<int>(tensors.size()) != batch_count ||
      points.size() != static_cast<size_t>(batch_count) * point_count * 4)
    throw Error("contract_batch: shape mismatch");
  out.resize(static_cast<size_t>(batch_count) * point_count);
  parallel_for(0, static_cast<int64_t>(batch_count) * point_count, threads,
               [&](int64_t i) {
                 const int b = static_cast<int>(i / point_count);
                 out[i] = contract_kernel(tensors[b], &points[i * 4]);
               });
}

void contract_batch_shared(const std::vector<CoeffTensor>& tensors,
                           const std::vector<double>& points, int point_count,
                           std::vector<double>& out, int threads) {
  const int batch_count = static_cast<int>(tensors.size());
  if (points.size() != static_cast<size_t>(point_count) * 4)
    throw Error("contract_batch: shape mismatch");
  out.resize(static_cast<size_t>(batch_count) * point_count);
  parallel_for(0, static_cast<int64_t>(batch_count) * point_count, threads,
               [&](int64_t i) {
                 const int b = static_cast<int>(i / point_count);
                 const int m = static_cast<int>(i % point_count);
                 out[i] = contract_kernel(tensors[b], &points[m * 4]);
               });
}

namespace {

WarpTensors make_warp_tensors(const RpcModel& from, const RpcModel& to) {
  if (!from.has_inverse)
    throw Error("warp: model lacks inverse coefficients");
  WarpTensors w;
  w.inv_lat_num = build_coeff_tensor(from.inv_lat_num);
  w.inv_lat_den = build_coeff_tensor(from.inv_lat_den);
  w.inv_lon_num = build_coeff_tensor(from.inv_lon_num);
  w.inv_lon_den = build_coeff_tensor(from.inv_lon_den);
  w.samp_num = build_coeff_tensor(to.samp_num);
  w.samp_den = build_coeff_tensor(to.samp_den);
  w.line_num = build_coeff_tensor(to.line_num);
  w.line_den = build_coeff_tensor(to.line_den);
  return w;
}

void check_height_range(const RpcModel& m, double hei) {
  if (hei < m.height_min || hei > m.height_max)
    throw Error("warp: height outside model height range");
}

// one-point warp through prebuilt tensors; returns false on a degenerate
// denominator
bool warp_one(const WarpTensors& w, const RpcModel& from, const RpcModel& to,
              double samp, double line, double hei, double& out_samp,
              double& out_line) {
  const double xs[4] = {1.0, (samp - from.samp_off) / from.samp_scale,
                        (line - from.line_off) / from.line_scale,
                        (hei - from.hei_off) / from.hei_scale};
  const double lat_den = contract_kernel(w.inv_lat_den, xs);
  const double lon_den = contract_kernel(w.inv_lon_den, xs);
  if (std::fabs(lat_den) < kDenominatorEps ||
      std::fabs(lon_den) < kDenominatorEps)
    return false;
  const double lat_n = contract_kernel(w.inv_lat_num, xs) / lat_den;
  const double lon_n = contract_kernel(w.inv_lon_num, xs) / lon_den;
  const double lat = lat_n * from.lat_scale + from.lat_off;
  const double lon = lon_n * from.lon_scale + from.lon_off;

  const double x0[4] = {1.0, (lon - to.lon_off) / to.lon_scale,
                        (lat - to.lat_off) / to.lat_scale,
                        (hei - to.hei_off) / to.hei_scale};
  const double samp_den = contract_kernel(w.samp_den, x0);
  const double line_den = contract_kernel(w.line_den, x0);
  if (std::fabs(samp_den) < kDenominatorEps ||
      std::fabs(line_den) < kDenominatorEps)
    return false;
  out_samp = contract_kernel(w.samp_num, x0) / samp_den * to.samp_scale +
             to.samp_off;
  out_line = contract_kernel(w.line_num, x0) / line_den * to.line_scale +
             to.line_off;
  return true;
}

}  // namespace

ImagePoint warp_point(const RpcModel& src, const RpcModel& ref,
                      const ImagePoint& q_s, double hei) {
  check_height_range(src, hei);
  check_height_range(ref, hei);
  const WarpTensors w = make_warp_tensors(src, ref);
  double s, l;
  if (!warp_one(w, src, ref, q_s.samp, q_s.line, hei, s, l))
    throw Error("warp: degenerate denominator");
  return {s, l};
}

void jacobian_wrt_height(const RpcModel& src, const RpcModel& ref,
                         const ImagePoint& q_s, double hei,
                         double& dsamp_dhei, double& dline_dhei) {
  check_height_range(src, hei);
  check_height_range(ref, hei);
  const WarpTensors w = make_warp_tensors(src, ref);

  const double xs[4] = {1.0, (q_s.samp - src.samp_off) / src.samp_scale,
                        (q_s.line - src.line_off) / src.line_scale,
                        (hei - src.hei_off) / src.hei_scale};
  const double dx4 = 1.0 / src.hei_scale;  // d hei_n / d hei (source side)

  auto ratio_and_deriv = [&](const CoeffTensor& num, const CoeffTensor& den,
                             const double x[4], double dfdh_num,
                             double dfdh_den, double& val, double& dval) {
    const double nv = contract_kernel(num, x);
    const double dv = contract_kernel(den, x);
    if (std::fabs(dv) < kDenominatorEps)
      throw Error("warp: degenerate denominator");
    val = nv / dv;
    dval = (dfdh_num * dv - nv * dfdh_den) / (dv * dv);
  };

  // source inverse stage: only x4 varies with height
  double lat_n, dlat_n, lon_n, dlon_n;
  ratio_and_deriv(w.inv_lat_num, w.inv_lat_den, xs,
                  3.0 * contract_partial(w.inv_lat_num, xs, 3) * dx4,
                  3.0 * contract_partial(w.inv_lat_den, xs, 3) * dx4, lat_n,
                  dlat_n);
  ratio_and_deriv(w.inv_lon_num, w.inv_lon_den, xs,
                  3.0 * contract_partial(w.inv_lon_num, xs, 3) * dx4,
                  3.0 * contract_partial(w.inv_lon_den, xs, 3) * dx4, lon_n,
                  dlon_n);

  const double lat = lat_n * src.lat_scale + src.lat_off;
  const double lon = lon_n * src.lon_scale + src.lon_off;
  const double x0[4] = {1.0, (lon - ref.lon_off) / ref.lon_scale,
                        (lat - ref.lat_off) / ref.lat_scale,
                        (hei - ref.hei_off) / ref.hei_scale};
  const double dx0[4] = {0.0, dlon_n * src.lon_scale / ref.lon_scale,
                         dlat_n * src.lat_scale / ref.lat_scale,
                         1.0 / ref.hei_scale};

  auto chain = [&](const CoeffTensor& t) {
    double d = 0.0;
    for (int m = 1; m < 4; ++m)
      d += 3.0 * contract_partial(t, x0, m) * dx0[m];
    return d;
  };

  double samp_n, dsamp_n, line_n, dline_n;
  ratio_and_deriv(w.samp_num, w.samp_den, x0, chain(w.samp_num),
                  chain(w.samp_den), samp_n, dsamp_n);
  ratio_and_deriv(w.line_num, w.line_den, x0, chain(w.line_num),
                  chain(w.line_den), line_n, dline_n);

  dsamp_dhei = dsamp_n * ref.samp_scale;
  dline_dhei = dline_n * ref.line_scale;
}

CoordMap warp_points_map(const RpcModel& from, const RpcModel& to,
                         const std::vector<double>& samp,
                         const std::vector<double>& line,
                         const std::vector<double>& heights, int threads) {
  if (!from.has_inverse)
    throw Error("warp: model lacks inverse coefficients");
  const int m_count = static_cast<int>(samp.size());
  if (line.size() != samp.size() || heights.size() != samp.size())
    throw Error("warp_points: coordinate array size mismatch");

  CoordMap map;
  map.width = m_count;
  map.height = 1;
  map.samp.assign(m_count, 0.0);
  map.line.assign(m_count, 0.0);
  map.valid.assign(m_count, 0);

  // stage 1 points: (1, samp_n, line_n, hei_n) in the `from` frame
  std::vector<double> pts(static_cast<size_t>(m_count) * 4);
  parallel_for(0, m_count, threads, [&](int64_t i) {
    double* p = &pts[i * 4];
    p[0] = 1.0;
    p[1] = (samp[i] - from.samp_off) / from.samp_scale;
    p[2] = (line[i] - from.line_off) / from.line_scale;
    p[3] = (heights[i] - from.hei_off) / from.hei_scale;
  });

  const std::vector<CoeffTensor> inv_tensors = {
      build_coeff_tensor(from.inv_lat_num),
      build_coeff_tensor(from.inv_lat_den),
      build_coeff_tensor(from.inv_lon_num),
      build_coeff_tensor(from.inv_lon_den)};
  std::vector<double> inv_vals;
  contract_batch_shared(inv_tensors, pts, m_count, inv_vals, threads);

  // stage 2 points: (1, lon_n, lat_n, hei_n) in the `to` frame
  std::vector<uint8_t> degenerate(m_count, 0);
  parallel_for(0, m_count, threads, [&](int64_t i) {
    const double lat_den = inv_vals[m_count + i];
    const double lon_den = inv_vals[3 * static_cast<size_t>(m_count) + i];
    double* p = &pts[i * 4];
    if (std::fabs(lat_den) < kDenominatorEps ||
        std::fabs(lon_den) < kDenominatorEps) {
      degenerate[i] = 1;
      p[1] = p[2] = 0.0;
      return;
    }
    const double lat = inv_vals[i] / lat_den * from.lat_scale + from.lat_off;
    const double lon = inv_vals[2 * static_cast<size_t>(m_count) + i] /
                           lon_den * from.lon_scale +
                       from.lon_off;
    p[1] = (lon - to.lon_off) / to.lon_scale;
    p[2] = (lat - to.lat_off) / to.lat_scale;
    p[3] = (heights[i] - to.hei_off) / to.hei_scale;
  });

  const std::vector<CoeffTensor> fwd_tensors = {
      build_coeff_tensor(to.samp_num), build_coeff_tensor(to.samp_den),
      build_coeff_tensor(to.line_num), build_coeff_tensor(to.line_den)};
  std::vector<double> fwd_vals;
  contract_batch_shared(fwd_tensors, pts, m_count, fwd_vals, threads);

  parallel_for(0, m_count, threads, [&](int64_t i) {
    if (degenerate[i]) return;
    const double samp_den = fwd_vals[m_count + i];
    const double line_den = fwd_vals[3 * static_cast<size_t>(m_count) + i];
    if (std::fabs(samp_den) < kDenominatorEps ||
        std::fabs(line_den) < kDenominatorEps)
      return;
    map.samp[i] = fwd_vals[i] / samp_den * to.samp_scale + to.samp_off;
    map.line[i] = fwd_vals[2 * static_cast<size_t>(m_count) + i] / line_den *
                      to.line_scale +
                  to.line_off;
    map.valid[i] = 1;
  });
  return map;
}

CoordMap warp_grid_heights(const RpcModel& src, const RpcModel& ref,
                           const PixelRect& ref_rect,
                           const std::vector<double>& heights,
                           const PixelRect& src_bounds, int threads) {
  // gather direction: reference pixels are localized through the reference
  // inverse and projected through the source forward model
  const int w = static_cast<int>(ref_rect.w);
  const int h = static_cast<int>(ref_rect.h);
  const int m_count = w * h;
  if (static_cast<int>(heights.size()) != m_count)
    throw Error("warp_grid: height field size mismatch");

  std::vector<double> samp(m_count), line(m_count);
  for (int iy = 0; iy < h; ++iy)
    for (int ix = 0; ix < w; ++ix) {
      samp[static_cast<size_t>(iy) * w + ix] = ref_rect.x + ix;
      line[static_cast<size_t>(iy) * w + ix] = ref_rect.y + iy;
    }
  CoordMap map = warp_points_map(ref, src, samp, line, heights, threads);
  map.width = w;
  map.height = h;
  parallel_for(0, m_count, threads, [&](int64_t i) {
    if (map.valid[i] && !src_bounds.contains(map.samp[i], map.line[i]))
      map.valid[i] = 0;
  });
  return map;
}

CoordMap warp_grid(const RpcModel& src, const RpcModel& ref,
                   const PixelRect& ref_rect, double hei,
                   const PixelRect& src_bounds, int threads) {
  check_height_range(src, hei);
  check_height_range(ref, hei);
  const int m_count =
      static_cast<int>(ref_rect.w) * static_cast<int>(ref_rect.h);
  std::vector<double> heights(m_count, hei);
  return warp_grid_heights(src, ref, ref_rect, heights, src_bounds, threads);
}

void resample_bilinear(const RasterF& img, const CoordMap& map, RasterF& out,
                       std::vector<uint8_t>& out_mask, int threads) {
  out = RasterF(map.width, map.height, img.channels, 0.0f);
  out_mask.assign(map.size(), 0);
  parallel_for(0, static_cast<int64_t>(map.size()), threads, [&](int64_t i) {
    if (!map.valid[i]) return;
    const double x = map.samp[i];
    const double y = map.line[i];
    if (!(x >= 0.0 && x <= img.width - 1.0 && y >= 0.0 &&
          y <= img.height - 1.0) ||
        img.width < 2 || img.height < 2)
      return;
    // clamp so that an exactly-on-boundary coordinate keeps 4 support pixels
    const int x0 = std::min(static_cast<int>(std::floor(x)), img.width - 2);
    const int y0 = std::min(static_cast<int>(std::floor(y)), img.height - 2);
    const double fx = x - x0;
    const double fy = y - y0;
    for (int c = 0; c < img.channels; ++c) {
      const double v00 = img.at(x0, y0, c);
      const double v10 = img.at(x0 + 1, y0, c);
      const double v01 = img.at(x0, y0 + 1, c);
      const double v11 = img.at(x0 + 1, y0 + 1, c);
      const double v = v00 * (1 - fx) * (1 - fy) + v10 * fx * (1 - fy) +
                       v01 * (1 - fx) * fy + v11 * fx * fy;
      out.at(static_cast<int>(i) % map.width, static_cast<int>(i) / map.width,
             c) = static_cast<float>(v);
    }
    out_mask[i] = 1;
  });
}

}  // namespace satsweep
