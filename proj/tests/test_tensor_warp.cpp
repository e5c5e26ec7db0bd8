#include <doctest.h>

#include <cmath>
#include <random>

#include "satsweep/tensor_warp.h"
#include "satsweep/synthetic.h"
#include "test_helpers.h"

using namespace satsweep;
using namespace satsweep::testing;

namespace {

// literal 64-entry contraction, the definitional oracle
double contract_literal(const CoeffTensor& t, const PointTensor& x) {
  double sum = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        sum += t.t[i][j][k] * x.x[i] * x.x[j] * x.x[k];
  return sum;
}

PointTensor make_point(double u, double v, double h) {
  PointTensor p;
  p.x[1] = u;
  p.x[2] = v;
  p.x[3] = h;
  return p;
}

}  // namespace

TEST_SUITE("tensor_warp") {

TEST_CASE("constant polynomial fills only the corner entry") {
  Poly20 p;
  p.c[0] = 5.0;
  const CoeffTensor t = build_coeff_tensor(p);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        CHECK(t.t[i][j][k] == (i == 0 && j == 0 && k == 0 ? 5.0 : 0.0));
}

TEST_CASE("pure cube monomial lands on the diagonal entry") {
  Poly20 p;
  p.c[11] = 2.5;  // L^3
  const CoeffTensor t = build_coeff_tensor(p);
  CHECK(t.t[1][1][1] == 2.5);
  p = Poly20{};
  p.c[19] = -1.25;  // H^3
  CHECK(build_coeff_tensor(p).t[3][3][3] == -1.25);
}

TEST_CASE("bilinear monomial spreads c/6 over all index permutations") {
  Poly20 p;
  p.c[4] = 3.0;  // L*P, homogeneous form x1*x2*x3
  const CoeffTensor t = build_coeff_tensor(p);
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                           {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& q : perms) CHECK(t.t[q[0]][q[1]][q[2]] == 3.0 / 6.0);
  const PointTensor x = make_point(0.5, -0.8, 0.3);
  CHECK(contract(t, x) == doctest::Approx(3.0 * 0.5 * -0.8).epsilon(1e-14));
}

TEST_CASE("every constructed tensor is fully symmetric") {
  std::mt19937_64 rng(5);
  Poly20 p;
  for (double& c : p.c) c = urand(rng, -1, 1);
  const CoeffTensor t = build_coeff_tensor(p);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) {
        CHECK(t.t[i][j][k] == t.t[i][k][j]);
        CHECK(t.t[i][j][k] == t.t[j][i][k]);
        CHECK(t.t[i][j][k] == t.t[j][k][i]);
        CHECK(t.t[i][j][k] == t.t[k][i][j]);
        CHECK(t.t[i][j][k] == t.t[k][j][i]);
      }
}

TEST_CASE("contraction of a known polynomial at the unit point") {
  Poly20 p;
  p.c[0] = 1.0;   // 1
  p.c[1] = 2.0;   // L
  p.c[4] = 3.0;   // LP
  p.c[19] = 4.0;  // H^3
  const CoeffTensor t = build_coeff_tensor(p);
  CHECK(contract(t, make_point(1, 1, 1)) ==
        doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("zero tensor contracts to zero") {
  CHECK(contract(CoeffTensor{}, make_point(0.3, 0.7, -0.2)) == 0.0);
}

TEST_CASE("contraction matches eval_poly20 and the literal 64-entry sum") {
  std::mt19937_64 rng(6);
  double worst_eval = 0.0, worst_literal = 0.0;
  for (int iter = 0; iter < 100000; ++iter) {
    Poly20 p;
    for (double& c : p.c) c = urand(rng, -1, 1);
    const CoeffTensor t = build_coeff_tensor(p);
    const double u = urand(rng, -1, 1), v = urand(rng, -1, 1),
                 h = urand(rng, -1, 1);
    const double via_tensor = contract(t, make_point(u, v, h));
    const double via_poly = eval_poly20(p, u, v, h);
    const double via_literal = contract_literal(t, make_point(u, v, h));
    const double scale = std::max({1.0, std::fabs(via_tensor),
                                   std::fabs(via_poly)});
    worst_eval = std::max(worst_eval,
                          std::fabs(via_tensor - via_poly) / scale);
    worst_literal = std::max(worst_literal,
                             std::fabs(via_tensor - via_literal) / scale);
  }
  CHECK(worst_eval < 1e-10);
  CHECK(worst_literal < 1e-10);
}

TEST_CASE("singleton batch reduces to the scalar contraction") {
  std::mt19937_64 rng(7);
  Poly20 p;
  for (double& c : p.c) c = urand(rng, -1, 1);
  const CoeffTensor t = build_coeff_tensor(p);
  const std::vector<double> pts = {1.0, 0.2, -0.3, 0.9};
  std::vector<double> out;
  contract_batch({t}, pts, 1, 1, out);
  CHECK(out.size() == 1);
  CHECK(out[0] == contract(t, make_point(0.2, -0.3, 0.9)));
}

TEST_CASE("identical batch elements produce identical rows") {
  std::mt19937_64 rng(8);
  Poly20 p;
  for (double& c : p.c) c = urand(rng, -1, 1);
  const CoeffTensor t = build_coeff_tensor(p);
  const int m_count = 64;
  std::vector<double> pts;
  for (int m = 0; m < m_count; ++m) {
    pts.push_back(1.0);
    pts.push_back(urand(rng, -1, 1));
    pts.push_back(urand(rng, -1, 1));
    pts.push_back(urand(rng, -1, 1));
  }
  // same points for both batch elements
  std::vector<double> pts2 = pts;
  pts2.insert(pts2.end(), pts.begin(), pts.end());
  std::vector<double> out;
  contract_batch({t, t}, pts2, 2, m_count, out);
  for (int m = 0; m < m_count; ++m) CHECK(out[m] == out[m_count + m]);
}

TEST_CASE("batch output equals a per-point scalar loop, bitwise") {
  std::mt19937_64 rng(9);
  const int batch = 3, m_count = 200;
  std::vector<CoeffTensor> tensors;
  std::vector<double> pts;
  for (int b = 0; b < batch; ++b) {
    Poly20 p;
    for (double& c : p.c) c = urand(rng, -1, 1);
    tensors.push_back(build_coeff_tensor(p));
  }
  for (int i = 0; i < batch * m_count; ++i) {
    pts.push_back(1.0);
    for (int k = 0; k < 3; ++k) pts.push_back(urand(rng, -1, 1));
  }
  std::vector<double> out1, out4;
  contract_batch(tensors, pts, batch, m_count, out1, 1);
  contract_batch(tensors, pts, batch, m_count, out4, 4);
  for (int b = 0; b < batch; ++b)
    for (int m = 0; m < m_count; ++m) {
      const size_t i = static_cast<size_t>(b) * m_count + m;
      const PointTensor x =
          make_point(pts[i * 4 + 1], pts[i * 4 + 2], pts[i * 4 + 3]);
      CHECK(out1[i] == contract(tensors[b], x));
      CHECK(out1[i] == out4[i]);  // worker count cannot change bits
    }
}

TEST_CASE("batch shape mismatch is rejected") {
  std::vector<double> pts(8, 1.0);
  std::vector<double> out;
  CHECK_THROWS_WITH_AS(contract_batch({CoeffTensor{}}, pts, 1, 1, out),
                       doctest::Contains("shape"), Error);
}

TEST_CASE("warping a view onto itself is the identity") {
  const SyntheticScene& s = small_scene_norender();
  const RpcModel& m = s.views[0].rpc;
  std::mt19937_64 rng(10);
  for (int i = 0; i < 100; ++i) {
    const ImagePoint q{urand(rng, 20, 490), urand(rng, 20, 490)};
    const double hei = urand(rng, -100, 300);
    const ImagePoint w = warp_point(m, m, q, hei);
    CHECK(std::hypot(w.samp - q.samp, w.line - q.line) < 0.05);
  }
}

TEST_CASE("warp through the true surface height matches the projector") {
  const SyntheticScene& s = small_scene_norender();
  const RpcModel& src = s.views[0].rpc;
  const RpcModel& ref = s.views[1].rpc;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const double lat = urand(rng, s.aoi.lat0, s.aoi.lat1);
    const double lon = urand(rng, s.aoi.lon0, s.aoi.lon1);
    const GroundPoint g{lat, lon, s.terrain_height(lat, lon)};
    const ImagePoint q_src = s.views[0].projector->project(g);
    const ImagePoint expect = s.views[1].projector->project(g);
    const ImagePoint got = warp_point(src, ref, q_src, g.hei);
    CHECK(std::hypot(got.samp - expect.samp, got.line - expect.line) < 0.05);
  }
}

TEST_CASE("height outside the model range is rejected") {
  const SyntheticScene& s = small_scene_norender();
  CHECK_THROWS_WITH_AS(
      warp_point(s.views[0].rpc, s.views[1].rpc, {100, 100}, 1e6),
      doctest::Contains("height"), Error);
}

TEST_CASE("warp composition returns to the start pixel") {
  const SyntheticScene& s = small_scene_norender();
  const RpcModel& a = s.views[0].rpc;
  const RpcModel& b = s.views[2].rpc;
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const ImagePoint q{urand(rng, 60, 450), urand(rng, 60, 450)};
    const double hei = urand(rng, -200, 400);
    const ImagePoint w = warp_point(a, b, q, hei);
    const ImagePoint back = warp_point(b, a, w, hei);
    CHECK(std::hypot(back.samp - q.samp, back.line - q.line) < 0.1);
  }
}

TEST_CASE("grid warp of a view onto itself is the identity grid") {
  const SyntheticScene& s = small_scene_norender();
  const RpcModel& m = s.views[0].rpc;
  const PixelRect rect{100, 120, 32, 16};
  const PixelRect bounds{0, 0, 512, 512};
  const CoordMap map = warp_grid(m, m, rect, 150.0, bounds);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) {
      const size_t i = static_cast<size_t>(y) * 32 + x;
      CHECK(map.valid[i] == 1);
      CHECK(std::fabs(map.samp[i] - (rect.x + x)) < 0.05);
      CHECK(std::fabs(map.line[i] - (rect.y + y)) < 0.05);
    }
}

TEST_CASE("grid warp agrees with the scalar warp per pixel") {
  const SyntheticScene& s = small_scene_norender();
  const RpcModel& src = s.views[1].rpc;
  const RpcModel& ref = s.views[0].rpc;
  const PixelRect rect{200, 220, 16, 8};
  const PixelRect bounds{-1e9, -1e9, 2e9, 2e9};
  const double hei = 210.0;
  const CoordMap map = warp_grid(src, ref, rect, hei, bounds);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 16; ++x) {
      const size_t i = static_cast<size_t>(y) * 16 + x;
      // the grid enumerates reference pixels: same chain as warping the
      // reference pixel into the source view
      const ImagePoint w =
          warp_point(ref, src, {rect.x + x, rect.y + y}, hei);
      CHECK(std::fabs(map.samp[i] - w.samp) < 1e-12 * (1 + std::fabs(w.samp)));
      CHECK(std::fabs(map.line[i] - w.line) < 1e-12 * (1 + std::fabs(w.line)));
    }
}

TEST_CASE("a plane missing the source yields an all-false mask, no error") {
  const SyntheticScene& s = small_scene_norender();
  const RpcModel& src = s.views[1].rpc;
  const RpcModel& ref = s.views[0].rpc;
  const PixelRect rect{0, 0, 16, 16};
  const PixelRect bounds{1e7, 1e7, 10, 10};  // nowhere near the image
  const CoordMap map = warp_grid(src, ref, rect, 100.0, bounds);
  for (uint8_t v : map.valid) CHECK(v == 0);
}

TEST_CASE("bilinear resampling through the identity map is exact") {
  std::mt19937_64 rng(13);
  RasterF img(17, 11, 2);
  for (float& v : img.data) v = static_cast<float>(urand(rng, 0, 1));
  CoordMap map;
  map.width = 17;
  map.height = 11;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 17; ++x) {
      map.samp.push_back(x);
      map.line.push_back(y);
      map.valid.push_back(1);
    }
  RasterF out;
  std::vector<uint8_t> mask;
  resample_bilinear(img, map, out, mask);
  for (size_t i = 0; i < map.size(); ++i) CHECK(mask[i] == 1);
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 11; ++y)
      for (int x = 0; x < 17; ++x) CHECK(out.at(x, y, c) == img.at(x, y, c));
}

TEST_CASE("half-pixel shift of a linear ramp shifts values by half") {
  RasterF img(32, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 32; ++x) img.at(x, y) = static_cast<float>(x);
  CoordMap map;
  map.width = 32;
  map.height = 4;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 32; ++x) {
      map.samp.push_back(x + 0.5);
      map.line.push_back(y);
      map.valid.push_back(1);
    }
  RasterF out;
  std::vector<uint8_t> mask;
  resample_bilinear(img, map, out, mask);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 31; ++x) {
      CHECK(mask[y * 32 + x] == 1);
      CHECK(out.at(x, y) == doctest::Approx(x + 0.5).epsilon(1e-6));
    }
}

TEST_CASE("coordinates beyond the last column are masked") {
  RasterF img(8, 8, 1, 1.0f);
  CoordMap map;
  map.width = 2;
  map.height = 1;
  map.samp = {7.0, 8.0};  // last column center, then 1 px beyond
  map.line = {3.0, 3.0};
  map.valid = {1, 1};
  RasterF out;
  std::vector<uint8_t> mask;
  resample_bilinear(img, map, out, mask);
  CHECK(mask[0] == 1);
  CHECK(mask[1] == 0);
}

TEST_CASE("identity view pair has a near-zero height Jacobian") {
  const SyntheticScene& s = small_scene_norender();
  const RpcModel& m = s.views[0].rpc;
  double ds, dl;
  jacobian_wrt_height(m, m, {256, 256}, 120.0, ds, dl);
  CHECK(std::fabs(ds) < 1e-3);
  CHECK(std::fabs(dl) < 1e-3);
}

TEST_CASE("analytic Jacobian matches central finite differences") {
  const SyntheticScene& s = small_scene_norender();
  const RpcModel& src = s.views[1].rpc;
  const RpcModel& ref = s.views[2].rpc;
  std::mt19937_64 rng(14);
  const double delta = 0.1;
  for (int i = 0; i < 300; ++i) {
    const ImagePoint q{urand(rng, 40, 470), urand(rng, 40, 470)};
    const double hei = urand(rng, -300, 500);
    double ds, dl;
    jacobian_wrt_height(src, ref, q, hei, ds, dl);
    const ImagePoint up = warp_point(src, ref, q, hei + delta);
    const ImagePoint dn = warp_point(src, ref, q, hei - delta);
    const double fd_s = (up.samp - dn.samp) / (2 * delta);
    const double fd_l = (up.line - dn.line) / (2 * delta);
    if (std::fabs(ds) > 1e-6)
      CHECK(std::fabs(fd_s - ds) <= 1e-5 * std::fabs(ds));
    if (std::fabs(dl) > 1e-6)
      CHECK(std::fabs(fd_l - dl) <= 1e-5 * std::fabs(dl));
  }
}

TEST_CASE("constructed linear-parallax projector gives J = (r, 0)") {
  const double g = 2.5, r = 0.2, size = 512;
  const double sc = 0.5 * (size - 1);
  // affine cameras: the reference carries the height-parallax rate r in samp
  const double P_ref[12] = {1 / g, 0, r, sc, 0, 1 / g, 0, sc, 0, 0, 0, 1};
  const double P_src[12] = {1 / g, 0, 0, sc, 0, 1 / g, 0, sc, 0, 0, 0, 1};
  const PinholeProjector ref_proj(P_ref, 30.0, 114.0);
  const PinholeProjector src_proj(P_src, 30.0, 114.0);
  SceneCube cube;
  const double half_m = 0.5 * size * g;
  cube.bounds = {30.0 - half_m / 110852.0, 114.0 - half_m / 96486.0,
                 30.0 + half_m / 110852.0, 114.0 + half_m / 96486.0};
  cube.h_min = -200;
  cube.h_max = 800;
  const RpcModel src = gen_rpc_from_projector(src_proj, cube);
  const RpcModel ref = gen_rpc_from_projector(ref_proj, cube);
  double ds, dl;
  jacobian_wrt_height(src, ref, {sc, sc}, 100.0, ds, dl);
  CHECK(std::fabs(ds - r) < 1e-3);
  CHECK(std::fabs(dl) < 1e-3);
}

}  // TEST_SUITE
