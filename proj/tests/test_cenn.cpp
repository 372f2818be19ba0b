#include <doctest.h>

#include <cmath>
#include <random>

#include "cenn.hpp"
#include "errors.hpp"

using namespace cennforge;

TEST_CASE("sat transfer function") {
  CHECK(sat(0.5) == 0.5);
  CHECK(sat(-3.0) == -1.0);
  CHECK(sat(1.0) == 1.0);
  CHECK(sat(-1.0) == -1.0);
  CHECK(sat(0.0) == 0.0);
  CHECK(sat(2.7) == 1.0);
  CHECK_THROWS_AS(sat(std::nan("")), Error);
  CHECK_THROWS_AS(sat(INFINITY), Error);
}

TEST_CASE("template construction rejects non-finite entries") {
  Mat3 b = kZeros3;
  b[0][0] = INFINITY;
  CHECK_THROWS_AS(Template::feedforward(b, 0.0), Error);
  CHECK_THROWS_AS(Template::feedforward(kZeros3, std::nan("")), Error);
}

namespace {

CeNNArrayState uniform_state(int rows, int cols, double u) {
  CeNNArrayState st(rows, cols);
  st.u.fill(u);
  return st;
}

}  // namespace

TEST_CASE("settle_ode reaches the algebraic steady state for b = center 1") {
  BoundaryPolicy bc;
  SettleOptions so;

  // x settles to b*u when a = 0, z = 0
  CeNNArrayState st = uniform_state(4, 4, 0.4);
  settle_ode(st, Template::feedforward(center_only(1.0), 0.0), bc, so);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      CHECK(st.x.at(r, c) == doctest::Approx(0.4).epsilon(1e-6));
      CHECK(st.y.at(r, c) == doctest::Approx(0.4).epsilon(1e-6));
    }

  // x = u + z
  st = uniform_state(4, 4, 0.3);
  settle_ode(st, Template::feedforward(center_only(1.0), -1.0), bc, so);
  CHECK(st.y.at(2, 2) == doctest::Approx(-0.7).epsilon(1e-6));

  // steady state below the rail clips through the output stage
  st = uniform_state(4, 4, -0.5);
  settle_ode(st, Template::feedforward(center_only(1.0), -1.0), bc, so);
  CHECK(st.x.at(1, 1) == doctest::Approx(-1.5).epsilon(1e-6));
  CHECK(st.y.at(1, 1) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("settle_feedforward matches hand-evaluated neighbor sums") {
  BoundaryPolicy bc;

  // averaging a constant keeps interior cells at the constant
  CeNNArrayState st = uniform_state(5, 5, 0.37);
  Mat3 avg;
  for (auto& row : avg)
    for (double& v : row) v = 1.0 / 9.0;
  settle_feedforward(st, Template::feedforward(avg, 0.0), bc);
  CHECK(st.y.at(2, 2) == doctest::Approx(0.37));
  // edge cells see zero-padded neighbors
  CHECK(st.y.at(0, 0) == doctest::Approx(0.37 * 4.0 / 9.0));

  // DIFF toward the north neighbor: -0.5*center + 0.5*north - 1
  Mat3 diff = kZeros3;
  diff[1][1] = -0.5;
  diff[0][1] = 0.5;
  st = CeNNArrayState(3, 3);
  st.u.fill(0.2);
  st.u.at(0, 1) = 0.6;  // north of the center cell
  settle_feedforward(st, Template::feedforward(diff, -1.0), bc);
  CHECK(st.y.at(1, 1) == doctest::Approx(-0.8));

  // INC: center 1, z = +1
  st = uniform_state(3, 3, -0.8);
  settle_feedforward(st, Template::feedforward(center_only(1.0), 1.0), bc);
  CHECK(st.y.at(1, 1) == doctest::Approx(0.2));
}

TEST_CASE("settle_feedforward rejects feedback templates and cell functions") {
  CeNNArrayState st(3, 3);
  Template t;
  t.a = center_only(0.5);
  CHECK_THROWS_AS(settle_feedforward(st, t, {}), Error);
  Template nl(kZeros3, center_only(1.0), 0.0, CellFn::ReluLike);
  CHECK_THROWS_AS(settle_feedforward(st, nl, {}), Error);
}

TEST_CASE("steady-state equivalence: ode vs feed-forward on random templates") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> bdist(-0.4, 0.4);
  std::uniform_real_distribution<double> udist(-1.0, 1.0);
  BoundaryPolicy bc;
  SettleOptions so;
  so.eps = 1e-9;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Mat3 b;
    for (auto& row : b)
      for (double& v : row) v = bdist(rng);
    Template t = Template::feedforward(b, bdist(rng));
    CeNNArrayState st(4, 5);
    for (size_t i = 0; i < st.u.size(); ++i) st.u.data()[i] = udist(rng);
    CeNNArrayState a = st, b2 = st;
    settle_feedforward(a, t, bc);
    settle_ode(b2, t, bc, so);
    for (size_t i = 0; i < st.u.size(); ++i)
      worst = std::max(worst, std::fabs(a.y.data()[i] - b2.y.data()[i]));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("output range invariant") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> bdist(-2.0, 2.0);
  std::uniform_real_distribution<double> udist(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Mat3 b;
    for (auto& row : b)
      for (double& v : row) v = bdist(rng);
    Template t = Template::feedforward(b, bdist(rng));
    CeNNArrayState st(4, 4);
    for (size_t i = 0; i < st.u.size(); ++i) st.u.data()[i] = udist(rng);
    settle_feedforward(st, t, {});
    for (size_t i = 0; i < st.y.size(); ++i) {
      CHECK(st.y.data()[i] >= -1.0);
      CHECK(st.y.data()[i] <= 1.0);
    }
  }
}

TEST_CASE("linearity in the unclipped regime") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> bdist(-0.1, 0.1);
  std::uniform_real_distribution<double> udist(-0.4, 0.4);
  for (int trial = 0; trial < 100; ++trial) {
    Mat3 b;
    for (auto& row : b)
      for (double& v : row) v = bdist(rng);
    Template t = Template::feedforward(b, 0.0);
    CeNNArrayState u1(4, 4), u2(4, 4), sum(4, 4);
    for (size_t i = 0; i < u1.u.size(); ++i) {
      u1.u.data()[i] = udist(rng);
      u2.u.data()[i] = udist(rng);
      sum.u.data()[i] = u1.u.data()[i] + u2.u.data()[i];
    }
    settle_feedforward(u1, t, {});
    settle_feedforward(u2, t, {});
    settle_feedforward(sum, t, {});
    for (size_t i = 0; i < u1.y.size(); ++i)
      CHECK(sum.y.data()[i] ==
            doctest::Approx(u1.y.data()[i] + u2.y.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("spatial invariance away from edges") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> dist(-0.3, 0.3);
  Mat3 b;
  for (auto& row : b)
    for (double& v : row) v = dist(rng);
  Template t = Template::feedforward(b, 0.1);

  CeNNArrayState a(9, 9), shifted(9, 9);
  // a 3x3 patch well inside the grid, shifted by (2, 1)
  double patch[3][3];
  for (auto& row : patch)
    for (double& v : row) v = dist(rng);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      a.u.at(2 + r, 2 + c) = patch[r][c];
      shifted.u.at(4 + r, 3 + c) = patch[r][c];
    }
  settle_feedforward(a, t, {});
  settle_feedforward(shifted, t, {});
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c)
      CHECK(a.y.at(1 + r, 1 + c) == doctest::Approx(shifted.y.at(3 + r, 2 + c)).epsilon(1e-12));
}

TEST_CASE("inactive cells are isolated") {
  Mat3 b;
  for (auto& row : b)
    for (double& v : row) v = 0.2;
  Template t = Template::feedforward(b, 0.0);

  CeNNArrayState a(6, 6), mutated(6, 6);
  for (size_t i = 0; i < a.u.size(); ++i) a.u.data()[i] = 0.3;
  mutated.u = a.u;
  // mask off a 2x2 block and perturb the masked values arbitrarily
  for (int r = 2; r <= 3; ++r)
    for (int c = 2; c <= 3; ++c) {
      a.set_active(r, c, false);
      mutated.set_active(r, c, false);
      mutated.u.at(r, c) = -0.9;
    }
  settle_feedforward(a, t, {});
  settle_feedforward(mutated, t, {});
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) {
      CHECK(a.y.at(r, c) == mutated.y.at(r, c));
      if (!a.is_active(r, c)) CHECK(a.y.at(r, c) == 0.0);
    }
  // active cells adjacent to the mask see zero from it, not the input value
  CHECK(a.y.at(1, 2) < 0.3 * 9 * 0.2);
}

TEST_CASE("divergence raises an instability error with the step index") {
  CeNNArrayState st(3, 3);
  st.u.fill(0.5);
  Template t;
  t.a = center_only(4.0);  // strong positive feedback
  t.b = center_only(1.0);
  SettleOptions so;
  so.t_max = 2000.0;
  try {
    settle_ode(st, t, {}, so);
    FAIL("expected InstabilityError");
  } catch (const InstabilityError& e) {
    CHECK(e.step() >= 0);
  }
}

TEST_CASE("replicate boundary") {
  CeNNArrayState st(3, 3);
  st.u.fill(0.5);
  Mat3 north = kZeros3;
  north[0][1] = 1.0;
  BoundaryPolicy rep{BoundaryKind::Replicate};
  settle_feedforward(st, Template::feedforward(north, 0.0), rep);
  CHECK(st.y.at(0, 1) == doctest::Approx(0.5));  // replicated edge
  BoundaryPolicy zero{};
  settle_feedforward(st, Template::feedforward(north, 0.0), zero);
  CHECK(st.y.at(0, 1) == doctest::Approx(0.0));  // virtual zero
}

TEST_CASE("globmax cell function") {
  BoundaryPolicy bc;
  Template gm(center_only(1.0), kZeros3, 0.0, CellFn::GlobmaxLike);

  SUBCASE("uniform grid is a fixed point") {
    CeNNArrayState st(4, 4);
    st.u.fill(-0.45);
    SettleOptions so;
    so.t_max = 30.0;
    settle_nonlinear_d(st, gm, bc, so);
    for (size_t i = 0; i < st.y.size(); ++i)
      CHECK(st.y.data()[i] == doctest::Approx(-0.45).epsilon(1e-9));
  }

  SUBCASE("short horizon pulls radius-1 neighbors only") {
    CeNNArrayState st(7, 7);
    st.u.fill(0.0);
    st.u.at(3, 3) = 1.0;
    SettleOptions so;
    so.t_max = 0.5;
    settle_nonlinear_d(st, gm, bc, so);
    CHECK(st.y.at(3, 4) > 0.02);   // ring 1 rises
    CHECK(st.y.at(2, 2) > 0.02);   // diagonals belong to the neighborhood
    CHECK(st.y.at(3, 5) < 0.01);   // ring 2 nearly untouched
    CHECK(st.y.at(3, 3) == doctest::Approx(1.0).epsilon(1e-6));  // maxima persist
  }

  SUBCASE("long horizon floods the 2x2 group of the maximum") {
    CeNNArrayState st(6, 6);
    st.u.fill(-0.2);
    st.u.at(2, 2) = 0.8;
    SettleOptions so;
    so.t_max = 25.0;
    settle_nonlinear_d(st, gm, bc, so);
    for (int r = 2; r <= 3; ++r)
      for (int c = 2; c <= 3; ++c)
        CHECK(st.y.at(r, c) == doctest::Approx(0.8).epsilon(0.0625));  // within 0.05 absolute
  }
}

TEST_CASE("relu-like cell function clamps the output stage") {
  Template t(kZeros3, center_only(1.0), 0.0, CellFn::ReluLike);
  CeNNArrayState st(3, 3);
  st.u.fill(-0.4);
  st.u.at(1, 1) = 0.6;
  settle_nonlinear_d(st, t, {}, {});
  CHECK(st.y.at(0, 0) == 0.0);
  CHECK(st.y.at(1, 1) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK_THROWS_AS(settle_nonlinear_d(st, Template::feedforward(center_only(1.0), 0.0), {}, {}),
                  Error);
}

TEST_CASE("settle option validation") {
  CeNNArrayState st(2, 2);
  Template t = Template::feedforward(center_only(1.0), 0.0);
  SettleOptions bad;
  bad.dt = 0.0;
  CHECK_THROWS_AS(settle_ode(st, t, {}, bad), Error);
  bad = {};
  bad.t_max = 0.001;
  CHECK_THROWS_AS(settle_ode(st, t, {}, bad), Error);
  bad = {};
  bad.eps = 0.0;
  CHECK_THROWS_AS(settle_ode(st, t, {}, bad), Error);
}
