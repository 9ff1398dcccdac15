#include <doctest.h>

#include <cmath>
#include <cstring>

#include "apuflow/errors.hpp"
#include "apuflow/simple.hpp"

using namespace apuflow;

namespace {

ExecPolicy policy(std::size_t cutoff, unsigned width = 1) {
  ExecPolicy p;
  p.cutoff = cutoff;
  p.parallel_width = width;
  return p;
}

double sum_abs_offdiag(const LduMatrix& a, Index c) {
  const auto& m = a.mesh();
  double s = 0.0;
  for (Index f = m.owner_start()[c]; f < m.owner_start()[c + 1]; ++f) s += std::abs(a.upper()[f]);
  for (Index k = m.losort_start()[c]; k < m.losort_start()[c + 1]; ++k)
    s += std::abs(a.lower()[m.losort()[k]]);
  return s;
}

bool bitwise_equal(const Field& a, const Field& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Run a few outer iterations so that phi, p and HbyA are non-trivial.
SimpleState developed_state(const Mesh& mesh, const SimpleControls& c, Executor& exec, int iters) {
  SimpleState s(mesh);
  for (int k = 0; k < iters; ++k) simple_outer_iteration(s, mesh, c, exec);
  return s;
}

}  // namespace

TEST_CASE("controls validation") {
  SimpleControls c;
  CHECK_NOTHROW(c.validate());
  c.relax_u = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.relax_p = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.pressure_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.nu = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("pure diffusion momentum matrix") {
  const Mesh mesh = build_structured_mesh(5, 4, 1.0, 1.0);
  Executor exec;
  SimpleState s(mesh);
  SimpleControls c;
  c.lid_velocity = 0.0;
  c.relax_u = 1.0;
  const auto sys = assemble_momentum(s, mesh, c, exec);
  CHECK(sys.A.symmetric());
  const double wall_x = c.nu * mesh.boundary_area(Side::West) / mesh.boundary_delta(Side::West);
  const double wall_y = c.nu * mesh.boundary_area(Side::South) / mesh.boundary_delta(Side::South);
  for (Index cell = 0; cell < mesh.n_cells(); ++cell) {
    const Index i = mesh.cell_i(cell), j = mesh.cell_j(cell);
    const double walls = wall_x * ((i == 0) + (i + 1 == mesh.nx())) +
                         wall_y * ((j == 0) + (j + 1 == mesh.ny()));
    CHECK(sys.A.diag()[cell] == doctest::Approx(sum_abs_offdiag(sys.A, cell) + walls).epsilon(1e-14));
    CHECK(sys.bu[cell] == 0.0);
    CHECK(sys.bv[cell] == 0.0);
  }

  SUBCASE("relaxation scales the diagonal") {
    SimpleControls r = c;
    r.relax_u = 0.5;
    const auto relaxed = assemble_momentum(s, mesh, r, exec);
    for (Index cell = 0; cell < mesh.n_cells(); ++cell)
      CHECK(relaxed.A.diag()[cell] == doctest::Approx(2.0 * sys.A.diag()[cell]));
  }
}

TEST_CASE("lid enters the source of the north row only") {
  const Mesh mesh = build_structured_mesh(4, 4, 1.0, 1.0);
  Executor exec;
  SimpleState s(mesh);
  SimpleControls c;
  const auto sys = assemble_momentum(s, mesh, c, exec);
  for (Index cell = 0; cell < mesh.n_cells(); ++cell) {
    if (mesh.cell_j(cell) == 3) CHECK(sys.bu[cell] > 0.0);
    else CHECK(sys.bu[cell] == 0.0);
    CHECK(sys.bv[cell] == 0.0);
  }
}

TEST_CASE("3x3 cavity momentum matrix is strictly diagonally dominant") {
  const Mesh mesh = build_structured_mesh(3, 3, 1.0, 1.0);
  Executor exec;
  SimpleControls c;
  c.nu = 1.0;
  SimpleState s = developed_state(mesh, c, exec, 3);
  const auto sys = assemble_momentum(s, mesh, c, exec);
  for (Index cell = 0; cell < mesh.n_cells(); ++cell)
    CHECK(std::abs(sys.A.diag()[cell]) > sum_abs_offdiag(sys.A, cell));
}

TEST_CASE("uniform pressure contributes no gradient source") {
  const Mesh mesh = build_structured_mesh(6, 5, 1.0, 1.0);
  Executor exec;
  SimpleControls c;
  SimpleState s = developed_state(mesh, c, exec, 2);
  for (auto& p : s.p.values()) p = 7.5;
  const auto sys = assemble_momentum(s, mesh, c, exec);
  for (Index cell = 0; cell < mesh.n_cells(); ++cell) {
    CHECK(sys.bu[cell] == sys.su[cell]);
    CHECK(sys.bv[cell] == sys.sv[cell]);
  }
}

TEST_CASE("momentum predictor") {
  const Mesh mesh = build_structured_mesh(8, 8, 1.0, 1.0);
  Executor exec;
  SUBCASE("quiescent is a fixed point") {
    SimpleControls c;
    c.lid_velocity = 0.0;
    SimpleState s(mesh);
    const auto sys = assemble_momentum(s, mesh, c, exec);
    const auto perf = momentum_predict(s, sys, c, exec);
    CHECK(perf.u.n_iterations == 0);
    CHECK(perf.u.converged);
    for (double u : s.u.values()) CHECK(u == 0.0);
  }
  SUBCASE("first iteration with a moving lid") {
    SimpleControls c;
    SimpleState s(mesh);
    const auto sys = assemble_momentum(s, mesh, c, exec);
    const auto perf = momentum_predict(s, sys, c, exec);
    CHECK(perf.u.initial_residual > 0.0);
    CHECK(perf.u.converged);
    CHECK(perf.u.final_residual <= c.momentum_tol);
    for (double r : s.rAU.values()) CHECK(r > 0.0);
  }
}

TEST_CASE("pressure system") {
  const Mesh mesh = build_structured_mesh(7, 6, 1.0, 1.0);
  Executor exec;
  SimpleControls c;
  SimpleState s = developed_state(mesh, c, exec, 3);
  SimpleState copy = s;
  const auto sys = assemble_pressure(s, mesh, c, exec);
  CHECK(sys.A.symmetric());
  double total = 0.0, scale = 0.0;
  for (double b : sys.b.values()) total += b;
  for (double f : s.phiHbyA.values()) scale += std::abs(f);
  // The reference adds diag*value, zero here.
  CHECK(std::abs(total) <= 1e-12 * scale);

  SUBCASE("uniform HbyA has zero divergence away from the walls") {
    for (auto& h : copy.HbyA_u.values()) h = 0.3;
    for (auto& h : copy.HbyA_v.values()) h = -0.2;
    const auto uni = assemble_pressure(copy, mesh, c, exec);
    double t = 0.0;
    for (Index cell = 0; cell < mesh.n_cells(); ++cell) {
      const Index i = mesh.cell_i(cell), j = mesh.cell_j(cell);
      if (i > 0 && j > 0 && i + 1 < mesh.nx() && j + 1 < mesh.ny())
        CHECK(uni.b[cell] == doctest::Approx(0.0).scale(1.0));
      t += uni.b[cell];
    }
    CHECK(std::abs(t) <= 1e-14);
  }
  SUBCASE("zero HbyA gives a zero source") {
    for (auto& h : copy.HbyA_u.values()) h = 0.0;
    for (auto& h : copy.HbyA_v.values()) h = 0.0;
    const auto zero = assemble_pressure(copy, mesh, c, exec);
    for (double b : zero.b.values()) CHECK(b == 0.0);
  }
}

TEST_CASE("pressure correction") {
  const Mesh mesh = build_structured_mesh(8, 6, 1.0, 1.0);
  Executor exec;
  SUBCASE("zero source keeps p at zero") {
    SimpleControls c;
    SimpleState s(mesh);
    for (auto& h : s.HbyA_u.values()) h = 0.0;
    for (auto& r : s.rAU.values()) r = 0.01;
    const auto sys = assemble_pressure(s, mesh, c, exec);
    pressure_correct(s, sys, c, exec);
    for (double p : s.p.values()) CHECK(p == 0.0);
    for (Index f = 0; f < mesh.n_faces(); ++f) CHECK(s.phi[f] == s.phiHbyA[f]);
  }
  SUBCASE("reference cell holds its value and continuity holds") {
    SimpleControls c;
    c.p_ref_cell = 5;
    c.p_ref_value = 3.0;
    c.relax_p = 1.0;
    c.pressure_tol = 1e-12;
    SimpleState s = developed_state(mesh, c, exec, 2);
    const auto usys = assemble_momentum(s, mesh, c, exec);
    momentum_predict(s, usys, c, exec);
    const auto sys = assemble_pressure(s, mesh, c, exec);
    const auto perf = pressure_correct(s, sys, c, exec);
    CHECK(perf.converged);
    CHECK(s.p[5] == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(continuity_error(s, mesh, perf.norm_factor, exec) <= 10.0 * c.pressure_tol);
  }
}

TEST_CASE("momentum correction") {
  const Mesh mesh = build_structured_mesh(6, 6, 1.0, 1.0);
  Executor exec;
  SimpleControls c;
  SimpleState s = developed_state(mesh, c, exec, 2);
  for (auto& p : s.p.values()) p = -1.25;
  exec.clear_trace();
  momentum_correct(s, mesh, exec);
  CHECK(bitwise_equal(s.u, s.HbyA_u));
  CHECK(bitwise_equal(s.v, s.HbyA_v));
  std::size_t macro = 0;
  for (const auto& ev : exec.trace())
    if (ev.kernel_name.rfind("TFOR_ALL", 0) == 0) ++macro;
  CHECK(macro >= 2);
}

TEST_CASE("gauss gradient of a linear field") {
  const Mesh mesh = build_structured_mesh(6, 5, 3.0, 2.0);
  Executor exec;
  Field p(mesh.n_cells(), "p"), gx(mesh.n_cells(), "gx"), gy(mesh.n_cells(), "gy");
  for (Index c = 0; c < mesh.n_cells(); ++c) p[c] = 2.0 * mesh.cell_x(c) - 3.0 * mesh.cell_y(c);
  gauss_gradient(mesh, p, gx, gy, exec);
  for (Index c = 0; c < mesh.n_cells(); ++c) {
    const Index i = mesh.cell_i(c), j = mesh.cell_j(c);
    if (i > 0 && i + 1 < mesh.nx()) CHECK(gx[c] == doctest::Approx(2.0));
    if (j > 0 && j + 1 < mesh.ny()) CHECK(gy[c] == doctest::Approx(-3.0));
  }
}

TEST_CASE("quiescent cavity is an exact fixed point") {
  const Mesh mesh = build_structured_mesh(10, 10, 1.0, 1.0);
  Executor exec;
  SimpleControls c;
  c.lid_velocity = 0.0;
  c.max_outer_iters = 25;
  c.residual_floor = -1.0;  // never stop early
  SimpleState s(mesh);
  SimpleRun run;
  CHECK_THROWS_AS(run_simple(s, mesh, c, exec), ConfigError);
  c.residual_floor = 0.0;
  run = run_simple(s, mesh, c, exec);
  CHECK(run.converged);
  CHECK(run.history.size() == 1);
  for (Index k = 0; k < mesh.n_cells(); ++k) {
    CHECK(s.u[k] == 0.0);
    CHECK(s.v[k] == 0.0);
    CHECK(s.p[k] == c.p_ref_value);
  }
  for (int k = 0; k < 25; ++k) simple_outer_iteration(s, mesh, c, exec);
  for (Index k = 0; k < mesh.n_cells(); ++k) {
    CHECK(s.u[k] == 0.0);
    CHECK(s.v[k] == 0.0);
    CHECK(s.p[k] == 0.0);
  }
}

TEST_CASE("32x32 Re=100 residual history (pinned fixture)") {
  const Mesh mesh = build_structured_mesh(32, 32, 1.0, 1.0);
  Executor exec;
  SimpleControls c;
  c.max_outer_iters = 100;
  c.residual_floor = 0.0;
  SimpleState s(mesh);
  const auto run = run_simple(s, mesh, c, exec);
  REQUIRE(run.history.size() == 100);
  const double r1 = run.history.front().momentum.u.initial_residual;
  const double r100 = run.history.back().momentum.u.initial_residual;
  CHECK(r1 / r100 >= 10.0);
  CHECK(r100 == doctest::Approx(3.812e-4).epsilon(0.2));
  for (const auto& r : run.history) CHECK(r.continuity_error <= 10.0 * c.pressure_tol);
}

TEST_CASE("serial and parallel lanes give bitwise-identical fields") {
  const Mesh mesh = build_structured_mesh(16, 16, 1.0, 1.0);
  SimpleControls c;
  Executor s_exec(policy(ExecPolicy::kNeverOffload)), p_exec(policy(0, 3));
  SimpleState a(mesh), b(mesh);
  for (int k = 0; k < 5; ++k) {
    simple_outer_iteration(a, mesh, c, s_exec);
    simple_outer_iteration(b, mesh, c, p_exec);
  }
  CHECK(bitwise_equal(a.u, b.u));
  CHECK(bitwise_equal(a.v, b.v));
  CHECK(bitwise_equal(a.p, b.p));
  CHECK(bitwise_equal(a.phi, b.phi));
}

TEST_CASE("mirrored lid gives the mirrored flow") {
  const Mesh mesh = build_structured_mesh(12, 12, 1.0, 1.0);
  Executor exec;
  SimpleControls c;
  c.momentum_tol = c.pressure_tol = 1e-12;
  SimpleControls m = c;
  m.lid_velocity = -c.lid_velocity;
  m.p_ref_cell = mesh.nx() - 1;
  SimpleState a(mesh), b(mesh);
  for (int k = 0; k < 20; ++k) {
    simple_outer_iteration(a, mesh, c, exec);
    simple_outer_iteration(b, mesh, m, exec);
  }
  for (Index j = 0; j < mesh.ny(); ++j)
    for (Index i = 0; i < mesh.nx(); ++i) {
      const Index c1 = mesh.cell(i, j), c2 = mesh.cell(mesh.nx() - 1 - i, j);
      CHECK(std::abs(b.u[c1] + a.u[c2]) <= 1e-8);
      CHECK(std::abs(b.v[c1] - a.v[c2]) <= 1e-8);
      CHECK(std::abs(b.p[c1] - a.p[c2]) <= 1e-8);
    }
}

TEST_CASE("centreline profile") {
  const Mesh even = build_structured_mesh(4, 3, 1.0, 1.0);
  SimpleState s(even);
  for (Index c = 0; c < even.n_cells(); ++c) s.u[c] = double(even.cell_i(c));
  const auto prof = centerline_u(even, s);
  REQUIRE(prof.size() == 3);
  for (double u : prof) CHECK(u == 1.5);
  const Mesh odd = build_structured_mesh(5, 2, 1.0, 1.0);
  SimpleState t(odd);
  for (Index c = 0; c < odd.n_cells(); ++c) t.u[c] = double(odd.cell_i(c));
  for (double u : centerline_u(odd, t)) CHECK(u == 2.0);
}
