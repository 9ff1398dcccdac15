#include "apuflow/simple.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "apuflow/errors.hpp"

namespace apuflow {

void SimpleControls::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("SimpleControls: " + what); };
  if (!(nu > 0.0)) fail("nu must be positive");
  if (!std::isfinite(lid_velocity)) fail("lid_velocity must be finite");
  if (!(relax_u > 0.0 && relax_u <= 1.0)) fail("relax_u must lie in (0, 1]");
  if (!(relax_p > 0.0 && relax_p <= 1.0)) fail("relax_p must lie in (0, 1]");
  if (n_non_orth_correctors < 1) fail("n_non_orth_correctors must be at least 1");
  if (!(momentum_tol > 0.0)) fail("momentum_tol must be positive");
  if (!(pressure_tol > 0.0)) fail("pressure_tol must be positive");
  if (max_solver_iters < 1) fail("max_solver_iters must be at least 1");
  if (!(momentum_rel_tol >= 0.0 && momentum_rel_tol < 1.0)) fail("momentum_rel_tol must lie in [0, 1)");
  if (!(pressure_rel_tol >= 0.0 && pressure_rel_tol < 1.0)) fail("pressure_rel_tol must lie in [0, 1)");
  if (!(residual_floor >= 0.0)) fail("residual_floor must be non-negative");
}

SimpleState::SimpleState(const Mesh& mesh, PoolAllocator* pool)
    : u(mesh.n_cells(), "U.x", pool),
      v(mesh.n_cells(), "U.y", pool),
      p(mesh.n_cells(), "p", pool),
      phi(mesh.n_faces(), "phi", pool),
      rAU(mesh.n_cells(), "rAU", pool),
      HbyA_u(mesh.n_cells(), "HbyA.x", pool),
      HbyA_v(mesh.n_cells(), "HbyA.y", pool),
      phiHbyA(mesh.n_faces(), "phiHbyA", pool) {}

namespace {

void require_consistent(const SimpleState& state, const Mesh& mesh) {
  const std::size_t nc = mesh.n_cells();
  const std::size_t nf = mesh.n_faces();
  if (state.u.size() != nc || state.v.size() != nc || state.p.size() != nc ||
      state.rAU.size() != nc || state.HbyA_u.size() != nc || state.HbyA_v.size() != nc ||
      state.phi.size() != nf || state.phiHbyA.size() != nf) {
    throw FieldSizeError("SimpleState is not sized for this mesh");
  }
}

}  // namespace

void gauss_gradient(const Mesh& mesh, const Field& p, Field& gx, Field& gy, Executor& exec) {
  const std::size_t n = mesh.n_cells();
  if (p.size() != n || gx.size() != n || gy.size() != n) {
    throw FieldSizeError("gauss_gradient: fields not sized to the mesh");
  }
  const Index nx = mesh.nx();
  const Index ny = mesh.ny();
  const double dx = mesh.dx();
  const double dy = mesh.dy();
  const double inv_vol = 1.0 / mesh.cell_volume();
  const double* pp = p.data();
  double* gxp = gx.data();
  double* gyp = gy.data();
  const std::array buffers{p.handle(), gx.handle(), gy.handle()};
  exec.run_kernel("fvc::grad(p)", n, buffers, [=](Index begin, Index end) {
    for (Index c = begin; c < end; ++c) {
      const Index i = c % nx;
      const Index j = c / nx;
      const double pc = pp[c];
      // Linear interpolation on the uniform grid; walls take the cell value.
      const double pe = (i + 1 < nx) ? 0.5 * (pc + pp[c + 1]) : pc;
      const double pw = (i > 0) ? 0.5 * (pp[c - 1] + pc) : pc;
      const double pn = (j + 1 < ny) ? 0.5 * (pc + pp[c + nx]) : pc;
      const double ps = (j > 0) ? 0.5 * (pp[c - nx] + pc) : pc;
      gxp[c] = (pe * dy - pw * dy) * inv_vol;
      gyp[c] = (pn * dx - ps * dx) * inv_vol;
    }
  });
}

void net_flux(const Mesh& mesh, const Field& phi, Field& out, Executor& exec) {
  if (phi.size() != mesh.n_faces() || out.size() != mesh.n_cells()) {
    throw FieldSizeError("net_flux: fields not sized to the mesh");
  }
  const Index* own_start = mesh.owner_start().data();
  const Index* losort = mesh.losort().data();
  const Index* losort_start = mesh.losort_start().data();
  const double* phip = phi.data();
  double* outp = out.data();
  const std::array buffers{phi.handle(), out.handle()};
  exec.run_kernel("fvc::div(phi)", mesh.n_cells(), buffers, [=](Index begin, Index end) {
    for (Index c = begin; c < end; ++c) {
      double s = 0.0;
      for (Index f = own_start[c]; f < own_start[c + 1]; ++f) s += phip[f];
      for (Index k = losort_start[c]; k < losort_start[c + 1]; ++k) s -= phip[losort[k]];
      outp[c] = s;
    }
  });
}

MomentumSystem assemble_momentum(const SimpleState& state, const Mesh& mesh,
                                 const SimpleControls& controls, Executor& exec) {
  require_consistent(state, mesh);
  PoolAllocator* pool = state.u.pool();
  const std::size_t nc = mesh.n_cells();
  const std::size_t nf = mesh.n_faces();
  MomentumSystem sys{LduMatrix(mesh, pool), Field(nc, "bu", pool), Field(nc, "bv", pool),
                     Field(nc, "su", pool), Field(nc, "sv", pool)};

  const double nu = controls.nu;
  const double lid = controls.lid_velocity;
  const double* phi = state.phi.data();
  const double* area = mesh.face_area().data();
  const double* delta = mesh.face_delta().data();
  const Index* own_start = mesh.owner_start().data();
  const Index* losort = mesh.losort().data();
  const Index* losort_start = mesh.losort_start().data();
  double* upper = sys.A.upper().data();
  double* lower = sys.A.lower().data();
  double* diag = sys.A.diag().data();
  double* su = sys.su.data();
  double* sv = sys.sv.data();

  // Off-diagonals, one face per index.
  {
    const std::array buffers{state.phi.handle(), sys.A.upper().handle(), sys.A.lower().handle()};
    exec.run_kernel(
        "UEqn off-diagonal", nf, buffers,
        [=](Index begin, Index end) {
          for (Index f = begin; f < end; ++f) {
            const double d = nu * area[f] / delta[f];
            upper[f] = std::min(phi[f], 0.0) - d;
            lower[f] = -std::max(phi[f], 0.0) - d;
          }
        },
        KernelCategory::Assembly);
  }
  for (Index f = 0; f < nf; ++f) {
    if (!std::isfinite(upper[f]) || !std::isfinite(lower[f])) {
      throw AssemblyError("momentum: non-finite coefficient at face " + std::to_string(f));
    }
  }

  // Diagonal and wall sources, gathered per cell.
  {
    const double aw = mesh.boundary_area(Side::West);
    const double as = mesh.boundary_area(Side::South);
    const double dw = nu * aw / mesh.boundary_delta(Side::West);
    const double ds = nu * as / mesh.boundary_delta(Side::South);
    const Index nx = mesh.nx();
    const Index ny = mesh.ny();
    const std::array buffers{state.phi.handle(), sys.A.diag().handle(), sys.su.handle(),
                             sys.sv.handle()};
    exec.run_kernel(
        "UEqn diagonal", nc, buffers,
        [=](Index begin, Index end) {
          for (Index c = begin; c < end; ++c) {
            double d = 0.0;
            for (Index f = own_start[c]; f < own_start[c + 1]; ++f) {
              d += std::max(phi[f], 0.0) + nu * area[f] / delta[f];
            }
            for (Index k = losort_start[c]; k < losort_start[c + 1]; ++k) {
              const Index f = losort[k];
              d += std::max(-phi[f], 0.0) + nu * area[f] / delta[f];
            }
            const Index i = c % nx;
            const Index j = c / nx;
            double bx = 0.0;
            if (i == 0) d += dw;
            if (i + 1 == nx) d += dw;
            if (j == 0) d += ds;
            if (j + 1 == ny) {
              d += ds;
              bx += ds * lid;
            }
            diag[c] = d;
            su[c] = bx;
            sv[c] = 0.0;
          }
        },
        KernelCategory::Assembly);
  }

  // Implicit under-relaxation: diag /= relax_u, compensated in the source.
  {
    const double relax = controls.relax_u;
    const double* u = state.u.data();
    const double* v = state.v.data();
    const std::array buffers{sys.A.diag().handle(), sys.su.handle(), sys.sv.handle(),
                             state.u.handle(), state.v.handle()};
    exec.run_kernel(
        "UEqn.relax()", nc, buffers,
        [=](Index begin, Index end) {
          for (Index c = begin; c < end; ++c) {
            const double relaxed = diag[c] / relax;
            const double extra = relaxed - diag[c];
            su[c] += extra * u[c];
            sv[c] += extra * v[c];
            diag[c] = relaxed;
          }
        },
        KernelCategory::Assembly);
  }

  // b = s - grad(p) * V
  Field gx(nc, "gradp.x", pool);
  Field gy(nc, "gradp.y", pool);
  gauss_gradient(mesh, state.p, gx, gy, exec);
  {
    const double vol = mesh.cell_volume();
    const double* gxp = gx.data();
    const double* gyp = gy.data();
    double* bu = sys.bu.data();
    double* bv = sys.bv.data();
    const std::array buffers{sys.su.handle(), sys.sv.handle(), gx.handle(), gy.handle(),
                             sys.bu.handle(), sys.bv.handle()};
    exec.run_kernel(
        "UEqn == -grad(p)", nc, buffers,
        [=](Index begin, Index end) {
          for (Index c = begin; c < end; ++c) {
            bu[c] = su[c] - gxp[c] * vol;
            bv[c] = sv[c] - gyp[c] * vol;
          }
        },
        KernelCategory::Assembly);
  }
  for (Index c = 0; c < nc; ++c) {
    if (!std::isfinite(diag[c]) || !std::isfinite(sys.bu[c]) || !std::isfinite(sys.bv[c])) {
      throw AssemblyError("momentum: non-finite coefficient at cell " + std::to_string(c));
    }
  }
  return sys;
}

MomentumPerf momentum_predict(SimpleState& state, const MomentumSystem& system,
                              const SimpleControls& controls, Executor& exec) {
  const SolverControls solver{PreconditionerKind::DILU, controls.momentum_tol, controls.momentum_rel_tol,
                              controls.max_solver_iters};
  MomentumPerf perf;
  {
    SolveResult r = pbicgstab_solve(system.A, state.u, system.bu, solver, exec);
    elementwise_binary(state.u, UpdateOp::Assign, r.x, exec);
    perf.u = r.perf;
  }
  {
    SolveResult r = pbicgstab_solve(system.A, state.v, system.bv, solver, exec);
    elementwise_binary(state.v, UpdateOp::Assign, r.x, exec);
    perf.v = r.perf;
  }

  // rAU = V / diag;  HbyA = (s - (A U - diag U)) / diag
  const std::size_t nc = system.A.n_cells();
  Field au = amul(system.A, state.u, exec);
  Field av = amul(system.A, state.v, exec);
  const double vol = system.A.mesh().cell_volume();
  const double* diag = system.A.diag().data();
  const double* su = system.su.data();
  const double* sv = system.sv.data();
  const double* u = state.u.data();
  const double* v = state.v.data();
  const double* aup = au.data();
  const double* avp = av.data();
  double* rau = state.rAU.data();
  double* hu = state.HbyA_u.data();
  double* hv = state.HbyA_v.data();
  const std::array buffers{system.A.diag().handle(), system.su.handle(), system.sv.handle(),
                           state.u.handle(),         state.v.handle(),  au.handle(),
                           av.handle(),              state.rAU.handle(), state.HbyA_u.handle(),
                           state.HbyA_v.handle()};
  exec.run_kernel("HbyA = rAU*UEqn.H()", nc, buffers, [=](Index begin, Index end) {
    for (Index c = begin; c < end; ++c) {
      const double rd = 1.0 / diag[c];
      rau[c] = vol * rd;
      hu[c] = (su[c] - aup[c] + diag[c] * u[c]) * rd;
      hv[c] = (sv[c] - avp[c] + diag[c] * v[c]) * rd;
    }
  });
  return perf;
}

PressureSystem assemble_pressure(SimpleState& state, const Mesh& mesh,
                                 const SimpleControls& controls, Executor& exec) {
  require_consistent(state, mesh);
  if (controls.p_ref_cell >= mesh.n_cells()) {
    throw ConfigError("p_ref_cell " + std::to_string(controls.p_ref_cell) + " outside the mesh");
  }
  PoolAllocator* pool = state.p.pool();
  const std::size_t nc = mesh.n_cells();
  const std::size_t nf = mesh.n_faces();
  PressureSystem sys{LduMatrix(mesh, pool), Field(nc, "bp", pool), Field(nf, "pFaceCoeff", pool)};

  const Index* own = mesh.owner().data();
  const Index* nei = mesh.neighbour().data();
  const double* area = mesh.face_area().data();
  const double* delta = mesh.face_delta().data();
  const Axis* axis = mesh.face_axis().data();
  const Index* own_start = mesh.owner_start().data();
  const Index* losort = mesh.losort().data();
  const Index* losort_start = mesh.losort_start().data();
  const double* hu = state.HbyA_u.data();
  const double* hv = state.HbyA_v.data();
  const double* rau = state.rAU.data();
  double* phih = state.phiHbyA.data();
  double* coeff = sys.face_coeff.data();
  double* upper = sys.A.upper().data();
  double* lower = sys.A.lower().data();
  double* diag = sys.A.diag().data();
  double* bp = sys.b.data();

  {
    const std::array buffers{state.HbyA_u.handle(), state.HbyA_v.handle(), state.rAU.handle(),
                             state.phiHbyA.handle(), sys.face_coeff.handle(),
                             sys.A.upper().handle(), sys.A.lower().handle()};
    exec.run_kernel(
        "phiHbyA = interpolate(HbyA) & Sf", nf, buffers,
        [=](Index begin, Index end) {
          for (Index f = begin; f < end; ++f) {
            const Index o = own[f];
            const Index n = nei[f];
            const double h = axis[f] == Axis::X ? 0.5 * (hu[o] + hu[n]) : 0.5 * (hv[o] + hv[n]);
            phih[f] = h * area[f];
            const double a = 0.5 * (rau[o] + rau[n]) * area[f] / delta[f];
            coeff[f] = a;
            upper[f] = -a;
            lower[f] = -a;
          }
        },
        KernelCategory::Assembly);
  }
  {
    const std::array buffers{state.phiHbyA.handle(), sys.face_coeff.handle(),
                             sys.A.diag().handle(), sys.b.handle()};
    exec.run_kernel(
        "pEqn: laplacian(rAtU, p) == div(phiHbyA)", nc, buffers,
        [=](Index begin, Index end) {
          for (Index c = begin; c < end; ++c) {
            double d = 0.0;
            double out = 0.0;
            for (Index f = own_start[c]; f < own_start[c + 1]; ++f) {
              d += coeff[f];
              out += phih[f];
            }
            for (Index k = losort_start[c]; k < losort_start[c + 1]; ++k) {
              const Index f = losort[k];
              d += coeff[f];
              out -= phih[f];
            }
            diag[c] = d;
            bp[c] = -out;
          }
        },
        KernelCategory::Assembly);
  }

  const Index ref = controls.p_ref_cell;
  const double ref_value = controls.p_ref_value;
  const std::array buffers{sys.A.diag().handle(), sys.b.handle()};
  exec.run_pinned(
      "pEqn.setReference", 1, Lane::Serial, buffers,
      [=](Index, Index) {
        bp[ref] += diag[ref] * ref_value;
        diag[ref] += diag[ref];
      },
      KernelCategory::Assembly);
  return sys;
}

SolverPerf pressure_correct(SimpleState& state, const PressureSystem& system,
                            const SimpleControls& controls, Executor& exec) {
  const Mesh& mesh = system.A.mesh();
  const SolverControls solver{PreconditionerKind::DILU, controls.pressure_tol, controls.pressure_rel_tol,
                              controls.max_solver_iters};
  Field p_prev(state.p);
  Field p_new(state.p);
  SolverPerf perf;
  for (std::size_t pass = 0; pass < controls.n_non_orth_correctors; ++pass) {
    SolveResult r = pbicgstab_solve(system.A, p_new, system.b, solver, exec);
    p_new = std::move(r.x);
    perf = r.perf;
    if (pass + 1 == controls.n_non_orth_correctors) {
      const Index* own = mesh.owner().data();
      const Index* nei = mesh.neighbour().data();
      const double* phih = state.phiHbyA.data();
      const double* coeff = system.face_coeff.data();
      const double* pp = p_new.data();
      double* phi = state.phi.data();
      const std::array buffers{state.phiHbyA.handle(), system.face_coeff.handle(),
                               p_new.handle(), state.phi.handle()};
      exec.run_kernel("phi = phiHbyA - pEqn.flux()", mesh.n_faces(), buffers,
                      [=](Index begin, Index end) {
                        for (Index f = begin; f < end; ++f) {
                          phi[f] = phih[f] - coeff[f] * (pp[nei[f]] - pp[own[f]]);
                        }
                      });
    }
  }

  // p = p_prev + relax_p (p_new - p_prev)
  const double relax = controls.relax_p;
  const double* prev = p_prev.data();
  const double* pn = p_new.data();
  double* p = state.p.data();
  const std::array buffers{p_prev.handle(), p_new.handle(), state.p.handle()};
  exec.run_kernel("p.relax()", state.p.size(), buffers, [=](Index begin, Index end) {
    for (Index c = begin; c < end; ++c) {
      p[c] = prev[c] + relax * (pn[c] - prev[c]);
    }
  });
  return perf;
}

void momentum_correct(SimpleState& state, const Mesh& mesh, Executor& exec) {
  require_consistent(state, mesh);
  PoolAllocator* pool = state.p.pool();
  const std::size_t nc = mesh.n_cells();
  Field gx(nc, "gradp.x", pool);
  Field gy(nc, "gradp.y", pool);
  gauss_gradient(mesh, state.p, gx, gy, exec);
  Field tmp(nc, "rAU*grad(p)", pool);
  // U = HbyA - rAtU()*fvc::grad(p), one macro loop per operator.
  elementwise_ternary(tmp, UpdateOp::Assign, state.rAU, BinaryOp::Mul, gx, exec);
  elementwise_ternary(state.u, UpdateOp::Assign, state.HbyA_u, BinaryOp::Sub, tmp, exec);
  elementwise_ternary(tmp, UpdateOp::Assign, state.rAU, BinaryOp::Mul, gy, exec);
  elementwise_ternary(state.v, UpdateOp::Assign, state.HbyA_v, BinaryOp::Sub, tmp, exec);
  // Wall velocities live on the patches and enter through assembly, so there
  // are no stored boundary values to re-impose here.
}

double continuity_error(const SimpleState& state, const Mesh& mesh, double norm_factor,
                        Executor& exec) {
  Field net(mesh.n_cells(), "netPhi", state.phi.pool());
  net_flux(mesh, state.phi, net, exec);
  double worst = 0.0;
  for (double value : net.values()) worst = std::max(worst, std::abs(value));
  return worst / std::max(norm_factor, 1e-300);
}

IterationReport simple_outer_iteration(SimpleState& state, const Mesh& mesh,
                                       const SimpleControls& controls, Executor& exec) {
  IterationReport report;
  {
    MomentumSystem ueqn = assemble_momentum(state, mesh, controls, exec);
    report.momentum = momentum_predict(state, ueqn, controls, exec);
  }
  {
    PressureSystem peqn = assemble_pressure(state, mesh, controls, exec);
    report.pressure = pressure_correct(state, peqn, controls, exec);
  }
  report.continuity_error = continuity_error(state, mesh, report.pressure.norm_factor, exec);
  momentum_correct(state, mesh, exec);
  return report;
}

SimpleRun run_simple(SimpleState& state, const Mesh& mesh, const SimpleControls& controls,
                     Executor& exec, const IterationCallback& on_iteration) {
  controls.validate();
  SimpleRun run;
  for (std::size_t it = 0; it < controls.max_outer_iters; ++it) {
    run.history.push_back(simple_outer_iteration(state, mesh, controls, exec));
    const auto& r = run.history.back();
    if (on_iteration) on_iteration(it, r);
    const double worst = std::max({r.momentum.u.initial_residual, r.momentum.v.initial_residual,
                                   r.pressure.initial_residual});
    if (worst <= controls.residual_floor) {
      run.converged = true;
      break;
    }
  }
  return run;
}

std::vector<double> centerline_u(const Mesh& mesh, const SimpleState& state) {
  const Index nx = mesh.nx();
  std::vector<double> profile(mesh.ny());
  for (Index j = 0; j < mesh.ny(); ++j) {
    if (nx % 2 == 0) {
      profile[j] = 0.5 * (state.u[mesh.cell(nx / 2 - 1, j)] + state.u[mesh.cell(nx / 2, j)]);
    } else {
      profile[j] = state.u[mesh.cell(nx / 2, j)];
    }
  }
  return profile;
}

}  // namespace apuflow
