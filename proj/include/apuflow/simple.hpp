#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "apuflow/exec.hpp"
#include "apuflow/field.hpp"
#include "apuflow/ldu.hpp"
#include "apuflow/mesh.hpp"

namespace apuflow {

/// Steady laminar lid-driven cavity controls. The lid is the north wall and
/// moves in +x at `lid_velocity`; the other walls are no-slip.
struct SimpleControls {
  double nu = 0.01;
  double lid_velocity = 1.0;
  double relax_u = 0.7;
  double relax_p = 0.3;
  std::size_t n_non_orth_correctors = 1;
  double momentum_tol = 1e-8;
  double pressure_tol = 1e-8;
  // Relative tolerances; 0 solves every system to the absolute tolerance.
  double momentum_rel_tol = 0.0;
  double pressure_rel_tol = 0.0;
  std::size_t max_solver_iters = 1000;
  std::size_t max_outer_iters = 1000;
  // The driver stops once every initial residual of an outer iteration is
  // at or below this value.
  double residual_floor = 1e-6;
  Index p_ref_cell = 0;
  double p_ref_value = 0.0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Colocated cell-centred unknowns plus the face flux.
///
/// rAU is the reciprocal of the momentum diagonal per unit volume
/// (cell_volume / diag), so that U = HbyA - rAU * grad(p) has velocity units.
struct SimpleState {
  SimpleState(const Mesh& mesh, PoolAllocator* pool = nullptr);

  Field u;
  Field v;
  Field p;
  Field phi;
  Field rAU;
  Field HbyA_u;
  Field HbyA_v;
  Field phiHbyA;
};

struct MomentumSystem {
  LduMatrix A;
  Field bu;  // full source, including -grad(p) * V
  Field bv;
  Field su;  // source without the pressure gradient, used for H(U)
  Field sv;
};

struct PressureSystem {
  LduMatrix A;
  Field b;
  Field face_coeff;  // rAU_f * |S_f| / delta_f
};

struct MomentumPerf {
  SolverPerf u;
  SolverPerf v;
};

struct IterationReport {
  MomentumPerf momentum;
  SolverPerf pressure;
  // max over cells of |net phi| / pressure norm factor, after correction.
  double continuity_error = 0.0;
};

/// Upwind convection on phi plus central diffusion, wall boundary conditions
/// folded into diag/source, implicit under-relaxation and the Gauss
/// pressure-gradient source.
MomentumSystem assemble_momentum(const SimpleState& state, const Mesh& mesh,
                                 const SimpleControls& controls, Executor& exec);

/// Solves both components (DILU PBiCGStab), then updates rAU and HbyA.
MomentumPerf momentum_predict(SimpleState& state, const MomentumSystem& system,
                              const SimpleControls& controls, Executor& exec);

/// Builds phiHbyA in the state and the pressure Laplacian
///   sum_f a_f (p_P - p_N) = -(net outflow of phiHbyA),  a_f = rAU_f |S_f| / delta_f,
/// with the reference cell pinned.
PressureSystem assemble_pressure(SimpleState& state, const Mesh& mesh,
                                 const SimpleControls& controls, Executor& exec);

/// Non-orthogonal corrector loop; on the final pass phi = phiHbyA - flux(p),
/// then p is under-relaxed. Returns the perf of the final solve.
SolverPerf pressure_correct(SimpleState& state, const PressureSystem& system,
                            const SimpleControls& controls, Executor& exec);

/// U = HbyA - rAU * grad(p).
void momentum_correct(SimpleState& state, const Mesh& mesh, Executor& exec);

/// Cell-centred Gauss gradient with linear face interpolation and
/// zero-gradient walls.
void gauss_gradient(const Mesh& mesh, const Field& p, Field& gx, Field& gy, Executor& exec);

/// Net outward flux of each cell.
void net_flux(const Mesh& mesh, const Field& phi, Field& out, Executor& exec);

/// max_c |net phi_c| / norm_factor.
double continuity_error(const SimpleState& state, const Mesh& mesh, double norm_factor,
                        Executor& exec);

IterationReport simple_outer_iteration(SimpleState& state, const Mesh& mesh,
                                       const SimpleControls& controls, Executor& exec);

struct SimpleRun {
  std::vector<IterationReport> history;
  bool converged = false;
};

using IterationCallback = std::function<void(std::size_t iteration, const IterationReport&)>;

/// Outer iterations until max_outer_iters or every initial residual is at
/// or below residual_floor.
SimpleRun run_simple(SimpleState& state, const Mesh& mesh, const SimpleControls& controls,
                     Executor& exec, const IterationCallback& on_iteration = {});

/// u along the vertical centreline x = lx/2 at each cell-centre height.
std::vector<double> centerline_u(const Mesh& mesh, const SimpleState& state);

}  // namespace apuflow
