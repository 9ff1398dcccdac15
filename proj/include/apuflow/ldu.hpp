#pragma once

#include <cstddef>
#include <string_view>

#include "apuflow/exec.hpp"
#include "apuflow/field.hpp"
#include "apuflow/mesh.hpp"

namespace apuflow {

/// Sparse matrix in LDU form over a mesh's face addressing.
///
/// Row c holds diag[c]; face f couples owner o and neighbour n with
/// upper[f] at (o, n) and lower[f] at (n, o).
class LduMatrix {
 public:
  explicit LduMatrix(const Mesh& mesh, PoolAllocator* pool = nullptr);

  const Mesh& mesh() const noexcept { return *mesh_; }
  std::size_t n_cells() const noexcept { return diag_.size(); }
  std::size_t n_faces() const noexcept { return upper_.size(); }

  Field& diag() noexcept { return diag_; }
  Field& lower() noexcept { return lower_; }
  Field& upper() noexcept { return upper_; }
  const Field& diag() const noexcept { return diag_; }
  const Field& lower() const noexcept { return lower_; }
  const Field& upper() const noexcept { return upper_; }

  /// lower[f] == upper[f] for every face.
  bool symmetric() const noexcept;

 private:
  const Mesh* mesh_;
  Field diag_;
  Field lower_;
  Field upper_;
};

/// y = A x. Throws FieldSizeError on length mismatch.
void amul(const LduMatrix& a, const Field& x, Field& y, Executor& exec);
Field amul(const LduMatrix& a, const Field& x, Executor& exec);

/// Residual normalisation: with xbar = mean(x),
///   sum|A x - A xbar| + sum|b - A xbar|, floored at 1e-300.
double norm_factor(const LduMatrix& a, const Field& x, const Field& b, Executor& exec);

/// w = rD * r (rD holds reciprocal diagonal values).
void diag_precondition(Field& w, const Field& r, const Field& rd, Executor& exec);

/// Reciprocal DILU diagonal. Throws SingularPreconditionerError on a zero
/// pivot.
Field dilu_factor(const LduMatrix& a, Executor& exec);

/// w = M^-1 r with M = (L + D*) D*^-1 (D* + U), D* = 1/rD.
void dilu_apply(const LduMatrix& a, const Field& rd, const Field& r, Field& w, Executor& exec);

enum class PreconditionerKind { None, Diagonal, DILU };

std::string_view to_string(PreconditionerKind kind);

struct SolverControls {
  PreconditionerKind preconditioner = PreconditionerKind::DILU;
  double tolerance = 1e-8;
  double rel_tolerance = 0.0;
  std::size_t max_iterations = 1000;
};

struct SolverPerf {
  double initial_residual = 0.0;
  double final_residual = 0.0;
  std::size_t n_iterations = 0;
  bool converged = false;
  double norm_factor = 0.0;
};

struct SolveResult {
  Field x;
  SolverPerf perf;
};

/// Preconditioned BiCGStab. x0 is never modified. Residuals are 1-norms
/// divided by norm_factor; perf.final_residual is recomputed from the
/// returned solution. Throws BreakdownError when rho, omega or a projection
/// denominator falls below 1e-300; reaching max_iterations is not an error.
SolveResult pbicgstab_solve(const LduMatrix& a, const Field& x0, const Field& b,
                            const SolverControls& controls, Executor& exec);

}  // namespace apuflow
