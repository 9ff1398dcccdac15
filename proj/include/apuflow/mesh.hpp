#pragma once

#include <array>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "apuflow/core.hpp"

namespace apuflow {

enum class Side { West, East, South, North };

std::string_view to_string(Side side);

/// Axis of an internal face normal. X faces separate (i, j) and (i+1, j).
enum class Axis { X, Y };

struct BoundaryPatch {
  Side side;
  std::vector<Index> cells;  // cells whose `side` lies on the domain boundary
};

struct FaceCells {
  Index owner;
  Index neighbour;
};

/// Uniform structured 2D grid lowered to LDU owner/neighbour addressing.
///
/// Cells are numbered row-major (c = j*nx + i). Internal faces are sorted by
/// owner, then by neighbour, so owner[f] < neighbour[f] and the owner array is
/// non-decreasing. Immutable after construction.
class Mesh {
 public:
  Index nx() const noexcept { return nx_; }
  Index ny() const noexcept { return ny_; }
  Index n_cells() const noexcept { return nx_ * ny_; }
  Index n_faces() const noexcept { return owner_.size(); }
  double lx() const noexcept { return lx_; }
  double ly() const noexcept { return ly_; }
  double dx() const noexcept { return dx_; }
  double dy() const noexcept { return dy_; }
  double cell_volume() const noexcept { return dx_ * dy_; }

  Index cell(Index i, Index j) const noexcept { return j * nx_ + i; }
  Index cell_i(Index c) const noexcept { return c % nx_; }
  Index cell_j(Index c) const noexcept { return c / nx_; }
  double cell_x(Index c) const noexcept { return (static_cast<double>(cell_i(c)) + 0.5) * dx_; }
  double cell_y(Index c) const noexcept { return (static_cast<double>(cell_j(c)) + 0.5) * dy_; }

  std::span<const Index> owner() const noexcept { return owner_; }
  std::span<const Index> neighbour() const noexcept { return neighbour_; }
  std::span<const double> face_area() const noexcept { return face_area_; }
  /// Owner-to-neighbour centre distance.
  std::span<const double> face_delta() const noexcept { return face_delta_; }
  std::span<const Axis> face_axis() const noexcept { return face_axis_; }

  /// Faces owned by cell c are [owner_start[c], owner_start[c+1]).
  std::span<const Index> owner_start() const noexcept { return owner_start_; }
  /// Faces with neighbour c are losort[losort_start[c] .. losort_start[c+1]),
  /// in ascending face order.
  std::span<const Index> losort() const noexcept { return losort_; }
  std::span<const Index> losort_start() const noexcept { return losort_start_; }

  const BoundaryPatch& patch(Side side) const { return patches_[static_cast<int>(side)]; }
  std::span<const BoundaryPatch> patches() const noexcept { return patches_; }
  /// Area of a boundary face on the given side.
  double boundary_area(Side side) const noexcept;
  /// Cell-centre to boundary-face distance on the given side.
  double boundary_delta(Side side) const noexcept;

 private:
  friend Mesh build_structured_mesh(Index, Index, double, double);
  Mesh() = default;

  Index nx_ = 0;
  Index ny_ = 0;
  double lx_ = 0.0;
  double ly_ = 0.0;
  double dx_ = 0.0;
  double dy_ = 0.0;
  std::vector<Index> owner_;
  std::vector<Index> neighbour_;
  std::vector<double> face_area_;
  std::vector<double> face_delta_;
  std::vector<Axis> face_axis_;
  std::vector<Index> owner_start_;
  std::vector<Index> losort_;
  std::vector<Index> losort_start_;
  std::array<BoundaryPatch, 4> patches_{};
};

/// Builds an nx-by-ny grid over [0, lx] x [0, ly]. Throws ConfigError when
/// nx < 2, ny < 2 or a length is not positive.
Mesh build_structured_mesh(Index nx, Index ny, double lx, double ly);

/// Throws IndexError when face >= n_faces.
FaceCells face_cells(const Mesh& mesh, Index face);

}  // namespace apuflow
