#include "apuflow/mesh.hpp"

#include <cmath>
#include <string>

#include "apuflow/errors.hpp"

namespace apuflow {

std::string_view to_string(Side side) {
  switch (side) {
    case Side::West:
      return "west";
    case Side::East:
      return "east";
    case Side::South:
      return "south";
    case Side::North:
      return "north";
  }
  return "unknown";
}

double Mesh::boundary_area(Side side) const noexcept {
  return (side == Side::West || side == Side::East) ? dy_ : dx_;
}

double Mesh::boundary_delta(Side side) const noexcept {
  return 0.5 * ((side == Side::West || side == Side::East) ? dx_ : dy_);
}

Mesh build_structured_mesh(Index nx, Index ny, double lx, double ly) {
  if (nx < 2 || ny < 2) {
    throw ConfigError("mesh needs at least 2 cells per axis, got " + std::to_string(nx) + "x" +
                      std::to_string(ny));
  }
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
    throw ConfigError("mesh lengths must be positive and finite");
  }

  Mesh mesh;
  mesh.nx_ = nx;
  mesh.ny_ = ny;
  mesh.lx_ = lx;
  mesh.ly_ = ly;
  mesh.dx_ = lx / static_cast<double>(nx);
  mesh.dy_ = ly / static_cast<double>(ny);

  const Index n_cells = nx * ny;
  const Index n_faces = nx * (ny - 1) + ny * (nx - 1);
  mesh.owner_.reserve(n_faces);
  mesh.neighbour_.reserve(n_faces);
  mesh.face_area_.reserve(n_faces);
  mesh.face_delta_.reserve(n_faces);
  mesh.face_axis_.reserve(n_faces);
  mesh.owner_start_.assign(n_cells + 1, 0);

  // East neighbour (c+1) sorts before north neighbour (c+nx) since nx >= 2.
  for (Index c = 0; c < n_cells; ++c) {
    mesh.owner_start_[c] = mesh.owner_.size();
    const Index i = c % nx;
    const Index j = c / nx;
    if (i + 1 < nx) {
      mesh.owner_.push_back(c);
      mesh.neighbour_.push_back(c + 1);
      mesh.face_area_.push_back(mesh.dy_);
      mesh.face_delta_.push_back(mesh.dx_);
      mesh.face_axis_.push_back(Axis::X);
    }
    if (j + 1 < ny) {
      mesh.owner_.push_back(c);
      mesh.neighbour_.push_back(c + nx);
      mesh.face_area_.push_back(mesh.dx_);
      mesh.face_delta_.push_back(mesh.dy_);
      mesh.face_axis_.push_back(Axis::Y);
    }
  }
  mesh.owner_start_[n_cells] = mesh.owner_.size();

  // Counting sort of faces by neighbour; stable, so ascending face order
  // within each cell.
  mesh.losort_start_.assign(n_cells + 1, 0);
  for (Index f = 0; f < n_faces; ++f) {
    ++mesh.losort_start_[mesh.neighbour_[f] + 1];
  }
  for (Index c = 0; c < n_cells; ++c) {
    mesh.losort_start_[c + 1] += mesh.losort_start_[c];
  }
  mesh.losort_.assign(n_faces, 0);
  std::vector<Index> fill(mesh.losort_start_.begin(), mesh.losort_start_.end() - 1);
  for (Index f = 0; f < n_faces; ++f) {
    mesh.losort_[fill[mesh.neighbour_[f]]++] = f;
  }

  auto& west = mesh.patches_[static_cast<int>(Side::West)];
  auto& east = mesh.patches_[static_cast<int>(Side::East)];
  auto& south = mesh.patches_[static_cast<int>(Side::South)];
  auto& north = mesh.patches_[static_cast<int>(Side::North)];
  west.side = Side::West;
  east.side = Side::East;
  south.side = Side::South;
  north.side = Side::North;
  for (Index j = 0; j < ny; ++j) {
    west.cells.push_back(j * nx);
    east.cells.push_back(j * nx + nx - 1);
  }
  for (Index i = 0; i < nx; ++i) {
    south.cells.push_back(i);
    north.cells.push_back((ny - 1) * nx + i);
  }
  return mesh;
}

FaceCells face_cells(const Mesh& mesh, Index face) {
  if (face >= mesh.n_faces()) {
    throw IndexError("face " + std::to_string(face) + " out of range (n_faces = " +
                     std::to_string(mesh.n_faces()) + ")");
  }
  return {mesh.owner()[face], mesh.neighbour()[face]};
}

}  // namespace apuflow
