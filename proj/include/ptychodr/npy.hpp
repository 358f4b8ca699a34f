#pragma once

#include <string>
#include <vector>

#include "ptychodr/grids.hpp"

namespace ptychodr {

// NPY v1.0 interchange, C-order. Grids round-trip as 2D complex128/float64;
// measurement stacks are written with an explicit 3D shape.

void save_npy(const std::string& path, const ComplexGrid& grid);
void save_npy(const std::string& path, const RealGrid& grid);

// Writes `grid` (rows = shape[0]*shape[1], cols = shape[2]) as a 3D array.
void save_npy_3d(const std::string& path, const RealGrid& grid, std::size_t patterns);
void save_npy_3d(const std::string& path, const ComplexGrid& grid, std::size_t patterns);

ComplexGrid load_npy_complex(const std::string& path, std::vector<std::size_t>* shape = nullptr);
RealGrid load_npy_real(const std::string& path, std::vector<std::size_t>* shape = nullptr);

}  // namespace ptychodr
