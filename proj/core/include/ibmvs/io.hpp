#pragma once

#include <iosfwd>
#include <string>

#include "ibmvs/grid.hpp"
#include "ibmvs/scene.hpp"
#include "ibmvs/tensor.hpp"

namespace ibmvs {

/// PFM: little-endian (scale -1.0), rows stored bottom to top. NaN marks
/// invalid depth.
void write_pfm(std::ostream& out, const ScalarMap& map);
void write_pfm(const std::string& path, const ScalarMap& map);
ScalarMap read_pfm(std::istream& in);
ScalarMap read_pfm(const std::string& path);

/// Raw depth: "IBDM", u32 width, u32 height, float32 row-major, all
/// little-endian.
void write_ibdm(std::ostream& out, const ScalarMap& map);
void write_ibdm(const std::string& path, const ScalarMap& map);
ScalarMap read_ibdm(std::istream& in);
ScalarMap read_ibdm(const std::string& path);

/// 8-bit binary PPM (3 channels) or PGM (1 channel); values in [0, 1] are
/// scaled to 0..255.
void write_pnm(std::ostream& out, const Tensor& image);
void write_pnm(const std::string& path, const Tensor& image);
Tensor read_pnm(std::istream& in);
Tensor read_pnm(const std::string& path);

/// Scene directory layout:
///   cameras.txt           all cameras, view order
///   images/NNNN.ppm|pgm   one image per view
///   depths/NNNN.pfm       optional ground-truth depth per view
void write_bundle(const std::string& dir, const SceneBundle& bundle);
SceneBundle read_bundle(const std::string& dir);

std::string view_stem(int index);

}  // namespace ibmvs
