#pragma once

#include <string>

#include "vemreg/ply.hpp"
#include "vemreg/scan.hpp"

namespace vemreg {

// Scan files are PLY (vertex x,y,z,nx,ny,nz as float32, mm) with a required
// camera sidecar `<name>.camera.json` and an optional 16-bit depth image
// `<name>.depth.png` (value = depth in mm, 0 = no return).

// Loads and validates a scan. Throws FormatError on malformed input.
PartialScan load_scan(const std::string& ply_path);

// Writes the PLY (binary little-endian by default), the camera sidecar and,
// when the scan has a depth grid, the depth PNG.
void save_scan(const PartialScan& scan, const std::string& ply_path, bool binary = true);

// Sidecar paths derived from the scan path ("a/b.ply" -> "a/b.camera.json").
std::string camera_sidecar_path(const std::string& ply_path);
std::string depth_sidecar_path(const std::string& ply_path);

// 16-bit single-channel PNG, row-major, millimeters.
void write_depth_png(const std::string& path, const std::vector<float>& depth, int width,
                     int height);
std::vector<float> read_depth_png(const std::string& path, int& width, int& height);

}  // namespace vemreg
