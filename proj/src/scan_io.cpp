#include "vemreg/scan_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

namespace vemreg {

std::string camera_sidecar_path(const std::string& ply_path) {
  std::filesystem::path p(ply_path);
  p.replace_extension();
  return p.string() + ".camera.json";
}

std::string depth_sidecar_path(const std::string& ply_path) {
  std::filesystem::path p(ply_path);
  p.replace_extension();
  return p.string() + ".depth.png";
}

PartialScan load_scan(const std::string& ply_path) {
  if (!std::filesystem::exists(ply_path)) {
    throw FormatError("scan file not found: " + ply_path);
  }
  const std::string cam_path = camera_sidecar_path(ply_path);
  if (!std::filesystem::exists(cam_path)) {
    throw FormatError("camera sidecar not found: " + cam_path);
  }

  PartialScan scan;
  {
    std::ifstream in(cam_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("camera sidecar " + cam_path + ": " + e.what());
    }
    try {
      scan.camera = camera_from_json(j);
    } catch (const std::invalid_argument& e) {
      throw FormatError("camera sidecar " + cam_path + ": " + e.what());
    }
  }

  const PlyData ply = PlyData::read(ply_path);
  if (!ply.has_element("vertex")) throw FormatError("scan PLY missing vertex element");
  for (const char* prop : {"nx", "ny", "nz"}) {
    if (!ply.has_property("vertex", prop)) {
      throw FormatError("scan PLY missing normals (property \"" + std::string(prop) + "\")");
    }
  }
  const auto& xs = ply.column("vertex", "x");
  const auto& ys = ply.column("vertex", "y");
  const auto& zs = ply.column("vertex", "z");
  const auto& nxs = ply.column("vertex", "nx");
  const auto& nys = ply.column("vertex", "ny");
  const auto& nzs = ply.column("vertex", "nz");
  const std::size_t n = xs.size();
  if (ys.size() != n || zs.size() != n || nxs.size() != n || nys.size() != n ||
      nzs.size() != n) {
    throw FormatError("scan PLY: vertex property column lengths disagree");
  }
  scan.points.resize(n);
  scan.normals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    scan.points[i] = Vec3(xs[i], ys[i], zs[i]);
    scan.normals[i] = Vec3(nxs[i], nys[i], nzs[i]);
    const double nn = scan.normals[i].norm();
    if (std::abs(nn - 1.0) > 1e-3) {
      throw FormatError("scan PLY: normal " + std::to_string(i) + " is not unit length");
    }
  }

  const std::string depth_path = depth_sidecar_path(ply_path);
  if (std::filesystem::exists(depth_path)) {
    int w = 0, h = 0;
    scan.depth_grid = read_depth_png(depth_path, w, h);
    scan.grid_width = w;
    scan.grid_height = h;
  }

  try {
    scan.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(ply_path + ": " + e.what());
  }
  return scan;
}

void save_scan(const PartialScan& scan, const std::string& ply_path, bool binary) {
  std::ofstream out(ply_path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + ply_path);
  out << "ply\n";
  out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  out << "element vertex " << scan.points.size() << "\n";
  for (const char* p : {"x", "y", "z", "nx", "ny", "nz"}) {
    out << "property float " << p << "\n";
  }
  out << "end_header\n";
  if (binary) {
    std::vector<float> row(6);
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
      const Vec3& p = scan.points[i];
      const Vec3& n = scan.normals[i];
      row = {static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z()),
             static_cast<float>(n.x()), static_cast<float>(n.y()), static_cast<float>(n.z())};
      out.write(reinterpret_cast<const char*>(row.data()), 6 * sizeof(float));
    }
  } else {
    char buf[160];
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
      const Vec3& p = scan.points[i];
      const Vec3& n = scan.normals[i];
      std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g %.9g %.9g\n", p.x(), p.y(), p.z(),
                    n.x(), n.y(), n.z());
      out << buf;
    }
  }
  out.close();

  {
    std::ofstream cam(camera_sidecar_path(ply_path));
    cam << camera_to_json(scan.camera).dump(2) << "\n";
  }
  if (scan.has_depth_grid()) {
    write_depth_png(depth_sidecar_path(ply_path), scan.depth_grid, scan.grid_width,
                    scan.grid_height);
  }
}

namespace {
struct PngCloser {
  FILE* f = nullptr;
  ~PngCloser() {
    if (f) std::fclose(f);
  }
};
}  // namespace

void write_depth_png(const std::string& path, const std::vector<float>& depth, int width,
                     int height) {
  if (depth.size() != static_cast<std::size_t>(width) * height) {
    throw FormatError("depth PNG: buffer size does not match width*height");
  }
  PngCloser file;
  file.f = std::fopen(path.c_str(), "wb");
  if (!file.f) throw FormatError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("PNG write failed: " + path);
  }
  png_init_io(png, file.f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<std::size_t>(width) * 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double d = depth[static_cast<std::size_t>(y) * width + x];
      const long v = std::lround(std::clamp(d, 0.0, 65535.0));
      row[2 * x] = static_cast<png_byte>((v >> 8) & 0xff);  // network byte order
      row[2 * x + 1] = static_cast<png_byte>(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<float> read_depth_png(const std::string& path, int& width, int& height) {
  PngCloser file;
  file.f = std::fopen(path.c_str(), "rb");
  if (!file.f) throw FormatError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG read failed: " + path);
  }
  png_init_io(png, file.f);
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const int bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (bit_depth != 16 || color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("depth PNG must be 16-bit single-channel gray: " + path);
  }
  std::vector<float> out(static_cast<std::size_t>(width) * height);
  std::vector<png_byte> row(static_cast<std::size_t>(width) * 2);
  for (int y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < width; ++x) {
      const unsigned v = (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1];
      out[static_cast<std::size_t>(y) * width + x] = static_cast<float>(v);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace vemreg
