#pragma once

#include <png.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "primrep/corpus.hpp"
#include "primrep/error.hpp"
#include "primrep/primitive.hpp"
#include "primrep/raycast.hpp"

namespace primrep {

/// Orthographic view: rays travel along -direction; `up` fixes image orientation.
struct Camera {
  Vec3 direction = Vec3::UnitX();
  Vec3 up = Vec3::UnitZ();
  double half_extent = 1.5;

  Vec3 right() const { return (-direction).cross(up).normalized(); }
  Vec3 true_up() const { return right().cross(-direction); }
};

struct CameraRig {
  std::vector<Camera> views;
  int width = 256;
  int height = 256;

  /// `count` equally spaced azimuths at the given elevation (radians).
  static CameraRig ring(int count = 6, double elevation = 0.0, int resolution = 256, double half_extent = 1.5) {
    CameraRig rig;
    rig.width = rig.height = resolution;
    for (int k = 0; k < count; ++k) {
      const double az = 2 * std::numbers::pi * k / count;
      Camera c;
      c.direction = Vec3(std::cos(az) * std::cos(elevation), std::sin(az) * std::cos(elevation), std::sin(elevation));
      c.up = std::abs(c.direction.z()) > 0.999 ? Vec3::UnitY() : Vec3::UnitZ();
      c.half_extent = half_extent;
      rig.views.push_back(c);
    }
    return rig;
  }

  Ray pixel_ray(int view, int col, int row) const {
    const Camera& c = views[view];
    const double x = ((col + 0.5) / width * 2 - 1) * c.half_extent;
    const double y = (1 - (row + 0.5) / height * 2) * c.half_extent;
    return {10.0 * c.direction + x * c.right() + y * c.true_up(), -c.direction};
  }
};

/// Per-pixel labels plus (ground truth only) the first-hit patch id, row-major.
struct SemanticMap {
  int width = 0;
  int height = 0;
  std::vector<Label> labels;
  std::vector<int> patch_ids;  // -1 for background; empty when unknown

  Label at(int col, int row) const { return labels[row * width + col]; }
};

/// Ray-cast label maps with feature-line bands of width 3 along patch-id discontinuities.
inline std::vector<SemanticMap> render_semantic_maps(const corpus::GroundTruthCase& gt, const CameraRig& rig) {
  const MeshBvh bvh(gt.mesh);
  std::vector<SemanticMap> maps;
  for (int v = 0; v < static_cast<int>(rig.views.size()); ++v) {
    SemanticMap m;
    m.width = rig.width;
    m.height = rig.height;
    m.labels.assign(m.width * m.height, Label::Background);
    m.patch_ids.assign(m.width * m.height, -1);
    for (int row = 0; row < m.height; ++row)
      for (int col = 0; col < m.width; ++col) {
        const auto hit = bvh.first_hit(rig.pixel_ray(v, col, row));
        if (!hit) continue;
        const int patch = gt.face_patch[hit->face];
        m.patch_ids[row * m.width + col] = patch;
        m.labels[row * m.width + col] = label_of(gt.patch_kind(patch));
      }
    std::vector<char> edge(m.width * m.height, 0);
    for (int row = 0; row < m.height; ++row)
      for (int col = 0; col < m.width; ++col) {
        const int id = m.patch_ids[row * m.width + col];
        const bool right = col + 1 < m.width && m.patch_ids[row * m.width + col + 1] != id;
        const bool down = row + 1 < m.height && m.patch_ids[(row + 1) * m.width + col] != id;
        if (right || down) edge[row * m.width + col] = 1;
      }
    for (int row = 0; row < m.height; ++row)
      for (int col = 0; col < m.width; ++col) {
        bool band = edge[row * m.width + col];
        band = band || (col > 0 && edge[row * m.width + col - 1]) || (col + 1 < m.width && edge[row * m.width + col + 1]);
        band = band || (row > 0 && edge[(row - 1) * m.width + col]) ||
               (row + 1 < m.height && edge[(row + 1) * m.width + col]);
        if (band) m.labels[row * m.width + col] = Label::FeatureLine;
      }
    maps.push_back(std::move(m));
  }
  return maps;
}

namespace io {

inline constexpr std::array<std::array<std::uint8_t, 3>, kNumLabels> kLabelPalette{{
    {0, 0, 0},        // background
    {0, 200, 0},      // plane
    {40, 90, 230},    // cylinder
    {240, 200, 0},    // cone
    {220, 0, 220},    // sphere
    {0, 220, 220},    // torus
    {230, 20, 20},    // feature line
}};

/// Writes labels as an 8-bit paletted PNG whose indices are the label values.
inline void write_label_png(const std::string& path, const SemanticMap& map) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error(ErrorCode::Io, "cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::Io, "libpng failure writing " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, map.width, map.height, 8, PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_color palette[kNumLabels];
  for (int i = 0; i < kNumLabels; ++i) palette[i] = {kLabelPalette[i][0], kLabelPalette[i][1], kLabelPalette[i][2]};
  png_set_PLTE(png, info, palette, kNumLabels);
  png_write_info(png, info);
  std::vector<png_byte> row(map.width);
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) row[c] = static_cast<png_byte>(map.labels[r * map.width + c]);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline SemanticMap read_label_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw Error(ErrorCode::Io, "cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::Io, "libpng failure reading " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  SemanticMap m;
  m.width = static_cast<int>(png_get_image_width(png, info));
  m.height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_PALETTE || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(ErrorCode::Io, path + " is not an 8-bit paletted label map");
  }
  m.labels.resize(m.width * m.height);
  std::vector<png_byte> row(m.width);
  for (int r = 0; r < m.height; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (int c = 0; c < m.width; ++c) {
      if (row[c] >= kNumLabels) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw Error(ErrorCode::Io, path + " has an out-of-range label");
      }
      m.labels[r * m.width + c] = static_cast<Label>(row[c]);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return m;
}

}  // namespace io
}  // namespace primrep
