#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cadm/rng.hpp"
#include "cadm/tensor.hpp"

namespace cadm {

// One co-registered pair plus its binary change label.
// Images: (1,3,H,W) in [0,1]; label: (1,1,H,W) with values exactly 0 or 1.
struct BitemporalPair {
  std::string name;
  Tensor<float> image_a, image_b, label;
};
using Dataset = std::vector<BitemporalPair>;

struct SyntheticConfig {
  int size = 64;  // tile side, divisible by 8
  int n_train = 200, n_val = 20, n_test = 50;
  int min_shapes = 1, max_shapes = 4;  // shapes per scene
  double noise_level = 0.02;  // pixel noise sigma; brightness jitter is 2x
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SyntheticConfig&) const = default;
};

// Flat geometric primitive. Membership uses pixel centers (x+0.5, y+0.5), so
// rasterization is exact and reproducible by an independent loop.
struct Shape {
  enum class Kind { rect, ellipse, triangle };
  Kind kind = Kind::rect;
  std::array<double, 6> geo{};  // rect: x0,y0,x1,y1; ellipse: cx,cy,rx,ry;
                                // triangle: x0,y0,x1,y1,x2,y2
  std::array<float, 3> color{};

  bool contains(double x, double y) const;
};

// union mask of all shapes, values {0,1}
Tensor<std::uint8_t> rasterize(const std::vector<Shape>& shapes, int size);

// Scene pair: shapes_b keeps a subset of shapes_a (identical geometry and
// color) and may add new ones; all shapes across both sets are pairwise
// disjoint so the label is exactly the union of inserted/deleted regions.
struct PairScene {
  std::vector<Shape> shapes_a, shapes_b;
};
PairScene sample_pair_scene(Rng& rng, const SyntheticConfig& cfg);

// Renders the pair over a shared smooth background; photometric jitter
// (global brightness shift + Gaussian pixel noise) is drawn independently per
// image; label = XOR of the two rasterized masks, no anti-aliasing.
BitemporalPair render_pair(const PairScene& scene, Rng& rng,
                           const SyntheticConfig& cfg, const std::string& name);

// split is "train", "val" or "test"; content is a pure function of
// (cfg.seed, split, index).
Dataset make_synthetic_split(const SyntheticConfig& cfg,
                             const std::string& split);

// --- on-disk layout: root/{A,B,label}/<name>.png + root/list/<split>.txt ---

void write_dataset(const std::string& root, const std::string& split,
                   const Dataset& data);

// Honors the split list; pairs are ordered by name. Labels are binarized at
// 128 (8-bit); values other than {0,255} trigger a one-line warning.
Dataset load_split(const std::string& root, const std::string& split);

// Checks that every name in any of A/, B/, label/ appears in all three;
// throws naming the first orphan.
void validate_layout(const std::string& root);

// --- tiling -----------------------------------------------------------

struct TileGrid {
  int tile = 0, rows = 0, cols = 0;
  int src_h = 0, src_w = 0;
  bool padded = false;

  int count() const { return rows * cols; }
};

// Pure arithmetic: without padding, remainders smaller than the tile are
// dropped; with padding, partial tiles are zero-padded at bottom/right.
TileGrid make_tile_grid(int h, int w, int tile, bool pad);

// Row-major, non-overlapping tiles of a (1,C,H,W) image per the grid.
std::vector<Tensor<float>> tile_image(const Tensor<float>& img,
                                      const TileGrid& grid);

// Inverse of tile_image over the covered region; returns (1,C,src_h,src_w)
// when padded, else (1,C,rows*tile,cols*tile).
Tensor<float> reassemble_tiles(const std::vector<Tensor<float>>& tiles,
                               const TileGrid& grid, int channels);

}  // namespace cadm
