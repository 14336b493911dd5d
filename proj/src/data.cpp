#include "cadm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "cadm/image_io.hpp"

namespace fs = std::filesystem;

namespace cadm {

void SyntheticConfig::validate() const {
  if (size < 8 || size % 8 != 0)
    throw std::invalid_argument("synthetic: size must be a multiple of 8");
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("synthetic: split counts must be >= 1");
  if (min_shapes < 0 || max_shapes < min_shapes)
    throw std::invalid_argument("synthetic: bad shapes-per-image range");
  if (noise_level < 0)
    throw std::invalid_argument("synthetic: noise_level must be >= 0");
}

bool Shape::contains(double x, double y) const {
  switch (kind) {
    case Kind::rect:
      return x >= geo[0] && x < geo[2] && y >= geo[1] && y < geo[3];
    case Kind::ellipse: {
      double dx = (x - geo[0]) / geo[2], dy = (y - geo[1]) / geo[3];
      return dx * dx + dy * dy <= 1.0;
    }
    case Kind::triangle: {
      auto cross = [](double ax, double ay, double bx, double by, double px,
                      double py) {
        return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
      };
      double d1 = cross(geo[0], geo[1], geo[2], geo[3], x, y);
      double d2 = cross(geo[2], geo[3], geo[4], geo[5], x, y);
      double d3 = cross(geo[4], geo[5], geo[0], geo[1], x, y);
      bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
      bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
      return !(has_neg && has_pos);
    }
  }
  return false;
}

Tensor<std::uint8_t> rasterize(const std::vector<Shape>& shapes, int size) {
  Tensor<std::uint8_t> mask(1, 1, size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double px = x + 0.5, py = y + 0.5;
      for (const Shape& s : shapes)
        if (s.contains(px, py)) {
          mask.at(0, 0, y, x) = 1;
          break;
        }
    }
  return mask;
}

namespace {

Shape random_shape(Rng& rng, int size) {
  Shape s;
  int kind = rng.uniform_int(0, 2);
  double cx = (0.15 + 0.70 * rng.uniform()) * size;
  double cy = (0.15 + 0.70 * rng.uniform()) * size;
  auto extent = [&] { return size / 10.0 + rng.uniform() * size * 0.15; };
  if (kind == 0) {
    s.kind = Shape::Kind::rect;
    double rx = extent(), ry = extent();
    s.geo = {cx - rx, cy - ry, cx + rx, cy + ry, 0, 0};
  } else if (kind == 1) {
    s.kind = Shape::Kind::ellipse;
    s.geo = {cx, cy, extent(), extent(), 0, 0};
  } else {
    s.kind = Shape::Kind::triangle;
    double r = size / 8.0 + rng.uniform() * size * 0.12;
    double a0 = rng.uniform() * 2.0 * M_PI;
    for (int v = 0; v < 3; ++v) {
      double a = a0 + v * 2.0 * M_PI / 3.0 + (rng.uniform() - 0.5) * 0.6;
      s.geo[2 * v] = cx + r * std::cos(a);
      s.geo[2 * v + 1] = cy + r * std::sin(a);
    }
  }
  // clearly off the mid-range background: either dark or bright
  bool bright = rng.uniform() < 0.5;
  for (int c = 0; c < 3; ++c)
    s.color[c] = static_cast<float>(bright ? 0.65 + 0.35 * rng.uniform()
                                           : 0.35 * rng.uniform());
  return s;
}

// true when the shape fits without touching already occupied pixels
bool try_place(const Shape& s, Tensor<std::uint8_t>& occupancy, int size) {
  Tensor<std::uint8_t> m = rasterize({s}, size);
  std::size_t area = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] && occupancy[i]) return false;
    area += m[i];
  }
  if (area < 4) return false;  // degenerate or mostly off-canvas
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) occupancy[i] = 1;
  return true;
}

std::uint64_t split_tag(const std::string& split) {
  if (split == "train") return 1;
  if (split == "val") return 2;
  if (split == "test") return 3;
  throw std::invalid_argument("dataset: unknown split '" + split + "'");
}

}  // namespace

PairScene sample_pair_scene(Rng& rng, const SyntheticConfig& cfg) {
  cfg.validate();
  PairScene scene;
  Tensor<std::uint8_t> occupancy(1, 1, cfg.size, cfg.size);
  int want = rng.uniform_int(cfg.min_shapes, cfg.max_shapes);
  for (int i = 0; i < want; ++i)
    for (int attempt = 0; attempt < 60; ++attempt) {
      Shape s = random_shape(rng, cfg.size);
      if (try_place(s, occupancy, cfg.size)) {
        scene.shapes_a.push_back(s);
        break;
      }
    }
  for (const Shape& s : scene.shapes_a)
    if (rng.uniform() < 0.6) scene.shapes_b.push_back(s);
  int inserts = rng.uniform_int(0, 2);
  for (int i = 0; i < inserts; ++i)
    for (int attempt = 0; attempt < 60; ++attempt) {
      Shape s = random_shape(rng, cfg.size);
      if (try_place(s, occupancy, cfg.size)) {
        scene.shapes_b.push_back(s);
        break;
      }
    }
  return scene;
}

BitemporalPair render_pair(const PairScene& scene, Rng& rng,
                           const SyntheticConfig& cfg,
                           const std::string& name) {
  const int sz = cfg.size;
  BitemporalPair pair;
  pair.name = name;

  // shared smooth background: per-channel base + two low-frequency waves
  std::array<double, 3> base;
  for (auto& b : base) b = 0.25 + 0.30 * rng.uniform();
  struct Wave {
    int kx, ky;
    double amp, phase;
    std::array<double, 3> wc;
  };
  std::array<Wave, 2> waves;
  for (auto& wv : waves) {
    wv.kx = rng.uniform_int(1, 3);
    wv.ky = rng.uniform_int(1, 3);
    wv.amp = 0.02 + 0.06 * rng.uniform();
    wv.phase = rng.uniform() * 2.0 * M_PI;
    for (auto& c : wv.wc) c = 0.5 + 0.5 * rng.uniform();
  }
  Tensor<float> bg(1, 3, sz, sz);
  for (int y = 0; y < sz; ++y)
    for (int x = 0; x < sz; ++x) {
      double f[2];
      for (int j = 0; j < 2; ++j)
        f[j] = waves[j].amp *
               std::sin(2.0 * M_PI * (waves[j].kx * x + waves[j].ky * y) / sz +
                        waves[j].phase);
      for (int c = 0; c < 3; ++c)
        bg.at(0, c, y, x) = static_cast<float>(
            base[c] + waves[0].wc[c] * f[0] + waves[1].wc[c] * f[1]);
    }

  auto render = [&](const std::vector<Shape>& shapes) {
    Tensor<float> img = bg;
    for (int y = 0; y < sz; ++y)
      for (int x = 0; x < sz; ++x) {
        double px = x + 0.5, py = y + 0.5;
        for (const Shape& s : shapes)
          if (s.contains(px, py)) {
            for (int c = 0; c < 3; ++c) img.at(0, c, y, x) = s.color[c];
            break;
          }
      }
    // photometric jitter, independent per image
    double shift = (rng.uniform() * 2.0 - 1.0) * 2.0 * cfg.noise_level;
    for (std::size_t i = 0; i < img.size(); ++i) {
      double v = img[i] + shift;
      if (cfg.noise_level > 0) v += rng.normal() * cfg.noise_level;
      img[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return img;
  };
  pair.image_a = render(scene.shapes_a);
  pair.image_b = render(scene.shapes_b);

  Tensor<std::uint8_t> ma = rasterize(scene.shapes_a, sz);
  Tensor<std::uint8_t> mb = rasterize(scene.shapes_b, sz);
  pair.label = Tensor<float>(1, 1, sz, sz);
  for (std::size_t i = 0; i < ma.size(); ++i)
    pair.label[i] = static_cast<float>(ma[i] ^ mb[i]);
  return pair;
}

Dataset make_synthetic_split(const SyntheticConfig& cfg,
                             const std::string& split) {
  cfg.validate();
  std::uint64_t tag = split_tag(split);
  int count = split == "train" ? cfg.n_train
              : split == "val" ? cfg.n_val
                               : cfg.n_test;
  Dataset out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(mix_seed(cfg.seed, tag), static_cast<std::uint64_t>(i)));
    PairScene scene = sample_pair_scene(rng, cfg);
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%05d.png", split.c_str(), i);
    out.push_back(render_pair(scene, rng, cfg, name));
  }
  return out;
}

// --- disk layout ------------------------------------------------------

namespace {

ImageU8 to_u8(const Tensor<float>& t, bool binary_label) {
  ImageU8 img;
  img.channels = t.c();
  img.height = t.h();
  img.width = t.w();
  img.pixels.resize(t.size());
  for (int c = 0; c < t.c(); ++c)
    for (int y = 0; y < t.h(); ++y)
      for (int x = 0; x < t.w(); ++x) {
        float v = t.at(0, c, y, x);
        int u = binary_label ? (v > 0.5f ? 255 : 0)
                             : static_cast<int>(std::lround(v * 255.0f));
        img.pixels[(static_cast<std::size_t>(y) * t.w() + x) * t.c() + c] =
            static_cast<std::uint8_t>(std::clamp(u, 0, 255));
      }
  return img;
}

Tensor<float> to_float_rgb(const ImageU8& img) {
  Tensor<float> t(1, 3, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(0, c, y, x) =
            img.at(y, x, img.channels == 1 ? 0 : c) / 255.0f;
  return t;
}

}  // namespace

void write_dataset(const std::string& root, const std::string& split,
                   const Dataset& data) {
  split_tag(split);  // validates the split name
  for (const char* d : {"A", "B", "label", "list"})
    fs::create_directories(fs::path(root) / d);
  std::ofstream list(fs::path(root) / "list" / (split + ".txt"));
  if (!list)
    throw std::runtime_error("dataset: cannot write list for " + root);
  for (const BitemporalPair& p : data) {
    write_png((fs::path(root) / "A" / p.name).string(),
              to_u8(p.image_a, false));
    write_png((fs::path(root) / "B" / p.name).string(),
              to_u8(p.image_b, false));
    write_png((fs::path(root) / "label" / p.name).string(),
              to_u8(p.label, true));
    list << p.name << "\n";
  }
}

Dataset load_split(const std::string& root, const std::string& split) {
  fs::path list_path = fs::path(root) / "list" / (split + ".txt");
  std::ifstream list(list_path);
  if (!list)
    throw std::runtime_error("dataset: missing split list " +
                             list_path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(list, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  std::sort(names.begin(), names.end());

  Dataset out;
  out.reserve(names.size());
  bool warned = false;
  for (const std::string& name : names) {
    ImageU8 a = read_png((fs::path(root) / "A" / name).string());
    ImageU8 b = read_png((fs::path(root) / "B" / name).string());
    ImageU8 l = read_png((fs::path(root) / "label" / name).string());
    if (a.height != b.height || a.width != b.width || a.height != l.height ||
        a.width != l.width)
      throw std::runtime_error("dataset: dimension mismatch within sample " +
                               name);
    BitemporalPair p;
    p.name = name;
    p.image_a = to_float_rgb(a);
    p.image_b = to_float_rgb(b);
    p.label = Tensor<float>(1, 1, l.height, l.width);
    for (int y = 0; y < l.height; ++y)
      for (int x = 0; x < l.width; ++x) {
        std::uint8_t v = l.at(y, x, 0);
        if (!warned && v != 0 && v != 255) {
          std::fprintf(stderr,
                       "warning: non-binary label values in %s (split %s); "
                       "binarizing at 128\n",
                       name.c_str(), split.c_str());
          warned = true;
        }
        p.label.at(0, 0, y, x) = v >= 128 ? 1.0f : 0.0f;
      }
    out.push_back(std::move(p));
  }
  return out;
}

void validate_layout(const std::string& root) {
  std::array<std::set<std::string>, 3> names;
  const char* dirs[3] = {"A", "B", "label"};
  for (int d = 0; d < 3; ++d) {
    fs::path dir = fs::path(root) / dirs[d];
    if (!fs::is_directory(dir))
      throw std::runtime_error("dataset: missing directory " + dir.string());
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) names[d].insert(e.path().filename().string());
  }
  for (int d = 0; d < 3; ++d)
    for (const std::string& n : names[d])
      for (int o = 0; o < 3; ++o)
        if (!names[o].count(n))
          throw std::runtime_error("dataset: " + std::string(dirs[d]) + "/" +
                                   n + " has no counterpart in " + dirs[o] +
                                   "/");
}

// --- tiling -----------------------------------------------------------

TileGrid make_tile_grid(int h, int w, int tile, bool pad) {
  if (tile < 1) throw std::invalid_argument("tile: size must be positive");
  TileGrid g;
  g.tile = tile;
  g.src_h = h;
  g.src_w = w;
  g.padded = pad;
  if (pad) {
    g.rows = (h + tile - 1) / tile;
    g.cols = (w + tile - 1) / tile;
  } else {
    g.rows = h / tile;
    g.cols = w / tile;
    if (g.rows == 0 || g.cols == 0)
      throw std::invalid_argument(
          "tile: tile size " + std::to_string(tile) +
          " exceeds image dims " + std::to_string(h) + "x" + std::to_string(w) +
          " (use padding mode)");
  }
  return g;
}

std::vector<Tensor<float>> tile_image(const Tensor<float>& img,
                                      const TileGrid& grid) {
  if (img.h() != grid.src_h || img.w() != grid.src_w)
    throw std::invalid_argument("tile: image does not match grid dims");
  std::vector<Tensor<float>> out;
  out.reserve(grid.count());
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      Tensor<float> t(1, img.c(), grid.tile, grid.tile);
      for (int ch = 0; ch < img.c(); ++ch)
        for (int y = 0; y < grid.tile; ++y) {
          int sy = r * grid.tile + y;
          if (sy >= img.h()) break;  // padded rows stay zero
          for (int x = 0; x < grid.tile; ++x) {
            int sx = c * grid.tile + x;
            if (sx >= img.w()) break;
            t.at(0, ch, y, x) = img.at(0, ch, sy, sx);
          }
        }
      out.push_back(std::move(t));
    }
  return out;
}

Tensor<float> reassemble_tiles(const std::vector<Tensor<float>>& tiles,
                               const TileGrid& grid, int channels) {
  if (static_cast<int>(tiles.size()) != grid.count())
    throw std::invalid_argument("reassemble: tile count does not match grid");
  int out_h = grid.padded ? grid.src_h : grid.rows * grid.tile;
  int out_w = grid.padded ? grid.src_w : grid.cols * grid.tile;
  Tensor<float> out(1, channels, out_h, out_w);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      const Tensor<float>& t = tiles[r * grid.cols + c];
      if (t.c() != channels || t.h() != grid.tile || t.w() != grid.tile)
        throw std::invalid_argument("reassemble: tile shape mismatch");
      for (int ch = 0; ch < channels; ++ch)
        for (int y = 0; y < grid.tile; ++y) {
          int sy = r * grid.tile + y;
          if (sy >= out_h) break;
          for (int x = 0; x < grid.tile; ++x) {
            int sx = c * grid.tile + x;
            if (sx >= out_w) break;
            out.at(0, ch, sy, sx) = t.at(0, ch, y, x);
          }
        }
    }
  return out;
}

}  // namespace cadm
