#include "mtgrid/cli/image_export.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "mtgrid/common/atomic_file.hpp"
#include "mtgrid/common/error.hpp"

namespace mtgrid::cli {

std::string to_ppm(const Canvas& canvas, int scale) {
  if (scale < 1) throw InvalidArgument("image scale must be positive");
  if (canvas.rows < 1 || canvas.cols < 1 ||
      canvas.cells.size() != static_cast<std::size_t>(canvas.rows) * static_cast<std::size_t>(canvas.cols)) {
    throw InvalidArgument("canvas size does not match its cells");
  }
  std::string out = "P3\n" + std::to_string(canvas.cols * scale) + " " +
                    std::to_string(canvas.rows * scale) + "\n255\n";
  for (int r = 0; r < canvas.rows; ++r) {
    std::string row;
    for (int c = 0; c < canvas.cols; ++c) {
      const PaletteIndex p = canvas.at(r, c);
      if (p >= kCodebookSize) throw InvalidArgument("palette index " + std::to_string(p) + " out of range");
      const Rgb& rgb = kPalette[p];
      const std::string px = std::to_string(rgb.r) + " " + std::to_string(rgb.g) + " " +
                             std::to_string(rgb.b) + "\n";
      for (int i = 0; i < scale; ++i) row += px;
    }
    for (int i = 0; i < scale; ++i) out += row;
  }
  return out;
}

void write_ppm(const Canvas& canvas, const std::filesystem::path& path, int scale) {
  write_file_atomically(path, to_ppm(canvas, scale));
}

Canvas read_ppm(const std::filesystem::path& path, int scale) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open image " + path.string());
  // Strip comments before tokenizing.
  std::stringstream clean;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    clean << (hash == std::string::npos ? line : line.substr(0, hash)) << '\n';
  }
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  clean >> magic >> width >> height >> maxval;
  if (!clean || magic != "P3" || width <= 0 || height <= 0 || maxval <= 0) {
    throw IoError(path.string() + ": not a plain PPM (P3) image");
  }
  if (width % scale != 0 || height % scale != 0) {
    throw IoError(path.string() + ": size is not a multiple of the scale " + std::to_string(scale));
  }
  std::vector<Rgb> pixels(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (auto& px : pixels) {
    int r = 0, g = 0, b = 0;
    if (!(clean >> r >> g >> b)) throw IoError(path.string() + ": truncated pixel data");
    auto to8 = [&](int v) { return static_cast<std::uint8_t>(v * 255 / maxval); };
    px = {to8(r), to8(g), to8(b)};
  }
  Canvas canvas;
  canvas.rows = height / scale;
  canvas.cols = width / scale;
  canvas.cells.resize(static_cast<std::size_t>(canvas.rows) * static_cast<std::size_t>(canvas.cols));
  for (int r = 0; r < canvas.rows; ++r) {
    for (int c = 0; c < canvas.cols; ++c) {
      const Rgb& px = pixels[static_cast<std::size_t>(r * scale) * static_cast<std::size_t>(width) +
                             static_cast<std::size_t>(c * scale)];
      int best = 0;
      long best_d = std::numeric_limits<long>::max();
      for (int k = 0; k < kCodebookSize; ++k) {
        const long dr = px.r - kPalette[k].r, dg = px.g - kPalette[k].g, db = px.b - kPalette[k].b;
        const long d = dr * dr + dg * dg + db * db;
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      canvas.at(r, c) = static_cast<PaletteIndex>(best);
    }
  }
  return canvas;
}

std::string image_filename(const std::string& prompt_id, Language language, std::uint64_t seed) {
  std::string id = prompt_id;
  for (char& ch : id) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                    ch == '.' || ch == '_' || ch == '-';
    if (!ok) ch = '_';
  }
  return id + "_" + std::string(language_tag(language)) + "_s" + std::to_string(seed) + ".ppm";
}

}  // namespace mtgrid::cli
