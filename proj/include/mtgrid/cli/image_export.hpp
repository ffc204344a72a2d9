#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "mtgrid/common/language.hpp"
#include "mtgrid/sampling/sampler.hpp"

namespace mtgrid::cli {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Display colors for the 16 palette indices:
//    0 background  black   (0, 0, 0)
//    1 red               (230, 25, 75)
//    2 green             (60, 180, 75)
//    3 blue              (0, 130, 200)
//    4 yellow            (255, 225, 25)
//    5 purple            (145, 30, 180)
//    6 orange            (245, 130, 48)
//    7 white             (255, 255, 255)
//    8..15 reserved      grey, cyan, magenta, lime, pink, teal, brown, maroon
inline constexpr std::array<Rgb, kCodebookSize> kPalette = {{
    {0, 0, 0},       {230, 25, 75},   {60, 180, 75},   {0, 130, 200},
    {255, 225, 25},  {145, 30, 180},  {245, 130, 48},  {255, 255, 255},
    {128, 128, 128}, {70, 240, 240},  {240, 50, 230},  {210, 245, 60},
    {250, 190, 212}, {0, 128, 128},   {170, 110, 40},  {128, 0, 0},
}};

inline constexpr int kExportScale = 16;

// Plain-text P3 image, each cell drawn as a scale x scale block.
std::string to_ppm(const Canvas& canvas, int scale = kExportScale);
void write_ppm(const Canvas& canvas, const std::filesystem::path& path, int scale = kExportScale);

// Reads a P3 image and maps every scale x scale block back to the palette
// entry nearest to its top-left pixel. Throws IoError on malformed files.
Canvas read_ppm(const std::filesystem::path& path, int scale = kExportScale);

// "<prompt_id>_<language>_s<seed>.ppm" with characters outside
// [A-Za-z0-9._-] in the prompt id replaced by '_'.
std::string image_filename(const std::string& prompt_id, Language language, std::uint64_t seed);

}  // namespace mtgrid::cli
