#pragma once

#include <string>
#include <vector>

#include "vit5/synth.hpp"

namespace vit5 {

// Binary PGM (P5) / PPM (P6), maxval <= 255. Pixels normalized to [0, 1],
// planar channel-major layout [c][y][x].
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> pixels;
};

RawImage read_pnm(const std::string& path);
void write_pgm(const std::string& path, const double* pixels, int width, int height);
void write_ppm(const std::string& path, const double* pixels, int width, int height);

// Nearest-neighbor square resize; source pixel = floor((i + 0.5) * src / dst).
RawImage resize_nearest(const RawImage& img, int resolution);

// Loads every *.ppm / *.pgm under dir (sorted by name) as <label>_<id>.<ext>.
Batch load_ppm_dir(const std::string& dir, int resolution);

}  // namespace vit5
