#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace phgmm {

// Decoded 8-bit image, row-major, interleaved channels (1 = gray, 3 = RGB).
struct PngImage {
    int h = 0;
    int w = 0;
    int channels = 0;
    std::vector<uint8_t> pixels;
};

PngImage read_png(const std::string& path);

// data is row-major h*w*3 (RGB) or h*w (gray).
void write_png_rgb(const std::string& path, const std::vector<uint8_t>& data,
                   int h, int w);
void write_png_gray(const std::string& path, const std::vector<uint8_t>& data,
                    int h, int w);

}  // namespace phgmm
