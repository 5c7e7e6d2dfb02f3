#pragma once

#include <string>
#include <vector>

#include "hazebridge/tensor.hpp"

namespace hazebridge {

// PNG (8-bit RGB/RGBA/gray) and binary PPM (P6) in, PNG out. All pixel data
// crosses this boundary as [3,H,W] floats in [0,1].

Tensor load_image(const std::string& path);
void save_png(const std::string& path, const Tensor& image);  // [3,H,W]

// Tiles a list of [3,H,W] images into one grid image (row-major).
void save_image_grid(const std::string& path, const std::vector<Tensor>& images, int64_t columns);

// Every regular file with a recognized extension, sorted by filename.
std::vector<std::string> list_image_files(const std::string& directory);

}  // namespace hazebridge
