#include "aqua/photometry.hpp"

#include <array>
#include <cmath>

namespace aqua {

Image histogram_equalize(const Image& img) {
  const size_t n = img.pixels();
  Image out(img.width, img.height);
  for (int c = 0; c < 3; ++c) {
    std::array<size_t, 256> counts{};
    for (int v = 0; v < img.height; ++v)
      for (int u = 0; u < img.width; ++u) {
        double x = img.at(v, u, c);
        if (x < 0.0 || x > 1.0) throw input_error("histogram_equalize: value outside [0,1]");
        counts[static_cast<int>(std::lround(x * 255.0))]++;
      }
    std::array<size_t, 256> cdf{};
    size_t run = 0;
    for (int l = 0; l < 256; ++l) {
      run += counts[l];
      cdf[l] = run;
    }
    size_t cdf_min = 0;
    for (int l = 0; l < 256; ++l)
      if (counts[l] > 0) {
        cdf_min = cdf[l];
        break;
      }
    if (cdf_min == n) {
      // constant channel, declared convention: unchanged
      for (int v = 0; v < img.height; ++v)
        for (int u = 0; u < img.width; ++u) out.at(v, u, c) = img.at(v, u, c);
      continue;
    }
    std::array<double, 256> map{};
    for (int l = 0; l < 256; ++l)
      map[l] = (static_cast<double>(cdf[l]) - cdf_min) / (static_cast<double>(n) - cdf_min);
    for (int v = 0; v < img.height; ++v)
      for (int u = 0; u < img.width; ++u)
        out.at(v, u, c) = map[static_cast<int>(std::lround(img.at(v, u, c) * 255.0))];
  }
  return out;
}

}  // namespace aqua
