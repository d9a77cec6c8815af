#include "slrkit/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

#include "slrkit/errors.hpp"

namespace slrkit {

Tensor decode_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw DataError("cannot decode image: " + path.string());
  }
  Tensor out({bgr.rows, bgr.cols, 3});
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      out[(static_cast<std::size_t>(y) * bgr.cols + x) * 3 + 0] = row[x][2];
      out[(static_cast<std::size_t>(y) * bgr.cols + x) * 3 + 1] = row[x][1];
      out[(static_cast<std::size_t>(y) * bgr.cols + x) * 3 + 2] = row[x][0];
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& img, int side) {
  if (img.rank() != 3 || img.dim(2) != 3) {
    throw DataError("resize_bilinear expects an (h, w, 3) tensor");
  }
  const int h = img.dim(0), w = img.dim(1);
  if (h == side && w == side) return img;
  Tensor out({side, side, 3});
  const double sy = static_cast<double>(h) / side;
  const double sx = static_cast<double>(w) / side;
  for (int y = 0; y < side; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < side; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double v00 = img[(static_cast<std::size_t>(y0) * w + x0) * 3 + c];
        const double v01 = img[(static_cast<std::size_t>(y0) * w + x1) * 3 + c];
        const double v10 = img[(static_cast<std::size_t>(y1) * w + x0) * 3 + c];
        const double v11 = img[(static_cast<std::size_t>(y1) * w + x1) * 3 + c];
        out[(static_cast<std::size_t>(y) * side + x) * 3 + c] =
            (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
      }
    }
  }
  return out;
}

Tensor load_and_resize(const std::filesystem::path& path, int side) {
  return resize_bilinear(decode_image(path), side);
}

void write_png(const std::filesystem::path& path, const Tensor& img) {
  if (img.rank() != 3 || img.dim(2) != 3) {
    throw DataError("write_png expects an (h, w, 3) tensor");
  }
  const int h = img.dim(0), w = img.dim(1);
  cv::Mat bgr(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = img[(static_cast<std::size_t>(y) * w + x) * 3 + c];
        row[x][2 - c] = static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  if (!cv::imwrite(path.string(), bgr)) {
    throw IoError("cannot write image: " + path.string());
  }
}

}  // namespace slrkit
