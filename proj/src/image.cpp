#include "tutorqa/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <fmt/format.h>

#include "tutorqa/error.hpp"
#include "tutorqa/util.hpp"

namespace tutorqa {

std::string encode_image_base64(const std::filesystem::path& path, int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("image dimensions must be positive");
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw Error(fmt::format("cannot decode image {}", path.string()));
  if (img.cols != width || img.rows != height) {
    cv::Mat resized;
    const bool shrinking = img.cols > width || img.rows > height;
    cv::resize(img, resized, cv::Size(width, height), 0, 0,
               shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
    img = resized;
  }
  std::vector<std::uint8_t> png;
  if (!cv::imencode(".png", img, png)) {
    throw Error(fmt::format("cannot encode image {}", path.string()));
  }
  return base64_encode(png);
}

}  // namespace tutorqa
