#pragma once

#include <filesystem>
#include <string>

namespace tutorqa {

/// Decodes an image, resizes it to width x height and returns it PNG-encoded
/// as base64. Throws Error if the file cannot be decoded.
std::string encode_image_base64(const std::filesystem::path& path, int width, int height);

}  // namespace tutorqa
