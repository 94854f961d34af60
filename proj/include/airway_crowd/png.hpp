#pragma once

// 8-bit grayscale PNG encode/decode on top of libpng.

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "airway_crowd/errors.hpp"
#include "airway_crowd/reslice.hpp"

namespace airway_crowd {

struct GrayImage {
  int width{0};
  int height{0};
  std::vector<std::uint8_t> pixels;  // row-major
};

namespace detail {

struct PngWriteBuffer {
  std::vector<std::uint8_t>* out;
};

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* buf = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
  buf->out->insert(buf->out->end(), data, data + length);
}

inline void png_flush_noop(png_structp) {}

struct PngReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset{0};
};

inline void png_read_from_span(png_structp png, png_bytep data, png_size_t length) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->bytes.size()) png_error(png, "truncated PNG stream");
  std::memcpy(data, cur->bytes.data() + cur->offset, length);
  cur->offset += length;
}

[[noreturn]] inline void png_throw(png_structp, png_const_charp msg) { throw FormatError(msg); }
inline void png_warn_ignore(png_structp, png_const_charp) {}

}  // namespace detail

/// Encodes row-major grayscale pixels. `text` pairs become tEXt chunks.
inline std::vector<std::uint8_t> encode_png_gray(
    int width, int height, std::span<const std::uint8_t> pixels,
    const std::vector<std::pair<std::string, std::string>>& text = {}) {
  if (width <= 0 || height <= 0 ||
      pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ValidationError("encode_png: pixel buffer does not match dimensions");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_throw,
                                            detail::png_warn_ignore);
  if (png == nullptr) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  detail::PngWriteBuffer buf{&out};
  try {
    if (info == nullptr) throw Error("png_create_info_struct failed");
    png_set_write_fn(png, &buf, detail::png_write_to_vector, detail::png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    std::vector<png_text> chunks(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
      chunks[i].key = const_cast<char*>(text[i].first.c_str());
      chunks[i].text = const_cast<char*>(text[i].second.c_str());
      chunks[i].text_length = text[i].second.size();
    }
    if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));
    png_write_info(png, info);
    for (int row = 0; row < height; ++row) {
      png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(row) * width));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

/// Encodes a slice; interpolation and resampling choices go into tEXt metadata.
inline std::vector<std::uint8_t> encode_png(const SliceImage& image) {
  return encode_png_gray(image.side, image.side, image.pixels,
                         {{"image_id", image.image_id},
                          {"interpolation", "keys-cubic a=-0.5"},
                          {"resampling", "isotropic, min spacing"},
                          {"sample_step_mm", text::format_double(image.sample_step_mm)}});
}

/// Decodes an 8-bit grayscale PNG. Other colour types are rejected.
inline GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw FormatError("not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_throw,
                                           detail::png_warn_ignore);
  if (png == nullptr) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  detail::PngReadCursor cursor{bytes, 0};
  GrayImage img;
  try {
    if (info == nullptr) throw Error("png_create_info_struct failed");
    png_set_read_fn(png, &cursor, detail::png_read_from_span);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
      throw FormatError("only 8-bit grayscale PNG is supported");
    }
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (int row = 0; row < img.height; ++row) {
      png_read_row(png, img.pixels.data() + static_cast<std::size_t>(row) * img.width, nullptr);
    }
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace airway_crowd
