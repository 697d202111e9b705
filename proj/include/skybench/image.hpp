#pragma once

#include <jpeglib.h>
#include <png.h>

#include <atomic>
#include <bit>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "skybench/error.hpp"

namespace skybench {

// Interleaved row-major raster.
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  bool same_shape(const Raster& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }

  bool operator==(const Raster&) const = default;
};

using ImageU8 = Raster<std::uint8_t>;
using DepthMap = Raster<float>;  // z-depth in meters, 0 marks invalid
using ImageF = Raster<double>;

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  static std::atomic<std::uint64_t> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io_error, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::io_error, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    fail(ErrorKind::io_error, "cannot rename into " + path.string() + ": " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// Little-endian binary helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(const std::string& in, std::size_t offset) {
  return std::bit_cast<float>(get_u32(in, offset));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Depth raster format: "SKYD", u32 width, u32 height, u32 reserved, f32 LE data.
// ---------------------------------------------------------------------------

inline std::string encode_depth(const DepthMap& depth) {
  require(depth.channels == 1, ErrorKind::invalid_shape, "depth raster must have one channel");
  std::string out = "SKYD";
  detail::put_u32(out, static_cast<std::uint32_t>(depth.width));
  detail::put_u32(out, static_cast<std::uint32_t>(depth.height));
  detail::put_u32(out, 0);
  out.reserve(out.size() + depth.data.size() * 4);
  for (float v : depth.data) detail::put_f32(out, v);
  return out;
}

inline DepthMap decode_depth(const std::string& bytes) {
  require(bytes.size() >= 16 && bytes.compare(0, 4, "SKYD") == 0, ErrorKind::io_error,
          "not a depth raster (bad magic)");
  const std::uint32_t w = detail::get_u32(bytes, 4);
  const std::uint32_t h = detail::get_u32(bytes, 8);
  const std::size_t expected = 16 + static_cast<std::size_t>(w) * h * 4;
  require(bytes.size() == expected, ErrorKind::io_error, "depth raster size mismatch");
  DepthMap depth(static_cast<int>(w), static_cast<int>(h), 1);
  for (std::size_t i = 0; i < depth.data.size(); ++i) depth.data[i] = detail::get_f32(bytes, 16 + 4 * i);
  return depth;
}

inline void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  write_file_atomic(path, encode_depth(depth));
}

inline DepthMap read_depth(const std::filesystem::path& path) {
  return decode_depth(read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

inline std::string encode_png(const ImageU8& img) {
  require(img.channels == 1 || img.channels == 3, ErrorKind::invalid_shape,
          "PNG output supports 1 or 3 channels");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorKind::io_error, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::string out;
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::io_error, "PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<char*>(data), len);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               8, img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.data.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

// Decodes to 8-bit RGB regardless of the stored color type.
inline ImageU8 decode_png(const std::string& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  require(png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()) != 0,
          ErrorKind::io_error, "cannot parse PNG");
  image.format = PNG_FORMAT_RGB;
  ImageU8 out(static_cast<int>(image.width), static_cast<int>(image.height), 3);
  if (png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr) == 0) {
    png_image_free(&image);
    fail(ErrorKind::io_error, "PNG decoding failed");
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const ImageU8& img) {
  write_file_atomic(path, encode_png(img));
}

inline ImageU8 read_png(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }

// ---------------------------------------------------------------------------
// JPEG
// ---------------------------------------------------------------------------

namespace detail {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr info) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(info->err);
  std::longjmp(mgr->jump, 1);
}

inline void jpeg_silence(j_common_ptr, int) {}

}  // namespace detail

// Returns false if the data is not a decodable JPEG.
inline bool try_decode_jpeg(const std::string& bytes, ImageU8& out) {
  if (bytes.empty()) return false;
  jpeg_decompress_struct info;
  detail::JpegErrorManager err;
  ImageU8 img;
  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = detail::jpeg_error_exit;
  err.base.emit_message = detail::jpeg_silence;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    return false;
  }
  jpeg_create_decompress(&info);
  jpeg_mem_src(&info, reinterpret_cast<const unsigned char*>(bytes.data()),
               static_cast<unsigned long>(bytes.size()));
  if (jpeg_read_header(&info, TRUE) != JPEG_HEADER_OK) {
    jpeg_destroy_decompress(&info);
    return false;
  }
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  img = ImageU8(static_cast<int>(info.output_width), static_cast<int>(info.output_height), 3);
  const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = img.data.data() + info.output_scanline * stride;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  out = std::move(img);
  return true;
}

inline std::string encode_jpeg(const ImageU8& img, int quality = 90) {
  require(img.channels == 3, ErrorKind::invalid_shape, "JPEG output expects RGB");
  jpeg_compress_struct info;
  detail::JpegErrorManager err;
  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = detail::jpeg_error_exit;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&info);
    std::free(buffer);
    fail(ErrorKind::io_error, "JPEG encoding failed");
  }
  jpeg_create_compress(&info);
  jpeg_mem_dest(&info, &buffer, &size);
  info.image_width = static_cast<JDIMENSION>(img.width);
  info.image_height = static_cast<JDIMENSION>(img.height);
  info.input_components = 3;
  info.in_color_space = JCS_RGB;
  jpeg_set_defaults(&info);
  jpeg_set_quality(&info, quality, TRUE);
  jpeg_start_compress(&info, TRUE);
  const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
  while (info.next_scanline < info.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(img.data.data() + info.next_scanline * stride);
    jpeg_write_scanlines(&info, &row, 1);
  }
  jpeg_finish_compress(&info);
  std::string out(reinterpret_cast<char*>(buffer), size);
  jpeg_destroy_compress(&info);
  std::free(buffer);
  return out;
}

}  // namespace skybench
