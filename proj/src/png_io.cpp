#include "duplexmat/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace duplexmat {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decoded samples; filled through a pointer so nothing lives in locals that
// setjmp/longjmp could clobber.
struct RawPng {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int channels = 0;
  int depth = 0;
  std::vector<std::uint16_t> samples;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  char error[256] = {0};
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* raw = static_cast<RawPng*>(png_get_error_ptr(png));
  std::snprintf(raw->error, sizeof(raw->error), "%s", msg);
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

bool decode(std::FILE* fp, png_structp png, png_infop info, RawPng* raw) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    raw->depth = 8;
  } else {
    if (depth != 8 && depth != 16) {
      std::snprintf(raw->error, sizeof(raw->error), "unsupported bit depth %d", depth);
      return false;
    }
    raw->depth = depth;
  }
  if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
  if (raw->depth == 16) png_set_swap(png);  // host-order uint16 on little endian
  png_read_update_info(png, info);

  raw->width = png_get_image_width(png, info);
  raw->height = png_get_image_height(png, info);
  raw->channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw->buffer.resize(rowbytes * raw->height);
  raw->rows.resize(raw->height);
  for (std::uint32_t y = 0; y < raw->height; ++y) raw->rows[y] = raw->buffer.data() + y * rowbytes;
  png_read_image(png, raw->rows.data());
  png_read_end(png, nullptr);
  const auto& buffer = raw->buffer;

  const std::size_t n = static_cast<std::size_t>(raw->width) * raw->height * raw->channels;
  raw->samples.resize(n);
  if (raw->depth == 16) {
    std::memcpy(raw->samples.data(), buffer.data(), n * 2);
  } else {
    for (std::size_t i = 0; i < n; ++i) raw->samples[i] = buffer[i];
  }
  raw->buffer = {};
  raw->rows = {};
  return true;
}

RawPng read_raw(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError(path.string() + ": cannot open for reading");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + ": not a PNG file");
  }
  auto raw = std::make_unique<RawPng>();
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, raw.get(), on_png_error, on_png_warning);
  if (!png) throw IoError(path.string() + ": libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  png_set_sig_bytes(png, 8);
  const bool ok = info && decode(fp.get(), png, info, raw.get());
  png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  if (!ok) {
    throw IoError(path.string() + ": PNG decode failed: " +
                  (raw->error[0] ? raw->error : "unknown error"));
  }
  return std::move(*raw);
}

template <int C>
void fill_channels(const RawPng& raw, Raster<C>& dst, int first, int count) {
  const float maxv = raw.depth == 16 ? 65535.f : 255.f;
  auto d = dst.data();
  const std::size_t px = dst.pixel_count();
  for (std::size_t i = 0; i < px; ++i)
    for (int c = 0; c < count; ++c)
      d[i * C + c] = raw.samples[i * raw.channels + first + c] / maxv;
}

struct PngWriteState {
  char error[256] = {0};
};

void on_write_error(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngWriteState*>(png_get_error_ptr(png));
  std::snprintf(st->error, sizeof(st->error), "%s", msg);
  png_longjmp(png, 1);
}

bool encode(std::FILE* fp, png_structp png, png_infop info, std::uint32_t w, std::uint32_t h,
            int channels, int depth, const std::vector<png_byte>* buffer) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  const int color_type = channels == 1   ? PNG_COLOR_TYPE_GRAY
                         : channels == 3 ? PNG_COLOR_TYPE_RGB
                                         : PNG_COLOR_TYPE_RGB_ALPHA;
  png_set_IHDR(png, info, w, h, depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = static_cast<std::size_t>(w) * channels * (depth / 8);
  for (std::uint32_t y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(buffer->data() + y * rowbytes));
  }
  png_write_end(png, nullptr);
  return true;
}

// Interleaves the given channel planes into big-endian PNG samples.
void write_samples(const std::filesystem::path& path, std::uint32_t w, std::uint32_t h,
                   int channels, BitDepth bd, const std::vector<float>& values) {
  if (w == 0 || h == 0) throw IoError(path.string() + ": refusing to write empty image");
  const int depth = static_cast<int>(bd);
  const float maxv = depth == 16 ? 65535.f : 255.f;
  std::vector<png_byte> buffer(values.size() * (depth / 8));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto code = static_cast<std::uint32_t>(std::lround(clamp01(values[i]) * maxv));
    if (depth == 16) {
      buffer[2 * i] = static_cast<png_byte>(code >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(code & 0xff);
    } else {
      buffer[i] = static_cast<png_byte>(code);
    }
  }
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError(path.string() + ": cannot open for writing");
  PngWriteState state;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &state, on_write_error, on_png_warning);
  if (!png) throw IoError(path.string() + ": libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  const bool ok = info && encode(fp.get(), png, info, w, h, channels, depth, &buffer);
  png_destroy_write_struct(&png, info ? &info : nullptr);
  if (!ok) throw IoError(path.string() + ": PNG encode failed: " + state.error);
}

}  // namespace

LoadedImage load_png(const std::filesystem::path& path) {
  const RawPng raw = read_raw(path);
  const int w = static_cast<int>(raw.width);
  const int h = static_cast<int>(raw.height);
  switch (raw.channels) {
    case 1: {
      AlphaMatte a(w, h);
      fill_channels(raw, a, 0, 1);
      return a;
    }
    case 3: {
      ImageRGB img(w, h);
      fill_channels(raw, img, 0, 3);
      return img;
    }
    case 4: {
      RgbaForeground fg(w, h);
      fill_channels(raw, fg.color, 0, 3);
      fill_channels(raw, fg.alpha, 3, 1);
      return fg;
    }
    default:
      throw IoError(path.string() + ": unsupported channel count " + std::to_string(raw.channels));
  }
}

ImageRGB load_png_rgb(const std::filesystem::path& path) {
  LoadedImage img = load_png(path);
  if (auto* rgb = std::get_if<ImageRGB>(&img)) return std::move(*rgb);
  if (auto* rgba = std::get_if<RgbaForeground>(&img)) return std::move(rgba->color);
  throw IoError(path.string() + ": expected an RGB image, found grayscale");
}

RgbaForeground load_png_rgba(const std::filesystem::path& path) {
  LoadedImage img = load_png(path);
  if (auto* rgba = std::get_if<RgbaForeground>(&img)) return std::move(*rgba);
  if (auto* rgb = std::get_if<ImageRGB>(&img)) {
    AlphaMatte opaque(rgb->width(), rgb->height(), 1.f);
    return {std::move(*rgb), std::move(opaque)};
  }
  throw IoError(path.string() + ": expected an RGBA image, found grayscale");
}

AlphaMatte load_png_alpha(const std::filesystem::path& path) {
  LoadedImage img = load_png(path);
  if (auto* a = std::get_if<AlphaMatte>(&img)) return std::move(*a);
  if (auto* rgba = std::get_if<RgbaForeground>(&img)) return std::move(rgba->alpha);
  throw IoError(path.string() + ": expected a grayscale or RGBA image");
}

void save_png(const ImageRGB& img, const std::filesystem::path& path, BitDepth depth) {
  const auto d = img.data();
  write_samples(path, img.width(), img.height(), 3, depth, {d.begin(), d.end()});
}

void save_png(const AlphaMatte& img, const std::filesystem::path& path, BitDepth depth) {
  const auto d = img.data();
  write_samples(path, img.width(), img.height(), 1, depth, {d.begin(), d.end()});
}

void save_png(const RgbaForeground& img, const std::filesystem::path& path, BitDepth depth) {
  std::vector<float> v(img.alpha.pixel_count() * 4);
  const auto c = img.color.data();
  const auto a = img.alpha.data();
  for (std::size_t i = 0; i < img.alpha.pixel_count(); ++i) {
    v[i * 4] = c[i * 3];
    v[i * 4 + 1] = c[i * 3 + 1];
    v[i * 4 + 2] = c[i * 3 + 2];
    v[i * 4 + 3] = a[i];
  }
  write_samples(path, img.width(), img.height(), 4, depth, v);
}

}  // namespace duplexmat
