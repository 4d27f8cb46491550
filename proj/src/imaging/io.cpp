#include "cycinpaint/imaging/io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cycinpaint/core/errors.hpp"

namespace cycinpaint::imaging {
namespace {

bool is_png(std::span<const std::uint8_t> d) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return d.size() >= 8 && std::equal(sig, sig + 8, d.begin());
}

bool is_jpeg(std::span<const std::uint8_t> d) {
  return d.size() >= 3 && d[0] == 0xFF && d[1] == 0xD8 && d[2] == 0xFF;
}

Bitmap decode_png(std::span<const std::uint8_t> data) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, data.data(), data.size())) {
    throw FormatError(std::string("PNG decode failed: ") + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (img.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  Bitmap bmp;
  bmp.width = static_cast<int>(img.width);
  bmp.height = static_cast<int>(img.height);
  if (color) {
    img.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    bmp.channels = alpha ? 4 : 3;
  } else {
    img.format = alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY;
    bmp.channels = alpha ? 2 : 1;
  }
  bmp.bytes.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, bmp.bytes.data(), 0, nullptr)) {
    png_image_free(&img);
    throw FormatError(std::string("PNG decode failed: ") + img.message);
  }
  if (bmp.channels == 2) {  // drop grey alpha
    std::vector<std::uint8_t> g(static_cast<std::size_t>(bmp.width) * bmp.height);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = bmp.bytes[2 * i];
    bmp.bytes = std::move(g);
    bmp.channels = 1;
  }
  return bmp;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Bitmap decode_jpeg(std::span<const std::uint8_t> data) {
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  Bitmap bmp;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError(std::string("JPEG decode failed: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.num_components == 3) {
    cinfo.out_color_space = JCS_RGB;
  } else if (cinfo.num_components == 1) {
    cinfo.out_color_space = JCS_GRAYSCALE;
  } else {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError("unsupported JPEG colour layout");
  }
  jpeg_start_decompress(&cinfo);
  bmp.width = static_cast<int>(cinfo.output_width);
  bmp.height = static_cast<int>(cinfo.output_height);
  bmp.channels = static_cast<int>(cinfo.output_components);
  bmp.bytes.resize(static_cast<std::size_t>(bmp.width) * bmp.height * bmp.channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = bmp.bytes.data() + static_cast<std::size_t>(cinfo.output_scanline) * bmp.width * bmp.channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return bmp;
}

std::uint8_t to_byte(float v) {
  const float b = std::round((v + 1.0f) * 0.5f * 255.0f);
  return static_cast<std::uint8_t>(std::clamp(b, 0.0f, 255.0f));
}

float from_byte(std::uint8_t b) { return 2.0f * (static_cast<float>(b) / 255.0f) - 1.0f; }

// Source coordinate of output sample i under half-pixel centre alignment.
void source_coord(int i, int in_size, int out_size, int& i0, int& i1, float& frac) {
  const double s = (i + 0.5) * in_size / out_size - 0.5;
  const double clamped = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
  i0 = static_cast<int>(std::floor(clamped));
  i1 = std::min(i0 + 1, in_size - 1);
  frac = static_cast<float>(clamped - i0);
}

}  // namespace

Bitmap decode_bitmap(std::span<const std::uint8_t> data) {
  if (is_png(data)) return decode_png(data);
  if (is_jpeg(data)) return decode_jpeg(data);
  throw FormatError("data is neither PNG nor JPEG");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Bitmap read_bitmap(const std::filesystem::path& path) { return decode_bitmap(read_file(path)); }

std::vector<std::uint8_t> encode_png(const Bitmap& bmp) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(bmp.width);
  img.height = static_cast<png_uint_32>(bmp.height);
  switch (bmp.channels) {
    case 1:
      img.format = PNG_FORMAT_GRAY;
      break;
    case 3:
      img.format = PNG_FORMAT_RGB;
      break;
    case 4:
      img.format = PNG_FORMAT_RGBA;
      break;
    default:
      throw FormatError("cannot encode a " + std::to_string(bmp.channels) + "-channel bitmap");
  }
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, bmp.bytes.data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode failed: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, bmp.bytes.data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

Bitmap resize_bitmap(const Bitmap& bmp, int width, int height) {
  if (bmp.width == width && bmp.height == height) return bmp;
  Bitmap out{width, height, bmp.channels, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * bmp.channels)};
  for (int y = 0; y < height; ++y) {
    int y0, y1;
    float fy;
    source_coord(y, bmp.height, height, y0, y1, fy);
    for (int x = 0; x < width; ++x) {
      int x0, x1;
      float fx;
      source_coord(x, bmp.width, width, x0, x1, fx);
      for (int c = 0; c < bmp.channels; ++c) {
        auto px = [&](int yy, int xx) {
          return static_cast<float>(bmp.bytes[(static_cast<std::size_t>(yy) * bmp.width + xx) * bmp.channels + c]);
        };
        const float top = px(y0, x0) + (px(y0, x1) - px(y0, x0)) * fx;
        const float bot = px(y1, x0) + (px(y1, x1) - px(y1, x0)) * fx;
        const float v = top + (bot - top) * fy;
        out.bytes[(static_cast<std::size_t>(y) * width + x) * bmp.channels + c] =
            static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0f, 255.0f));
      }
    }
  }
  return out;
}

Image image_from_bitmap(const Bitmap& bmp) {
  if (bmp.channels != 3 && bmp.channels != 4) {
    throw FormatError("expected an RGB image, got " + std::to_string(bmp.channels) + " channel(s)");
  }
  Tensor t(Shape{1, 3, bmp.height, bmp.width});
  for (int y = 0; y < bmp.height; ++y) {
    for (int x = 0; x < bmp.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * bmp.width + x) * bmp.channels;
      for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = from_byte(bmp.bytes[base + c]);
    }
  }
  return Image(std::move(t));
}

Bitmap image_to_bitmap(const Image& img) {
  Bitmap bmp{img.width(), img.height(), 3, std::vector<std::uint8_t>(static_cast<std::size_t>(img.width()) * img.height() * 3)};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        bmp.bytes[(static_cast<std::size_t>(y) * img.width() + x) * 3 + c] = to_byte(img.at(y, x, c));
      }
    }
  }
  return bmp;
}

Image quantize(const Image& img) { return image_from_bitmap(image_to_bitmap(img)); }

Image decode_image(std::span<const std::uint8_t> data, int target_size) {
  Bitmap bmp = decode_bitmap(data);
  if (bmp.channels != 3 && bmp.channels != 4) {
    throw FormatError("expected an RGB image, got grayscale");
  }
  return image_from_bitmap(resize_bitmap(bmp, target_size, target_size));
}

Image load_image(const std::filesystem::path& path, int target_size) {
  return decode_image(read_file(path), target_size);
}

std::vector<std::uint8_t> encode_image_png(const Image& img) { return encode_png(image_to_bitmap(img)); }

void save_image(const Image& img, const std::filesystem::path& path) {
  write_file(path, encode_image_png(img));
}

Mask decode_mask(const Bitmap& gray, int expected_width, int expected_height) {
  if (gray.width != expected_width || gray.height != expected_height) {
    throw ShapeError("mask is " + std::to_string(gray.width) + "x" + std::to_string(gray.height) +
                     ", expected " + std::to_string(expected_width) + "x" + std::to_string(expected_height));
  }
  Tensor t(Shape{1, 1, gray.height, gray.width});
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = gray.bytes[i * gray.channels] >= 128 ? 1.0f : 0.0f;
  }
  return Mask(std::move(t));
}

Mask load_mask(const std::filesystem::path& path, int expected_width, int expected_height) {
  return decode_mask(read_bitmap(path), expected_width, expected_height);
}

Bitmap mask_to_bitmap(const Mask& m) {
  Bitmap bmp{m.width(), m.height(), 1, std::vector<std::uint8_t>(static_cast<std::size_t>(m.width()) * m.height())};
  for (std::size_t i = 0; i < bmp.bytes.size(); ++i) bmp.bytes[i] = m.tensor()[i] != 0.0f ? 255 : 0;
  return bmp;
}

void save_mask(const Mask& m, const std::filesystem::path& path) {
  write_file(path, encode_png(mask_to_bitmap(m)));
}

Sketch sketch_from_bitmap(const Bitmap& rgba) {
  if (rgba.channels != 4) throw FormatError("sketch must be an RGBA image");
  Tensor color(Shape{1, 3, rgba.height, rgba.width});
  Tensor alpha(Shape{1, 1, rgba.height, rgba.width});
  for (int y = 0; y < rgba.height; ++y) {
    for (int x = 0; x < rgba.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * rgba.width + x) * 4;
      for (int c = 0; c < 3; ++c) color.at(0, c, y, x) = from_byte(rgba.bytes[base + c]);
      alpha.at(0, 0, y, x) = static_cast<float>(rgba.bytes[base + 3]) / 255.0f;
    }
  }
  return Sketch{Image(std::move(color)), std::move(alpha)};
}

Sketch load_sketch(const std::filesystem::path& path) { return sketch_from_bitmap(read_bitmap(path)); }

Tensor resize_bilinear(const Tensor& t, int out_h, int out_w) {
  const Shape s = t.shape();
  if (s.h == out_h && s.w == out_w) return t;
  Tensor out(Shape{s.n, s.c, out_h, out_w});
  for (int y = 0; y < out_h; ++y) {
    int y0, y1;
    float fy;
    source_coord(y, s.h, out_h, y0, y1, fy);
    for (int x = 0; x < out_w; ++x) {
      int x0, x1;
      float fx;
      source_coord(x, s.w, out_w, x0, x1, fx);
      for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
          const float top = t.at(n, c, y0, x0) + (t.at(n, c, y0, x1) - t.at(n, c, y0, x0)) * fx;
          const float bot = t.at(n, c, y1, x0) + (t.at(n, c, y1, x1) - t.at(n, c, y1, x0)) * fx;
          out.at(n, c, y, x) = top + (bot - top) * fy;
        }
      }
    }
  }
  return out;
}

Image resize_image(const Image& img, int size) {
  return Image::clamped(resize_bilinear(img.tensor(), size, size));
}

Mask resize_mask(const Mask& m, int size) {
  Tensor t = resize_bilinear(m.tensor(), size, size);
  for (auto& v : t.span()) v = v >= 0.5f ? 1.0f : 0.0f;
  return Mask(std::move(t));
}

}  // namespace cycinpaint::imaging
