#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cycinpaint/imaging/image.hpp"

namespace cycinpaint::imaging {

/// Interleaved 8-bit pixels as stored in files.
struct Bitmap {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray), 3 (RGB) or 4 (RGBA)
  std::vector<std::uint8_t> bytes;
};

/// Decodes PNG or JPEG bytes (sniffed by signature) keeping the file's
/// colour layout. Throws FormatError for undecodable data.
Bitmap decode_bitmap(std::span<const std::uint8_t> data);
Bitmap read_bitmap(const std::filesystem::path& path);

/// Lossless PNG encoding of a 1-, 3- or 4-channel bitmap.
std::vector<std::uint8_t> encode_png(const Bitmap& bmp);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Bilinear resize of interleaved bytes with half-pixel centres, rounded.
Bitmap resize_bitmap(const Bitmap& bmp, int width, int height);

/// 8-bit value v maps to 2 v / 255 - 1. The bitmap must be colour.
Image image_from_bitmap(const Bitmap& bmp);
/// Inverse map, rounded to the nearest byte.
Bitmap image_to_bitmap(const Image& img);
/// Nearest 8-bit quantization of every value (what a save/load round trip yields).
Image quantize(const Image& img);

/// Reads a colour PNG/JPEG and bilinearly resizes it to target x target.
Image load_image(const std::filesystem::path& path, int target_size);
Image decode_image(std::span<const std::uint8_t> data, int target_size);
/// Writes an RGB PNG.
void save_image(const Image& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_image_png(const Image& img);

/// Threshold decode: byte >= 128 is known (1), below is hole (0).
Mask decode_mask(const Bitmap& gray, int expected_width, int expected_height);
/// Reads a mask file; colour files are reduced to their first channel.
Mask load_mask(const std::filesystem::path& path, int expected_width, int expected_height);
Bitmap mask_to_bitmap(const Mask& m);
/// Writes a 0/255 grayscale PNG.
void save_mask(const Mask& m, const std::filesystem::path& path);

/// RGBA sketch layer: RGB maps like images, alpha byte a maps to a / 255.
Sketch sketch_from_bitmap(const Bitmap& rgba);
Sketch load_sketch(const std::filesystem::path& path);

/// Resizes an image's float data bilinearly (used between network resolutions).
Image resize_image(const Image& img, int size);
/// Bilinear resize of a mask followed by a 0.5 threshold, so it stays binary.
Mask resize_mask(const Mask& m, int size);
/// Bilinear resize of any [N,C,H,W] tensor with half-pixel centres.
Tensor resize_bilinear(const Tensor& t, int out_h, int out_w);

}  // namespace cycinpaint::imaging
