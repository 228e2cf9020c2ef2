#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pnp/tensor.hpp"

namespace pnp {

// Portable float image:
//   "PNPF <channels> <height> <width>\n" followed by channels*height*width
//   little-endian IEEE-754 binary64 values in row-major (c,h,w) order.
// Mask files reuse the header with one channel and carry one 0/1 byte per
// cell instead of the doubles.

inline constexpr const char* kImageMagic = "PNPF";
inline constexpr int kImageFormatVersion = 1;

void write_le_doubles(std::ostream& os, std::span<const double> values);
std::vector<double> read_le_doubles(std::istream& is, std::size_t count);

// Reads "<magic> n1 n2 ... nk\n"; throws FormatError on any mismatch.
std::vector<std::size_t> read_header(std::istream& is, const std::string& magic, std::size_t fields);

void write_image(std::ostream& os, const Tensor& t);
Tensor read_image(std::istream& is);
void save_image(const std::filesystem::path& path, const Tensor& t);
Tensor load_image(const std::filesystem::path& path);

// Boolean grid, row-major, one entry per cell.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> cells;

  Mask() = default;
  Mask(std::size_t h, std::size_t w, bool fill = false) : height(h), width(w), cells(h * w, fill ? 1 : 0) {}
  bool operator()(std::size_t r, std::size_t c) const { return cells[r * width + c] != 0; }
  std::size_t count() const;
  double fraction() const { return cells.empty() ? 0.0 : static_cast<double>(count()) / cells.size(); }
  friend bool operator==(const Mask&, const Mask&) = default;
};

void write_mask(std::ostream& os, const Mask& m);
Mask read_mask(std::istream& is);
void save_mask(const std::filesystem::path& path, const Mask& m);
Mask load_mask(const std::filesystem::path& path);

// 8-bit binary PGM of channel `channel`, clamped to [0, peak] and scaled to 0..255.
void write_pgm(std::ostream& os, const Tensor& t, double peak, std::size_t channel = 0);
void save_pgm(const std::filesystem::path& path, const Tensor& t, double peak, std::size_t channel = 0);

}  // namespace pnp
