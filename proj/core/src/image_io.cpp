#include "pnp/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "pnp/errors.hpp"

namespace pnp {

namespace {

std::uint64_t to_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::little) {
    return bits;
  } else {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((bits >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return out;
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading: " + path.string());
  return is;
}

}  // namespace

void write_le_doubles(std::ostream& os, std::span<const double> values) {
  std::vector<char> buf(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t le = to_little_endian(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(buf.data() + 8 * i, &le, 8);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<double> read_le_doubles(std::istream& is, std::size_t count) {
  std::vector<char> buf(count * 8);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw FormatError("truncated payload");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t le;
    std::memcpy(&le, buf.data() + 8 * i, 8);
    out[i] = std::bit_cast<double>(to_little_endian(le));
  }
  return out;
}

std::vector<std::size_t> read_header(std::istream& is, const std::string& magic, std::size_t fields) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("missing " + magic + " header");
  std::istringstream ss(line);
  std::string word;
  ss >> word;
  if (word != magic) throw FormatError("expected magic " + magic + ", found '" + word + "'");
  std::vector<std::size_t> out(fields);
  for (auto& v : out) {
    long long x = -1;
    if (!(ss >> x) || x < 0) throw FormatError("bad " + magic + " header: '" + line + "'");
    v = static_cast<std::size_t>(x);
  }
  if (ss >> word) throw FormatError("trailing fields in " + magic + " header");
  return out;
}

void write_image(std::ostream& os, const Tensor& t) {
  os << kImageMagic << ' ' << t.channels() << ' ' << t.height() << ' ' << t.width() << '\n';
  write_le_doubles(os, t.values());
}

Tensor read_image(std::istream& is) {
  const auto dims = read_header(is, kImageMagic, 3);
  const Shape shape{dims[0], dims[1], dims[2]};
  if (shape.size() == 0) throw FormatError("PNPF image with an empty extent");
  std::vector<double> data = read_le_doubles(is, shape.size());
  try {
    return Tensor(shape, std::move(data));
  } catch (const DomainError& e) {
    throw FormatError(std::string("PNPF: ") + e.what());
  }
}

void save_image(const std::filesystem::path& path, const Tensor& t) {
  auto os = open_out(path);
  write_image(os, t);
}

Tensor load_image(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_image(is);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](std::uint8_t c) { return c != 0; }));
}

void write_mask(std::ostream& os, const Mask& m) {
  os << kImageMagic << " 1 " << m.height << ' ' << m.width << '\n';
  std::vector<char> bytes(m.cells.size());
  std::transform(m.cells.begin(), m.cells.end(), bytes.begin(), [](std::uint8_t c) { return c ? '\1' : '\0'; });
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Mask read_mask(std::istream& is) {
  const auto dims = read_header(is, kImageMagic, 3);
  if (dims[0] != 1) throw FormatError("mask file must have one channel");
  if (dims[1] == 0 || dims[2] == 0) throw FormatError("mask file with an empty extent");
  Mask m(dims[1], dims[2]);
  std::vector<char> bytes(m.cells.size());
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) throw FormatError("truncated mask payload");
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("mask payload longer than header implies");
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] != 0 && bytes[i] != 1) throw FormatError("mask byte is neither 0 nor 1");
    m.cells[i] = static_cast<std::uint8_t>(bytes[i]);
  }
  return m;
}

void save_mask(const std::filesystem::path& path, const Mask& m) {
  auto os = open_out(path);
  write_mask(os, m);
}

Mask load_mask(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_mask(is);
}

void write_pgm(std::ostream& os, const Tensor& t, double peak, std::size_t channel) {
  if (channel >= t.channels()) throw ShapeError("write_pgm: channel out of range");
  if (!(peak > 0.0)) throw DomainError("write_pgm: peak must be positive");
  os << "P5\n" << t.width() << ' ' << t.height() << "\n255\n";
  std::vector<char> row(t.width());
  for (std::size_t h = 0; h < t.height(); ++h) {
    for (std::size_t w = 0; w < t.width(); ++w) {
      const double v = std::clamp(t(channel, h, w), 0.0, peak) / peak;
      row[w] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    os.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

void save_pgm(const std::filesystem::path& path, const Tensor& t, double peak, std::size_t channel) {
  auto os = open_out(path);
  write_pgm(os, t, peak, channel);
}

}  // namespace pnp
