#include "seje/matrix_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "seje/error.hpp"

namespace seje {
namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

template <typename Uint>
void put_le(std::ostream& os, Uint bits) {
  char b[sizeof(Uint)];
  for (std::size_t i = 0; i < sizeof(Uint); ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b, sizeof(Uint));
}

template <typename Uint>
Uint get_le(const unsigned char* b) {
  Uint v = 0;
  for (std::size_t i = 0; i < sizeof(Uint); ++i) v |= static_cast<Uint>(b[i]) << (8 * i);
  return v;
}

void write_header(std::ostream& os, const char (&magic)[8], std::uint32_t rows, std::uint32_t cols) {
  os.write(magic, 8);
  put_u32(os, rows);
  put_u32(os, cols);
}

std::pair<std::uint32_t, std::uint32_t> read_header(std::istream& is, const char (&magic)[8],
                                                    const std::string& source) {
  unsigned char header[16];
  is.read(reinterpret_cast<char*>(header), 16);
  if (is.gcount() != 16) throw DimensionMismatch(source + ": truncated matrix header");
  if (std::memcmp(header, magic, 8) != 0) throw ValidationError(source + ": bad matrix magic");
  return {get_u32(header + 8), get_u32(header + 12)};
}

template <typename Float, typename Uint>
std::vector<Float> read_payload(std::istream& is, std::uint64_t count, const std::string& source) {
  std::vector<unsigned char> raw(count * sizeof(Float));
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::uint64_t>(is.gcount()) != raw.size()) {
    throw DimensionMismatch(source + ": payload shorter than rows*cols");
  }
  std::vector<Float> out(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    out[i] = std::bit_cast<Float>(get_le<Uint>(raw.data() + i * sizeof(Float)));
  }
  return out;
}

}  // namespace

void write_matrix_f32(std::ostream& os, std::uint32_t rows, std::uint32_t cols, std::span<const float> data) {
  if (static_cast<std::uint64_t>(rows) * cols != data.size()) {
    throw DimensionMismatch("matrix payload does not match rows*cols");
  }
  write_header(os, kMatrixMagicF32, rows, cols);
  for (float v : data) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}

void write_matrix_f64(std::ostream& os, std::uint32_t rows, std::uint32_t cols, std::span<const double> data) {
  if (static_cast<std::uint64_t>(rows) * cols != data.size()) {
    throw DimensionMismatch("matrix payload does not match rows*cols");
  }
  write_header(os, kMatrixMagicF64, rows, cols);
  for (double v : data) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
}

FloatMatrix read_matrix_f32(std::istream& is, const std::string& source) {
  auto [rows, cols] = read_header(is, kMatrixMagicF32, source);
  FloatMatrix m{rows, cols, read_payload<float, std::uint32_t>(is, std::uint64_t{rows} * cols, source)};
  return m;
}

DoubleMatrix read_matrix_f64(std::istream& is, const std::string& source) {
  auto [rows, cols] = read_header(is, kMatrixMagicF64, source);
  DoubleMatrix m{rows, cols, read_payload<double, std::uint64_t>(is, std::uint64_t{rows} * cols, source)};
  return m;
}

FloatMatrix load_matrix_f32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  FloatMatrix m = read_matrix_f32(in, path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DimensionMismatch(path.string() + ": trailing bytes after rows*cols payload");
  }
  return m;
}

void save_matrix_f32(const std::filesystem::path& path, const FloatMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  write_matrix_f32(out, m.rows, m.cols, m.data);
}

void save_rows_f32(const std::filesystem::path& path, const std::vector<std::vector<double>>& rows) {
  FloatMatrix m;
  m.rows = static_cast<std::uint32_t>(rows.size());
  m.cols = rows.empty() ? 0 : static_cast<std::uint32_t>(rows.front().size());
  m.data.reserve(std::size_t{m.rows} * m.cols);
  for (const auto& r : rows) {
    if (r.size() != m.cols) throw DimensionMismatch(path.string() + ": rows of differing width");
    for (double v : r) m.data.push_back(static_cast<float>(v));
  }
  save_matrix_f32(path, m);
}

std::vector<std::vector<double>> load_rows_f64(const std::filesystem::path& path) {
  const FloatMatrix m = load_matrix_f32(path);
  std::vector<std::vector<double>> rows(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto src = m.row(r);
    rows[r].assign(src.begin(), src.end());
  }
  return rows;
}

}  // namespace seje
