#pragma once

// Flat binary matrix files.
//
//   offset 0   8 bytes  magic: "SEJEMAT1" (f32 payload) or "SEJEMAT2" (f64 payload)
//   offset 8   u32 LE   rows
//   offset 12  u32 LE   cols
//   offset 16  rows*cols little-endian IEEE floats, row-major
//
// Feature files use the f32 form. Checkpoints use the f64 form so parameters
// and optimizer moments round-trip bit-for-bit.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace seje {

inline constexpr char kMatrixMagicF32[8] = {'S', 'E', 'J', 'E', 'M', 'A', 'T', '1'};
inline constexpr char kMatrixMagicF64[8] = {'S', 'E', 'J', 'E', 'M', 'A', 'T', '2'};

struct FloatMatrix {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

struct DoubleMatrix {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> data;
};

void write_matrix_f32(std::ostream& os, std::uint32_t rows, std::uint32_t cols, std::span<const float> data);
void write_matrix_f64(std::ostream& os, std::uint32_t rows, std::uint32_t cols, std::span<const double> data);

// `source` names the stream in error messages. Throws DimensionMismatch when
// the payload is truncated and ValidationError on a bad magic.
FloatMatrix read_matrix_f32(std::istream& is, const std::string& source);
DoubleMatrix read_matrix_f64(std::istream& is, const std::string& source);

FloatMatrix load_matrix_f32(const std::filesystem::path& path);
void save_matrix_f32(const std::filesystem::path& path, const FloatMatrix& m);

// Rows of doubles narrowed to f32. All rows must share one width.
void save_rows_f32(const std::filesystem::path& path, const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> load_rows_f64(const std::filesystem::path& path);

}  // namespace seje
