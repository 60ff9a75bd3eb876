#ifndef GRIDLOSS_GRID_IO_HPP
#define GRIDLOSS_GRID_IO_HPP

// Grid files.
//
// GRD1: the 4 bytes "GRD1", then batch, rows, cols, channels as little-endian
// uint32, then batch*rows*cols*channels little-endian float64 values in
// row-major order with channels fastest.
//
// CSV: one grid row per line, comma-separated; loads as (1, rows, cols, 1).

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "gridloss/error.hpp"
#include "gridloss/grid_tensor.hpp"

namespace gridloss {

inline constexpr char kGrd1Magic[4] = {'G', 'R', 'D', '1'};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline std::string encode_grd1(const GridTensor& t) {
  const Shape s = t.shape();
  std::string out(kGrd1Magic, 4);
  for (std::size_t d : {s.batch, s.rows, s.cols, s.channels}) {
    detail::put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (double v : t.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  return out;
}

inline GridTensor decode_grd1(const std::string& bytes, const std::string& source = "GRD1 data") {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kGrd1Magic, 4) != 0) {
    fail(ErrorCode::parse_error, source + ": missing GRD1 header");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const Shape s{detail::get_u32(p + 4), detail::get_u32(p + 8), detail::get_u32(p + 12),
                detail::get_u32(p + 16)};
  if (s.size() == 0) fail(ErrorCode::parse_error, source + ": zero-sized dimension");
  if (bytes.size() != 20 + 8 * s.size()) {
    fail(ErrorCode::parse_error, source + ": expected " + std::to_string(20 + 8 * s.size()) +
                                     " bytes for shape " + s.str() + ", found " +
                                     std::to_string(bytes.size()));
  }
  std::vector<double> values(s.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(p[20 + 8 * i + b]) << (8 * b);
    }
    values[i] = std::bit_cast<double>(bits);
    if (!std::isfinite(values[i])) {
      fail(ErrorCode::parse_error, source + ": non-finite value at index " + std::to_string(i));
    }
  }
  return GridTensor(s, std::move(values));
}

inline void write_grd1(const std::string& path, const GridTensor& t) {
  std::ofstream out(path, std::ios::binary);
  const std::string bytes = encode_grd1(t);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io_error, "cannot write '" + path + "'");
}

inline GridTensor read_grd1(const std::string& path) {
  return decode_grd1(detail::read_file(path), path);
}

inline GridTensor parse_csv_grid(const std::string& text, const std::string& source = "CSV data") {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t n = 0;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos ||
          !std::isfinite(v)) {
        fail(ErrorCode::parse_error, source + ": bad number '" + cell + "' on row " +
                                         std::to_string(rows + 1));
      }
      values.push_back(v);
      ++n;
    }
    if (rows == 0) cols = n;
    if (n != cols) {
      fail(ErrorCode::parse_error, source + ": row " + std::to_string(rows + 1) + " has " +
                                       std::to_string(n) + " values, expected " +
                                       std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) fail(ErrorCode::parse_error, source + ": no data");
  return GridTensor(Shape{1, rows, cols, 1}, std::move(values));
}

inline void write_csv(const std::string& path, const GridTensor& t) {
  const Shape s = t.shape();
  if (s.batch != 1 || s.channels != 1) {
    fail(ErrorCode::shape_mismatch, "CSV holds a single-sample, single-channel grid");
  }
  std::ofstream out(path);
  out.precision(17);
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) out << (c ? "," : "") << t.at(0, r, c, 0);
    out << '\n';
  }
  if (!out) fail(ErrorCode::io_error, "cannot write '" + path + "'");
}

/// GRD1 if the file starts with the magic bytes, CSV otherwise.
inline GridTensor load_grid(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kGrd1Magic, 4) == 0) {
    return decode_grd1(bytes, path);
  }
  return parse_csv_grid(bytes, path);
}

}  // namespace gridloss

#endif  // GRIDLOSS_GRID_IO_HPP
