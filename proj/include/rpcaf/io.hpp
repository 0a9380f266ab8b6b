#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rpcaf/errors.hpp"
#include "rpcaf/matrix.hpp"

namespace rpcaf {

// RPF1 binary layout: bytes 0-7 magic "RPFMAT1\0", bytes 8-11 row count as
// little-endian uint32, bytes 12-15 column count, then rows*cols IEEE-754
// binary64 little-endian values in row-major order.
inline constexpr std::array<char, 8> kRpfMagic = {'R', 'P', 'F', 'M',
                                                  'A', 'T', '1', '\0'};

static_assert(std::endian::native == std::endian::little,
              "RPF1 I/O assumes a little-endian host");
static_assert(std::numeric_limits<double>::is_iec559,
              "RPF1 I/O assumes IEEE-754 doubles");

inline void write_matrix(const DenseMatrix& m,
                         const std::filesystem::path& path) {
  // Validate before touching the filesystem so a bad matrix never leaves a
  // partial file behind.
  if (m.empty()) throw ValueError("cannot write an empty matrix");
  if (!all_finite(m)) throw ValueError("non-finite entry in matrix");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  out.write(kRpfMagic.data(), kRpfMagic.size());
  const auto dims = {static_cast<std::uint32_t>(m.rows()),
                     static_cast<std::uint32_t>(m.cols())};
  for (std::uint32_t d : dims) {
    char buf[4];
    std::memcpy(buf, &d, 4);
    out.write(buf, 4);
  }
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

inline DenseMatrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());

  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 8 || magic != kRpfMagic) {
    throw FormatError("bad RPF1 magic in " + path.string());
  }

  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  char buf[8];
  in.read(buf, 8);
  if (in.gcount() != 8) {
    throw TruncationError("RPF1 header truncated in " + path.string());
  }
  std::memcpy(&rows, buf, 4);
  std::memcpy(&cols, buf + 4, 4);
  if (rows == 0 || cols == 0) {
    throw FormatError("zero dimension in " + path.string());
  }

  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  std::vector<double> entries(count);
  in.read(reinterpret_cast<char*>(entries.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::uint64_t>(in.gcount()) != count * sizeof(double)) {
    throw TruncationError("payload shorter than " + std::to_string(rows) +
                          "x" + std::to_string(cols) + " in " + path.string());
  }
  in.peek();
  if (!in.eof()) {
    throw TruncationError("trailing bytes after " + std::to_string(rows) +
                          "x" + std::to_string(cols) + " payload in " +
                          path.string());
  }
  for (double v : entries) {
    if (!std::isfinite(v)) {
      throw ValueError("non-finite entry in " + path.string());
    }
  }
  return DenseMatrix(static_cast<int>(rows), static_cast<int>(cols),
                     std::move(entries));
}

// Headerless CSV, one row per line, values printed with enough digits to
// round-trip a double exactly.
inline void write_csv(const DenseMatrix& m, const std::filesystem::path& path) {
  if (!all_finite(m)) throw ValueError("non-finite entry in matrix");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  char buf[40];
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf << (j + 1 < m.cols() ? "," : "\n");
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline DenseMatrix read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<double> entries;
  int cols = -1;
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    int n = 0;
    while (std::getline(ss, field, ',')) {
      std::size_t pos = 0;
      double v = 0;
      try {
        v = std::stod(field, &pos);
      } catch (const std::exception&) {
        throw FormatError("unparsable CSV field '" + field + "' in " +
                          path.string());
      }
      if (pos != field.size() && field.find_first_not_of(" \t", pos) !=
                                     std::string::npos) {
        throw FormatError("unparsable CSV field '" + field + "' in " +
                          path.string());
      }
      if (!std::isfinite(v)) {
        throw ValueError("non-finite entry in " + path.string());
      }
      entries.push_back(v);
      ++n;
    }
    if (cols == -1) {
      cols = n;
    } else if (n != cols) {
      throw FormatError("ragged CSV row in " + path.string());
    }
    ++rows;
  }
  if (rows == 0 || cols <= 0) throw FormatError("empty CSV " + path.string());
  return DenseMatrix(rows, cols, std::move(entries));
}

}  // namespace rpcaf
