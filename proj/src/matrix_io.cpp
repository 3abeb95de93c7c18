#include "descramble/matrix.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace descramble {

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'K', 'M', 'X'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite entry");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
       << b.cols();
    throw InvalidArgument(os.str());
  }
}

void write_matrix_csv(const Matrix& a, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "# " << a.rows() << ' ' << a.cols() << '\n';
  char buf[32];
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", a(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.size() < 2 || line[0] != '#')
    throw FormatError(path.string() + ": missing '# rows cols' header");
  std::istringstream hs(line.substr(1));
  long rows = -1, cols = -1;
  if (!(hs >> rows >> cols) || rows < 1 || cols < 1)
    throw FormatError(path.string() + ": bad header '" + line + "'");
  Matrix a(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated at row " + std::to_string(i));
    const char* p = line.c_str();
    for (long j = 0; j < cols; ++j) {
      char* end = nullptr;
      a(i, j) = std::strtod(p, &end);
      if (end == p) throw FormatError(path.string() + ": bad number at row " + std::to_string(i));
      p = end;
      if (j + 1 < cols) {
        if (*p != ',') throw FormatError(path.string() + ": too few columns at row " + std::to_string(i));
        ++p;
      }
    }
  }
  return a;
}

std::string encode_matrix_bin(const Matrix& a) {
  if (a.rows() > std::numeric_limits<std::uint32_t>::max() ||
      a.cols() > std::numeric_limits<std::uint32_t>::max())
    throw InvalidArgument("encode_matrix_bin: dimensions exceed u32");
  std::string out;
  out.reserve(kHeaderBytes + 8 * static_cast<std::size_t>(a.size()));
  out.append(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(a.rows()));
  put_u32(out, static_cast<std::uint32_t>(a.cols()));
  put_u32(out, 0);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      std::uint64_t bits;
      const double v = a(i, j);
      std::memcpy(&bits, &v, sizeof bits);
      put_u64(out, bits);
    }
  }
  return out;
}

Matrix decode_matrix_bin(const std::string& bytes, const std::string& source) {
  if (bytes.size() < kHeaderBytes) throw FormatError(source + ": truncated header");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw FormatError(source + ": bad magic (expected DKMX)");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t rows = get_u32(p + 4);
  const std::uint32_t cols = get_u32(p + 8);
  if (get_u32(p + 12) != 0) throw FormatError(source + ": nonzero reserved header field");
  if (rows == 0 || cols == 0) throw FormatError(source + ": zero dimension");
  const std::size_t expected = kHeaderBytes + 8ull * rows * cols;
  if (bytes.size() != expected) {
    std::ostringstream os;
    os << source << ": expected " << expected << " bytes for " << rows << "x" << cols << ", found "
       << bytes.size();
    throw FormatError(os.str());
  }
  Matrix a(rows, cols);
  const unsigned char* q = p + kHeaderBytes;
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j, q += 8) {
      const std::uint64_t bits = get_u64(q);
      double v;
      std::memcpy(&v, &bits, sizeof v);
      a(i, j) = v;
    }
  }
  return a;
}

void write_matrix_bin(const Matrix& a, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_matrix_bin(a);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

Matrix read_matrix_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_matrix_bin(ss.str(), path.string());
}

}  // namespace descramble
