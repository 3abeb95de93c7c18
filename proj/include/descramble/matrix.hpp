#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace descramble {

/// Dense real matrix; the carrier for weights, data batches, stencils and bases.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown for malformed arguments (shape mismatch, non-finite entries, bad ranges).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a file cannot be read or does not match its declared format.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

void require_finite(const Matrix& a, const char* what);
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

// Serialization.
//
// CSV: first line `# rows cols`, then one comma-separated line per row,
// printed with 17 significant digits so values round-trip exactly.
//
// Binary: 16-byte header ("DKMX", u32 rows, u32 cols, u32 reserved = 0),
// then rows*cols IEEE-754 doubles in row-major order. Everything is
// little-endian regardless of host.
void write_matrix_csv(const Matrix& a, const std::filesystem::path& path);
Matrix read_matrix_csv(const std::filesystem::path& path);

void write_matrix_bin(const Matrix& a, const std::filesystem::path& path);
Matrix read_matrix_bin(const std::filesystem::path& path);

std::string encode_matrix_bin(const Matrix& a);
Matrix decode_matrix_bin(const std::string& bytes, const std::string& source = "<memory>");

}  // namespace descramble
