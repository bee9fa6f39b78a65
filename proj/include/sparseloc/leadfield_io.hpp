#pragma once

#include "sparseloc/model.hpp"

#include <filesystem>

namespace sparseloc {

inline constexpr const char* kLeadFieldFormat = "sparseloc-leadfield";
inline constexpr int kLeadFieldFormatVersion = 1;
inline constexpr const char* kLeadFieldHeaderName = "leadfield.json";
inline constexpr const char* kLeadFieldMatrixName = "gain.bin";

/// Writes `dir/leadfield.json` (metadata) and `dir/gain.bin` (column-major
/// float64 little-endian). Creates `dir` when missing.
void save_leadfield(const LeadField& lf, const std::filesystem::path& dir);

/// Accepts a directory holding leadfield.json, the header file itself, or a
/// plain CSV matrix (N rows, dof*M columns, no geometry).
LeadField load_leadfield(const std::filesystem::path& path, int csv_dof = 1);

/// Numeric CSV without header; one matrix row per line.
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const Matrix& m, const std::filesystem::path& path);

Measurements load_measurements(const std::filesystem::path& path, double fs);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

} // namespace sparseloc
