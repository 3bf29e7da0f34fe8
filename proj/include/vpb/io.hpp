#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vpb/field.hpp"
#include "vpb/phase.hpp"

namespace vpb {

struct DiagRow;

// Shortest round-trip decimal form.
std::string format_double(double x);

std::string diag_csv_header();
std::string diag_csv_line(const DiagRow& row);

// base.bin holds little-endian float64 values, base.txt the shape, bbox and time stamp.
void write_distribution_snapshot(const DistributionField& F, const std::filesystem::path& base);

struct SnapshotData {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  double time_stamp = 0.0;
};
SnapshotData read_snapshot(const std::filesystem::path& base);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace vpb
