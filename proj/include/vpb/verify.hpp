#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "vpb/config.hpp"

namespace vpb {

struct VerifyRow {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string note;
};

struct VerifyReport {
  std::vector<VerifyRow> rows;
  std::vector<std::vector<std::string>> cycle_table;  // k, mass, std_error, weighted, weighted_std_error
  bool all_pass() const;
};

// Invariant battery at desk scale; `log` receives progress lines.
VerifyReport run_verification(const RunConfig& config, std::ostream& log);

void write_verify_report(const VerifyReport& r, const std::filesystem::path& path);

}  // namespace vpb
