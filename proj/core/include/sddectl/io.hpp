#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sddectl/simulate.hpp"
#include "sddectl/verification.hpp"

namespace sddectl {

/// Locale-independent decimal formatting with 17 significant digits
/// (round-trip exact for doubles). NaN and infinities print as "nan",
/// "inf", "-inf".
std::string format_sig17(double value);

/// Writes the full contents to a sibling temporary file and renames it into
/// place, so the target is either fully written or absent.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

/// Trace CSV: header `t,x1..xn,u1..um,<log names>`, one row per step,
/// 17 significant digits.
std::string trace_to_csv(const SimulationTrace& trace);

/// Mean-curve CSV: `t,<curve names>`.
std::string curves_to_csv(const std::vector<double>& times,
                          const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& curves);

/// Per-path minima CSV:
/// `path,min_h,min_margin,safe,completed,failure_step,failure_category`.
std::string per_path_to_csv(const std::vector<PathSummary>& paths);

}  // namespace sddectl
