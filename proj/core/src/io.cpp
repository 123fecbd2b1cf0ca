#include "sddectl/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

namespace sddectl {

namespace fs = std::filesystem;

std::string format_sig17(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  if (std::isinf(value)) {
    return value > 0 ? "inf" : "-inf";
  }
  std::array<char, 64> buf{};
  auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), value,
                    std::chars_format::general, 17);
  if (ec != std::errc()) {
    throw NumericError("format_sig17: conversion failed");
  }
  return std::string(buf.data(), ptr);
}

void atomic_write(const fs::path& path, const std::string& contents) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".")
                                                    : path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("io", "cannot open " + tmp.string() + " for writing");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("io", "write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string trace_to_csv(const SimulationTrace& trace) {
  std::string out;
  const std::size_t steps = trace.times.size();
  const Eigen::Index n = steps > 0 ? trace.states.front().size() : 0;
  const Eigen::Index m = steps > 0 ? trace.inputs.front().size() : 0;

  out += "t";
  for (Eigen::Index i = 1; i <= n; ++i) {
    out += ",x" + std::to_string(i);
  }
  for (Eigen::Index i = 1; i <= m; ++i) {
    out += ",u" + std::to_string(i);
  }
  for (const std::string& name : trace.log_names) {
    out += "," + name;
  }
  out += "\n";

  for (std::size_t s = 0; s < steps; ++s) {
    out += format_sig17(trace.times[s]);
    for (Eigen::Index i = 0; i < n; ++i) {
      out += "," + format_sig17(trace.states[s][i]);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      out += "," + format_sig17(trace.inputs[s][i]);
    }
    for (const auto& series : trace.log_values) {
      out += "," + format_sig17(series[s]);
    }
    out += "\n";
  }
  return out;
}

std::string curves_to_csv(const std::vector<double>& times,
                          const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& curves) {
  std::string out = "t";
  for (const std::string& name : names) {
    out += "," + name;
  }
  out += "\n";
  for (std::size_t s = 0; s < times.size(); ++s) {
    out += format_sig17(times[s]);
    for (const auto& curve : curves) {
      out += "," + format_sig17(curve[s]);
    }
    out += "\n";
  }
  return out;
}

std::string per_path_to_csv(const std::vector<PathSummary>& paths) {
  std::string out = "path,min_h,min_margin,safe,completed,failure_step,failure_category\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const PathSummary& p = paths[i];
    const bool safe = p.completed && p.min_h >= 0.0;
    out += std::to_string(i);
    out += "," + format_sig17(p.min_h);
    out += "," + format_sig17(p.min_margin);
    out += std::string(",") + (safe ? "1" : "0");
    out += std::string(",") + (p.completed ? "1" : "0");
    out += "," + (p.completed ? std::string("-1") : std::to_string(p.failure_step));
    out += "," + p.failure_category;
    out += "\n";
  }
  return out;
}

}  // namespace sddectl
