#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ftscope/metrics.hpp"

namespace ftscope {

/// Shortest decimal text that round-trips the double (17 significant digits).
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

/// Content fingerprint of a file: FNV-1a 64 of its bytes as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

/// step,objective
std::string trace_csv(std::span<const double> trace);

/// layer,min,q1,median,mean,q3,max
std::string summary_csv(const std::vector<std::pair<std::string, Summary>>& rows);

/// layer,channel,value (the raw per-channel dump behind summary_csv)
std::string channel_values_csv(const std::vector<std::pair<std::string, std::vector<double>>>& rows);

}  // namespace ftscope
