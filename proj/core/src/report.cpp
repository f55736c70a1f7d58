#include "ftscope/report.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "ftscope/error.hpp"
#include "ftscope/rng.hpp"

namespace ftscope {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string file_digest(const std::filesystem::path& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(read_text_file(path))));
  return buf;
}

std::string trace_csv(std::span<const double> trace) {
  std::string s = "step,objective\n";
  for (std::size_t i = 0; i < trace.size(); ++i) s += std::to_string(i) + "," + format_double(trace[i]) + "\n";
  return s;
}

std::string summary_csv(const std::vector<std::pair<std::string, Summary>>& rows) {
  std::string s = "layer,min,q1,median,mean,q3,max\n";
  for (const auto& [layer, m] : rows) {
    s += layer + "," + format_double(m.min) + "," + format_double(m.q1) + "," + format_double(m.median) + "," +
         format_double(m.mean) + "," + format_double(m.q3) + "," + format_double(m.max) + "\n";
  }
  return s;
}

std::string channel_values_csv(const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  std::string s = "layer,channel,value\n";
  for (const auto& [layer, values] : rows)
    for (std::size_t c = 0; c < values.size(); ++c) s += layer + "," + std::to_string(c) + "," + format_double(values[c]) + "\n";
  return s;
}

}  // namespace ftscope
