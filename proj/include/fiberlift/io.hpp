#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace fiberlift {

// Shortest round-trip decimal representation (std::to_chars); locale-free, so
// emitted CSV/JSON bytes are reproducible.
std::string format_double(double v);

// SHA-1 of a git-style blob ("blob <len>\0<content>"), hex-encoded.
std::string git_blob_sha1(const std::string& content);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Two-column CSV (header + rows), used for traces.
std::string trace_csv(const std::string& col_a, const std::string& col_b,
                      const std::vector<std::pair<double, double>>& rows);

// Grid samples of a scalar function on the base circle (y, value).
std::string grid_samples_csv(const std::vector<std::pair<double, double>>& samples);

} // namespace fiberlift
