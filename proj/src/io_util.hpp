#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace boneage {

std::string read_file(const std::filesystem::path& path);

/// Writes to "<path>.tmp" and renames onto the target, so an aborted run
/// never leaves a truncated artifact under the final name.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& bytes);

/// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double value);

void append_u32_le(std::string& out, std::uint32_t value);
void append_f64_le(std::string& out, double value);
std::uint32_t read_u32_le(const std::string& bytes, std::size_t offset);
double read_f64_le(const std::string& bytes, std::size_t offset);

/// Runs fn(i) for i in [0,count). With workers <= 1 the loop is inline;
/// otherwise indices are split across threads. fn must only write to
/// per-index slots, which keeps results identical for any worker count.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace boneage
