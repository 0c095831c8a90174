#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace sibling {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// visited exactly once; callers write results into pre-sized slots.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Shortest decimal that round-trips the double ("%.17g" fallback).
std::string format_double(double v);

}  // namespace sibling
