#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace souschef {

using Clock = std::chrono::system_clock;
using Timestamp = std::chrono::time_point<Clock, std::chrono::milliseconds>;

std::string_view trim(std::string_view s) noexcept;
bool is_blank(std::string_view s) noexcept;
std::string to_lower(std::string_view s);

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// "2023-05-01T12:00:00.000Z"
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view text);

/// Current time, or SOURCE_DATE_EPOCH when that variable is set (reproducible output).
Timestamp now_or_source_date();

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Splits on '\n'; a trailing newline does not produce an empty final line.
std::vector<std::string> split_lines(std::string_view text);

}  // namespace souschef
