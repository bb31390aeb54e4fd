#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace c3mod::text {

/// Number of code points in a UTF-8 string. Invalid bytes count as one each.
std::size_t utf8_length(std::string_view s);

/// Replaces invalid UTF-8 sequences with U+FFFD so the result is always
/// serializable as JSON.
std::string sanitize_utf8(std::string_view s);

/// Cuts `s` to at most `max_bytes` without splitting a multi-byte sequence.
void truncate_utf8(std::string& s, std::size_t max_bytes);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
std::vector<std::string_view> split_lines(std::string_view s);

/// Replaces every `{key}` occurrence; unknown placeholders are left intact.
std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string, std::string>>& values);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace c3mod::text
