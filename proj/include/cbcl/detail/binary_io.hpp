// Copyright 2026 The cbcl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "cbcl/errors.hpp"

// Little-endian fixed-width field encoding shared by the CEF and CMF formats.
namespace cbcl::detail
{
template <typename T>
requires std::is_unsigned_v<T>
inline void put_le(std::ostream& out, const T value)
{
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i)
  {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline void put_f32(std::ostream& out, const float value)
{
  put_le(out, std::bit_cast<std::uint32_t>(value));
}

template <typename T>
requires std::is_unsigned_v<T>
inline T get_le(std::istream& in, const char* what)
{
  std::array<char, sizeof(T)> bytes{};
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
  {
    throw FormatError(std::string("truncated input while reading ") + what);
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
  {
    value |= static_cast<T>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return value;
}

inline float get_f32(std::istream& in, const char* what)
{
  return std::bit_cast<float>(get_le<std::uint32_t>(in, what));
}

inline void expect_magic(std::istream& in, const char (&magic)[5])
{
  std::array<char, 4> bytes{};
  in.read(bytes.data(), 4);
  if (in.gcount() != 4)
  {
    throw FormatError("truncated input while reading magic");
  }
  if (std::memcmp(bytes.data(), magic, 4) != 0)
  {
    throw FormatError(std::string("bad magic, expected \"") + magic + "\"");
  }
}

inline void check_sink(const std::ostream& out)
{
  if (!out)
  {
    throw IoError("write failed");
  }
}
}  // namespace cbcl::detail
