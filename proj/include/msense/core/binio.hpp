// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "msense/core/errors.hpp"

namespace msense::io {

// All binary stream files open with an 12-byte preamble:
//   u32 magic (format tag), u32 endianness sentinel 0x01020304, u32 version.
// A reader that sees the sentinel byte-swapped is looking at a foreign-endian
// file and must reject it.
inline constexpr std::uint32_t kEndianSentinel = 0x01020304u;
inline constexpr std::uint32_t kEndianSwapped = 0x04030201u;

inline std::uint32_t fourcc(const char tag[5]) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(tag[0])) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(tag[1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(tag[2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(tag[3])) << 24);
}

class Writer {
  public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw ValidationError("cannot open for writing: " + path);
    }

    template <typename T>
    void put(const T& value) {
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }

    template <typename T>
    void put_array(const T* data, std::size_t count) {
        out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
    }

    void header(const char tag[5], std::uint32_t version) {
        put(fourcc(tag));
        put(kEndianSentinel);
        put(version);
    }

    void close() {
        out_.close();
        if (!out_.good()) throw ValidationError("write failed: " + path_);
    }

  private:
    std::string path_;
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw ValidationError("cannot open for reading: " + path);
    }

    template <typename T>
    T get() {
        T value{};
        in_.read(reinterpret_cast<char*>(&value), sizeof(T));
        if (!in_) {
            throw ValidationError(path_ + ": truncated at byte offset " + std::to_string(offset()) +
                                  " (wanted " + std::to_string(sizeof(T)) + " more bytes)");
        }
        return value;
    }

    template <typename T>
    void get_array(T* data, std::size_t count) {
        in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
        if (!in_) {
            throw ValidationError(path_ + ": truncated at byte offset " + std::to_string(offset()) +
                                  " (wanted " + std::to_string(count * sizeof(T)) + " bytes)");
        }
    }

    /// Checks magic, endianness sentinel, and version; throws naming the file.
    void expect_header(const char tag[5], std::uint32_t version) {
        const auto magic = get<std::uint32_t>();
        if (magic != fourcc(tag)) {
            throw ValidationError(path_ + ": bad magic (not a " + std::string(tag, 4) + " file)");
        }
        const auto sentinel = get<std::uint32_t>();
        if (sentinel == kEndianSwapped) {
            throw ValidationError(path_ + ": foreign-endian file rejected");
        }
        if (sentinel != kEndianSentinel) {
            throw ValidationError(path_ + ": corrupt endianness sentinel");
        }
        const auto v = get<std::uint32_t>();
        if (v != version) {
            throw ValidationError(path_ + ": unsupported format version " + std::to_string(v) +
                                  " (expected " + std::to_string(version) + ")");
        }
    }

    std::int64_t offset() {
        const auto pos = in_.rdstate() ? -1 : static_cast<std::int64_t>(in_.tellg());
        return pos;
    }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

  private:
    std::string path_;
    std::ifstream in_;
};

} // namespace msense::io
