#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "convsim/errors.hpp"

namespace convsim {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

// Append-only little-endian encoder.
class BinaryWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buf_.append(raw, sizeof(T));
  }
  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    buf_.append(s.data(), s.size());
  }
  void put_doubles(const double* data, std::size_t n) {
    put<std::uint64_t>(n);
    buf_.append(reinterpret_cast<const char*>(data), n * sizeof(double));
  }

  const std::string& bytes() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string_view bytes) : data_(bytes) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<double> get_doubles() {
    const auto n = get<std::uint64_t>();
    if (n > (data_.size() - pos_) / sizeof(double))
      throw FormatError("truncated binary data");
    std::vector<double> out(n);
    std::memcpy(out.data(), data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return out;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw FormatError("truncated binary data");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes);

// magic | version | payload length | crc32(payload) | payload
std::string seal(std::string_view magic, std::uint32_t version,
                 std::string_view payload);
// Verifies magic, version and checksum; returns the payload.
std::string unseal(std::string_view magic, std::uint32_t version,
                   std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace convsim
