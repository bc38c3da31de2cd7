#include "convsim/binary_io.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>

namespace convsim {

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
            static_cast<uInt>(bytes.size())));
}

std::string seal(std::string_view magic, std::uint32_t version,
                 std::string_view payload) {
  BinaryWriter w;
  w.put_string(magic);
  w.put<std::uint32_t>(version);
  w.put<std::uint64_t>(payload.size());
  w.put<std::uint32_t>(crc32_of(payload));
  std::string out = w.take();
  out.append(payload);
  return out;
}

std::string unseal(std::string_view magic, std::uint32_t version,
                   std::string_view bytes) {
  BinaryReader r(bytes);
  if (r.get_string() != magic) throw FormatError("bad magic: not a " +
                                                 std::string(magic) + " file");
  const auto found = r.get<std::uint32_t>();
  if (found != version)
    throw FormatError("version mismatch: file has " + std::to_string(found) +
                      ", expected " + std::to_string(version));
  const auto n = r.get<std::uint64_t>();
  const auto crc = r.get<std::uint32_t>();
  const std::size_t header = 8 + magic.size() + 4 + 8 + 4;
  if (bytes.size() - header != n) throw FormatError("payload length mismatch");
  auto payload = bytes.substr(header);
  if (crc32_of(payload) != crc) throw FormatError("checksum mismatch");
  return std::string(payload);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace convsim
