#include "io_util.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <thread>

#include "error.hpp"

namespace boneage {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::Io, "cannot open file for reading: " + path.string());
  }
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) {
    fail(ErrorKind::Io, "read failed: " + path.string());
  }
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      fail(ErrorKind::Io, "cannot open file for writing: " + tmp.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      fail(ErrorKind::Io, "write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    fail(ErrorKind::Io,
         "rename failed: " + tmp.string() + " -> " + path.string());
  }
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void append_u32_le(std::string& out, std::uint32_t value) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

void append_f64_le(std::string& out, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

std::uint32_t read_u32_le(const std::string& bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) {
    fail(ErrorKind::Parse, "truncated 32-bit field at offset " +
                               std::to_string(offset));
  }
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    value |= static_cast<std::uint32_t>(
                 static_cast<unsigned char>(bytes[offset + i]))
             << (8 * i);
  }
  return value;
}

double read_f64_le(const std::string& bytes, std::size_t offset) {
  if (offset + 8 > bytes.size()) {
    fail(ErrorKind::Parse, "truncated 64-bit field at offset " +
                               std::to_string(offset));
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(
                static_cast<unsigned char>(bytes[offset + i]))
            << (8 * i);
  }
  double value;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) {
    return;
  }
  std::size_t nworkers = workers > 1 ? static_cast<std::size_t>(workers) : 1;
  if (nworkers > count) {
    nworkers = count;
  }
  if (nworkers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nworkers);
  for (std::size_t w = 0; w < nworkers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < count; i += nworkers) {
        fn(i);
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
}

}  // namespace boneage
