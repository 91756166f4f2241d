#pragma once

#include <atomic>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

namespace tallmcmc {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Read-only memory map of a whole file. Move-only.
class MappedFile {
public:
  MappedFile() = default;

  explicit MappedFile(const std::filesystem::path& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_RDONLY);
    if (fd_ < 0) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
    struct stat st {};
    if (::fstat(fd_, &st) != 0) {
      ::close(fd_);
      throw IoError("cannot stat '" + path.string() + "'");
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
      void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd_, 0);
      if (p == MAP_FAILED) {
        ::close(fd_);
        throw IoError("cannot map '" + path.string() + "': " + std::strerror(errno));
      }
      data_ = static_cast<const std::byte*>(p);
    }
  }

  MappedFile(MappedFile&& o) noexcept { swap(o); }
  MappedFile& operator=(MappedFile&& o) noexcept {
    if (this != &o) {
      release();
      swap(o);
    }
    return *this;
  }
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;
  ~MappedFile() { release(); }

  std::span<const std::byte> bytes() const noexcept { return {data_, size_}; }
  std::size_t size() const noexcept { return size_; }
  const std::filesystem::path& path() const noexcept { return path_; }

private:
  void swap(MappedFile& o) noexcept {
    std::swap(path_, o.path_);
    std::swap(fd_, o.fd_);
    std::swap(data_, o.data_);
    std::swap(size_, o.size_);
  }
  void release() noexcept {
    if (data_) ::munmap(const_cast<std::byte*>(data_), size_);
    if (fd_ >= 0) ::close(fd_);
    data_ = nullptr;
    fd_ = -1;
    size_ = 0;
  }

  std::filesystem::path path_;
  int fd_ = -1;
  const std::byte* data_ = nullptr;
  std::size_t size_ = 0;
};

/// Little helper for the fixed binary layouts: native-endian PODs, no padding.
class BinaryWriter {
public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot create '" + path.string() + "'");
  }

  template <class T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  void put_doubles(const double* p, std::size_t count) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
  }

  void put_magic(std::string_view magic) { out_.write(magic.data(), static_cast<std::streamsize>(magic.size())); }

  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed on '" + path_.string() + "'");
    out_.close();
  }

private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
public:
  BinaryReader(std::span<const std::byte> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0)
      throw IoError(what_ + ": bad magic, not a " + std::string(magic) + " file");
    pos_ += magic.size();
  }

  std::size_t position() const noexcept { return pos_; }

  void need(std::size_t k) const {
    if (pos_ + k > bytes_.size()) throw IoError(what_ + ": truncated file");
  }

private:
  std::span<const std::byte> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

/// Unique scratch file name inside dir (used for per-chain proxy stores).
inline std::filesystem::path unique_scratch_path(const std::filesystem::path& dir,
                                                 std::string_view stem) {
  static std::atomic<std::uint64_t> counter{0};
  const auto k = counter.fetch_add(1);
  return dir / (std::string(stem) + "-" + std::to_string(::getpid()) + "-" + std::to_string(k) + ".bin");
}

}  // namespace tallmcmc
