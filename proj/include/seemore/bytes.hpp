#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace seemore {

// Little-endian, length-prefixed encoding. All wire messages use this so
// that signatures have a bit-exact signing region.
class ByteWriter {
 public:
  ByteWriter() { buf_.reserve(256); }

  void u8(uint8_t v) { buf_.push_back(v); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; i++) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; i++) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(uint32_t(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  const std::vector<uint8_t>& bytes() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t len) : data_(data), len_(len) {}

  uint8_t u8() {
    if (pos_ + 1 > len_) return fail_u8();
    return data_[pos_++];
  }
  uint32_t u32() {
    if (pos_ + 4 > len_) return uint32_t(fail_u8());
    uint32_t v = 0;
    for (int i = 0; i < 4; i++) v |= uint32_t(data_[pos_++]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    if (pos_ + 8 > len_) return fail_u8();
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= uint64_t(data_[pos_++]) << (8 * i);
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    if (!ok_ || pos_ + n > len_) {
      ok_ = false;
      return {};
    }
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }

  bool ok() const { return ok_; }
  bool done() const { return ok_ && pos_ == len_; }

 private:
  uint8_t fail_u8() {
    ok_ = false;
    return 0;
  }

  const uint8_t* data_;
  size_t len_;
  size_t pos_ = 0;
  bool ok_ = true;
};

}  // namespace seemore
