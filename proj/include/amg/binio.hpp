#pragma once

#include <bit>
#include <cstring>
#include <stdexcept>
#include <string_view>

#include "amg/bytes.hpp"

// Little-endian record writer/reader for model and checkpoint files.
namespace amg::binio {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  void magic(std::string_view tag) { out_.insert(out_.end(), tag.begin(), tag.end()); }
  void u32(std::uint32_t v) { append_le(out_, v); }
  void f64(double v) { append_le(out_, std::bit_cast<std::uint64_t>(v)); }
  template <typename Range>
  void f64s(const Range& values) {
    for (auto v : values) f64(static_cast<double>(v));
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}

  void expect_magic(std::string_view tag) {
    need(tag.size());
    if (std::memcmp(data_.data() + at_, tag.data(), tag.size()) != 0) throw FormatError("bad magic");
    at_ += tag.size();
  }
  std::uint32_t u32() {
    need(4);
    const auto v = load_le<std::uint32_t>(data_, at_);
    at_ += 4;
    return v;
  }
  double f64() {
    need(8);
    const auto v = std::bit_cast<double>(load_le<std::uint64_t>(data_, at_));
    at_ += 8;
    return v;
  }
  bool at_end() const { return at_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - at_ < n) throw FormatError("truncated record");
  }
  ByteView data_;
  std::size_t at_ = 0;
};

}  // namespace amg::binio
