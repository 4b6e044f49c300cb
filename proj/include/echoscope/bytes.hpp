// bytes.hpp
//
// bounded big-endian byte cursor and writer used by the wire parsers

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "echoscope/error.hpp"

namespace echoscope {

using Bytes = std::vector<std::uint8_t>;
using BytesView = std::span<const std::uint8_t>;

// Read cursor over a fixed byte range. All multi-byte reads are
// big-endian, per the TLS presentation language. Reads past the end
// throw ParseError{truncated} carrying the absolute offset.
class ByteReader {
public:
    explicit ByteReader(BytesView data, std::size_t base_offset = 0)
        : data_(data), base_(base_offset) {}

    std::size_t offset() const { return base_ + pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    bool empty() const { return pos_ == data_.size(); }

    std::uint8_t u8() { return take(1)[0]; }

    std::uint16_t u16() {
        auto b = take(2);
        return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
    }

    std::uint32_t u24() {
        auto b = take(3);
        return static_cast<std::uint32_t>(b[0]) << 16 | static_cast<std::uint32_t>(b[1]) << 8 | b[2];
    }

    std::uint32_t u32() {
        auto b = take(4);
        return static_cast<std::uint32_t>(b[0]) << 24 | static_cast<std::uint32_t>(b[1]) << 16 |
               static_cast<std::uint32_t>(b[2]) << 8 | b[3];
    }

    BytesView bytes(std::size_t n) { return take(n); }

    Bytes copy(std::size_t n) {
        auto b = take(n);
        return Bytes(b.begin(), b.end());
    }

    std::string str(std::size_t n) {
        auto b = take(n);
        return std::string(reinterpret_cast<const char*>(b.data()), b.size());
    }

    // Consumes n bytes and returns a bounded sub-reader over them.
    ByteReader sub(std::size_t n) {
        std::size_t at = offset();
        return ByteReader(take(n), at);
    }

    void skip(std::size_t n) { take(n); }

    BytesView rest() {
        BytesView r = data_.subspan(pos_);
        pos_ = data_.size();
        return r;
    }

private:
    BytesView take(std::size_t n) {
        if (n > remaining()) {
            throw ParseError(ParseCode::truncated, offset(),
                             "need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()));
        }
        BytesView r = data_.subspan(pos_, n);
        pos_ += n;
        return r;
    }

    BytesView data_;
    std::size_t base_ = 0;
    std::size_t pos_ = 0;
};

// Append-only big-endian writer with patchable length prefixes.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }

    void u16(std::uint16_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        buf_.push_back(static_cast<std::uint8_t>(v));
    }

    void u24(std::uint32_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v >> 16));
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        buf_.push_back(static_cast<std::uint8_t>(v));
    }

    void u32(std::uint32_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v >> 24));
        buf_.push_back(static_cast<std::uint8_t>(v >> 16));
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        buf_.push_back(static_cast<std::uint8_t>(v));
    }

    void raw(BytesView b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

    void str(std::string_view s) {
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    // Writes the body produced by fn behind a length prefix of the
    // given width (1, 2 or 3 bytes).
    template <typename F>
    void length_prefixed(int width, F&& fn) {
        std::size_t mark = buf_.size();
        for (int i = 0; i < width; ++i) buf_.push_back(0);
        fn(*this);
        std::size_t len = buf_.size() - mark - static_cast<std::size_t>(width);
        for (int i = 0; i < width; ++i) {
            buf_[mark + static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>(len >> (8 * (width - 1 - i)));
        }
    }

    std::size_t size() const { return buf_.size(); }
    const Bytes& data() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

std::string to_hex(BytesView bytes);

// Standard base64 (RFC 4648, with padding). Decoding ignores ASCII
// whitespace and throws std::invalid_argument on any other non-alphabet
// byte or bad padding.
std::string base64_encode(BytesView bytes);
Bytes base64_decode(std::string_view text);

std::string ascii_lower(std::string_view s);

// True when every byte is printable ASCII (0x21..0x7e).
bool is_printable_ascii(std::string_view s);

} // namespace echoscope
