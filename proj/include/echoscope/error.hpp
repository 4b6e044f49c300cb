// error.hpp
//
// error types shared across the echoscope modules

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace echoscope {

// Outcome codes for the wire-format parsers.
enum class ParseCode {
    truncated,            // input ended inside a length-delimited field
    malformed,            // length fields disagree or a value is invalid
    empty_list,           // a list that must be non-empty has zero length
    not_client_hello,     // handshake message is not a ClientHello
    duplicate_extension,  // an extension type appears more than once
    trailing_bytes,       // well-formed value followed by extra bytes
    no_server_hello,      // direction carries no ServerHello message
    not_tls,              // bytes cannot start a TLS record
};

const char* to_string(ParseCode code);

class ParseError : public std::runtime_error {
public:
    ParseError(ParseCode code, std::size_t offset, const std::string& what)
        : std::runtime_error(what), code_(code), offset_(offset) {}

    ParseCode code() const { return code_; }

    // Byte offset into the input where the problem was detected.
    std::size_t offset() const { return offset_; }

private:
    ParseCode code_;
    std::size_t offset_;
};

// File-level failure: carries the path and a position (byte offset or
// line number, whichever the format is addressed by).
class DataError : public std::runtime_error {
public:
    DataError(std::string path, std::size_t position, const std::string& what)
        : std::runtime_error(path + ": position " + std::to_string(position) + ": " + what),
          path_(std::move(path)),
          position_(position) {}

    const std::string& path() const { return path_; }
    std::size_t position() const { return position_; }

private:
    std::string path_;
    std::size_t position_;
};

} // namespace echoscope
