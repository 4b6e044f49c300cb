// bytes.cpp

#include "echoscope/bytes.hpp"

#include <array>
#include <cctype>

namespace echoscope {

const char* to_string(ParseCode code) {
    switch (code) {
        case ParseCode::truncated: return "truncated";
        case ParseCode::malformed: return "malformed";
        case ParseCode::empty_list: return "empty-list";
        case ParseCode::not_client_hello: return "not-client-hello";
        case ParseCode::duplicate_extension: return "duplicate-extension";
        case ParseCode::trailing_bytes: return "trailing-bytes";
        case ParseCode::no_server_hello: return "no-server-hello";
        case ParseCode::not_tls: return "not-tls";
    }
    return "unknown";
}

std::string to_hex(BytesView bytes) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

namespace {

const char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::array<int, 256> build_b64_reverse() {
    std::array<int, 256> rev{};
    rev.fill(-1);
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64Alphabet[i])] = i;
    return rev;
}

} // namespace

std::string base64_encode(BytesView bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= bytes.size()) {
        std::uint32_t v = bytes[i] << 16 | bytes[i + 1] << 8 | bytes[i + 2];
        out.push_back(kB64Alphabet[v >> 18 & 0x3f]);
        out.push_back(kB64Alphabet[v >> 12 & 0x3f]);
        out.push_back(kB64Alphabet[v >> 6 & 0x3f]);
        out.push_back(kB64Alphabet[v & 0x3f]);
        i += 3;
    }
    std::size_t tail = bytes.size() - i;
    if (tail == 1) {
        std::uint32_t v = bytes[i] << 16;
        out.push_back(kB64Alphabet[v >> 18 & 0x3f]);
        out.push_back(kB64Alphabet[v >> 12 & 0x3f]);
        out.push_back('=');
        out.push_back('=');
    } else if (tail == 2) {
        std::uint32_t v = bytes[i] << 16 | bytes[i + 1] << 8;
        out.push_back(kB64Alphabet[v >> 18 & 0x3f]);
        out.push_back(kB64Alphabet[v >> 12 & 0x3f]);
        out.push_back(kB64Alphabet[v >> 6 & 0x3f]);
        out.push_back('=');
    }
    return out;
}

Bytes base64_decode(std::string_view text) {
    static const std::array<int, 256> rev = build_b64_reverse();
    Bytes out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    int pad = 0;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (c == '=') {
            ++pad;
            continue;
        }
        if (pad > 0) throw std::invalid_argument("base64: data after padding");
        int v = rev[static_cast<unsigned char>(c)];
        if (v < 0) throw std::invalid_argument("base64: invalid character");
        acc = acc << 6 | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>(acc >> bits));
        }
    }
    if (pad > 2 || (bits >= 6)) throw std::invalid_argument("base64: bad length");
    return out;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool is_printable_ascii(std::string_view s) {
    for (unsigned char c : s) {
        if (c < 0x21 || c > 0x7e) return false;
    }
    return true;
}

} // namespace echoscope
