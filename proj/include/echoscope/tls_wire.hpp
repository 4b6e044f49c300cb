// tls_wire.hpp
//
// TLS record and handshake parsing: every privacy-relevant field of
// ClientHello and ServerHello, plus the session-level privacy verdict.
// Layouts follow RFC 5246/8446; parsed hellos reserialize byte-exactly.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "echoscope/bytes.hpp"
#include "echoscope/ech.hpp"

namespace echoscope::tls {

inline constexpr std::uint8_t kContentChangeCipherSpec = 20;
inline constexpr std::uint8_t kContentAlert = 21;
inline constexpr std::uint8_t kContentHandshake = 22;
inline constexpr std::uint8_t kContentApplicationData = 23;

inline constexpr std::uint8_t kHandshakeClientHello = 1;
inline constexpr std::uint8_t kHandshakeServerHello = 2;
inline constexpr std::uint8_t kHandshakeCertificate = 11;

inline constexpr std::uint16_t kExtServerName = 0x0000;
inline constexpr std::uint16_t kExtAlpn = 0x0010;
inline constexpr std::uint16_t kExtPreSharedKey = 0x0029;
inline constexpr std::uint16_t kExtSupportedVersions = 0x002b;
inline constexpr std::uint16_t kExtKeyShare = 0x0033;

inline constexpr std::uint16_t kTls10 = 0x0301;
inline constexpr std::uint16_t kTls11 = 0x0302;
inline constexpr std::uint16_t kTls12 = 0x0303;
inline constexpr std::uint16_t kTls13 = 0x0304;

// Record payload may not exceed 2^14 + 2048 (compressed/ciphertext bound).
inline constexpr std::size_t kMaxRecordPayload = 18432;

enum class RecordType {
    handshake,
    application_data,
    alert,
    change_cipher_spec,
    other,
};

enum class TlsVersion { v1_0, v1_1, v1_2, v1_3, unknown };

TlsVersion version_from_code(std::uint16_t code);
const char* to_string(TlsVersion v);  // "1.0" .. "1.3", "unknown"

struct TlsRecord {
    std::uint8_t raw_content_type = 0;
    std::uint16_t legacy_record_version = 0;
    Bytes payload;
    std::size_t offset = 0;  // byte position of the record header in the stream

    RecordType type() const;

    bool operator==(const TlsRecord&) const = default;
};

enum class RecordStreamStatus {
    complete,   // stream fully consumed, or stopped cleanly at non-record bytes
    truncated,  // stream ended inside a record
    not_tls,    // no plausible record header at the start (or anywhere, with resync)
};

struct RecordParseResult {
    std::vector<TlsRecord> records;
    std::size_t consumed = 0;  // offset of the first byte not parsed
    RecordStreamStatus status = RecordStreamStatus::complete;
};

// True when the first five bytes look like a TLS record header:
// known-range version bytes and a sane, non-zero length.
bool plausible_record_header(BytesView bytes);

// Splits one flow direction into TLS records. Total on arbitrary input:
// returns the maximal prefix of frameable records plus a status marker,
// never throws. With `resync`, scans forward for the first plausible
// header before framing (for captures that start mid-stream).
RecordParseResult parse_records(BytesView stream, bool resync = false);

struct Extension {
    std::uint16_t type = 0;
    Bytes data;

    bool operator==(const Extension&) const = default;
};

struct TlsClientHello {
    std::uint16_t legacy_version = kTls12;
    std::array<std::uint8_t, 32> random{};
    Bytes session_id;
    std::vector<std::uint16_t> cipher_suites;
    Bytes compression_methods;
    bool has_extensions_block = false;
    std::vector<Extension> extensions;  // original order, unknown types kept opaque

    // Derived from the extension list, one extension each.
    std::optional<std::string> sni;
    std::optional<std::vector<std::string>> alpn;
    std::optional<std::vector<std::uint16_t>> supported_versions;
    std::vector<std::uint16_t> key_share_groups;
    bool pre_shared_key_present = false;
    std::optional<ech::EchExtension> ech;  // unset when the ECH body is opaque

    // supported_versions wins over legacy_version: the highest recognized
    // advertised code, or 0 when the extension lists none we know.
    std::uint16_t effective_version_code() const;
    TlsVersion effective_version() const;

    bool operator==(const TlsClientHello&) const = default;
};

struct TlsServerHello {
    std::uint16_t legacy_version = 0;
    std::uint16_t selected_cipher = 0;
    std::optional<std::uint16_t> supported_versions_selected;
    std::optional<std::uint16_t> key_share_group;
    // True when a plain-text Certificate message follows in the same
    // direction before encryption starts; only possible below TLS 1.3.
    bool certificate_in_clear = false;

    std::uint16_t negotiated_version_code() const {
        return supported_versions_selected ? *supported_versions_selected : legacy_version;
    }

    bool operator==(const TlsServerHello&) const = default;
};

enum class PrivacyLevel { none, partial_tls13, full_ech };

const char* to_string(PrivacyLevel level);  // "none", "partial-tls13", "full-ech"

struct PrivacyAssessment {
    TlsVersion effective_version = TlsVersion::unknown;
    bool sni_exposed = false;
    bool certificate_exposed = false;
    // Set when no ServerHello was available and certificate exposure was
    // inferred from the version alone.
    bool certificate_exposure_inferred = false;
    bool ech_present = false;
    PrivacyLevel privacy_level = PrivacyLevel::none;

    bool operator==(const PrivacyAssessment&) const = default;
};

// Parses exactly one ClientHello handshake message (header included).
// Unknown extensions are retained opaquely; GREASE values pass through.
// Throws ParseError with code not_client_hello, malformed,
// duplicate_extension, truncated or trailing_bytes.
TlsClientHello parse_client_hello(BytesView message);

// Byte-exact inverse of parse_client_hello.
Bytes serialize_client_hello(const TlsClientHello& hello);

// Scans one server-to-client record sequence for the ServerHello and for a
// plain-text Certificate message ahead of encryption. Throws
// ParseError{no_server_hello} when the direction has none.
TlsServerHello parse_server_hello(const std::vector<TlsRecord>& records);

// Total over well-formed inputs. Without a ServerHello the certificate
// exposure is inferred from the effective version and flagged as such.
PrivacyAssessment assess_privacy(const TlsClientHello& ch,
                                 const std::optional<TlsServerHello>& sh);

// Record framing (the serializer side of parse_records).
Bytes write_record(std::uint8_t content_type, std::uint16_t version, BytesView payload);

// Splits a message across records of at most max_fragment payload bytes.
Bytes fragment_into_records(std::uint8_t content_type, std::uint16_t version,
                            BytesView payload, std::size_t max_fragment);

Bytes write_handshake_message(std::uint8_t handshake_type, BytesView body);

// Extension body encoders used by the builder and by outer-hello
// construction.
Bytes encode_sni_extension(std::string_view host);
Bytes encode_alpn_extension(const std::vector<std::string>& protocols);
Bytes encode_supported_versions_extension(const std::vector<std::uint16_t>& versions);
Bytes encode_key_share_extension(const std::vector<std::uint16_t>& groups);
Bytes encode_pre_shared_key_extension();

// Assembles a well-formed ClientHello. build() returns the parsed form of
// build_message(), so derived fields are always consistent with the bytes.
class ClientHelloBuilder {
public:
    ClientHelloBuilder& legacy_version(std::uint16_t v);
    ClientHelloBuilder& random(const std::array<std::uint8_t, 32>& r);
    ClientHelloBuilder& session_id(Bytes id);
    ClientHelloBuilder& cipher_suites(std::vector<std::uint16_t> suites);
    ClientHelloBuilder& compression_methods(Bytes methods);
    ClientHelloBuilder& sni(std::string host);
    ClientHelloBuilder& alpn(std::vector<std::string> protocols);
    ClientHelloBuilder& supported_versions(std::vector<std::uint16_t> versions);
    ClientHelloBuilder& key_share_groups(std::vector<std::uint16_t> groups);
    ClientHelloBuilder& pre_shared_key();
    ClientHelloBuilder& ech(const ech::EchExtension& ext);
    ClientHelloBuilder& raw_extension(std::uint16_t type, Bytes data);
    ClientHelloBuilder& no_extensions_block();

    Bytes build_message() const;
    TlsClientHello build() const;

private:
    std::uint16_t legacy_version_ = kTls12;
    std::array<std::uint8_t, 32> random_{};
    Bytes session_id_;
    std::vector<std::uint16_t> cipher_suites_{0x1301, 0x1302, 0xc02f};
    Bytes compression_methods_{0x00};
    bool extensions_block_ = true;
    std::optional<std::string> sni_;
    std::optional<std::vector<std::string>> alpn_;
    std::optional<std::vector<std::uint16_t>> supported_versions_;
    std::optional<std::vector<std::uint16_t>> key_share_groups_;
    bool pre_shared_key_ = false;
    std::optional<ech::EchExtension> ech_;
    std::vector<Extension> raw_extensions_;
};

} // namespace echoscope::tls
