// ech.hpp
//
// Encrypted ClientHello model: ECHConfig lists, the extension body
// carried inside a ClientHello, DNS HTTPS-record distribution, and
// outer-hello construction around an injected sealing function.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "echoscope/bytes.hpp"

namespace echoscope::tls {
struct TlsClientHello;
}

namespace echoscope::ech {

// Extension codepoint and config version from the encrypted-client-hello
// draft series (0xfe0d since draft-13).
inline constexpr std::uint16_t kEchExtensionType = 0xfe0d;
inline constexpr std::uint16_t kEchConfigVersion = 0xfe0d;

// HPKE algorithm ids (RFC 9180). Only carried, never executed: payload
// sealing is an injected function, not real cryptography.
inline constexpr std::uint16_t kKemX25519HkdfSha256 = 0x0020;
inline constexpr std::uint16_t kKdfHkdfSha256 = 0x0001;
inline constexpr std::uint16_t kAeadAes128Gcm = 0x0001;

struct EchCipherSuite {
    std::uint16_t kdf_id = kKdfHkdfSha256;
    std::uint16_t aead_id = kAeadAes128Gcm;

    bool operator==(const EchCipherSuite&) const = default;
};

// One entry of an ECHConfigList. Configs with an unknown version are
// retained opaquely: only `version` and `opaque_contents` are meaningful.
struct EchConfig {
    std::uint16_t version = kEchConfigVersion;
    std::uint8_t config_id = 0;
    std::uint16_t kem_id = kKemX25519HkdfSha256;
    Bytes public_key;
    std::vector<EchCipherSuite> cipher_suites{EchCipherSuite{}};
    std::uint8_t max_name_length = 0;
    std::string public_name;  // the fronting server's innocuous name
    Bytes extensions;         // raw config extension block, kept verbatim
    Bytes opaque_contents;

    bool is_opaque() const { return version != kEchConfigVersion; }
    bool operator==(const EchConfig&) const = default;
};

enum class EchVariant : std::uint8_t { outer = 0, inner = 1 };

// Body of the encrypted_client_hello extension. The outer variant carries
// the HPKE suite, config selector, encapsulated share and sealed payload;
// the inner variant is the empty marker.
struct EchExtension {
    EchVariant variant = EchVariant::outer;
    EchCipherSuite cipher_suite;
    std::uint8_t config_id = 0;
    Bytes enc;
    Bytes payload;

    bool operator==(const EchExtension&) const = default;
};

EchExtension parse_ech_extension(BytesView body);
Bytes serialize_ech_extension(const EchExtension& ext);

// Parses the value of an HTTPS-RR "ech" parameter (an ECHConfigList).
// Throws ParseError{empty_list} for a zero-length list and
// ParseError{malformed} on length inconsistencies or duplicate config ids.
std::vector<EchConfig> parse_ech_config_list(BytesView bytes);
Bytes serialize_ech_config_list(const std::vector<EchConfig>& configs);

// One DNS HTTPS/SVCB record as published for ECH key distribution.
struct DnsEchRecord {
    std::string name;         // owner name the record was published under
    std::string target_name;  // SVCB TargetName; equals `name` when "."
    std::uint32_t ttl = 0;
    std::uint16_t priority = 0;
    std::vector<std::string> ip_hints;  // ipv4hint / ipv6hint values, in order
    std::vector<EchConfig> ech_config_list;

    bool advertises_ech() const { return !ech_config_list.empty(); }
};

// Record file grammar, one record per line:
//
//   name TTL [IN] HTTPS priority target [key[=value]]...
//
// with '#' and ';' line comments, the ech value base64-encoded, and
// ipv4hint/ipv6hint values comma-separated. Unknown keys are ignored.
// Throws DataError naming the path and line on any malformed record.
std::vector<DnsEchRecord> parse_dns_records(std::istream& in, const std::string& path_for_errors);
std::vector<DnsEchRecord> load_dns_records(const std::string& path);

// Maps (server public key, plaintext) to the sealed payload bytes.
// Stands in for HPKE; must be reentrant.
using Sealer = std::function<Bytes(BytesView public_key, BytesView plaintext)>;

// Test-grade sealers. identity_sealer reveals the plaintext (useful as a
// fixture); scramble_sealer is a deterministic byte permutation that hides
// every plaintext subsequence.
Bytes identity_sealer(BytesView public_key, BytesView plaintext);
Bytes scramble_sealer(BytesView public_key, BytesView plaintext);

enum class EchFault { no_inner_sni, sealer_failure };

class EchError : public std::runtime_error {
public:
    EchError(EchFault fault, const std::string& what)
        : std::runtime_error(what), fault_(fault) {}

    EchFault fault() const { return fault_; }

private:
    EchFault fault_;
};

// Wraps `inner` into an outer ClientHello: the outer SNI becomes the
// config's public_name, outer ALPN is reduced to innocuous defaults, and
// the serialized inner hello is sealed into the ECH extension payload.
// The result advertises TLS 1.3 and is deterministic for fixed inputs.
// Throws EchError{no_inner_sni} when `inner` has no SNI to protect and
// EchError{sealer_failure} when the sealer throws or returns no bytes.
tls::TlsClientHello build_outer_client_hello(const tls::TlsClientHello& inner,
                                             const EchConfig& config,
                                             const Sealer& sealer);

struct EchDetection {
    bool present = false;                   // an ECH-typed extension exists
    std::optional<EchExtension> extension;  // parsed body when well-formed
};

// Reports whether the hello carries the ECH extension type. A GREASE ECH
// extension is reported as present; it is indistinguishable on the wire.
EchDetection detect_ech(const tls::TlsClientHello& hello);

} // namespace echoscope::ech
