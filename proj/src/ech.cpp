// ech.cpp

#include "echoscope/ech.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "echoscope/tls_wire.hpp"

namespace echoscope::ech {

// ECHClientHello (draft-ietf-tls-esni):
//   type(1); outer: cipher_suite(4), config_id(1), enc<2>, payload<2>
EchExtension parse_ech_extension(BytesView body) {
    ByteReader r(body);
    EchExtension ext;
    std::uint8_t variant = r.u8();
    if (variant == static_cast<std::uint8_t>(EchVariant::inner)) {
        ext.variant = EchVariant::inner;
        if (!r.empty()) {
            throw ParseError(ParseCode::malformed, r.offset(), "ech: inner variant carries data");
        }
        ext.cipher_suite = EchCipherSuite{0, 0};
        return ext;
    }
    if (variant != static_cast<std::uint8_t>(EchVariant::outer)) {
        throw ParseError(ParseCode::malformed, 0, "ech: unknown variant");
    }
    ext.variant = EchVariant::outer;
    ext.cipher_suite.kdf_id = r.u16();
    ext.cipher_suite.aead_id = r.u16();
    ext.config_id = r.u8();
    ext.enc = r.copy(r.u16());
    ext.payload = r.copy(r.u16());
    if (ext.payload.empty()) {
        throw ParseError(ParseCode::malformed, r.offset(), "ech: outer payload is empty");
    }
    if (!r.empty()) {
        throw ParseError(ParseCode::trailing_bytes, r.offset(), "ech: trailing bytes");
    }
    return ext;
}

Bytes serialize_ech_extension(const EchExtension& ext) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(ext.variant));
    if (ext.variant == EchVariant::inner) return w.take();
    w.u16(ext.cipher_suite.kdf_id);
    w.u16(ext.cipher_suite.aead_id);
    w.u8(ext.config_id);
    w.u16(static_cast<std::uint16_t>(ext.enc.size()));
    w.raw(ext.enc);
    w.u16(static_cast<std::uint16_t>(ext.payload.size()));
    w.raw(ext.payload);
    return w.take();
}

namespace {

// ECHConfigContents for version 0xfe0d:
//   config_id(1), kem_id(2), public_key<2>, cipher_suites<2>,
//   maximum_name_length(1), public_name<1>, extensions<2>
EchConfig parse_config_contents(ByteReader contents) {
    EchConfig cfg;
    cfg.config_id = contents.u8();
    cfg.kem_id = contents.u16();
    cfg.public_key = contents.copy(contents.u16());
    if (cfg.public_key.empty()) {
        throw ParseError(ParseCode::malformed, contents.offset(), "ech config: empty public_key");
    }
    std::uint16_t suites_len = contents.u16();
    if (suites_len == 0 || suites_len % 4 != 0) {
        throw ParseError(ParseCode::malformed, contents.offset(), "ech config: bad cipher_suites length");
    }
    cfg.cipher_suites.clear();
    ByteReader suites = contents.sub(suites_len);
    while (!suites.empty()) {
        EchCipherSuite suite;
        suite.kdf_id = suites.u16();
        suite.aead_id = suites.u16();
        cfg.cipher_suites.push_back(suite);
    }
    cfg.max_name_length = contents.u8();
    cfg.public_name = contents.str(contents.u8());
    if (cfg.public_name.empty() || !is_printable_ascii(cfg.public_name)) {
        throw ParseError(ParseCode::malformed, contents.offset(),
                         "ech config: public_name empty or not ASCII");
    }
    cfg.extensions = contents.copy(contents.u16());
    if (!contents.empty()) {
        throw ParseError(ParseCode::trailing_bytes, contents.offset(), "ech config: trailing bytes");
    }
    return cfg;
}

} // namespace

std::vector<EchConfig> parse_ech_config_list(BytesView bytes) {
    if (bytes.empty()) {
        throw ParseError(ParseCode::empty_list, 0, "ech config list: no bytes");
    }
    ByteReader r(bytes);
    std::uint16_t total = r.u16();
    if (total == 0) {
        throw ParseError(ParseCode::empty_list, 0, "ech config list: zero-length list");
    }
    if (total != r.remaining()) {
        throw ParseError(ParseCode::malformed, r.offset(),
                         "ech config list: length disagrees with input");
    }
    std::vector<EchConfig> configs;
    std::set<std::uint8_t> seen_ids;
    while (!r.empty()) {
        std::uint16_t version = r.u16();
        ByteReader contents = r.sub(r.u16());
        if (version == kEchConfigVersion) {
            EchConfig cfg = parse_config_contents(contents);
            cfg.version = version;
            if (!seen_ids.insert(cfg.config_id).second) {
                throw ParseError(ParseCode::malformed, contents.offset(),
                                 "ech config list: duplicate config_id");
            }
            configs.push_back(std::move(cfg));
        } else {
            EchConfig cfg;
            cfg.version = version;
            cfg.cipher_suites.clear();
            cfg.opaque_contents = contents.copy(contents.remaining());
            configs.push_back(std::move(cfg));
        }
    }
    return configs;
}

Bytes serialize_ech_config_list(const std::vector<EchConfig>& configs) {
    ByteWriter w;
    w.length_prefixed(2, [&](ByteWriter& list) {
        for (const EchConfig& cfg : configs) {
            list.u16(cfg.version);
            list.length_prefixed(2, [&](ByteWriter& c) {
                if (cfg.is_opaque()) {
                    c.raw(cfg.opaque_contents);
                    return;
                }
                c.u8(cfg.config_id);
                c.u16(cfg.kem_id);
                c.u16(static_cast<std::uint16_t>(cfg.public_key.size()));
                c.raw(cfg.public_key);
                c.u16(static_cast<std::uint16_t>(cfg.cipher_suites.size() * 4));
                for (const EchCipherSuite& suite : cfg.cipher_suites) {
                    c.u16(suite.kdf_id);
                    c.u16(suite.aead_id);
                }
                c.u8(cfg.max_name_length);
                c.u8(static_cast<std::uint8_t>(cfg.public_name.size()));
                c.str(cfg.public_name);
                c.u16(static_cast<std::uint16_t>(cfg.extensions.size()));
                c.raw(cfg.extensions);
            });
        }
    });
    return w.take();
}

namespace {

std::string strip_trailing_dot(std::string name) {
    if (!name.empty() && name.back() == '.') name.pop_back();
    return name;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

} // namespace

std::vector<DnsEchRecord> parse_dns_records(std::istream& in, const std::string& path_for_errors) {
    std::vector<DnsEchRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string::size_type comment = line.find_first_of("#;");
        if (comment != std::string::npos) line.erase(comment);

        std::istringstream tokens(line);
        std::vector<std::string> toks;
        std::string tok;
        while (tokens >> tok) toks.push_back(tok);
        if (toks.empty()) continue;

        auto fail = [&](const std::string& msg) -> void {
            throw DataError(path_for_errors, lineno, msg);
        };

        if (toks.size() < 5) fail("expected: name TTL [IN] HTTPS priority target [params]");
        DnsEchRecord rec;
        rec.name = strip_trailing_dot(ascii_lower(toks[0]));
        try {
            rec.ttl = static_cast<std::uint32_t>(std::stoul(toks[1]));
        } catch (const std::exception&) {
            fail("TTL is not a number: " + toks[1]);
        }
        std::size_t at = 2;
        if (ascii_lower(toks[at]) == "in") ++at;
        if (ascii_lower(toks[at]) != "https") fail("record type must be HTTPS, got " + toks[at]);
        ++at;
        if (at + 2 > toks.size()) fail("missing priority/target");
        try {
            rec.priority = static_cast<std::uint16_t>(std::stoul(toks[at]));
        } catch (const std::exception&) {
            fail("priority is not a number: " + toks[at]);
        }
        ++at;
        std::string target = strip_trailing_dot(ascii_lower(toks[at]));
        rec.target_name = target.empty() ? rec.name : target;
        ++at;

        for (; at < toks.size(); ++at) {
            std::string::size_type eq = toks[at].find('=');
            std::string key = ascii_lower(eq == std::string::npos ? toks[at] : toks[at].substr(0, eq));
            std::string value = eq == std::string::npos ? std::string() : toks[at].substr(eq + 1);
            if (key == "ech") {
                Bytes raw;
                try {
                    raw = base64_decode(value);
                } catch (const std::exception& e) {
                    fail(std::string("ech value is not base64: ") + e.what());
                }
                try {
                    rec.ech_config_list = parse_ech_config_list(raw);
                } catch (const ParseError& e) {
                    fail(std::string("ech config list: ") + e.what());
                }
            } else if (key == "ipv4hint" || key == "ipv6hint") {
                for (std::string& hint : split(value, ',')) {
                    if (!hint.empty()) rec.ip_hints.push_back(std::move(hint));
                }
            }
            // other SvcParams are irrelevant here and skipped
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<DnsEchRecord> load_dns_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path, 0, "cannot open file");
    return parse_dns_records(in, path);
}

Bytes identity_sealer(BytesView, BytesView plaintext) {
    return Bytes(plaintext.begin(), plaintext.end());
}

Bytes scramble_sealer(BytesView public_key, BytesView plaintext) {
    // Reverse + xor with a key-derived stream: deterministic, reversible
    // nowhere, and no plaintext subsequence survives.
    Bytes out(plaintext.rbegin(), plaintext.rend());
    std::uint8_t k = 0xa7;
    for (std::uint8_t b : public_key) k = static_cast<std::uint8_t>(k * 31 + b);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] ^= static_cast<std::uint8_t>(k + i * 13);
    }
    return out;
}

tls::TlsClientHello build_outer_client_hello(const tls::TlsClientHello& inner,
                                             const EchConfig& config,
                                             const Sealer& sealer) {
    if (!inner.sni) {
        throw EchError(EchFault::no_inner_sni, "inner hello has no SNI to protect");
    }

    Bytes inner_bytes = tls::serialize_client_hello(inner);
    Bytes payload;
    try {
        payload = sealer(config.public_key, inner_bytes);
    } catch (const std::exception& e) {
        throw EchError(EchFault::sealer_failure, std::string("sealer threw: ") + e.what());
    }
    if (payload.empty()) {
        throw EchError(EchFault::sealer_failure, "sealer returned no bytes");
    }

    EchExtension ext;
    ext.variant = EchVariant::outer;
    ext.cipher_suite = config.cipher_suites.empty() ? EchCipherSuite{} : config.cipher_suites.front();
    ext.config_id = config.config_id;
    // Stand-in for the KEM encapsulation: derived from the public key so
    // construction stays deterministic.
    ext.enc.resize(32);
    for (std::size_t i = 0; i < ext.enc.size(); ++i) {
        std::uint8_t src = config.public_key.empty()
                               ? std::uint8_t(0)
                               : config.public_key[(i * 7 + 3) % config.public_key.size()];
        ext.enc[i] = static_cast<std::uint8_t>(src ^ (0x33 + i));
    }
    ext.payload = std::move(payload);

    std::array<std::uint8_t, 32> outer_random{};
    for (std::size_t i = 0; i < outer_random.size(); ++i) {
        outer_random[i] = static_cast<std::uint8_t>(inner.random[31 - i] ^ 0xa5);
    }

    tls::ClientHelloBuilder builder;
    builder.legacy_version(inner.legacy_version)
        .random(outer_random)
        .session_id(inner.session_id)
        .cipher_suites(inner.cipher_suites)
        .compression_methods(inner.compression_methods)
        .sni(config.public_name)
        .supported_versions({tls::kTls13})
        .key_share_groups(inner.key_share_groups.empty() ? std::vector<std::uint16_t>{0x001d}
                                                         : inner.key_share_groups)
        .ech(ext);
    if (inner.alpn) builder.alpn({"h2", "http/1.1"});
    return builder.build();
}

EchDetection detect_ech(const tls::TlsClientHello& hello) {
    EchDetection detection;
    for (const tls::Extension& ext : hello.extensions) {
        if (ext.type == kEchExtensionType) {
            detection.present = true;
            try {
                detection.extension = parse_ech_extension(ext.data);
            } catch (const ParseError&) {
                detection.extension.reset();
            }
            break;
        }
    }
    return detection;
}

} // namespace echoscope::ech
