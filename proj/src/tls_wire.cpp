// tls_wire.cpp

#include "echoscope/tls_wire.hpp"

#include <algorithm>

namespace echoscope::tls {

TlsVersion version_from_code(std::uint16_t code) {
    switch (code) {
        case kTls10: return TlsVersion::v1_0;
        case kTls11: return TlsVersion::v1_1;
        case kTls12: return TlsVersion::v1_2;
        case kTls13: return TlsVersion::v1_3;
        default: return TlsVersion::unknown;
    }
}

const char* to_string(TlsVersion v) {
    switch (v) {
        case TlsVersion::v1_0: return "1.0";
        case TlsVersion::v1_1: return "1.1";
        case TlsVersion::v1_2: return "1.2";
        case TlsVersion::v1_3: return "1.3";
        case TlsVersion::unknown: return "unknown";
    }
    return "unknown";
}

const char* to_string(PrivacyLevel level) {
    switch (level) {
        case PrivacyLevel::none: return "none";
        case PrivacyLevel::partial_tls13: return "partial-tls13";
        case PrivacyLevel::full_ech: return "full-ech";
    }
    return "none";
}

RecordType TlsRecord::type() const {
    switch (raw_content_type) {
        case kContentHandshake: return RecordType::handshake;
        case kContentApplicationData: return RecordType::application_data;
        case kContentAlert: return RecordType::alert;
        case kContentChangeCipherSpec: return RecordType::change_cipher_spec;
        default: return RecordType::other;
    }
}

bool plausible_record_header(BytesView bytes) {
    if (bytes.size() < 5) return false;
    if (bytes[1] != 0x03 || bytes[2] > 0x04) return false;
    std::size_t len = static_cast<std::size_t>(bytes[3]) << 8 | bytes[4];
    return len > 0 && len <= kMaxRecordPayload;
}

RecordParseResult parse_records(BytesView stream, bool resync) {
    RecordParseResult result;
    std::size_t pos = 0;

    if (resync) {
        while (pos < stream.size() && !plausible_record_header(stream.subspan(pos))) ++pos;
        if (pos == stream.size() && !stream.empty()) {
            result.consumed = 0;
            result.status = RecordStreamStatus::not_tls;
            return result;
        }
        result.consumed = pos;
    }

    while (pos < stream.size()) {
        BytesView rest = stream.subspan(pos);
        if (rest.size() < 5) {
            result.status = RecordStreamStatus::truncated;
            result.consumed = pos;
            return result;
        }
        // Unknown content types still frame as records (mapped to `other`);
        // only an implausible version/length stops the stream.
        if (rest[1] != 0x03 || rest[2] > 0x04) {
            if (pos == (resync ? result.consumed : 0) && result.records.empty()) {
                result.status = RecordStreamStatus::not_tls;
                result.consumed = pos;
                return result;
            }
            result.status = RecordStreamStatus::complete;
            result.consumed = pos;
            return result;
        }
        std::size_t len = static_cast<std::size_t>(rest[3]) << 8 | rest[4];
        if (len > kMaxRecordPayload) {
            if (result.records.empty()) {
                result.status = RecordStreamStatus::not_tls;
            }
            result.consumed = pos;
            return result;
        }
        if (rest.size() < 5 + len) {
            result.status = RecordStreamStatus::truncated;
            result.consumed = pos;
            return result;
        }
        TlsRecord rec;
        rec.raw_content_type = rest[0];
        rec.legacy_record_version = static_cast<std::uint16_t>(rest[1] << 8 | rest[2]);
        rec.payload.assign(rest.begin() + 5, rest.begin() + 5 + static_cast<std::ptrdiff_t>(len));
        rec.offset = pos;
        result.records.push_back(std::move(rec));
        pos += 5 + len;
    }
    result.consumed = pos;
    result.status = RecordStreamStatus::complete;
    return result;
}

namespace {

// server_name (RFC 6066): ServerNameList { ServerName { type(1), name<2> } }
std::string parse_sni_body(BytesView data, std::size_t base) {
    ByteReader r(data, base);
    ByteReader list = r.sub(r.u16());
    if (!r.empty()) throw ParseError(ParseCode::malformed, r.offset(), "server_name: trailing bytes");
    std::optional<std::string> host;
    while (!list.empty()) {
        std::uint8_t name_type = list.u8();
        std::string name = list.str(list.u16());
        if (name_type == 0) {
            if (host) {
                throw ParseError(ParseCode::malformed, list.offset(),
                                 "server_name: repeated host_name entry");
            }
            host = std::move(name);
        }
    }
    if (!host) throw ParseError(ParseCode::malformed, base, "server_name: no host_name entry");
    if (host->empty() || !is_printable_ascii(*host)) {
        throw ParseError(ParseCode::malformed, base, "server_name: host is empty or not ASCII");
    }
    return *host;
}

// ALPN (RFC 7301): ProtocolNameList<2> of opaque<1> names, none empty.
std::vector<std::string> parse_alpn_body(BytesView data, std::size_t base) {
    ByteReader r(data, base);
    ByteReader list = r.sub(r.u16());
    if (!r.empty()) throw ParseError(ParseCode::malformed, r.offset(), "alpn: trailing bytes");
    std::vector<std::string> protocols;
    while (!list.empty()) {
        std::string name = list.str(list.u8());
        if (name.empty()) throw ParseError(ParseCode::malformed, list.offset(), "alpn: empty protocol");
        protocols.push_back(std::move(name));
    }
    if (protocols.empty()) throw ParseError(ParseCode::malformed, base, "alpn: empty list");
    return protocols;
}

std::vector<std::uint16_t> parse_supported_versions_body(BytesView data, std::size_t base) {
    ByteReader r(data, base);
    ByteReader list = r.sub(r.u8());
    if (!r.empty()) {
        throw ParseError(ParseCode::malformed, r.offset(), "supported_versions: trailing bytes");
    }
    std::vector<std::uint16_t> versions;
    while (!list.empty()) versions.push_back(list.u16());
    if (versions.empty()) {
        throw ParseError(ParseCode::malformed, base, "supported_versions: empty list");
    }
    return versions;
}

// key_share (RFC 8446): KeyShareClientHello { KeyShareEntry<2> } where
// KeyShareEntry = { group(2), key_exchange<2> }. Only groups are kept.
std::vector<std::uint16_t> parse_key_share_body(BytesView data, std::size_t base) {
    ByteReader r(data, base);
    ByteReader list = r.sub(r.u16());
    if (!r.empty()) throw ParseError(ParseCode::malformed, r.offset(), "key_share: trailing bytes");
    std::vector<std::uint16_t> groups;
    while (!list.empty()) {
        groups.push_back(list.u16());
        list.skip(list.u16());
    }
    return groups;
}

bool is_derived_extension_type(std::uint16_t type) {
    return type == kExtServerName || type == kExtAlpn || type == kExtSupportedVersions ||
           type == kExtKeyShare || type == kExtPreSharedKey || type == ech::kEchExtensionType;
}

} // namespace

TlsClientHello parse_client_hello(BytesView message) {
    ByteReader r(message);
    if (r.remaining() < 1) throw ParseError(ParseCode::truncated, 0, "empty handshake message");
    std::uint8_t msg_type = r.u8();
    if (msg_type != kHandshakeClientHello) {
        throw ParseError(ParseCode::not_client_hello, 0,
                         "handshake type " + std::to_string(msg_type) + " is not ClientHello");
    }
    ByteReader body = r.sub(r.u24());
    if (!r.empty()) {
        throw ParseError(ParseCode::trailing_bytes, r.offset(),
                         "bytes after the ClientHello message");
    }

    TlsClientHello hello;
    hello.legacy_version = body.u16();
    auto rnd = body.bytes(32);
    std::copy(rnd.begin(), rnd.end(), hello.random.begin());
    std::uint8_t sid_len = body.u8();
    if (sid_len > 32) {
        throw ParseError(ParseCode::malformed, body.offset(), "session_id longer than 32 bytes");
    }
    hello.session_id = body.copy(sid_len);

    std::uint16_t suites_len = body.u16();
    if (suites_len % 2 != 0) {
        throw ParseError(ParseCode::malformed, body.offset(), "odd cipher_suites length");
    }
    ByteReader suites = body.sub(suites_len);
    while (!suites.empty()) hello.cipher_suites.push_back(suites.u16());

    hello.compression_methods = body.copy(body.u8());

    if (body.empty()) {
        hello.has_extensions_block = false;
        return hello;
    }
    hello.has_extensions_block = true;
    ByteReader exts = body.sub(body.u16());
    if (!body.empty()) {
        throw ParseError(ParseCode::trailing_bytes, body.offset(), "bytes after extension block");
    }

    while (!exts.empty()) {
        Extension ext;
        ext.type = exts.u16();
        std::size_t data_offset = exts.offset() + 2;
        ext.data = exts.copy(exts.u16());

        if (is_derived_extension_type(ext.type)) {
            for (const Extension& seen : hello.extensions) {
                if (seen.type == ext.type) {
                    throw ParseError(ParseCode::duplicate_extension, data_offset,
                                     "extension type " + std::to_string(ext.type) + " repeated");
                }
            }
        }
        switch (ext.type) {
            case kExtServerName:
                hello.sni = parse_sni_body(ext.data, data_offset);
                break;
            case kExtAlpn:
                hello.alpn = parse_alpn_body(ext.data, data_offset);
                break;
            case kExtSupportedVersions:
                hello.supported_versions = parse_supported_versions_body(ext.data, data_offset);
                break;
            case kExtKeyShare:
                hello.key_share_groups = parse_key_share_body(ext.data, data_offset);
                break;
            case kExtPreSharedKey:
                hello.pre_shared_key_present = true;
                break;
            case ech::kEchExtensionType:
                // A body that does not parse is kept opaque rather than
                // rejected: GREASE ECH is a first-class citizen here.
                try {
                    hello.ech = ech::parse_ech_extension(ext.data);
                } catch (const ParseError&) {
                    hello.ech.reset();
                }
                break;
            default:
                break;
        }
        hello.extensions.push_back(std::move(ext));
    }
    return hello;
}

Bytes serialize_client_hello(const TlsClientHello& hello) {
    ByteWriter body;
    body.u16(hello.legacy_version);
    body.raw(hello.random);
    body.u8(static_cast<std::uint8_t>(hello.session_id.size()));
    body.raw(hello.session_id);
    body.length_prefixed(2, [&](ByteWriter& w) {
        for (std::uint16_t suite : hello.cipher_suites) w.u16(suite);
    });
    body.u8(static_cast<std::uint8_t>(hello.compression_methods.size()));
    body.raw(hello.compression_methods);
    if (hello.has_extensions_block) {
        body.length_prefixed(2, [&](ByteWriter& w) {
            for (const Extension& ext : hello.extensions) {
                w.u16(ext.type);
                w.u16(static_cast<std::uint16_t>(ext.data.size()));
                w.raw(ext.data);
            }
        });
    }
    return write_handshake_message(kHandshakeClientHello, body.data());
}

std::uint16_t TlsClientHello::effective_version_code() const {
    if (!supported_versions) return legacy_version;
    std::uint16_t best = 0;
    for (std::uint16_t code : *supported_versions) {
        if (version_from_code(code) != TlsVersion::unknown && code > best) best = code;
    }
    return best;
}

TlsVersion TlsClientHello::effective_version() const {
    return version_from_code(effective_version_code());
}

namespace {

struct HandshakeMessage {
    std::uint8_t type = 0;
    Bytes body;
};

// Concatenates leading handshake-record payloads (stopping at the first
// non-handshake record, i.e. where encryption or alerts begin) and splits
// them into messages. A trailing partial message is dropped.
std::vector<HandshakeMessage> plaintext_handshake_messages(const std::vector<TlsRecord>& records) {
    Bytes stream;
    for (const TlsRecord& rec : records) {
        if (rec.type() != RecordType::handshake) break;
        stream.insert(stream.end(), rec.payload.begin(), rec.payload.end());
    }
    std::vector<HandshakeMessage> messages;
    ByteReader r(stream);
    while (r.remaining() >= 4) {
        HandshakeMessage msg;
        msg.type = r.u8();
        std::uint32_t len = r.u24();
        if (len > r.remaining()) break;
        msg.body = r.copy(len);
        messages.push_back(std::move(msg));
    }
    return messages;
}

} // namespace

TlsServerHello parse_server_hello(const std::vector<TlsRecord>& records) {
    std::vector<HandshakeMessage> messages = plaintext_handshake_messages(records);

    TlsServerHello sh;
    bool found = false;
    for (const HandshakeMessage& msg : messages) {
        if (msg.type == kHandshakeServerHello && !found) {
            ByteReader body(msg.body);
            sh.legacy_version = body.u16();
            body.skip(32);
            body.skip(body.u8());  // session_id echo
            sh.selected_cipher = body.u16();
            body.skip(1);  // compression method
            if (!body.empty()) {
                ByteReader exts = body.sub(body.u16());
                while (exts.remaining() >= 4) {
                    std::uint16_t type = exts.u16();
                    ByteReader data = exts.sub(exts.u16());
                    if (type == kExtSupportedVersions) {
                        sh.supported_versions_selected = data.u16();
                    } else if (type == kExtKeyShare && data.remaining() >= 2) {
                        sh.key_share_group = data.u16();
                    }
                }
            }
            found = true;
        } else if (msg.type == kHandshakeCertificate && found) {
            sh.certificate_in_clear = true;
        }
    }
    if (!found) {
        throw ParseError(ParseCode::no_server_hello, 0, "direction carries no ServerHello");
    }
    // A 1.3 certificate travels encrypted; a plain-text type-11 match there
    // can only be misframed ciphertext.
    if (version_from_code(sh.negotiated_version_code()) == TlsVersion::v1_3) {
        sh.certificate_in_clear = false;
    }
    return sh;
}

PrivacyAssessment assess_privacy(const TlsClientHello& ch,
                                 const std::optional<TlsServerHello>& sh) {
    PrivacyAssessment pa;
    pa.ech_present = ech::detect_ech(ch).present;
    pa.effective_version =
        sh ? version_from_code(sh->negotiated_version_code()) : ch.effective_version();
    // With ECH the visible SNI is the innocuous outer name, not the
    // server's identity.
    pa.sni_exposed = ch.sni.has_value() && !pa.ech_present;
    if (sh) {
        pa.certificate_exposed = sh->certificate_in_clear;
        pa.certificate_exposure_inferred = false;
    } else {
        pa.certificate_exposed = pa.effective_version != TlsVersion::v1_3 &&
                                 pa.effective_version != TlsVersion::unknown;
        pa.certificate_exposure_inferred = true;
    }
    if (pa.effective_version == TlsVersion::v1_3) {
        pa.privacy_level = pa.ech_present ? PrivacyLevel::full_ech : PrivacyLevel::partial_tls13;
    } else {
        pa.privacy_level = PrivacyLevel::none;
    }
    return pa;
}

Bytes write_record(std::uint8_t content_type, std::uint16_t version, BytesView payload) {
    ByteWriter w;
    w.u8(content_type);
    w.u16(version);
    w.u16(static_cast<std::uint16_t>(payload.size()));
    w.raw(payload);
    return w.take();
}

Bytes fragment_into_records(std::uint8_t content_type, std::uint16_t version,
                            BytesView payload, std::size_t max_fragment) {
    ByteWriter w;
    std::size_t pos = 0;
    do {
        std::size_t n = std::min(max_fragment, payload.size() - pos);
        w.raw(write_record(content_type, version, payload.subspan(pos, n)));
        pos += n;
    } while (pos < payload.size());
    return w.take();
}

Bytes write_handshake_message(std::uint8_t handshake_type, BytesView body) {
    ByteWriter w;
    w.u8(handshake_type);
    w.u24(static_cast<std::uint32_t>(body.size()));
    w.raw(body);
    return w.take();
}

Bytes encode_sni_extension(std::string_view host) {
    ByteWriter w;
    w.length_prefixed(2, [&](ByteWriter& list) {
        list.u8(0);  // host_name
        list.u16(static_cast<std::uint16_t>(host.size()));
        list.str(host);
    });
    return w.take();
}

Bytes encode_alpn_extension(const std::vector<std::string>& protocols) {
    ByteWriter w;
    w.length_prefixed(2, [&](ByteWriter& list) {
        for (const std::string& p : protocols) {
            list.u8(static_cast<std::uint8_t>(p.size()));
            list.str(p);
        }
    });
    return w.take();
}

Bytes encode_supported_versions_extension(const std::vector<std::uint16_t>& versions) {
    ByteWriter w;
    w.length_prefixed(1, [&](ByteWriter& list) {
        for (std::uint16_t v : versions) list.u16(v);
    });
    return w.take();
}

Bytes encode_key_share_extension(const std::vector<std::uint16_t>& groups) {
    ByteWriter w;
    w.length_prefixed(2, [&](ByteWriter& list) {
        for (std::uint16_t g : groups) {
            list.u16(g);
            // Synthetic key-exchange bytes; the parser only keeps groups.
            list.length_prefixed(2, [&](ByteWriter& kx) {
                for (int i = 0; i < 16; ++i) {
                    kx.u8(static_cast<std::uint8_t>(g >> 8));
                    kx.u8(static_cast<std::uint8_t>(g));
                }
            });
        }
    });
    return w.take();
}

Bytes encode_pre_shared_key_extension() {
    ByteWriter w;
    // identities: one opaque identity with zero obfuscated ticket age
    w.length_prefixed(2, [&](ByteWriter& ids) {
        static const char identity[] = "resumption-ticket";
        ids.u16(sizeof(identity) - 1);
        ids.str(identity);
        ids.u32(0);
    });
    // binders: one 32-byte placeholder binder
    w.length_prefixed(2, [&](ByteWriter& binders) {
        binders.u8(32);
        for (int i = 0; i < 32; ++i) binders.u8(0xbd);
    });
    return w.take();
}

ClientHelloBuilder& ClientHelloBuilder::legacy_version(std::uint16_t v) {
    legacy_version_ = v;
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::random(const std::array<std::uint8_t, 32>& r) {
    random_ = r;
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::session_id(Bytes id) {
    session_id_ = std::move(id);
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::cipher_suites(std::vector<std::uint16_t> suites) {
    cipher_suites_ = std::move(suites);
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::compression_methods(Bytes methods) {
    compression_methods_ = std::move(methods);
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::sni(std::string host) {
    sni_ = std::move(host);
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::alpn(std::vector<std::string> protocols) {
    alpn_ = std::move(protocols);
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::supported_versions(std::vector<std::uint16_t> versions) {
    supported_versions_ = std::move(versions);
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::key_share_groups(std::vector<std::uint16_t> groups) {
    key_share_groups_ = std::move(groups);
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::pre_shared_key() {
    pre_shared_key_ = true;
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::ech(const ech::EchExtension& ext) {
    ech_ = ext;
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::raw_extension(std::uint16_t type, Bytes data) {
    raw_extensions_.push_back(Extension{type, std::move(data)});
    return *this;
}

ClientHelloBuilder& ClientHelloBuilder::no_extensions_block() {
    extensions_block_ = false;
    return *this;
}

Bytes ClientHelloBuilder::build_message() const {
    ByteWriter body;
    body.u16(legacy_version_);
    body.raw(random_);
    body.u8(static_cast<std::uint8_t>(session_id_.size()));
    body.raw(session_id_);
    body.length_prefixed(2, [&](ByteWriter& w) {
        for (std::uint16_t suite : cipher_suites_) w.u16(suite);
    });
    body.u8(static_cast<std::uint8_t>(compression_methods_.size()));
    body.raw(compression_methods_);
    if (extensions_block_) {
        body.length_prefixed(2, [&](ByteWriter& w) {
            auto put = [&w](std::uint16_t type, const Bytes& data) {
                w.u16(type);
                w.u16(static_cast<std::uint16_t>(data.size()));
                w.raw(data);
            };
            if (sni_) put(kExtServerName, encode_sni_extension(*sni_));
            if (alpn_) put(kExtAlpn, encode_alpn_extension(*alpn_));
            if (key_share_groups_) put(kExtKeyShare, encode_key_share_extension(*key_share_groups_));
            if (supported_versions_) {
                put(kExtSupportedVersions, encode_supported_versions_extension(*supported_versions_));
            }
            if (ech_) put(ech::kEchExtensionType, ech::serialize_ech_extension(*ech_));
            for (const Extension& ext : raw_extensions_) put(ext.type, ext.data);
            // pre_shared_key must come last (RFC 8446, 4.2.11)
            if (pre_shared_key_) put(kExtPreSharedKey, encode_pre_shared_key_extension());
        });
    }
    return write_handshake_message(kHandshakeClientHello, body.data());
}

TlsClientHello ClientHelloBuilder::build() const {
    return parse_client_hello(build_message());
}

} // namespace echoscope::tls
