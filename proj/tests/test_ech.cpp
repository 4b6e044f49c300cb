// test_ech.cpp

#include "doctest.h"

#include <algorithm>
#include <random>
#include <sstream>

#include "echoscope/ech.hpp"
#include "echoscope/tls_wire.hpp"
#include "support/hello_gen.hpp"

using namespace echoscope;
using namespace echoscope::ech;
using echoscope::testsupport::sample_ech_config;

namespace {

bool contains_subsequence(BytesView haystack, const std::string& needle) {
    if (needle.empty()) return true;
    auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end());
    return it != haystack.end();
}

} // namespace

TEST_CASE("ech config list round-trips through the serializer") {
    EchConfig config = sample_ech_config(7, "cdn.example");
    Bytes bytes = serialize_ech_config_list({config});
    std::vector<EchConfig> parsed = parse_ech_config_list(bytes);
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0] == config);
    CHECK(parsed[0].config_id == 7);
    CHECK(serialize_ech_config_list(parsed) == bytes);
}

TEST_CASE("zero-length config list is the empty error") {
    try {
        parse_ech_config_list(Bytes{0x00, 0x00});
        FAIL("expected empty_list");
    } catch (const ParseError& e) {
        CHECK(e.code() == ParseCode::empty_list);
    }
    CHECK_THROWS_AS(parse_ech_config_list(Bytes{}), ParseError);
}

TEST_CASE("two configs keep their order and distinct ids") {
    EchConfig first = sample_ech_config(1, "front-a.example");
    EchConfig second = sample_ech_config(2, "front-b.example");
    second.cipher_suites.push_back(EchCipherSuite{0x0002, 0x0002});
    std::vector<EchConfig> parsed =
        parse_ech_config_list(serialize_ech_config_list({first, second}));
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0] == first);
    CHECK(parsed[1] == second);
}

TEST_CASE("duplicate config ids are malformed") {
    Bytes bytes =
        serialize_ech_config_list({sample_ech_config(5, "a.example"), sample_ech_config(5, "b.example")});
    CHECK_THROWS_AS(parse_ech_config_list(bytes), ParseError);
}

TEST_CASE("unknown config versions are retained opaquely") {
    EchConfig strange;
    strange.version = 0xfe09;
    strange.cipher_suites.clear();
    strange.opaque_contents = Bytes{0x01, 0x02, 0x03, 0x04};
    EchConfig known = sample_ech_config(9, "cdn.example");

    Bytes bytes = serialize_ech_config_list({strange, known});
    std::vector<EchConfig> parsed = parse_ech_config_list(bytes);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].is_opaque());
    CHECK(parsed[0].opaque_contents == strange.opaque_contents);
    CHECK(parsed[1] == known);
    CHECK(serialize_ech_config_list(parsed) == bytes);
}

TEST_CASE("length inconsistencies in the list are malformed") {
    Bytes bytes = serialize_ech_config_list({sample_ech_config(3, "cdn.example")});
    // drop two bytes; the list header still claims the full length
    Bytes short_list(bytes.begin(), bytes.end() - 2);
    CHECK_THROWS_AS(parse_ech_config_list(short_list), ParseError);

    Bytes trailing = bytes;
    trailing.push_back(0x00);
    CHECK_THROWS_AS(parse_ech_config_list(trailing), ParseError);
}

TEST_CASE("outer extension body round-trips") {
    EchExtension ext;
    ext.variant = EchVariant::outer;
    ext.cipher_suite = EchCipherSuite{0x0001, 0x0003};
    ext.config_id = 42;
    ext.enc = Bytes{0x11, 0x22, 0x33};
    ext.payload = Bytes(50, 0xab);
    Bytes body = serialize_ech_extension(ext);
    CHECK(parse_ech_extension(body) == ext);

    EchExtension inner;
    inner.variant = EchVariant::inner;
    inner.cipher_suite = EchCipherSuite{0, 0};
    CHECK(serialize_ech_extension(inner) == Bytes{0x01});
    CHECK(parse_ech_extension(Bytes{0x01}) == inner);
}

TEST_CASE("outer hello hides the inner SNI") {
    tls::TlsClientHello inner = tls::ClientHelloBuilder()
                                    .sni("service.hotstar.com")
                                    .alpn({"h2"})
                                    .supported_versions({tls::kTls13})
                                    .key_share_groups({0x001d})
                                    .build();
    EchConfig config = sample_ech_config(7, "cdn.example");
    tls::TlsClientHello outer = build_outer_client_hello(inner, config, scramble_sealer);

    CHECK(outer.sni == "cdn.example");
    CHECK(outer.effective_version() == tls::TlsVersion::v1_3);
    REQUIRE(outer.ech.has_value());
    CHECK(outer.ech->variant == EchVariant::outer);
    CHECK(outer.ech->config_id == 7);

    Bytes wire = tls::serialize_client_hello(outer);
    CHECK_FALSE(contains_subsequence(wire, "service.hotstar.com"));
    CHECK(contains_subsequence(wire, "cdn.example"));
}

TEST_CASE("identity sealer exposes the serialized inner hello verbatim") {
    tls::TlsClientHello inner = tls::ClientHelloBuilder().sni("real.example").build();
    EchConfig config = sample_ech_config();
    tls::TlsClientHello outer = build_outer_client_hello(inner, config, identity_sealer);
    REQUIRE(outer.ech.has_value());
    CHECK(outer.ech->payload == tls::serialize_client_hello(inner));
    // The test-only identity sealer is exactly the configuration the real
    // sealer exists to prevent:
    CHECK(contains_subsequence(tls::serialize_client_hello(outer), "real.example"));
}

TEST_CASE("an inner hello without SNI has nothing to protect") {
    tls::TlsClientHello inner = tls::ClientHelloBuilder().build();
    try {
        build_outer_client_hello(inner, sample_ech_config(), scramble_sealer);
        FAIL("expected no_inner_sni");
    } catch (const EchError& e) {
        CHECK(e.fault() == EchFault::no_inner_sni);
    }
}

TEST_CASE("sealer failures surface as such") {
    tls::TlsClientHello inner = tls::ClientHelloBuilder().sni("x.example").build();
    Sealer broken = [](BytesView, BytesView) -> Bytes { throw std::runtime_error("hpke down"); };
    CHECK_THROWS_AS(build_outer_client_hello(inner, sample_ech_config(), broken), EchError);
    Sealer empty = [](BytesView, BytesView) { return Bytes{}; };
    CHECK_THROWS_AS(build_outer_client_hello(inner, sample_ech_config(), empty), EchError);
}

TEST_CASE("detect_ech across the three shapes") {
    tls::TlsClientHello inner = tls::ClientHelloBuilder().sni("a.example").build();
    tls::TlsClientHello outer =
        build_outer_client_hello(inner, sample_ech_config(), scramble_sealer);
    CHECK(detect_ech(outer).present);
    CHECK(detect_ech(outer).extension.has_value());

    tls::TlsClientHello plain = tls::ClientHelloBuilder().sni("b.example").build();
    CHECK_FALSE(detect_ech(plain).present);

    tls::TlsClientHello opaque_exts = tls::ClientHelloBuilder()
                                          .sni("c.example")
                                          .raw_extension(0x0a0a, Bytes{0x00})
                                          .raw_extension(0x0017, Bytes{})
                                          .build();
    CHECK_FALSE(detect_ech(opaque_exts).present);
}

TEST_CASE("outer-hides-inner holds across random SNIs and sealed payloads") {
    std::mt19937_64 rng(1337);
    for (int i = 0; i < 300; ++i) {
        std::string host = testsupport::random_host(rng);
        tls::TlsClientHello inner = tls::ClientHelloBuilder()
                                        .sni(host)
                                        .supported_versions({tls::kTls13})
                                        .build();
        tls::TlsClientHello outer =
            build_outer_client_hello(inner, sample_ech_config(), scramble_sealer);
        Bytes wire = tls::serialize_client_hello(outer);
        CHECK_FALSE(contains_subsequence(wire, host));
        CHECK(detect_ech(outer).present);
    }
}

TEST_CASE("dns records parse the documented line grammar") {
    EchConfig config = sample_ech_config(4, "front.example");
    std::string armored = base64_encode(serialize_ech_config_list({config}));
    std::ostringstream file;
    file << "# published HTTPS records\n";
    file << "\n";
    file << "video.example. 3600 HTTPS 1 . alpn=h2,h3 ipv4hint=192.0.2.10,192.0.2.11 ech="
         << armored << "\n";
    file << "api.example 300 IN HTTPS 2 edge.front.example. port=8443 ; trailing comment\n";

    std::istringstream in(file.str());
    std::vector<DnsEchRecord> records = parse_dns_records(in, "records.txt");
    REQUIRE(records.size() == 2);

    CHECK(records[0].name == "video.example");
    CHECK(records[0].target_name == "video.example");  // "." points back at the owner
    CHECK(records[0].ttl == 3600);
    CHECK(records[0].priority == 1);
    CHECK(records[0].ip_hints == std::vector<std::string>{"192.0.2.10", "192.0.2.11"});
    REQUIRE(records[0].advertises_ech());
    CHECK(records[0].ech_config_list.size() == 1);
    CHECK(records[0].ech_config_list[0] == config);

    CHECK(records[1].name == "api.example");
    CHECK(records[1].target_name == "edge.front.example");
    CHECK(records[1].ttl == 300);
    CHECK_FALSE(records[1].advertises_ech());
}

TEST_CASE("the shipped record sample parses") {
    std::vector<DnsEchRecord> records = load_dns_records("testdata/ech_records.txt");
    REQUIRE(records.size() == 2);
    CHECK(records[0].name == "stream.hidden.example");
    REQUIRE(records[0].advertises_ech());
    CHECK(records[0].ech_config_list[0].public_name == "cdn.example");
    CHECK(records[0].ip_hints == std::vector<std::string>{"203.0.113.40"});
    CHECK_FALSE(records[1].advertises_ech());
    CHECK(records[1].target_name == "web.plain.example");
}

TEST_CASE("dns record errors name the file and line") {
    std::istringstream bad_ttl("host.example soon HTTPS 1 .\n");
    try {
        parse_dns_records(bad_ttl, "z.txt");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(e.path() == "z.txt");
        CHECK(e.position() == 1);
    }

    std::istringstream bad_ech("h.example 60 HTTPS 1 . ech=@@@@\n");
    CHECK_THROWS_AS(parse_dns_records(bad_ech, "z.txt"), DataError);

    std::istringstream bad_type("h.example 60 MX 1 .\n");
    CHECK_THROWS_AS(parse_dns_records(bad_type, "z.txt"), DataError);

    std::istringstream empty_ech("h.example 60 HTTPS 1 . ech=\n");
    CHECK_THROWS_AS(parse_dns_records(empty_ech, "z.txt"), DataError);
}
