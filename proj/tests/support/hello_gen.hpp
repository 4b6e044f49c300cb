// hello_gen.hpp
//
// Seeded random ClientHello generation for property tests: well-formed
// messages with GREASE values, unknown extensions and optional ECH, with
// the extension order shuffled at the byte level.

#pragma once

#include <random>
#include <string>

#include "echoscope/ech.hpp"
#include "echoscope/tls_wire.hpp"

namespace echoscope::testsupport {

using Rng = std::mt19937_64;

struct HelloGenOptions {
    double sni_probability = 0.8;
    double ech_probability = 0.3;
    double supported_versions_probability = 0.7;
    bool grease = true;
};

std::string random_host(Rng& rng);

// A serialized, parseable ClientHello handshake message.
Bytes random_hello_message(Rng& rng, const HelloGenOptions& options = {});

ech::EchConfig sample_ech_config(std::uint8_t config_id = 7,
                                 const std::string& public_name = "cdn.example");

} // namespace echoscope::testsupport
