// classify.hpp
//
// Flow-role classification (primary / side / unknown) and SNI-profile
// service association.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "echoscope/capture.hpp"

namespace echoscope::classify {

// SNI match set for one service. Patterns are lowercase, either an exact
// host or a ".domain.tld" suffix; within a loaded profile set no pattern
// may shadow another, so any host matches at most one service.
struct ServiceProfile {
    std::string service_name;
    std::vector<std::string> sni_patterns;
    std::string notes;

    bool operator==(const ServiceProfile&) const = default;
};

class ProfileError : public std::runtime_error {
public:
    explicit ProfileError(const std::string& what) : std::runtime_error(what) {}
};

// Lowercases, strips an http(s):// scheme, any path suffix and a trailing
// dot. Applied to patterns at load time and to SNIs before matching.
std::string normalize_host(std::string_view raw);

bool pattern_matches(std::string_view pattern, std::string_view host);

// Throws ProfileError on empty pattern lists or ambiguous (overlapping)
// patterns, within one profile or across profiles.
void validate_profiles(const std::vector<ServiceProfile>& profiles);

// JSON array of {service, sni_patterns, notes?}; validated on load.
std::vector<ServiceProfile> load_profiles(const std::string& path);

struct ServiceMatch {
    std::string service;
    std::string pattern;
};

std::optional<ServiceMatch> match_service(std::string_view sni,
                                          const std::vector<ServiceProfile>& profiles);

// As match_service, name only (total: absent when nothing matches).
std::optional<std::string> associate_service(std::string_view sni,
                                             const std::vector<ServiceProfile>& profiles);

struct ClassifierConfig {
    std::uint64_t primary_volume_threshold = 1 << 20;  // 1 MiB
    std::uint64_t side_volume_ceiling = 256 << 10;     // 256 KiB
    double session_length_threshold = 60.0;            // seconds
    std::vector<ServiceProfile> profiles;

    // side_volume_ceiling < primary_volume_threshold, all positive.
    void validate() const;
};

enum class Role { primary, side, unknown };

const char* to_string(Role role);

enum class EvidenceKind {
    volume_above_threshold,
    session_length_above_threshold,
    sni_matched,
    ech_opaque,
    low_volume,
};

const char* to_string(EvidenceKind kind);

struct Evidence {
    EvidenceKind kind;
    std::string pattern;  // the matched pattern for sni_matched, else empty

    bool operator==(const Evidence&) const = default;
};

struct ChannelClassification {
    std::size_t flow_index = 0;
    capture::FlowKey key;
    Role role = Role::unknown;
    std::optional<std::string> service;
    std::vector<Evidence> evidence;

    bool has_evidence(EvidenceKind kind) const;

    bool operator==(const ChannelClassification&) const = default;
};

// Per-flow decision procedure:
//   1. readable SNI matching a profile -> side (the curated host lists are
//      side channels by construction); skipped for ECH-opaque flows, whose
//      visible SNI is the innocuous outer name;
//   2. else volume >= primary threshold, or volume >= side ceiling with a
//      long session -> primary;
//   3. else volume <= side ceiling -> side (low volume);
//   4. else unknown.
// ECH-opaque flows carry ech_opaque evidence on top of whatever role the
// volume rules assign.
std::vector<ChannelClassification> classify_flows(const std::vector<capture::FlowRecord>& flows,
                                                  const ClassifierConfig& cfg);

struct ServiceGroup {
    std::vector<std::size_t> side_flows;
    // Primary flows whose [first_ts, last_ts] interval overlaps one of the
    // service's side flows. Time overlap is circumstantial evidence only.
    std::vector<std::size_t> candidate_primary_flows;

    bool operator==(const ServiceGroup&) const = default;
};

inline constexpr const char* kAssociationLabel = "circumstantial";

std::map<std::string, ServiceGroup> group_by_service(
    const std::vector<ChannelClassification>& classifications,
    const std::vector<capture::FlowRecord>& flows);

// Everything downstream stages need per flow; round-trips through the
// classification report file.
struct FlowSummary {
    capture::FlowKey key;
    double first_ts = 0.0;
    double last_ts = 0.0;
    std::optional<std::string> sni;  // normalized
    bool full_ech = false;
    Role role = Role::unknown;
    std::optional<std::string> service;
    std::vector<Evidence> evidence;

    bool operator==(const FlowSummary&) const = default;
};

struct ClassifiedCapture {
    std::vector<FlowSummary> flows;
    std::map<std::string, ServiceGroup> services;

    bool operator==(const ClassifiedCapture&) const = default;
};

ClassifiedCapture classify_capture(const std::vector<capture::FlowRecord>& flows,
                                   const ClassifierConfig& cfg);

std::string report_to_json(const ClassifiedCapture& report);
ClassifiedCapture report_from_json(const std::string& text, const std::string& path_for_errors);
void save_report(const ClassifiedCapture& report, const std::string& path);
ClassifiedCapture load_report(const std::string& path);

} // namespace echoscope::classify
