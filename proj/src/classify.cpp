// classify.cpp

#include "echoscope/classify.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace echoscope::classify {

using nlohmann::ordered_json;

std::string normalize_host(std::string_view raw) {
    std::string host = ascii_lower(raw);
    for (std::string_view scheme : {"https://", "http://"}) {
        if (host.starts_with(scheme)) {
            host.erase(0, scheme.size());
            break;
        }
    }
    if (auto slash = host.find('/'); slash != std::string::npos) host.erase(slash);
    while (!host.empty() && host.back() == '.') host.pop_back();
    return host;
}

bool pattern_matches(std::string_view pattern, std::string_view host) {
    if (pattern.empty()) return false;
    // Suffix patterns match strict subdomains only: ".x.y" matches "a.x.y"
    // but not "x.y" itself.
    if (pattern.front() == '.') return host.size() > pattern.size() && host.ends_with(pattern);
    return host == pattern;
}

namespace {

// Two patterns overlap when some host can match both.
bool patterns_overlap(const std::string& p, const std::string& q) {
    if (p == q) return true;
    bool p_suffix = !p.empty() && p.front() == '.';
    bool q_suffix = !q.empty() && q.front() == '.';
    if (p_suffix && q_suffix) return p.ends_with(q) || q.ends_with(p);
    if (p_suffix) return q.ends_with(p);  // exact q is covered by suffix p
    if (q_suffix) return p.ends_with(q);
    return false;
}

} // namespace

void validate_profiles(const std::vector<ServiceProfile>& profiles) {
    for (const ServiceProfile& profile : profiles) {
        if (profile.service_name.empty()) throw ProfileError("profile with empty service name");
        if (profile.sni_patterns.empty()) {
            throw ProfileError("profile '" + profile.service_name + "' has no sni patterns");
        }
        for (const std::string& pattern : profile.sni_patterns) {
            if (pattern.empty() || pattern == ".") {
                throw ProfileError("profile '" + profile.service_name + "' has an empty pattern");
            }
            if (pattern != normalize_host(pattern)) {
                throw ProfileError("profile '" + profile.service_name + "' pattern '" + pattern +
                                   "' is not normalized (lowercase host, no scheme)");
            }
        }
    }
    // Ambiguity guard: overlapping patterns are rejected up front so that
    // lookup never has to break ties.
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        for (std::size_t a = 0; a < profiles[i].sni_patterns.size(); ++a) {
            for (std::size_t j = i; j < profiles.size(); ++j) {
                for (std::size_t b = (i == j ? a + 1 : 0); b < profiles[j].sni_patterns.size(); ++b) {
                    const std::string& p = profiles[i].sni_patterns[a];
                    const std::string& q = profiles[j].sni_patterns[b];
                    if (patterns_overlap(p, q)) {
                        throw ProfileError("ambiguous patterns: '" + p + "' (" +
                                           profiles[i].service_name + ") overlaps '" + q + "' (" +
                                           profiles[j].service_name + ")");
                    }
                }
            }
        }
    }
}

std::vector<ServiceProfile> load_profiles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path, 0, "cannot open file");
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path, e.byte, std::string("bad JSON: ") + e.what());
    }
    if (!doc.is_array()) throw DataError(path, 0, "expected a JSON array of profiles");

    std::vector<ServiceProfile> profiles;
    for (const auto& entry : doc) {
        ServiceProfile profile;
        profile.service_name = entry.at("service").get<std::string>();
        for (const auto& raw : entry.at("sni_patterns")) {
            profile.sni_patterns.push_back(normalize_host(raw.get<std::string>()));
        }
        if (entry.contains("notes")) profile.notes = entry["notes"].get<std::string>();
        profiles.push_back(std::move(profile));
    }
    try {
        validate_profiles(profiles);
    } catch (const ProfileError& e) {
        throw DataError(path, 0, e.what());
    }
    return profiles;
}

std::optional<ServiceMatch> match_service(std::string_view sni,
                                          const std::vector<ServiceProfile>& profiles) {
    for (const ServiceProfile& profile : profiles) {
        for (const std::string& pattern : profile.sni_patterns) {
            if (pattern_matches(pattern, sni)) {
                return ServiceMatch{profile.service_name, pattern};
            }
        }
    }
    return std::nullopt;
}

std::optional<std::string> associate_service(std::string_view sni,
                                             const std::vector<ServiceProfile>& profiles) {
    if (auto m = match_service(sni, profiles)) return m->service;
    return std::nullopt;
}

void ClassifierConfig::validate() const {
    if (primary_volume_threshold == 0 || side_volume_ceiling == 0 ||
        session_length_threshold <= 0) {
        throw ProfileError("classifier thresholds must be positive");
    }
    if (side_volume_ceiling >= primary_volume_threshold) {
        throw ProfileError("side volume ceiling must be below the primary volume threshold");
    }
}

const char* to_string(Role role) {
    switch (role) {
        case Role::primary: return "primary";
        case Role::side: return "side";
        case Role::unknown: return "unknown";
    }
    return "unknown";
}

const char* to_string(EvidenceKind kind) {
    switch (kind) {
        case EvidenceKind::volume_above_threshold: return "volume-above-threshold";
        case EvidenceKind::session_length_above_threshold: return "session-length-above-threshold";
        case EvidenceKind::sni_matched: return "sni-matched";
        case EvidenceKind::ech_opaque: return "ech-opaque";
        case EvidenceKind::low_volume: return "low-volume";
    }
    return "unknown";
}

bool ChannelClassification::has_evidence(EvidenceKind kind) const {
    for (const Evidence& e : evidence) {
        if (e.kind == kind) return true;
    }
    return false;
}

std::vector<ChannelClassification> classify_flows(const std::vector<capture::FlowRecord>& flows,
                                                  const ClassifierConfig& cfg) {
    cfg.validate();
    std::vector<ChannelClassification> out;
    out.reserve(flows.size());
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const capture::FlowRecord& flow = flows[i];
        ChannelClassification cls;
        cls.flow_index = i;
        cls.key = flow.key;

        bool ech_opaque = flow.assessment &&
                          flow.assessment->privacy_level == tls::PrivacyLevel::full_ech;
        if (ech_opaque) cls.evidence.push_back({EvidenceKind::ech_opaque, ""});

        std::optional<ServiceMatch> match;
        if (!ech_opaque && flow.client_hello && flow.client_hello->sni) {
            match = match_service(normalize_host(*flow.client_hello->sni), cfg.profiles);
        }

        std::uint64_t total = flow.bytes_up + flow.bytes_down;
        double length = flow.session_length();

        if (match) {
            cls.role = Role::side;
            cls.service = match->service;
            cls.evidence.push_back({EvidenceKind::sni_matched, match->pattern});
        } else if (total >= cfg.primary_volume_threshold ||
                   (total >= cfg.side_volume_ceiling && length >= cfg.session_length_threshold)) {
            cls.role = Role::primary;
            if (total >= cfg.primary_volume_threshold) {
                cls.evidence.push_back({EvidenceKind::volume_above_threshold, ""});
            }
            if (total >= cfg.side_volume_ceiling && length >= cfg.session_length_threshold) {
                cls.evidence.push_back({EvidenceKind::session_length_above_threshold, ""});
            }
        } else if (total <= cfg.side_volume_ceiling) {
            cls.role = Role::side;
            cls.evidence.push_back({EvidenceKind::low_volume, ""});
        } else {
            cls.role = Role::unknown;
        }
        out.push_back(std::move(cls));
    }
    return out;
}

namespace {

bool intervals_overlap(const capture::FlowRecord& x, const capture::FlowRecord& y) {
    return x.first_ts <= y.last_ts && y.first_ts <= x.last_ts;
}

} // namespace

std::map<std::string, ServiceGroup> group_by_service(
    const std::vector<ChannelClassification>& classifications,
    const std::vector<capture::FlowRecord>& flows) {
    std::map<std::string, ServiceGroup> groups;
    for (const ChannelClassification& cls : classifications) {
        if (cls.role == Role::side && cls.service) {
            groups[*cls.service].side_flows.push_back(cls.flow_index);
        }
    }
    for (const ChannelClassification& cls : classifications) {
        if (cls.role != Role::primary) continue;
        for (auto& [service, group] : groups) {
            bool overlaps = std::any_of(
                group.side_flows.begin(), group.side_flows.end(), [&](std::size_t side) {
                    return intervals_overlap(flows[cls.flow_index], flows[side]);
                });
            if (overlaps) group.candidate_primary_flows.push_back(cls.flow_index);
        }
    }
    return groups;
}

ClassifiedCapture classify_capture(const std::vector<capture::FlowRecord>& flows,
                                   const ClassifierConfig& cfg) {
    std::vector<ChannelClassification> classifications = classify_flows(flows, cfg);
    ClassifiedCapture report;
    report.services = group_by_service(classifications, flows);
    report.flows.reserve(flows.size());
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const capture::FlowRecord& flow = flows[i];
        FlowSummary summary;
        summary.key = flow.key;
        summary.first_ts = flow.first_ts;
        summary.last_ts = flow.last_ts;
        if (flow.client_hello && flow.client_hello->sni) {
            summary.sni = normalize_host(*flow.client_hello->sni);
        }
        summary.full_ech = flow.assessment &&
                           flow.assessment->privacy_level == tls::PrivacyLevel::full_ech;
        summary.role = classifications[i].role;
        summary.service = classifications[i].service;
        summary.evidence = classifications[i].evidence;
        report.flows.push_back(std::move(summary));
    }
    return report;
}

namespace {

Role role_from_string(const std::string& s) {
    if (s == "primary") return Role::primary;
    if (s == "side") return Role::side;
    return Role::unknown;
}

EvidenceKind evidence_kind_from_string(const std::string& s) {
    if (s == "volume-above-threshold") return EvidenceKind::volume_above_threshold;
    if (s == "session-length-above-threshold") return EvidenceKind::session_length_above_threshold;
    if (s == "sni-matched") return EvidenceKind::sni_matched;
    if (s == "ech-opaque") return EvidenceKind::ech_opaque;
    return EvidenceKind::low_volume;
}

capture::IpAddr ip_from_string(const std::string& text, const std::string& path) {
    capture::IpAddr addr;
    if (text.find(':') != std::string::npos) {
        addr.size = 16;
        if (inet_pton(AF_INET6, text.c_str(), addr.bytes.data()) != 1) {
            throw DataError(path, 0, "bad IPv6 address: " + text);
        }
    } else {
        addr.size = 4;
        if (inet_pton(AF_INET, text.c_str(), addr.bytes.data()) != 1) {
            throw DataError(path, 0, "bad IPv4 address: " + text);
        }
    }
    return addr;
}

} // namespace

std::string report_to_json(const ClassifiedCapture& report) {
    ordered_json doc;
    doc["flows"] = ordered_json::array();
    for (const FlowSummary& f : report.flows) {
        ordered_json row;
        row["src_ip"] = f.key.src_ip.to_string();
        row["src_port"] = f.key.src_port;
        row["dst_ip"] = f.key.dst_ip.to_string();
        row["dst_port"] = f.key.dst_port;
        row["transport"] = f.key.transport == capture::Transport::udp ? "udp" : "tcp";
        row["first_ts"] = f.first_ts;
        row["last_ts"] = f.last_ts;
        if (f.sni) row["sni"] = *f.sni;
        row["full_ech"] = f.full_ech;
        row["role"] = to_string(f.role);
        if (f.service) row["service"] = *f.service;
        row["evidence"] = ordered_json::array();
        for (const Evidence& e : f.evidence) {
            ordered_json item;
            item["kind"] = to_string(e.kind);
            if (!e.pattern.empty()) item["pattern"] = e.pattern;
            row["evidence"].push_back(item);
        }
        doc["flows"].push_back(std::move(row));
    }
    doc["services"] = ordered_json::object();
    for (const auto& [name, group] : report.services) {
        ordered_json g;
        g["association"] = kAssociationLabel;
        g["side_flows"] = group.side_flows;
        g["candidate_primary_flows"] = group.candidate_primary_flows;
        doc["services"][name] = std::move(g);
    }
    return doc.dump(2) + "\n";
}

ClassifiedCapture report_from_json(const std::string& text, const std::string& path) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path, e.byte, std::string("bad JSON: ") + e.what());
    }
    ClassifiedCapture report;
    try {
        for (const auto& row : doc.at("flows")) {
            FlowSummary f;
            f.key.src_ip = ip_from_string(row.at("src_ip").get<std::string>(), path);
            f.key.src_port = row.at("src_port").get<std::uint16_t>();
            f.key.dst_ip = ip_from_string(row.at("dst_ip").get<std::string>(), path);
            f.key.dst_port = row.at("dst_port").get<std::uint16_t>();
            f.key.transport = row.at("transport").get<std::string>() == "udp"
                                  ? capture::Transport::udp
                                  : capture::Transport::tcp;
            f.first_ts = row.at("first_ts").get<double>();
            f.last_ts = row.at("last_ts").get<double>();
            if (row.contains("sni")) f.sni = row["sni"].get<std::string>();
            f.full_ech = row.at("full_ech").get<bool>();
            f.role = role_from_string(row.at("role").get<std::string>());
            if (row.contains("service")) f.service = row["service"].get<std::string>();
            for (const auto& item : row.at("evidence")) {
                Evidence e;
                e.kind = evidence_kind_from_string(item.at("kind").get<std::string>());
                if (item.contains("pattern")) e.pattern = item["pattern"].get<std::string>();
                f.evidence.push_back(std::move(e));
            }
            report.flows.push_back(std::move(f));
        }
        for (const auto& [name, g] : doc.at("services").items()) {
            ServiceGroup group;
            group.side_flows = g.at("side_flows").get<std::vector<std::size_t>>();
            group.candidate_primary_flows =
                g.at("candidate_primary_flows").get<std::vector<std::size_t>>();
            report.services[name] = std::move(group);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path, 0, std::string("bad classification report: ") + e.what());
    }
    return report;
}

void save_report(const ClassifiedCapture& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path, 0, "cannot open for writing");
    out << report_to_json(report);
    out.flush();
    if (!out) throw DataError(path, 0, "write failed");
}

ClassifiedCapture load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path, 0, "cannot open file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return report_from_json(buffer.str(), path);
}

} // namespace echoscope::classify
