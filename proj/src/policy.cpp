// policy.cpp

#include "echoscope/policy.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace echoscope::policy {

using nlohmann::ordered_json;

const char* to_string(Action a) {
    return a == Action::block ? "block" : "throttle";
}

const char* to_string(RuleScope s) {
    switch (s) {
        case RuleScope::before_session: return "before";
        case RuleScope::during_session: return "during";
        case RuleScope::always: return "always";
    }
    return "always";
}

const char* to_string(DecisionKind kind) {
    switch (kind) {
        case DecisionKind::allow: return "allow";
        case DecisionKind::block: return "block";
        case DecisionKind::throttle: return "throttle";
    }
    return "allow";
}

Policy derive_attack_policy(const std::vector<classify::FlowSummary>& flows,
                            const std::string& target_service, Action action,
                            std::uint64_t throttle_rate_bps, RuleScope scope) {
    if (action == Action::throttle && throttle_rate_bps == 0) {
        throw PolicyError(PolicyFault::bad_rule, "throttle rate must be positive");
    }

    // Distinct SNI hosts of the target's side flows, with the flows that
    // evidence each host.
    std::map<std::string, std::vector<const classify::FlowSummary*>> hosts;
    for (const classify::FlowSummary& flow : flows) {
        if (flow.role == classify::Role::side && flow.service &&
            *flow.service == target_service && flow.sni) {
            hosts[*flow.sni].push_back(&flow);
        }
    }
    if (hosts.empty()) {
        throw PolicyError(PolicyFault::no_side_channels,
                          "no identifiable side channels for service '" + target_service + "'");
    }

    Policy policy;
    policy.target_service = target_service;
    std::ostringstream note;
    note << "rules target side-channel SNIs of '" << target_service
         << "'; SNI-only by design (shared CDN hosts make address rules overreach)";

    for (const auto& [host, evidence] : hosts) {
        // A rule must never catch an ECH-protected flow, whose visible SNI
        // is an innocuous outer name.
        bool collides = std::any_of(flows.begin(), flows.end(), [&](const classify::FlowSummary& f) {
            return f.full_ech && f.sni && classify::pattern_matches(host, *f.sni);
        });
        if (collides) {
            note << "; skipped '" << host << "' (matches an ECH-protected flow's outer name)";
            continue;
        }
        PolicyRule rule;
        rule.match_sni = host;
        rule.action = action;
        rule.rate_bps = action == Action::throttle ? throttle_rate_bps : 0;
        rule.scope = scope;
        policy.rules.push_back(std::move(rule));

        note << "; " << host << " seen on";
        for (const classify::FlowSummary* f : evidence) {
            note << ' ' << f->key.src_ip.to_string() << ':' << f->key.src_port << "->"
                 << f->key.dst_ip.to_string() << ':' << f->key.dst_port;
        }
    }
    if (policy.rules.empty()) {
        throw PolicyError(PolicyFault::no_side_channels,
                          "every candidate rule for '" + target_service +
                              "' would touch ECH-protected flows");
    }
    policy.derivation_note = note.str();
    return policy;
}

Policy make_block_policy(const std::string& target_service,
                         const std::vector<std::string>& hosts, RuleScope scope) {
    Policy policy;
    policy.target_service = target_service;
    std::set<std::string> ordered(hosts.begin(), hosts.end());
    for (const std::string& host : ordered) {
        policy.rules.push_back(PolicyRule{classify::normalize_host(host), Action::block, 0, scope});
    }
    policy.derivation_note = "block rules over a fixed host list for '" + target_service + "'";
    return policy;
}

namespace {

bool rule_active(const PolicyRule& rule, SessionPhase phase) {
    switch (rule.scope) {
        case RuleScope::always:
        case RuleScope::before_session:
            return true;
        case RuleScope::during_session:
            return phase == SessionPhase::playing;
    }
    return true;
}

Decision decide(const std::optional<std::string>& sni, const Policy& policy,
                const std::optional<SessionPhase>& phase) {
    if (!sni) return Decision{};  // nothing readable, nothing to match
    std::string host = classify::normalize_host(*sni);
    for (const PolicyRule& rule : policy.rules) {
        if (phase && !rule_active(rule, *phase)) continue;
        if (classify::pattern_matches(rule.match_sni, host)) {
            if (rule.action == Action::block) return Decision{DecisionKind::block, 0};
            return Decision{DecisionKind::throttle, rule.rate_bps};
        }
    }
    return Decision{};
}

} // namespace

Decision apply_policy(const std::optional<std::string>& sni, const Policy& policy) {
    return decide(sni, policy, std::nullopt);
}

Decision apply_policy_at(const std::optional<std::string>& sni, const Policy& policy,
                         SessionPhase phase) {
    return decide(sni, policy, phase);
}

std::string policy_to_json(const Policy& policy) {
    ordered_json doc;
    doc["target_service"] = policy.target_service;
    doc["rules"] = ordered_json::array();
    for (const PolicyRule& rule : policy.rules) {
        ordered_json r;
        r["match_sni"] = rule.match_sni;
        r["action"] = to_string(rule.action);
        if (rule.action == Action::throttle) r["rate"] = rule.rate_bps;
        r["scope"] = to_string(rule.scope);
        doc["rules"].push_back(std::move(r));
    }
    return doc.dump(2) + "\n";
}

namespace {

RuleScope scope_from_string(const std::string& s, const std::string& path) {
    if (s == "before") return RuleScope::before_session;
    if (s == "during") return RuleScope::during_session;
    if (s == "always") return RuleScope::always;
    throw DataError(path, 0, "bad rule scope '" + s + "' (before|during|always)");
}

} // namespace

Policy policy_from_json(const std::string& text, const std::string& path) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path, e.byte, std::string("bad JSON: ") + e.what());
    }
    Policy policy;
    try {
        policy.target_service = doc.at("target_service").get<std::string>();
        for (const auto& r : doc.at("rules")) {
            PolicyRule rule;
            rule.match_sni = classify::normalize_host(r.at("match_sni").get<std::string>());
            std::string action = r.at("action").get<std::string>();
            if (action == "block") {
                rule.action = Action::block;
            } else if (action == "throttle") {
                rule.action = Action::throttle;
                rule.rate_bps = r.at("rate").get<std::uint64_t>();
                if (rule.rate_bps == 0) {
                    throw DataError(path, 0, "throttle rule with zero rate");
                }
            } else {
                throw DataError(path, 0, "bad rule action '" + action + "'");
            }
            rule.scope = scope_from_string(r.at("scope").get<std::string>(), path);
            policy.rules.push_back(std::move(rule));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path, 0, std::string("bad policy file: ") + e.what());
    }
    return policy;
}

void save_policy(const Policy& policy, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path, 0, "cannot open for writing");
    out << policy_to_json(policy);
    out.flush();
    if (!out) throw DataError(path, 0, "write failed");
}

Policy load_policy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path, 0, "cannot open file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return policy_from_json(buffer.str(), path);
}

} // namespace echoscope::policy
