// policy.hpp
//
// Middlebox attack policies: block/throttle rule lists derived from the
// plain-SNI side channels of a target service. Rules are SNI-only by
// construction; the decision point never sees addresses or ports.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "echoscope/classify.hpp"

namespace echoscope::policy {

enum class Action : std::uint8_t { block, throttle };

// When in a session's lifetime a rule is enforced: before_session rules
// are in force from the start, during_session rules only once the session
// is underway.
enum class RuleScope : std::uint8_t { before_session, during_session, always };

const char* to_string(Action a);      // "block", "throttle"
const char* to_string(RuleScope s);   // "before", "during", "always"

struct PolicyRule {
    std::string match_sni;  // lowercase exact host or ".suffix" pattern
    Action action = Action::block;
    std::uint64_t rate_bps = 0;  // throttle only; > 0
    RuleScope scope = RuleScope::always;

    bool operator==(const PolicyRule&) const = default;
};

struct Policy {
    std::string target_service;
    std::vector<PolicyRule> rules;  // ordered; first match wins
    std::string derivation_note;    // evidence trail, not persisted

    bool operator==(const Policy&) const = default;
};

enum class PolicyFault { no_side_channels, bad_rule };

class PolicyError : public std::runtime_error {
public:
    PolicyError(PolicyFault fault, const std::string& what)
        : std::runtime_error(what), fault_(fault) {}

    PolicyFault fault() const { return fault_; }

private:
    PolicyFault fault_;
};

// One rule per distinct SNI host among the target's side flows, ordered by
// host for stable output. Hosts whose pattern would also match an
// ECH-opaque flow's visible (outer) name are dropped and noted. Throws
// PolicyError{no_side_channels} when the target has no identifiable side
// flows -- the fully-ECH end state.
Policy derive_attack_policy(const std::vector<classify::FlowSummary>& flows,
                            const std::string& target_service, Action action,
                            std::uint64_t throttle_rate_bps, RuleScope scope);

// Block rules over a fixed host list; what an operator configures straight
// from a published side-channel inventory.
Policy make_block_policy(const std::string& target_service,
                         const std::vector<std::string>& hosts, RuleScope scope);

enum class DecisionKind : std::uint8_t { allow, block, throttle };

struct Decision {
    DecisionKind kind = DecisionKind::allow;
    std::uint64_t rate_bps = 0;  // for throttle

    bool operator==(const Decision&) const = default;
};

const char* to_string(DecisionKind kind);

// First-matching-rule decision over the readable SNI, scope ignored.
// Flows without a readable SNI are always allowed: the middlebox cannot
// act on what it cannot read.
Decision apply_policy(const std::optional<std::string>& sni, const Policy& policy);

enum class SessionPhase { startup, playing };

// As apply_policy, honoring rule scopes: during_session rules are inert
// in the startup phase.
Decision apply_policy_at(const std::optional<std::string>& sni, const Policy& policy,
                         SessionPhase phase);

// Policy file: JSON with fields exactly
//   {target_service, rules:[{match_sni, action, rate?, scope}]}
// (rate present for throttle rules only). The derivation note is reviewer
// output, not part of the file.
std::string policy_to_json(const Policy& policy);
Policy policy_from_json(const std::string& text, const std::string& path_for_errors);
void save_policy(const Policy& policy, const std::string& path);
Policy load_policy(const std::string& path);

} // namespace echoscope::policy
