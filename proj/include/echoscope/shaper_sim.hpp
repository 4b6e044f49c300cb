// shaper_sim.hpp
//
// Deterministic flow-level replay of a streaming session under a
// block/throttle policy. Segment granularity: the outcomes of interest
// are qualitative (does playback start, stall, degrade), not packet
// timing.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "echoscope/classify.hpp"
#include "echoscope/policy.hpp"

namespace echoscope::sim {

enum class DependencyKind : std::uint8_t {
    startup_critical,   // playback cannot begin without it
    schedule_critical,  // playback consumes it; a buffer bridges short outages
    cosmetic,           // thumbnails, ads; playback is indifferent
};

const char* to_string(DependencyKind kind);

struct SideDependency {
    std::string host;
    DependencyKind kind = DependencyKind::cosmetic;
    // Fetch cadence during playback in segments; 0 = startup only.
    int period_segments = 0;

    bool operator==(const SideDependency&) const = default;
};

struct Fallback {
    std::vector<std::string> fallback_snis;
    std::uint64_t degraded_rate_bps = 0;
    std::string degraded_quality_label;

    bool operator==(const Fallback&) const = default;
};

struct ServiceModel {
    std::string name;
    std::uint64_t normal_rate_bps = 0;
    std::string quality_label;
    // Segments playable past the last successful schedule fetch.
    int schedule_buffer_segments = 0;
    std::vector<SideDependency> side_dependencies;
    std::optional<Fallback> fallback;  // consulted on mid-session schedule loss
    std::string notes;

    bool operator==(const ServiceModel&) const = default;
};

// JSON model file {service, normal_rate_bps, quality_label,
// schedule_buffer_segments, side_dependencies, fallback|null, notes?}.
ServiceModel load_model(const std::string& path);

enum class Scenario : std::uint8_t { block_before, block_during };

const char* to_string(Scenario scenario);  // "before", "during"

enum class Playback : std::uint8_t {
    normal,
    degraded_quality,
    stops_after_buffer,
    no_video,
};

const char* to_string(Playback playback);

// Harm order for monotonicity checks: higher is better.
int playback_rank(Playback playback);

struct TimelineEntry {
    int segment = 0;  // 0 is the startup phase
    std::string event;

    bool operator==(const TimelineEntry&) const = default;
};

struct SimOutcome {
    Playback playback = Playback::normal;
    std::vector<std::string> cosmetic_losses;  // distinct hosts, first-loss order
    std::uint64_t achieved_rate_bps = 0;
    std::vector<TimelineEntry> timeline;

    bool operator==(const SimOutcome&) const = default;
};

enum class SimFault { inconsistent_model, incomplete_grid, bad_arguments };

class SimError : public std::runtime_error {
public:
    SimError(SimFault fault, const std::string& what) : std::runtime_error(what), fault_(fault) {}

    SimFault fault() const { return fault_; }

private:
    SimFault fault_;
};

// Replays session_segments segments of the model under the policy.
// block_before enforces the policy from the startup phase on;
// block_during switches it on at segment 1. Side fetches go through
// apply_policy_at; the primary payload fetch carries no readable SNI, so
// no rule can ever deny it directly. Throws
// SimError{inconsistent_model} when a dependency host is not covered by
// the profile, and bad_arguments for session_segments < 1.
SimOutcome simulate(const ServiceModel& model, const classify::ServiceProfile& profile,
                    const policy::Policy& policy, Scenario scenario, int session_segments);

using OutcomeGrid = std::map<std::pair<std::string, Scenario>, SimOutcome>;

// Label mapping used for the rendered table.
std::string outcome_label(const SimOutcome& outcome);

// Text table over the grid, one service per row, one scenario per column.
// Every service present must have both scenarios (IncompleteGrid
// otherwise).
std::string render_outcome_table(const OutcomeGrid& outcomes);

std::string outcome_to_json(const std::string& service, Scenario scenario,
                            const SimOutcome& outcome);

} // namespace echoscope::sim
