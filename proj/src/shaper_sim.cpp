// shaper_sim.cpp

#include "echoscope/shaper_sim.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace echoscope::sim {

using nlohmann::ordered_json;

const char* to_string(DependencyKind kind) {
    switch (kind) {
        case DependencyKind::startup_critical: return "startup-critical";
        case DependencyKind::schedule_critical: return "schedule-critical";
        case DependencyKind::cosmetic: return "cosmetic";
    }
    return "cosmetic";
}

const char* to_string(Scenario scenario) {
    return scenario == Scenario::block_before ? "before" : "during";
}

const char* to_string(Playback playback) {
    switch (playback) {
        case Playback::normal: return "normal";
        case Playback::degraded_quality: return "degraded-quality";
        case Playback::stops_after_buffer: return "stops-after-buffer";
        case Playback::no_video: return "no-video";
    }
    return "normal";
}

int playback_rank(Playback playback) {
    switch (playback) {
        case Playback::normal: return 3;
        case Playback::degraded_quality: return 2;
        case Playback::stops_after_buffer: return 1;
        case Playback::no_video: return 0;
    }
    return 0;
}

namespace {

DependencyKind kind_from_string(const std::string& s, const std::string& path) {
    if (s == "startup-critical") return DependencyKind::startup_critical;
    if (s == "schedule-critical") return DependencyKind::schedule_critical;
    if (s == "cosmetic") return DependencyKind::cosmetic;
    throw DataError(path, 0, "bad dependency kind '" + s + "'");
}

} // namespace

ServiceModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path, 0, "cannot open file");
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path, e.byte, std::string("bad JSON: ") + e.what());
    }
    ServiceModel model;
    try {
        model.name = doc.at("service").get<std::string>();
        model.normal_rate_bps = doc.at("normal_rate_bps").get<std::uint64_t>();
        model.quality_label = doc.value("quality_label", std::string());
        model.schedule_buffer_segments = doc.at("schedule_buffer_segments").get<int>();
        if (model.schedule_buffer_segments < 0) {
            throw DataError(path, 0, "schedule_buffer_segments must be >= 0");
        }
        for (const auto& dep : doc.at("side_dependencies")) {
            SideDependency d;
            d.host = classify::normalize_host(dep.at("host").get<std::string>());
            d.kind = kind_from_string(dep.at("kind").get<std::string>(), path);
            d.period_segments = dep.at("period_segments").get<int>();
            if (d.period_segments < 0) {
                throw DataError(path, 0, "period_segments must be >= 0");
            }
            model.side_dependencies.push_back(std::move(d));
        }
        if (doc.contains("fallback") && !doc["fallback"].is_null()) {
            Fallback fb;
            for (const auto& host : doc["fallback"].at("fallback_snis")) {
                fb.fallback_snis.push_back(classify::normalize_host(host.get<std::string>()));
            }
            fb.degraded_rate_bps = doc["fallback"].at("degraded_rate_bps").get<std::uint64_t>();
            fb.degraded_quality_label =
                doc["fallback"].value("degraded_quality_label", std::string());
            model.fallback = std::move(fb);
        }
        model.notes = doc.value("notes", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path, 0, std::string("bad model file: ") + e.what());
    }
    return model;
}

namespace {

struct Session {
    const ServiceModel& model;
    const policy::Policy& policy;
    Scenario scenario;
    SimOutcome out;

    void note(int segment, std::string event) {
        out.timeline.push_back(TimelineEntry{segment, std::move(event)});
    }

    // Phase for scope resolution; under block_during the shaper is simply
    // off until playback starts.
    bool shaper_on(int segment) const {
        return scenario == Scenario::block_before || segment >= 1;
    }

    policy::Decision side_fetch(int segment, const std::string& host) {
        if (!shaper_on(segment)) return policy::Decision{};
        policy::SessionPhase phase =
            segment == 0 ? policy::SessionPhase::startup : policy::SessionPhase::playing;
        return policy::apply_policy_at(host, policy, phase);
    }

    bool fetch_ok(int segment, const SideDependency& dep) {
        policy::Decision d = side_fetch(segment, dep.host);
        bool ok = d.kind == policy::DecisionKind::allow;
        std::ostringstream ev;
        ev << to_string(dep.kind) << " fetch " << dep.host << " -> " << to_string(d.kind);
        if (d.kind == policy::DecisionKind::throttle) ev << " (" << d.rate_bps << " bps)";
        note(segment, ev.str());
        if (!ok && dep.kind == DependencyKind::cosmetic) {
            if (std::find(out.cosmetic_losses.begin(), out.cosmetic_losses.end(), dep.host) ==
                out.cosmetic_losses.end()) {
                out.cosmetic_losses.push_back(dep.host);
            }
        }
        return ok;
    }

    void primary_fetch(int segment) {
        // The primary channel shows no readable SNI; the decision point
        // has nothing to match on.
        policy::Decision d = policy::apply_policy(std::nullopt, policy);
        note(segment, std::string("primary payload fetch -> ") + to_string(d.kind));
    }
};

} // namespace

SimOutcome simulate(const ServiceModel& model, const classify::ServiceProfile& profile,
                    const policy::Policy& policy, Scenario scenario, int session_segments) {
    if (session_segments < 1) {
        throw SimError(SimFault::bad_arguments, "session_segments must be >= 1");
    }
    for (const SideDependency& dep : model.side_dependencies) {
        bool covered = std::any_of(
            profile.sni_patterns.begin(), profile.sni_patterns.end(),
            [&](const std::string& p) { return classify::pattern_matches(p, dep.host); });
        if (!covered) {
            throw SimError(SimFault::inconsistent_model,
                           "dependency host '" + dep.host + "' is not in the '" +
                               profile.service_name + "' profile");
        }
    }

    Session s{model, policy, scenario, {}};
    bool has_schedule = std::any_of(
        model.side_dependencies.begin(), model.side_dependencies.end(),
        [](const SideDependency& d) { return d.kind == DependencyKind::schedule_critical; });

    // Startup: every dependency is fetched once. A failed critical fetch
    // means the player never starts; the fallback server is a mid-session
    // mechanism and does not help here.
    bool startup_failed = false;
    for (const SideDependency& dep : model.side_dependencies) {
        bool ok = s.fetch_ok(0, dep);
        if (!ok && dep.kind != DependencyKind::cosmetic) startup_failed = true;
    }
    if (startup_failed) {
        s.note(0, "startup aborted: critical side fetch denied");
        s.out.playback = Playback::no_video;
        s.out.achieved_rate_bps = 0;
        return s.out;
    }

    // Schedule coverage in segments; refreshed by each successful
    // schedule-critical fetch.
    long schedule_ok_until = has_schedule ? model.schedule_buffer_segments : session_segments;
    bool degraded = false;
    int played = 0;

    for (int seg = 1; seg <= session_segments; ++seg) {
        for (const SideDependency& dep : model.side_dependencies) {
            if (dep.period_segments <= 0 || seg % dep.period_segments != 0) continue;
            bool ok = degraded && dep.kind == DependencyKind::schedule_critical
                          ? true  // schedule now comes from the fallback server
                          : s.fetch_ok(seg, dep);
            if (ok && dep.kind == DependencyKind::schedule_critical) {
                schedule_ok_until = seg + model.schedule_buffer_segments;
            }
        }

        if (has_schedule && !degraded && seg > schedule_ok_until) {
            // Buffer exhausted: one on-demand refetch, then the fallback.
            const SideDependency* schedule_dep = nullptr;
            for (const SideDependency& dep : model.side_dependencies) {
                if (dep.kind == DependencyKind::schedule_critical) {
                    schedule_dep = &dep;
                    break;
                }
            }
            bool refetched = schedule_dep != nullptr && s.fetch_ok(seg, *schedule_dep);
            if (refetched) {
                schedule_ok_until = seg + model.schedule_buffer_segments;
            } else if (model.fallback) {
                const std::string* open_host = nullptr;
                for (const std::string& host : model.fallback->fallback_snis) {
                    policy::Decision d = s.side_fetch(seg, host);
                    s.note(seg, "fallback fetch " + host + " -> " + to_string(d.kind));
                    if (d.kind == policy::DecisionKind::allow) {
                        open_host = &host;
                        break;
                    }
                }
                if (open_host) {
                    degraded = true;
                    s.note(seg, "schedule switched to fallback server " + *open_host +
                                    ", quality downgraded");
                } else {
                    s.note(seg, "fallback servers blocked, playback aborted");
                    s.out.playback = Playback::no_video;
                    s.out.achieved_rate_bps = 0;
                    return s.out;
                }
            } else {
                s.note(seg, "schedule exhausted after " + std::to_string(played) +
                                " segments, playback stops");
                s.out.playback = Playback::stops_after_buffer;
                s.out.achieved_rate_bps = 0;
                return s.out;
            }
        }

        s.primary_fetch(seg);
        ++played;
    }

    if (degraded) {
        s.out.playback = Playback::degraded_quality;
        s.out.achieved_rate_bps = model.fallback ? model.fallback->degraded_rate_bps : 0;
    } else {
        s.out.playback = Playback::normal;
        s.out.achieved_rate_bps = model.normal_rate_bps;
    }
    return s.out;
}

std::string outcome_label(const SimOutcome& outcome) {
    switch (outcome.playback) {
        case Playback::no_video: return "No video";
        case Playback::stops_after_buffer: return "No Video";
        case Playback::degraded_quality: return "Reduced rate and quality downgrade";
        case Playback::normal:
            return outcome.cosmetic_losses.empty() ? "Normal" : "Video playout, no thumbnails";
    }
    return "Normal";
}

std::string render_outcome_table(const OutcomeGrid& outcomes) {
    std::vector<std::string> services;
    for (const auto& [key, _] : outcomes) {
        if (services.empty() || services.back() != key.first) services.push_back(key.first);
    }
    if (services.empty()) {
        throw SimError(SimFault::incomplete_grid, "no outcomes to render");
    }
    for (const std::string& service : services) {
        for (Scenario sc : {Scenario::block_before, Scenario::block_during}) {
            if (!outcomes.count({service, sc})) {
                throw SimError(SimFault::incomplete_grid,
                               "missing outcome for " + service + "/" + to_string(sc));
            }
        }
    }

    const std::string col0 = "service";
    const std::string col1 = "side channels blocked before playout";
    const std::string col2 = "side channels blocked during playout";
    std::size_t w0 = col0.size();
    std::size_t w1 = col1.size();
    std::size_t w2 = col2.size();
    for (const std::string& service : services) {
        w0 = std::max(w0, service.size());
        w1 = std::max(w1, outcome_label(outcomes.at({service, Scenario::block_before})).size());
        w2 = std::max(w2, outcome_label(outcomes.at({service, Scenario::block_during})).size());
    }

    std::ostringstream out;
    auto row = [&](const std::string& a, const std::string& b, const std::string& c) {
        out << a << std::string(w0 - a.size(), ' ') << " | " << b
            << std::string(w1 - b.size(), ' ') << " | " << c << "\n";
    };
    row(col0, col1, col2);
    out << std::string(w0, '-') << "-+-" << std::string(w1, '-') << "-+-" << std::string(w2, '-')
        << "\n";
    for (const std::string& service : services) {
        row(service, outcome_label(outcomes.at({service, Scenario::block_before})),
            outcome_label(outcomes.at({service, Scenario::block_during})));
    }
    return out.str();
}

std::string outcome_to_json(const std::string& service, Scenario scenario,
                            const SimOutcome& outcome) {
    ordered_json doc;
    doc["service"] = service;
    doc["scenario"] = to_string(scenario);
    doc["playback"] = to_string(outcome.playback);
    doc["label"] = outcome_label(outcome);
    doc["achieved_rate_bps"] = outcome.achieved_rate_bps;
    doc["cosmetic_losses"] = outcome.cosmetic_losses;
    doc["timeline"] = ordered_json::array();
    for (const TimelineEntry& entry : outcome.timeline) {
        ordered_json e;
        e["segment"] = entry.segment;
        e["event"] = entry.event;
        doc["timeline"].push_back(std::move(e));
    }
    return doc.dump(2) + "\n";
}

} // namespace echoscope::sim
