// cli.cpp

#include "echoscope/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "echoscope/capture.hpp"
#include "echoscope/classify.hpp"
#include "echoscope/policy.hpp"
#include "echoscope/shaper_sim.hpp"

namespace echoscope::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string in;
    std::string out;
    std::string profiles;
    std::string models_dir = "models";
    std::string model;
    std::string target;
    std::string action = "block";
    std::uint64_t rate = 0;
    std::string scope = "always";
    std::string scenario = "during";
    int segments = 12;
    std::uint64_t threshold_primary = 0;
    std::uint64_t threshold_side = 0;
    double threshold_session = 0.0;
};

classify::ClassifierConfig make_classifier_config(const Options& opt) {
    classify::ClassifierConfig cfg;
    cfg.profiles = classify::load_profiles(opt.profiles);
    if (opt.threshold_primary) cfg.primary_volume_threshold = opt.threshold_primary;
    if (opt.threshold_side) cfg.side_volume_ceiling = opt.threshold_side;
    if (opt.threshold_session > 0) cfg.session_length_threshold = opt.threshold_session;
    cfg.validate();
    return cfg;
}

policy::RuleScope scope_from_flag(const std::string& scope) {
    if (scope == "before") return policy::RuleScope::before_session;
    if (scope == "during") return policy::RuleScope::during_session;
    return policy::RuleScope::always;
}

sim::Scenario scenario_from_flag(const std::string& scenario) {
    return scenario == "before" ? sim::Scenario::block_before : sim::Scenario::block_during;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path, 0, "cannot open for writing");
    out << text;
    out.flush();
    if (!out) throw DataError(path, 0, "write failed");
}

int cmd_analyze(const Options& opt) {
    auto flows = capture::reassemble_flows(capture::read_capture(opt.in));
    if (opt.out.ends_with(".jsonl")) {
        capture::export_report_jsonl(flows, opt.out);
    } else {
        capture::export_report(flows, opt.out);
    }
    std::cerr << "analyze: " << flows.size() << " flows -> " << opt.out << "\n";
    return kExitOk;
}

int cmd_classify(const Options& opt) {
    classify::ClassifierConfig cfg = make_classifier_config(opt);
    auto flows = capture::reassemble_flows(capture::read_capture(opt.in));
    classify::ClassifiedCapture report = classify::classify_capture(flows, cfg);
    classify::save_report(report, opt.out);
    std::size_t side = 0;
    std::size_t primary = 0;
    for (const auto& f : report.flows) {
        if (f.role == classify::Role::side) ++side;
        if (f.role == classify::Role::primary) ++primary;
    }
    std::cerr << "classify: " << report.flows.size() << " flows (" << side << " side, " << primary
              << " primary) -> " << opt.out << "\n";
    return kExitOk;
}

std::vector<classify::FlowSummary> load_classified_flows(const std::string& in) {
    std::vector<std::string> files;
    if (fs::is_directory(in)) {
        for (const auto& entry : fs::directory_iterator(in)) {
            if (entry.path().extension() == ".json") files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw DataError(in, 0, "directory holds no .json classification reports");
    } else {
        files.push_back(in);
    }
    std::vector<classify::FlowSummary> flows;
    for (const std::string& file : files) {
        classify::ClassifiedCapture report = classify::load_report(file);
        flows.insert(flows.end(), report.flows.begin(), report.flows.end());
    }
    return flows;
}

int cmd_policy(const Options& opt) {
    std::vector<classify::FlowSummary> flows = load_classified_flows(opt.in);
    policy::Action action =
        opt.action == "throttle" ? policy::Action::throttle : policy::Action::block;
    policy::Policy pol = policy::derive_attack_policy(flows, classify::normalize_host(opt.target),
                                                      action, opt.rate, scope_from_flag(opt.scope));
    policy::save_policy(pol, opt.out);
    std::cerr << "policy: " << pol.rules.size() << " rules for '" << pol.target_service << "' -> "
              << opt.out << "\n";
    std::cerr << "derivation: " << pol.derivation_note << "\n";
    return kExitOk;
}

classify::ServiceProfile profile_for(const std::vector<classify::ServiceProfile>& profiles,
                                     const std::string& service, const std::string& path) {
    for (const classify::ServiceProfile& p : profiles) {
        if (p.service_name == service) return p;
    }
    throw DataError(path, 0, "no profile for service '" + service + "'");
}

int cmd_simulate(const Options& opt) {
    policy::Policy pol = policy::load_policy(opt.in);
    sim::ServiceModel model = sim::load_model(opt.model);
    auto profiles = classify::load_profiles(opt.profiles);
    classify::ServiceProfile profile = profile_for(profiles, model.name, opt.profiles);
    sim::Scenario scenario = scenario_from_flag(opt.scenario);
    sim::SimOutcome outcome = sim::simulate(model, profile, pol, scenario, opt.segments);
    std::string json = sim::outcome_to_json(model.name, scenario, outcome);
    if (!opt.out.empty()) write_text(opt.out, json);
    std::cout << "service " << model.name << ", side channels blocked " << to_string(scenario)
              << " playout: " << sim::outcome_label(outcome) << "\n";
    if (!outcome.cosmetic_losses.empty()) {
        std::cout << "cosmetic losses:";
        for (const std::string& host : outcome.cosmetic_losses) std::cout << ' ' << host;
        std::cout << "\n";
    }
    std::cout << "achieved rate: " << outcome.achieved_rate_bps << " bps\n";
    return kExitOk;
}

int cmd_table2(const Options& opt) {
    auto profiles = classify::load_profiles(opt.profiles);
    sim::OutcomeGrid grid;
    std::optional<sim::SimOutcome> extended;
    std::string extended_service;

    for (const char* name : {"hotstar", "primevideo", "youtube"}) {
        std::string model_path = (fs::path(opt.models_dir) / (name + std::string(".json"))).string();
        sim::ServiceModel model = sim::load_model(model_path);
        classify::ServiceProfile profile = profile_for(profiles, model.name, opt.profiles);

        for (sim::Scenario scenario : {sim::Scenario::block_before, sim::Scenario::block_during}) {
            policy::RuleScope scope = scenario == sim::Scenario::block_before
                                          ? policy::RuleScope::before_session
                                          : policy::RuleScope::during_session;
            policy::Policy pol = policy::make_block_policy(model.name, profile.sni_patterns, scope);
            grid[{model.name, scenario}] =
                sim::simulate(model, profile, pol, scenario, opt.segments);
        }
        if (model.fallback) {
            // The escalation path: the fallback server's side channels get
            // blocked as well once they show up.
            std::vector<std::string> hosts = profile.sni_patterns;
            hosts.insert(hosts.end(), model.fallback->fallback_snis.begin(),
                         model.fallback->fallback_snis.end());
            policy::Policy pol =
                policy::make_block_policy(model.name, hosts, policy::RuleScope::during_session);
            extended = sim::simulate(model, profile, pol, sim::Scenario::block_during, opt.segments);
            extended_service = model.name;
        }
    }

    std::string table = sim::render_outcome_table(grid);
    std::ostringstream out;
    out << table;
    if (extended) {
        out << "\n" << extended_service
            << " (fallback side channels also blocked, during playout): "
            << sim::outcome_label(*extended) << "\n";
    }
    if (!opt.out.empty()) write_text(opt.out, out.str());
    std::cout << out.str();
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"echoscope: offline TLS traffic privacy auditor and side-channel attack simulator"};
    app.require_subcommand(1);

    Options opt;
    const char* env_profiles = std::getenv("ECHOSCOPE_PROFILES");
    opt.profiles = env_profiles ? env_profiles : "profiles/table1.json";

    auto add_profiles = [&](CLI::App* cmd) {
        cmd->add_option("--profiles", opt.profiles,
                        "service profile file (default: $ECHOSCOPE_PROFILES or profiles/table1.json)")
            ->check(CLI::ExistingFile);
    };

    CLI::App* analyze = app.add_subcommand("analyze", "capture -> per-flow CSV (or .jsonl) report");
    analyze->add_option("--in", opt.in, "pcap/pcapng capture")->required()->check(CLI::ExistingFile);
    analyze->add_option("--out", opt.out, "report path (.csv or .jsonl)")->required();

    CLI::App* classify_cmd =
        app.add_subcommand("classify", "capture -> channel classification report (JSON)");
    classify_cmd->add_option("--in", opt.in, "pcap/pcapng capture")
        ->required()
        ->check(CLI::ExistingFile);
    classify_cmd->add_option("--out", opt.out, "classification report path")->required();
    add_profiles(classify_cmd);
    classify_cmd->add_option("--threshold-primary", opt.threshold_primary,
                             "primary volume threshold, bytes (default 1 MiB)");
    classify_cmd->add_option("--threshold-side", opt.threshold_side,
                             "side volume ceiling, bytes (default 256 KiB)");
    classify_cmd->add_option("--threshold-session", opt.threshold_session,
                             "session length threshold, seconds (default 60)");

    CLI::App* policy_cmd =
        app.add_subcommand("policy", "classification report(s) -> block/throttle policy");
    policy_cmd->add_option("--in", opt.in, "classification report file or directory")
        ->required()
        ->check(CLI::ExistingPath);
    policy_cmd->add_option("--out", opt.out, "policy file path")->required();
    policy_cmd->add_option("--target", opt.target, "service to attack")->required();
    policy_cmd->add_option("--action", opt.action, "rule action")
        ->check(CLI::IsMember({"block", "throttle"}));
    policy_cmd->add_option("--rate", opt.rate, "throttle rate, bits/second");
    policy_cmd->add_option("--scope", opt.scope, "rule scope")
        ->check(CLI::IsMember({"before", "during", "always"}));

    CLI::App* simulate_cmd = app.add_subcommand("simulate", "policy + service model -> outcome");
    simulate_cmd->add_option("--in", opt.in, "policy file")->required()->check(CLI::ExistingFile);
    simulate_cmd->add_option("--model", opt.model, "service model file")
        ->required()
        ->check(CLI::ExistingFile);
    simulate_cmd->add_option("--out", opt.out, "outcome report path (JSON)");
    add_profiles(simulate_cmd);
    simulate_cmd->add_option("--scenario", opt.scenario, "when the blocking starts")
        ->check(CLI::IsMember({"before", "during"}));
    simulate_cmd->add_option("--segments", opt.segments, "session length in segments")
        ->check(CLI::PositiveNumber);

    CLI::App* table2_cmd =
        app.add_subcommand("table2", "run the shipped models through both scenarios");
    table2_cmd->add_option("--models", opt.models_dir, "directory with the shipped model files")
        ->check(CLI::ExistingDirectory);
    table2_cmd->add_option("--out", opt.out, "also write the table to this path");
    add_profiles(table2_cmd);
    table2_cmd->add_option("--segments", opt.segments, "session length in segments")
        ->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(opt);
        if (classify_cmd->parsed()) return cmd_classify(opt);
        if (policy_cmd->parsed()) return cmd_policy(opt);
        if (simulate_cmd->parsed()) return cmd_simulate(opt);
        if (table2_cmd->parsed()) return cmd_table2(opt);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const ParseError& e) {
        std::cerr << "error: offset " << e.offset() << ": " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

} // namespace echoscope::cli
