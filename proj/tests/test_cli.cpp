// test_cli.cpp

#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "echoscope/capture.hpp"
#include "echoscope/classify.hpp"
#include "echoscope/cli.hpp"
#include "echoscope/policy.hpp"
#include "echoscope/shaper_sim.hpp"
#include "support/capture_builder.hpp"

using namespace echoscope;
using namespace echoscope::testsupport;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;

    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path = fs::temp_directory_path() / ("echoscope-test-" + std::to_string(rng()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Bytes hello_records(const std::string& sni) {
    return tls::fragment_into_records(tls::kContentHandshake, tls::kTls12,
                                      tls::ClientHelloBuilder().sni(sni).build_message(), 16384);
}

// One small capture: all eight Hotstar side channels plus one large
// ECH-opaque flow overlapping them.
void write_hotstar_capture(const std::string& path) {
    static const char* hosts[] = {"hesads.akamaized.net",     "hotstar.com",
                                  "img1.hotstarext.com",      "service.hotstar.com",
                                  "persona.hotstar.com",      "api.hotstar.com",
                                  "secure-media.hotstar.com", "bifrost-api.hotstar.com"};
    CaptureBuilder builder;
    int i = 0;
    for (const char* host : hosts) {
        ++i;
        TcpScript tcp(builder, "10.0.0." + std::to_string(i),
                      static_cast<std::uint16_t>(42000 + i), "192.0.2.5", 443, 10.0 + i);
        tcp.open();
        tcp.client_data(hello_records(host));
        tcp.server_bulk(20 << 10);
    }

    TcpScript primary(builder, "10.0.0.50", 45000, "192.0.2.77", 443, 12.0);
    primary.open();
    tls::TlsClientHello inner = tls::ClientHelloBuilder()
                                    .sni("hidden.hotstar.example")
                                    .supported_versions({tls::kTls13})
                                    .key_share_groups({0x001d})
                                    .build();
    tls::TlsClientHello outer = ech::build_outer_client_hello(
        inner,
        [] {
            ech::EchConfig c;
            c.config_id = 3;
            c.public_key = Bytes(32, 0x5d);
            c.public_name = "cdn.example";
            return c;
        }(),
        ech::scramble_sealer);
    primary.client_data(tls::fragment_into_records(tls::kContentHandshake, tls::kTls12,
                                                   tls::serialize_client_hello(outer), 16384));
    primary.server_bulk(2 << 20);
    primary.advance_clock_to(200.0);
    primary.client_bulk(1000);

    builder.write_pcap(path);
}

} // namespace

TEST_CASE("analyze writes the CSV the library writes") {
    TempDir tmp;
    std::string capture = tmp.file("cap.pcap");
    write_hotstar_capture(capture);

    std::string out = tmp.file("report.csv");
    CHECK(cli::run({"analyze", "--in", capture, "--out", out}) == cli::kExitOk);

    std::ostringstream expected;
    capture::write_report_csv(capture::reassemble_flows(capture::read_capture(capture)), expected);
    CHECK(slurp(out) == expected.str());

    auto rows = parse_csv(slurp(out));
    REQUIRE(rows.size() == 10);  // header + 9 flows
    CHECK(rows[0][0] == "src_ip");

    std::string jsonl = tmp.file("report.jsonl");
    CHECK(cli::run({"analyze", "--in", capture, "--out", jsonl}) == cli::kExitOk);
    CHECK(slurp(jsonl).find("\"tls_version\"") != std::string::npos);
}

TEST_CASE("classify emits a loadable report with the expected roles") {
    TempDir tmp;
    std::string capture = tmp.file("cap.pcap");
    write_hotstar_capture(capture);
    std::string out = tmp.file("cls.json");

    CHECK(cli::run({"classify", "--in", capture, "--out", out, "--profiles",
                    "profiles/table1.json"}) == cli::kExitOk);

    classify::ClassifiedCapture report = classify::load_report(out);
    REQUIRE(report.flows.size() == 9);
    std::size_t side = 0;
    std::size_t primary = 0;
    for (const auto& f : report.flows) {
        if (f.role == classify::Role::side) ++side;
        if (f.role == classify::Role::primary) ++primary;
    }
    CHECK(side == 8);
    CHECK(primary == 1);
    REQUIRE(report.services.count("hotstar"));
    CHECK(report.services.at("hotstar").side_flows.size() == 8);
    CHECK(report.services.at("hotstar").candidate_primary_flows.size() == 1);
}

TEST_CASE("threshold overrides reach the classifier") {
    TempDir tmp;
    CaptureBuilder builder;
    TcpScript tcp(builder, "10.0.0.1", 42001, "192.0.2.5", 443, 1.0);
    tcp.open();
    tcp.client_bulk(3 << 10);
    std::string capture = tmp.file("small.pcap");
    builder.write_pcap(capture);
    std::string out = tmp.file("cls.json");

    CHECK(cli::run({"classify", "--in", capture, "--out", out, "--profiles",
                    "profiles/table1.json", "--threshold-primary", "2048", "--threshold-side",
                    "1024"}) == cli::kExitOk);
    classify::ClassifiedCapture report = classify::load_report(out);
    REQUIRE(report.flows.size() == 1);
    CHECK(report.flows[0].role == classify::Role::primary);
}

TEST_CASE("policy derives the eight hotstar rules from a report file or directory") {
    TempDir tmp;
    std::string capture = tmp.file("cap.pcap");
    write_hotstar_capture(capture);
    std::string cls = tmp.file("cls.json");
    REQUIRE(cli::run({"classify", "--in", capture, "--out", cls, "--profiles",
                      "profiles/table1.json"}) == cli::kExitOk);

    std::string pol = tmp.file("hotstar.policy.json");
    CHECK(cli::run({"policy", "--in", cls, "--out", pol, "--target", "hotstar", "--action",
                    "block", "--scope", "before"}) == cli::kExitOk);
    policy::Policy loaded = policy::load_policy(pol);
    CHECK(loaded.target_service == "hotstar");
    CHECK(loaded.rules.size() == 8);
    for (const auto& rule : loaded.rules) {
        CHECK(rule.scope == policy::RuleScope::before_session);
        CHECK(rule.action == policy::Action::block);
    }

    // directory form: merge every report in the directory
    fs::create_directories(tmp.file("reports"));
    fs::copy_file(cls, tmp.file("reports/one.json"));
    std::string pol2 = tmp.file("hotstar2.policy.json");
    CHECK(cli::run({"policy", "--in", tmp.file("reports"), "--out", pol2, "--target", "hotstar",
                    "--action", "block", "--scope", "before"}) == cli::kExitOk);
    CHECK(slurp(pol2) == slurp(pol));
}

TEST_CASE("simulate runs a policy against a shipped model") {
    TempDir tmp;
    policy::Policy policy = policy::make_block_policy(
        "hotstar", classify::load_profiles("profiles/table1.json")[0].sni_patterns,
        policy::RuleScope::during_session);
    std::string pol = tmp.file("p.json");
    policy::save_policy(policy, pol);

    std::string out = tmp.file("outcome.json");
    CHECK(cli::run({"simulate", "--in", pol, "--model", "models/hotstar.json", "--profiles",
                    "profiles/table1.json", "--scenario", "during", "--segments", "10", "--out",
                    out}) == cli::kExitOk);
    std::string json = slurp(out);
    CHECK(json.find("\"playback\": \"stops-after-buffer\"") != std::string::npos);
    CHECK(json.find("\"timeline\"") != std::string::npos);
}

TEST_CASE("table2 renders the six-cell grid plus the escalation line") {
    TempDir tmp;
    std::string out = tmp.file("table.txt");
    CHECK(cli::run({"table2", "--models", "models", "--profiles", "profiles/table1.json", "--out",
                    out}) == cli::kExitOk);
    std::string table = slurp(out);
    CHECK(table.find("hotstar") != std::string::npos);
    CHECK(table.find("primevideo") != std::string::npos);
    CHECK(table.find("youtube") != std::string::npos);
    CHECK(table.find("No video") != std::string::npos);
    CHECK(table.find("No Video") != std::string::npos);
    CHECK(table.find("Reduced rate and quality downgrade") != std::string::npos);
    CHECK(table.find("Video playout, no thumbnails") != std::string::npos);
    CHECK(table.find("fallback side channels also blocked") != std::string::npos);
}

TEST_CASE("usage errors exit 1, data errors exit 2") {
    TempDir tmp;
    CHECK(cli::run({"frobnicate"}) == cli::kExitUsage);
    CHECK(cli::run({"analyze"}) == cli::kExitUsage);  // --in/--out required
    CHECK(cli::run({}) == cli::kExitUsage);

    std::string junk = tmp.file("junk.pcap");
    std::ofstream(junk) << "this is not a capture";
    CHECK(cli::run({"analyze", "--in", junk, "--out", tmp.file("o.csv")}) == cli::kExitData);

    std::string empty_dir = tmp.file("empty");
    fs::create_directories(empty_dir);
    CHECK(cli::run({"policy", "--in", empty_dir, "--out", tmp.file("p.json"), "--target",
                    "hotstar"}) == cli::kExitData);
}

TEST_CASE("ECHOSCOPE_PROFILES provides the profile default") {
    TempDir tmp;
    std::string capture = tmp.file("cap.pcap");
    write_hotstar_capture(capture);
    std::string out = tmp.file("cls.json");

    setenv("ECHOSCOPE_PROFILES", "profiles/table1.json", 1);
    int rc = cli::run({"classify", "--in", capture, "--out", out});
    unsetenv("ECHOSCOPE_PROFILES");
    CHECK(rc == cli::kExitOk);
    CHECK(classify::load_report(out).services.count("hotstar") == 1);
}

TEST_CASE("the file-staged pipeline equals the in-process composition") {
    TempDir tmp;
    std::string capture = tmp.file("cap.pcap");
    write_hotstar_capture(capture);

    // staged through files
    std::string cls = tmp.file("cls.json");
    std::string pol = tmp.file("pol.json");
    std::string outcome = tmp.file("outcome.json");
    REQUIRE(cli::run({"classify", "--in", capture, "--out", cls, "--profiles",
                      "profiles/table1.json"}) == cli::kExitOk);
    REQUIRE(cli::run({"policy", "--in", cls, "--out", pol, "--target", "hotstar", "--action",
                      "block", "--scope", "during"}) == cli::kExitOk);
    REQUIRE(cli::run({"simulate", "--in", pol, "--model", "models/hotstar.json", "--profiles",
                      "profiles/table1.json", "--scenario", "during", "--segments", "12", "--out",
                      outcome}) == cli::kExitOk);

    // the same pipeline, composed in memory
    classify::ClassifierConfig cfg;
    cfg.profiles = classify::load_profiles("profiles/table1.json");
    auto flows = capture::reassemble_flows(capture::read_capture(capture));
    classify::ClassifiedCapture report = classify::classify_capture(flows, cfg);
    policy::Policy policy = policy::derive_attack_policy(
        report.flows, "hotstar", policy::Action::block, 0, policy::RuleScope::during_session);
    sim::ServiceModel model = sim::load_model("models/hotstar.json");
    classify::ServiceProfile profile = cfg.profiles[0];
    sim::SimOutcome sim_outcome =
        sim::simulate(model, profile, policy, sim::Scenario::block_during, 12);

    CHECK(slurp(cls) == classify::report_to_json(report));
    CHECK(slurp(pol) == policy::policy_to_json(policy));
    CHECK(slurp(outcome) ==
          sim::outcome_to_json("hotstar", sim::Scenario::block_during, sim_outcome));
}
