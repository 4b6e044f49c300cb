// acceptance.cpp
//
// End-to-end checks over the full pipeline, one printed line per
// criterion. Exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "echoscope/capture.hpp"
#include "echoscope/classify.hpp"
#include "echoscope/cli.hpp"
#include "echoscope/ech.hpp"
#include "echoscope/policy.hpp"
#include "echoscope/shaper_sim.hpp"
#include "support/capture_builder.hpp"
#include "support/hello_gen.hpp"

using namespace echoscope;
using namespace echoscope::testsupport;
namespace fs = std::filesystem;

namespace {

int g_failed_criteria = 0;
int g_failed_checks = 0;

void expect(bool condition, const std::string& what) {
    if (!condition) {
        ++g_failed_checks;
        std::cerr << "    check failed: " << what << "\n";
    }
}

void criterion(int number, const std::string& name, const std::function<void()>& body) {
    g_failed_checks = 0;
    try {
        body();
    } catch (const std::exception& e) {
        ++g_failed_checks;
        std::cerr << "    exception: " << e.what() << "\n";
    }
    bool pass = g_failed_checks == 0;
    if (!pass) ++g_failed_criteria;
    std::printf("%s  criterion %d: %s\n", pass ? "PASS" : "FAIL", number, name.c_str());
    std::fflush(stdout);
}

struct TempDir {
    fs::path path;

    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path = fs::temp_directory_path() / ("echoscope-acceptance-" + std::to_string(rng()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::string> all_table1_hosts(const std::vector<classify::ServiceProfile>& profiles) {
    std::vector<std::string> hosts;
    for (const auto& profile : profiles) {
        hosts.insert(hosts.end(), profile.sni_patterns.begin(), profile.sni_patterns.end());
    }
    return hosts;
}

tls::TlsClientHello outer_for(const std::string& inner_sni) {
    tls::TlsClientHello inner = tls::ClientHelloBuilder()
                                    .sni(inner_sni)
                                    .alpn({"h2"})
                                    .supported_versions({tls::kTls13})
                                    .key_share_groups({0x001d})
                                    .build();
    return ech::build_outer_client_hello(inner, sample_ech_config(7, "cdn.example"),
                                         ech::scramble_sealer);
}

// One TLS 1.2 flow per Table-1 host plus three large, long ECH flows.
void write_table1_capture(const std::string& path,
                          const std::vector<classify::ServiceProfile>& profiles) {
    CaptureBuilder builder;
    int i = 0;
    for (const auto& profile : profiles) {
        for (const std::string& host : profile.sni_patterns) {
            ++i;
            TcpScript tcp(builder, "10.0.0." + std::to_string(i),
                          static_cast<std::uint16_t>(42000 + i), "192.0.2.5", 443, 100.0 + i);
            tcp.open();
            tcp.client_data(tls::fragment_into_records(
                tls::kContentHandshake, tls::kTls12,
                tls::ClientHelloBuilder().sni(host).build_message(), 16384));
            tcp.server_bulk(40 << 10);
        }
    }

    const char* inner_snis[] = {"api.hotstar.com", "atv-ps-eu.primevideo.com", "i.ytimg.com"};
    for (int k = 0; k < 3; ++k) {
        TcpScript tcp(builder, "10.0.1." + std::to_string(k + 1),
                      static_cast<std::uint16_t>(45000 + k), "192.0.2.99", 443, 105.0 + k);
        tcp.open();
        tcp.client_data(tls::fragment_into_records(
            tls::kContentHandshake, tls::kTls12,
            tls::serialize_client_hello(outer_for(inner_snis[k])), 16384));
        tcp.server_bulk(3 << 20, 60000);
        tcp.advance_clock_to(500.0 + k);
        tcp.client_bulk(2000);
    }
    builder.write_pcap(path);
}

} // namespace

int main() {
    auto profiles = classify::load_profiles("profiles/table1.json");

    TempDir tmp;
    std::string capture_path = tmp.file("table1.pcap");
    write_table1_capture(capture_path, profiles);
    classify::ClassifiedCapture report;

    criterion(1, "every Table-1 host classifies to its service; ECH flows are primary (< 5 s)",
              [&] {
        auto start = std::chrono::steady_clock::now();
        std::string report_path = tmp.file("classified.json");
        int rc = cli::run({"classify", "--in", capture_path, "--out", report_path, "--profiles",
                           "profiles/table1.json"});
        double elapsed = seconds_since(start);
        expect(rc == cli::kExitOk, "classify subcommand exits 0");
        expect(elapsed < 5.0, "classification finished in " + std::to_string(elapsed) + " s");

        report = classify::load_report(report_path);
        expect(report.flows.size() == 20, "capture produced 17 side + 3 ech flows");

        std::map<std::string, std::string> host_to_service;
        for (const auto& profile : profiles) {
            for (const std::string& host : profile.sni_patterns) {
                host_to_service[host] = profile.service_name;
            }
        }
        int matched = 0;
        int ech_primary = 0;
        for (const auto& flow : report.flows) {
            if (flow.full_ech) {
                bool has_ech_evidence = false;
                for (const auto& e : flow.evidence) {
                    has_ech_evidence =
                        has_ech_evidence || e.kind == classify::EvidenceKind::ech_opaque;
                }
                expect(flow.role == classify::Role::primary, "ech flow classified primary");
                expect(has_ech_evidence, "ech flow carries ech-opaque evidence");
                if (flow.role == classify::Role::primary && has_ech_evidence) ++ech_primary;
                continue;
            }
            expect(flow.sni.has_value(), "side flow has a readable SNI");
            if (!flow.sni) continue;
            expect(flow.role == classify::Role::side, *flow.sni + " classified side");
            expect(flow.service == host_to_service[*flow.sni],
                   *flow.sni + " attributed to " + host_to_service[*flow.sni]);
            if (flow.role == classify::Role::side &&
                flow.service == host_to_service[*flow.sni]) {
                ++matched;
            }
        }
        expect(matched == 17, "17/17 Table-1 hosts resolved exactly, got " + std::to_string(matched));
        expect(ech_primary == 3, "3/3 ECH flows primary with evidence");
    });

    criterion(2, "table2 reproduces all six cells and the fallback escalation (< 1 s)", [&] {
        auto start = std::chrono::steady_clock::now();
        std::string table_path = tmp.file("table2.txt");
        int rc = cli::run({"table2", "--models", "models", "--profiles", "profiles/table1.json",
                           "--out", table_path});
        double elapsed = seconds_since(start);
        expect(rc == cli::kExitOk, "table2 subcommand exits 0");
        expect(elapsed < 1.0, "table2 finished in " + std::to_string(elapsed) + " s");

        std::ifstream in(table_path);
        std::stringstream ss;
        ss << in.rdbuf();
        std::string table = ss.str();

        auto cell = [&table](const std::string& service, int column) -> std::string {
            std::istringstream lines(table);
            std::string line;
            while (std::getline(lines, line)) {
                if (line.rfind(service, 0) == 0) {
                    // columns separated by " | "
                    std::vector<std::string> cols;
                    std::size_t pos = 0;
                    while (true) {
                        std::size_t bar = line.find(" | ", pos);
                        if (bar == std::string::npos) {
                            cols.push_back(line.substr(pos));
                            break;
                        }
                        cols.push_back(line.substr(pos, bar - pos));
                        pos = bar + 3;
                    }
                    if (column < static_cast<int>(cols.size())) {
                        std::string value = cols[column];
                        while (!value.empty() && value.back() == ' ') value.pop_back();
                        return value;
                    }
                }
            }
            return "<missing>";
        };

        expect(cell("hotstar", 1) == "No video", "hotstar/before cell");
        expect(cell("hotstar", 2) == "No Video", "hotstar/during cell");
        expect(cell("primevideo", 1) == "No video", "primevideo/before cell");
        expect(cell("primevideo", 2) == "Reduced rate and quality downgrade",
               "primevideo/during cell");
        expect(cell("youtube", 1) == "Video playout, no thumbnails", "youtube/before cell");
        expect(cell("youtube", 2) == "Video playout, no thumbnails", "youtube/during cell");
        expect(table.find("primevideo (fallback side channels also blocked, during playout): No "
                          "video") != std::string::npos,
               "fallback escalation line present");
    });

    criterion(3, "1,000 ECH flows evade every derived Table-1 policy; outer hides inner", [&] {
        std::vector<policy::Policy> policies;
        for (const char* service : {"hotstar", "primevideo", "youtube"}) {
            policies.push_back(policy::derive_attack_policy(report.flows, service,
                                                            policy::Action::block, 0,
                                                            policy::RuleScope::always));
        }
        expect(policies[0].rules.size() == 8, "hotstar policy has 8 rules");
        expect(policies[1].rules.size() == 5, "primevideo policy has 5 rules");
        expect(policies[2].rules.size() == 4, "youtube policy has 4 rules");

        std::vector<std::string> hosts = all_table1_hosts(profiles);
        std::mt19937_64 rng(60180);
        int matches = 0;
        int leaks = 0;
        for (int i = 0; i < 1000; ++i) {
            const std::string& inner_sni = hosts[rng() % hosts.size()];
            tls::TlsClientHello outer = outer_for(inner_sni);
            for (const policy::Policy& policy : policies) {
                if (policy::apply_policy(outer.sni, policy).kind != policy::DecisionKind::allow) {
                    ++matches;
                }
            }
            Bytes wire = tls::serialize_client_hello(outer);
            auto it = std::search(wire.begin(), wire.end(), inner_sni.begin(), inner_sni.end());
            if (it != wire.end()) ++leaks;
        }
        expect(matches == 0, "0 policy matches on ECH flows, got " + std::to_string(matches));
        expect(leaks == 0, "0 inner-SNI byte leaks, got " + std::to_string(leaks));
    });

    criterion(4, "10,000 generated hellos round-trip; 10,000 fuzz inputs never crash framing", [] {
        std::mt19937_64 rng(424242);
        int mismatches = 0;
        for (int i = 0; i < 10000; ++i) {
            Bytes message = random_hello_message(rng);
            tls::TlsClientHello hello = tls::parse_client_hello(message);
            if (tls::serialize_client_hello(hello) != message) ++mismatches;
        }
        expect(mismatches == 0, "serialize(parse(x)) == x, " + std::to_string(mismatches) +
                                    " mismatches");

        std::mt19937_64 fuzz(171717);
        int completed = 0;
        for (int i = 0; i < 10000; ++i) {
            Bytes noise(fuzz() % 256);
            for (auto& b : noise) b = static_cast<std::uint8_t>(fuzz());
            tls::RecordParseResult result = tls::parse_records(noise, fuzz() % 2 == 0);
            if (result.consumed <= noise.size()) ++completed;
        }
        expect(completed == 10000, "every fuzz input returned a result");
    });

    criterion(5, "legacy_version never changes the effective version (0 violations)", [] {
        std::mt19937_64 rng(5150);
        HelloGenOptions options;
        options.supported_versions_probability = 1.0;
        int violations = 0;
        for (int i = 0; i < 2000; ++i) {
            tls::TlsClientHello hello = tls::parse_client_hello(random_hello_message(rng, options));
            tls::TlsVersion expected = hello.effective_version();
            for (std::uint16_t legacy : {tls::kTls10, tls::kTls11, tls::kTls12, tls::kTls13}) {
                tls::TlsClientHello mutated = hello;
                mutated.legacy_version = legacy;
                if (mutated.effective_version() != expected) ++violations;
            }
        }
        expect(violations == 0, std::to_string(violations) + " version-precedence violations");
    });

    criterion(6, "500 flows reassemble identically under segment permutations; bytes conserve", [] {
        std::mt19937_64 rng(909090);
        int flows_checked = 0;
        int mismatched_flows = 0;
        int conservation_errors = 0;

        for (int i = 0; i < 500; ++i) {
            std::string sni = random_host(rng);
            std::size_t up_extra = rng() % 5000;
            std::size_t down = rng() % 100000;
            std::size_t mss = 64 + rng() % 1400;

            auto build = [&](unsigned permutation_seed) {
                CaptureBuilder builder;
                TcpScript tcp(builder, "10.2.0.1", static_cast<std::uint16_t>(40000 + i),
                              "192.0.2.5", 443, 1.0);
                tcp.open();
                tcp.client_data(tls::fragment_into_records(
                    tls::kContentHandshake, tls::kTls12,
                    tls::ClientHelloBuilder().sni(sni).build_message(), 1200));
                if (up_extra) tcp.client_bulk(up_extra, mss);
                if (down) tcp.server_bulk(down, mss);
                if (permutation_seed != 0) {
                    auto& pkts = builder.packets();
                    std::vector<double> slots;
                    for (const auto& p : pkts) slots.push_back(p.ts);
                    std::mt19937_64 shuffle_rng(permutation_seed);
                    std::shuffle(pkts.begin(), pkts.end(), shuffle_rng);
                    for (std::size_t k = 0; k < pkts.size(); ++k) pkts[k].ts = slots[k];
                }
                return builder;
            };

            CaptureBuilder baseline_builder = build(0);
            auto baseline =
                capture::reassemble_flows(capture::read_capture_bytes(baseline_builder.to_pcap(),
                                                                      "base.pcap"));
            if (baseline.size() != 1 || !baseline[0].client_hello ||
                baseline[0].client_hello->sni != sni) {
                ++mismatched_flows;
                continue;
            }

            std::uint64_t flow_bytes = baseline[0].bytes_up + baseline[0].bytes_down;
            if (flow_bytes != baseline_builder.total_payload_bytes()) ++conservation_errors;

            for (unsigned seed : {1u, 2u, 3u}) {
                auto permuted = capture::reassemble_flows(
                    capture::read_capture_bytes(build(seed).to_pcap(), "perm.pcap"));
                if (permuted != baseline) ++mismatched_flows;
            }
            ++flows_checked;
        }
        expect(flows_checked == 500, "all 500 generated flows parsed");
        expect(mismatched_flows == 0,
               std::to_string(mismatched_flows) + " permutation mismatches");
        expect(conservation_errors == 0,
               std::to_string(conservation_errors) + " byte-conservation errors");
    });

    criterion(7, "live bandwidth figures stay out of scope; model constants are pinned", [] {
        sim::ServiceModel hotstar = sim::load_model("models/hotstar.json");
        sim::ServiceModel primevideo = sim::load_model("models/primevideo.json");
        sim::ServiceModel youtube = sim::load_model("models/youtube.json");
        expect(hotstar.normal_rate_bps == 1000000, "hotstar pinned at 1 Mbps");
        expect(primevideo.normal_rate_bps == 11000000, "primevideo pinned at 11 Mbps");
        expect(primevideo.fallback && primevideo.fallback->degraded_rate_bps == 844444,
               "primevideo degraded tier pinned at 844444 bps (0.38 GB/h)");
        expect(youtube.normal_rate_bps == 4500000, "youtube pinned at 4.5 Mbps");
        for (const auto& host :
             primevideo.fallback ? primevideo.fallback->fallback_snis : std::vector<std::string>{}) {
            expect(host.ends_with(".synthetic.example"),
                   "fallback hosts are marked synthetic: " + host);
        }
        expect(!hotstar.notes.empty() && !primevideo.notes.empty() && !youtube.notes.empty(),
               "models document their constants");
    });

    if (g_failed_criteria == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) failed\n", g_failed_criteria);
    return 1;
}
