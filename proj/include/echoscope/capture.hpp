// capture.hpp
//
// Offline pcap/pcapng reading, TCP flow reassembly bounded to the
// handshake window, and the per-flow CSV / JSON-lines report.

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "echoscope/error.hpp"
#include "echoscope/tls_wire.hpp"

namespace echoscope::capture {

enum class Transport : std::uint8_t { tcp, udp };

struct IpAddr {
    std::array<std::uint8_t, 16> bytes{};
    std::uint8_t size = 4;  // 4 or 16

    std::string to_string() const;

    auto operator<=>(const IpAddr&) const = default;
};

struct FlowKey {
    IpAddr src_ip;
    IpAddr dst_ip;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Transport transport = Transport::tcp;

    FlowKey reversed() const { return FlowKey{dst_ip, src_ip, dst_port, src_port, transport}; }

    auto operator<=>(const FlowKey&) const = default;
};

// One transport payload event. The key is canonicalized (the lower
// address:port endpoint is `a`); `from_a` records the packet's direction
// relative to that ordering.
struct SegmentEvent {
    double ts = 0.0;
    FlowKey key;
    bool from_a = true;
    std::uint32_t seq = 0;  // TCP sequence number of the first payload byte
    bool syn = false;
    bool fin = false;
    bool rst = false;
    Bytes payload;
};

enum class CaptureFault { unsupported_link_type, corrupt_capture, io_failure };

class CaptureError : public DataError {
public:
    CaptureError(CaptureFault fault, std::string path, std::size_t offset, const std::string& what)
        : DataError(std::move(path), offset, what), fault_(fault) {}

    CaptureFault fault() const { return fault_; }

private:
    CaptureFault fault_;
};

// Reads a classic pcap or pcapng file (Ethernet or raw-IP link type) and
// yields TCP/UDP payload segments in file order. Non-initial IP fragments
// are skipped; there is no defragmentation.
std::vector<SegmentEvent> read_capture(const std::string& path);
std::vector<SegmentEvent> read_capture_bytes(BytesView data, const std::string& path_for_errors);

struct FlowRecord {
    FlowKey key;  // src = session initiator
    double first_ts = 0.0;
    double last_ts = 0.0;
    // Captured payload byte totals per direction, retransmissions included.
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
    std::optional<tls::TlsClientHello> client_hello;
    std::optional<tls::TlsServerHello> server_hello;
    std::optional<tls::PrivacyAssessment> assessment;
    bool truncated = false;

    double session_length() const { return last_ts - first_ts; }

    bool operator==(const FlowRecord&) const = default;
};

struct ReassemblyOptions {
    // Per-direction reassembly window; handshakes fit comfortably. Byte
    // counters keep counting past it.
    std::size_t per_direction_cap = 64 * 1024;
};

// Groups segments into flows, reconstructs each direction's in-order byte
// stream up to the cap (retransmissions deduplicated, out-of-order
// segments buffered), and parses TLS handshakes where the bytes look like
// records. Sequence gaps and captures that miss the stream start mark the
// flow truncated and stop handshake parsing. Output is ordered by
// (first_ts, key) regardless of input order.
std::vector<FlowRecord> reassemble_flows(const std::vector<SegmentEvent>& events,
                                         const ReassemblyOptions& options = {});

// Report field accessors shared by the CSV and JSON writers.
std::string flow_tls_version(const FlowRecord& flow);  // "1.2", "unknown", "quic-opaque", ...
std::string flow_sni(const FlowRecord& flow);
std::string flow_alpn(const FlowRecord& flow);  // ';'-joined
bool flow_ech(const FlowRecord& flow);
std::string flow_privacy_level(const FlowRecord& flow);  // "" without a handshake

inline constexpr const char* kReportHeader =
    "src_ip,src_port,dst_ip,dst_port,tls_version,sni,alpn,ech,bytes_up,bytes_down,"
    "session_length_s,privacy_level";

// RFC 4180 CSV, one row per flow in first_ts order, columns per
// kReportHeader.
void write_report_csv(const std::vector<FlowRecord>& flows, std::ostream& out);
void export_report(const std::vector<FlowRecord>& flows, const std::string& path);

// JSON-lines mirror of the CSV with identical field names.
void write_report_jsonl(const std::vector<FlowRecord>& flows, std::ostream& out);
void export_report_jsonl(const std::vector<FlowRecord>& flows, const std::string& path);

} // namespace echoscope::capture
