// capture.cpp

#include "echoscope/capture.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace echoscope::capture {

std::string IpAddr::to_string() const {
    char buf[INET6_ADDRSTRLEN] = {};
    if (size == 4) {
        inet_ntop(AF_INET, bytes.data(), buf, sizeof(buf));
    } else {
        inet_ntop(AF_INET6, bytes.data(), buf, sizeof(buf));
    }
    return buf;
}

namespace {

constexpr std::uint32_t kPcapMagicUs = 0xa1b2c3d4;
constexpr std::uint32_t kPcapMagicNs = 0xa1b23c4d;
constexpr std::uint32_t kPcapngShb = 0x0a0d0d0a;
constexpr std::uint32_t kPcapngByteOrder = 0x1a2b3c4d;

constexpr std::uint16_t kLinkEthernet = 1;
constexpr std::uint16_t kLinkRawIp = 101;

// Little cursor with selectable endianness; pcap and pcapng files carry
// their byte order in the magic.
class FileReader {
public:
    FileReader(BytesView data, bool swap) : data_(data), swap_(swap) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    bool need(std::size_t n) const { return remaining() >= n; }

    std::uint16_t u16() {
        const std::uint8_t* p = take(2);
        return swap_ ? static_cast<std::uint16_t>(p[0] | p[1] << 8)
                     : static_cast<std::uint16_t>(p[0] << 8 | p[1]);
    }

    std::uint32_t u32() {
        const std::uint8_t* p = take(4);
        return swap_ ? (std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                        std::uint32_t(p[3]) << 24)
                     : (std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 |
                        std::uint32_t(p[2]) << 8 | std::uint32_t(p[3]));
    }

    BytesView bytes(std::size_t n) {
        const std::uint8_t* p = take(n);
        return BytesView(p, n);
    }

    void skip(std::size_t n) { take(n); }

private:
    const std::uint8_t* take(std::size_t n) {
        if (!need(n)) throw std::out_of_range("capture file ends early");
        const std::uint8_t* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }

    BytesView data_;
    bool swap_;
    std::size_t pos_ = 0;
};

struct PacketView {
    double ts;
    BytesView data;
    std::uint16_t link_type;
};

struct ParsedIp {
    IpAddr src;
    IpAddr dst;
    std::uint8_t protocol = 0;
    BytesView payload;
};

std::optional<ParsedIp> parse_ipv4(BytesView data) {
    if (data.size() < 20) return std::nullopt;
    if ((data[0] >> 4) != 4) return std::nullopt;
    std::size_t ihl = static_cast<std::size_t>(data[0] & 0x0f) * 4;
    if (ihl < 20 || data.size() < ihl) return std::nullopt;
    std::size_t total = static_cast<std::size_t>(data[2]) << 8 | data[3];
    total = std::min(total, data.size());
    if (total < ihl) return std::nullopt;
    std::uint16_t frag = static_cast<std::uint16_t>(data[6] << 8 | data[7]);
    if ((frag & 0x1fff) != 0) return std::nullopt;  // non-first fragment
    ParsedIp ip;
    ip.protocol = data[9];
    ip.src.size = 4;
    ip.dst.size = 4;
    std::copy(data.begin() + 12, data.begin() + 16, ip.src.bytes.begin());
    std::copy(data.begin() + 16, data.begin() + 20, ip.dst.bytes.begin());
    ip.payload = data.subspan(ihl, total - ihl);
    return ip;
}

std::optional<ParsedIp> parse_ipv6(BytesView data) {
    if (data.size() < 40) return std::nullopt;
    if ((data[0] >> 4) != 6) return std::nullopt;
    std::size_t payload_len = static_cast<std::size_t>(data[4]) << 8 | data[5];
    std::uint8_t next = data[6];
    ParsedIp ip;
    ip.src.size = 16;
    ip.dst.size = 16;
    std::copy(data.begin() + 8, data.begin() + 24, ip.src.bytes.begin());
    std::copy(data.begin() + 24, data.begin() + 40, ip.dst.bytes.begin());
    std::size_t off = 40;
    std::size_t end = std::min(data.size(), off + payload_len);
    // Walk the extension-header chain far enough to find the transport.
    while (true) {
        if (next == 6 || next == 17) break;
        if (next == 0 || next == 43 || next == 60) {
            if (end < off + 8) return std::nullopt;
            std::uint8_t hdr_next = data[off];
            std::size_t hdr_len = (static_cast<std::size_t>(data[off + 1]) + 1) * 8;
            if (end < off + hdr_len) return std::nullopt;
            next = hdr_next;
            off += hdr_len;
        } else if (next == 44) {
            if (end < off + 8) return std::nullopt;
            std::uint16_t frag_off = static_cast<std::uint16_t>((data[off + 2] << 8 | data[off + 3]) >> 3);
            if (frag_off != 0) return std::nullopt;  // non-first fragment
            next = data[off];
            off += 8;
        } else {
            return std::nullopt;  // no TCP/UDP behind this header
        }
    }
    ip.protocol = next;
    ip.payload = data.subspan(off, end - off);
    return ip;
}

std::optional<ParsedIp> parse_link(const PacketView& pkt) {
    BytesView data = pkt.data;
    if (pkt.link_type == kLinkRawIp) {
        if (data.empty()) return std::nullopt;
        return (data[0] >> 4) == 6 ? parse_ipv6(data) : parse_ipv4(data);
    }
    // Ethernet, with a single optional 802.1Q tag.
    if (data.size() < 14) return std::nullopt;
    std::size_t off = 12;
    std::uint16_t ethertype = static_cast<std::uint16_t>(data[off] << 8 | data[off + 1]);
    off += 2;
    if (ethertype == 0x8100) {
        if (data.size() < off + 4) return std::nullopt;
        ethertype = static_cast<std::uint16_t>(data[off + 2] << 8 | data[off + 3]);
        off += 4;
    }
    if (ethertype == 0x0800) return parse_ipv4(data.subspan(off));
    if (ethertype == 0x86dd) return parse_ipv6(data.subspan(off));
    return std::nullopt;
}

void append_transport_event(std::vector<SegmentEvent>& out, double ts, const ParsedIp& ip) {
    if (ip.protocol == 6) {
        BytesView seg = ip.payload;
        if (seg.size() < 20) return;
        std::uint16_t sport = static_cast<std::uint16_t>(seg[0] << 8 | seg[1]);
        std::uint16_t dport = static_cast<std::uint16_t>(seg[2] << 8 | seg[3]);
        std::uint32_t seq = std::uint32_t(seg[4]) << 24 | std::uint32_t(seg[5]) << 16 |
                            std::uint32_t(seg[6]) << 8 | seg[7];
        std::size_t data_off = static_cast<std::size_t>(seg[12] >> 4) * 4;
        if (data_off < 20 || seg.size() < data_off) return;
        std::uint8_t flags = seg[13];

        SegmentEvent ev;
        ev.ts = ts;
        ev.seq = seq;
        ev.syn = flags & 0x02;
        ev.fin = flags & 0x01;
        ev.rst = flags & 0x04;
        BytesView payload = seg.subspan(data_off);
        ev.payload.assign(payload.begin(), payload.end());

        FlowKey fwd{ip.src, ip.dst, sport, dport, Transport::tcp};
        bool src_is_a = std::tie(ip.src, sport) <= std::tie(ip.dst, dport);
        ev.key = src_is_a ? fwd : fwd.reversed();
        ev.from_a = src_is_a;
        out.push_back(std::move(ev));
    } else if (ip.protocol == 17) {
        BytesView seg = ip.payload;
        if (seg.size() < 8) return;
        std::uint16_t sport = static_cast<std::uint16_t>(seg[0] << 8 | seg[1]);
        std::uint16_t dport = static_cast<std::uint16_t>(seg[2] << 8 | seg[3]);
        std::size_t len = static_cast<std::size_t>(seg[4]) << 8 | seg[5];
        len = std::min(len, seg.size());
        if (len < 8) return;

        SegmentEvent ev;
        ev.ts = ts;
        BytesView payload = seg.subspan(8, len - 8);
        ev.payload.assign(payload.begin(), payload.end());

        FlowKey fwd{ip.src, ip.dst, sport, dport, Transport::udp};
        bool src_is_a = std::tie(ip.src, sport) <= std::tie(ip.dst, dport);
        ev.key = src_is_a ? fwd : fwd.reversed();
        ev.from_a = src_is_a;
        out.push_back(std::move(ev));
    }
}

void check_link_type(std::uint16_t link_type, const std::string& path, std::size_t offset) {
    if (link_type != kLinkEthernet && link_type != kLinkRawIp) {
        throw CaptureError(CaptureFault::unsupported_link_type, path, offset,
                           "unsupported link type " + std::to_string(link_type) +
                               " (expected Ethernet or raw IP)");
    }
}

std::vector<SegmentEvent> read_classic_pcap(BytesView data, const std::string& path) {
    std::uint32_t magic_be = std::uint32_t(data[0]) << 24 | std::uint32_t(data[1]) << 16 |
                             std::uint32_t(data[2]) << 8 | data[3];
    std::uint32_t magic_le = std::uint32_t(data[3]) << 24 | std::uint32_t(data[2]) << 16 |
                             std::uint32_t(data[1]) << 8 | data[0];
    bool swapped;
    bool nanos;
    if (magic_be == kPcapMagicUs || magic_be == kPcapMagicNs) {
        swapped = false;
        nanos = magic_be == kPcapMagicNs;
    } else if (magic_le == kPcapMagicUs || magic_le == kPcapMagicNs) {
        swapped = true;
        nanos = magic_le == kPcapMagicNs;
    } else {
        throw CaptureError(CaptureFault::corrupt_capture, path, 0, "bad pcap magic");
    }

    FileReader r(data, swapped);
    if (!r.need(24)) throw CaptureError(CaptureFault::corrupt_capture, path, 0, "pcap header too short");
    r.skip(4);  // magic
    r.skip(2 + 2 + 4 + 4 + 4);  // version, thiszone, sigfigs, snaplen
    std::size_t link_off = r.pos();
    std::uint16_t link_type = static_cast<std::uint16_t>(r.u32() & 0xffff);
    check_link_type(link_type, path, link_off);

    std::vector<SegmentEvent> events;
    double frac_unit = nanos ? 1e-9 : 1e-6;
    while (r.need(16)) {
        std::uint32_t ts_sec = r.u32();
        std::uint32_t ts_frac = r.u32();
        std::uint32_t incl = r.u32();
        r.skip(4);  // original length
        if (!r.need(incl)) break;  // tolerate a truncated trailing packet
        PacketView pkt{ts_sec + ts_frac * frac_unit, r.bytes(incl), link_type};
        if (auto ip = parse_link(pkt)) append_transport_event(events, pkt.ts, *ip);
    }
    return events;
}

std::vector<SegmentEvent> read_pcapng(BytesView data, const std::string& path) {
    // Detect byte order from the SHB's byte-order magic.
    if (data.size() < 12) {
        throw CaptureError(CaptureFault::corrupt_capture, path, 0, "pcapng too short");
    }
    std::uint32_t bom_be = std::uint32_t(data[8]) << 24 | std::uint32_t(data[9]) << 16 |
                           std::uint32_t(data[10]) << 8 | data[11];
    std::uint32_t bom_le = std::uint32_t(data[11]) << 24 | std::uint32_t(data[10]) << 16 |
                           std::uint32_t(data[9]) << 8 | data[8];
    bool swapped;
    if (bom_be == kPcapngByteOrder) {
        swapped = false;
    } else if (bom_le == kPcapngByteOrder) {
        swapped = true;
    } else {
        throw CaptureError(CaptureFault::corrupt_capture, path, 8, "bad pcapng byte-order magic");
    }

    struct Interface {
        std::uint16_t link_type = 0;
        double ts_unit = 1e-6;
    };
    std::vector<Interface> interfaces;
    std::vector<SegmentEvent> events;

    FileReader r(data, swapped);
    bool first = true;
    while (r.need(12)) {
        std::size_t block_start = r.pos();
        std::uint32_t block_type = r.u32();
        std::uint32_t total_len = r.u32();
        if (total_len < 12 || total_len % 4 != 0 || !r.need(total_len - 8)) {
            throw CaptureError(CaptureFault::corrupt_capture, path, block_start,
                               "bad pcapng block length");
        }
        if (first && block_type != kPcapngShb) {
            throw CaptureError(CaptureFault::corrupt_capture, path, block_start,
                               "pcapng does not start with a section header");
        }
        first = false;
        FileReader body(BytesView(data.data() + r.pos(), total_len - 12), swapped);
        r.skip(total_len - 12);
        std::size_t trailer_off = r.pos();
        if (r.u32() != total_len) {
            throw CaptureError(CaptureFault::corrupt_capture, path, trailer_off,
                               "pcapng block trailer length mismatch");
        }

        switch (block_type) {
            case kPcapngShb:
                interfaces.clear();  // a new section starts a fresh interface list
                break;
            case 1: {  // Interface Description Block
                Interface itf;
                std::size_t link_off = block_start + 8;
                itf.link_type = body.u16();
                body.skip(2);  // reserved
                body.skip(4);  // snaplen
                while (body.need(4)) {
                    std::uint16_t code = body.u16();
                    std::uint16_t len = body.u16();
                    std::size_t padded = (len + 3u) & ~3u;
                    if (!body.need(padded)) break;
                    BytesView value = body.bytes(padded);
                    if (code == 0) break;
                    if (code == 9 && len >= 1) {  // if_tsresol
                        std::uint8_t v = value[0];
                        if (v & 0x80) {
                            itf.ts_unit = 1.0;
                            for (int i = 0; i < (v & 0x7f); ++i) itf.ts_unit /= 2.0;
                        } else {
                            itf.ts_unit = 1.0;
                            for (int i = 0; i < v; ++i) itf.ts_unit /= 10.0;
                        }
                    }
                }
                check_link_type(itf.link_type, path, link_off);
                interfaces.push_back(itf);
                break;
            }
            case 6: {  // Enhanced Packet Block
                std::uint32_t iface = body.u32();
                std::uint32_t ts_high = body.u32();
                std::uint32_t ts_low = body.u32();
                std::uint32_t captured = body.u32();
                body.skip(4);  // original length
                if (iface >= interfaces.size() || !body.need(captured)) break;
                const Interface& itf = interfaces[iface];
                double ts = static_cast<double>((std::uint64_t(ts_high) << 32) | ts_low) * itf.ts_unit;
                PacketView pkt{ts, body.bytes(captured), itf.link_type};
                if (auto ip = parse_link(pkt)) append_transport_event(events, pkt.ts, *ip);
                break;
            }
            case 3: {  // Simple Packet Block: no timestamp, assume interface 0
                if (interfaces.empty()) break;
                std::uint32_t orig_len = body.u32();
                std::size_t captured = std::min<std::size_t>(orig_len, body.remaining());
                PacketView pkt{0.0, body.bytes(captured), interfaces[0].link_type};
                if (auto ip = parse_link(pkt)) append_transport_event(events, pkt.ts, *ip);
                break;
            }
            default:
                break;  // statistics, name resolution, custom blocks
        }
    }
    return events;
}

} // namespace

std::vector<SegmentEvent> read_capture_bytes(BytesView data, const std::string& path) {
    if (data.size() < 4) {
        throw CaptureError(CaptureFault::corrupt_capture, path, 0, "file too short for a capture");
    }
    std::uint32_t first_be = std::uint32_t(data[0]) << 24 | std::uint32_t(data[1]) << 16 |
                             std::uint32_t(data[2]) << 8 | data[3];
    try {
        if (first_be == kPcapngShb) return read_pcapng(data, path);
        return read_classic_pcap(data, path);
    } catch (const std::out_of_range&) {
        throw CaptureError(CaptureFault::corrupt_capture, path, data.size(), "capture ends mid-structure");
    }
}

std::vector<SegmentEvent> read_capture(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CaptureError(CaptureFault::io_failure, path, 0, "cannot open file");
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_capture_bytes(data, path);
}

namespace {

// Per-direction stream state. Segments are kept keyed by sequence number
// and resolved to a contiguous prefix once the whole capture is seen, so
// arrival order cannot matter.
struct DirStream {
    bool has_isn = false;
    std::uint32_t isn = 0;  // SYN sequence number; payload starts at isn+1
    bool has_data = false;
    std::uint32_t first_seen_seq = 0;
    std::uint64_t raw_bytes = 0;
    std::map<std::uint32_t, Bytes> segments;  // absolute seq -> payload

    void on_syn(std::uint32_t seq) {
        if (!has_isn) {
            has_isn = true;
            isn = seq;
        }
    }

    void add(std::uint32_t seq, const Bytes& payload, std::size_t cap) {
        raw_bytes += payload.size();
        if (payload.empty()) return;
        if (!has_data) {
            has_data = true;
            first_seen_seq = seq;
        }
        if (has_isn) {
            std::uint32_t rel = seq - (isn + 1);
            if (rel >= cap) return;  // beyond the reassembly window
        }
        auto [it, inserted] = segments.emplace(seq, payload);
        if (!inserted && payload.size() > it->second.size()) it->second = payload;
    }

    struct Resolved {
        Bytes stream;
        bool truncated = false;
    };

    Resolved resolve(std::size_t cap) const {
        Resolved r;
        if (!has_isn) {
            // Mid-stream capture: bytes before the first seen segment are
            // unknowable, so nothing here is safe to parse.
            r.truncated = has_data;
            return r;
        }
        std::uint32_t base = isn + 1;
        // Order by offset relative to the stream start (mod-2^32 safe).
        std::map<std::uint32_t, const Bytes*> by_rel;
        for (const auto& [seq, bytes] : segments) by_rel[seq - base] = &bytes;
        std::uint32_t pos = 0;
        for (const auto& [rel, bytes] : by_rel) {
            if (rel > pos) {
                r.truncated = true;  // sequence gap: stop at the hole
                break;
            }
            std::size_t skip = pos - rel;
            if (skip < bytes->size()) {
                r.stream.insert(r.stream.end(), bytes->begin() + static_cast<std::ptrdiff_t>(skip),
                                bytes->end());
                pos = rel + static_cast<std::uint32_t>(bytes->size());
            }
            if (r.stream.size() >= cap) {
                r.stream.resize(cap);
                break;
            }
        }
        return r;
    }
};

struct FlowState {
    double first_ts = 0.0;
    double last_ts = 0.0;
    bool any = false;
    Transport transport = Transport::tcp;
    DirStream a2b;
    DirStream b2a;
    bool syn_from_a = false;
    bool syn_from_b = false;
};

} // namespace

std::vector<FlowRecord> reassemble_flows(const std::vector<SegmentEvent>& events,
                                         const ReassemblyOptions& options) {
    std::map<FlowKey, FlowState> flows;
    for (const SegmentEvent& ev : events) {
        FlowState& st = flows[ev.key];
        st.transport = ev.key.transport;
        if (!st.any) {
            st.first_ts = ev.ts;
            st.last_ts = ev.ts;
            st.any = true;
        } else {
            st.first_ts = std::min(st.first_ts, ev.ts);
            st.last_ts = std::max(st.last_ts, ev.ts);
        }
        DirStream& dir = ev.from_a ? st.a2b : st.b2a;
        if (ev.key.transport == Transport::tcp) {
            if (ev.syn) {
                (ev.from_a ? st.syn_from_a : st.syn_from_b) = true;
                dir.on_syn(ev.seq);
                dir.add(ev.seq + 1, ev.payload, options.per_direction_cap);
            } else {
                dir.add(ev.seq, ev.payload, options.per_direction_cap);
            }
        } else {
            dir.raw_bytes += ev.payload.size();
        }
    }

    std::vector<FlowRecord> records;
    records.reserve(flows.size());
    for (const auto& [key, st] : flows) {
        FlowRecord rec;
        rec.first_ts = st.first_ts;
        rec.last_ts = st.last_ts;

        // Initiator: the SYN sender, else the canonical lower endpoint.
        bool a_initiates = st.syn_from_a || !st.syn_from_b;
        rec.key = a_initiates ? key : key.reversed();
        const DirStream& up = a_initiates ? st.a2b : st.b2a;
        const DirStream& down = a_initiates ? st.b2a : st.a2b;
        rec.bytes_up = up.raw_bytes;
        rec.bytes_down = down.raw_bytes;

        if (st.transport == Transport::tcp) {
            DirStream::Resolved up_stream = up.resolve(options.per_direction_cap);
            DirStream::Resolved down_stream = down.resolve(options.per_direction_cap);
            rec.truncated = up_stream.truncated || down_stream.truncated;

            if (tls::plausible_record_header(up_stream.stream)) {
                tls::RecordParseResult recs = tls::parse_records(up_stream.stream);
                Bytes handshake;
                for (const tls::TlsRecord& record : recs.records) {
                    if (record.type() != tls::RecordType::handshake) break;
                    handshake.insert(handshake.end(), record.payload.begin(), record.payload.end());
                }
                if (handshake.size() >= 4 && handshake[0] == tls::kHandshakeClientHello) {
                    std::size_t len = std::size_t(handshake[1]) << 16 |
                                      std::size_t(handshake[2]) << 8 | handshake[3];
                    if (handshake.size() >= 4 + len) {
                        try {
                            rec.client_hello =
                                tls::parse_client_hello(BytesView(handshake.data(), 4 + len));
                        } catch (const ParseError&) {
                        }
                    }
                }
            }
            if (tls::plausible_record_header(down_stream.stream)) {
                tls::RecordParseResult recs = tls::parse_records(down_stream.stream);
                try {
                    rec.server_hello = tls::parse_server_hello(recs.records);
                } catch (const ParseError&) {
                }
            }
            if (rec.client_hello) {
                rec.assessment = tls::assess_privacy(*rec.client_hello, rec.server_hello);
            }
        }
        records.push_back(std::move(rec));
    }

    std::sort(records.begin(), records.end(), [](const FlowRecord& x, const FlowRecord& y) {
        if (x.first_ts != y.first_ts) return x.first_ts < y.first_ts;
        return x.key < y.key;
    });
    return records;
}

std::string flow_tls_version(const FlowRecord& flow) {
    if (flow.key.transport == Transport::udp) return "quic-opaque";
    if (flow.assessment) return tls::to_string(flow.assessment->effective_version);
    return "unknown";
}

std::string flow_sni(const FlowRecord& flow) {
    if (flow.client_hello && flow.client_hello->sni) return *flow.client_hello->sni;
    return "";
}

std::string flow_alpn(const FlowRecord& flow) {
    if (!flow.client_hello || !flow.client_hello->alpn) return "";
    std::string joined;
    for (const std::string& p : *flow.client_hello->alpn) {
        if (!joined.empty()) joined.push_back(';');
        joined += p;
    }
    return joined;
}

bool flow_ech(const FlowRecord& flow) {
    return flow.assessment && flow.assessment->ech_present;
}

std::string flow_privacy_level(const FlowRecord& flow) {
    if (!flow.assessment) return "";
    return tls::to_string(flow.assessment->privacy_level);
}

namespace {

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string quoted = "\"";
    for (char c : field) {
        if (c == '"') quoted += "\"\"";
        else quoted.push_back(c);
    }
    quoted.push_back('"');
    return quoted;
}

std::string format_seconds(double s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", s);
    return buf;
}

} // namespace

void write_report_csv(const std::vector<FlowRecord>& flows, std::ostream& out) {
    out << kReportHeader << "\r\n";
    for (const FlowRecord& f : flows) {
        out << csv_quote(f.key.src_ip.to_string()) << ',' << f.key.src_port << ','
            << csv_quote(f.key.dst_ip.to_string()) << ',' << f.key.dst_port << ','
            << csv_quote(flow_tls_version(f)) << ',' << csv_quote(flow_sni(f)) << ','
            << csv_quote(flow_alpn(f)) << ',' << (flow_ech(f) ? "true" : "false") << ','
            << f.bytes_up << ',' << f.bytes_down << ',' << format_seconds(f.session_length())
            << ',' << csv_quote(flow_privacy_level(f)) << "\r\n";
    }
}

void export_report(const std::vector<FlowRecord>& flows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path, 0, "cannot open for writing");
    write_report_csv(flows, out);
    out.flush();
    if (!out) throw DataError(path, 0, "write failed");
}

void write_report_jsonl(const std::vector<FlowRecord>& flows, std::ostream& out) {
    for (const FlowRecord& f : flows) {
        nlohmann::ordered_json row;
        row["src_ip"] = f.key.src_ip.to_string();
        row["src_port"] = f.key.src_port;
        row["dst_ip"] = f.key.dst_ip.to_string();
        row["dst_port"] = f.key.dst_port;
        row["tls_version"] = flow_tls_version(f);
        row["sni"] = flow_sni(f);
        row["alpn"] = flow_alpn(f);
        row["ech"] = flow_ech(f);
        row["bytes_up"] = f.bytes_up;
        row["bytes_down"] = f.bytes_down;
        row["session_length_s"] = f.session_length();
        row["privacy_level"] = flow_privacy_level(f);
        out << row.dump() << "\n";
    }
}

void export_report_jsonl(const std::vector<FlowRecord>& flows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path, 0, "cannot open for writing");
    write_report_jsonl(flows, out);
    out.flush();
    if (!out) throw DataError(path, 0, "write failed");
}

} // namespace echoscope::capture
