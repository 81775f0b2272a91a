#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mcast/endhost.hpp"
#include "mcast/types.hpp"

namespace mcast::wire {

// Framing: 4-byte big-endian length (type byte + payload), 1 type byte,
// payload. Integers big-endian; doubles as IEEE-754 bits, big-endian.
constexpr size_t kMaxPayload = 1 << 20;
constexpr size_t kPingWireSize = 1500;  // every Ping frame is exactly this long

enum class MsgType : uint8_t {
    Hello = 0x01,
    Ping = 0x02,
    Pong = 0x03,
    MeasReport = 0x04,
    Assign = 0x05,
    Reject = 0x06,
    LoadReport = 0x07,
    Data = 0x08,
    Bye = 0x09,
    MeasExchange = 0x0A,
    PeerDown = 0x0B,
};

struct Hello {
    NodeId node;
    bool operator==(const Hello&) const = default;
};
struct Ping {
    uint32_t seq{0};
    bool operator==(const Ping&) const = default;
};
struct Pong {
    uint32_t seq{0};
    bool operator==(const Pong&) const = default;
};
struct MeasReport {
    endhost::MeasurementReport report;
    bool operator==(const MeasReport&) const = default;
};
struct Assign {
    uint32_t oh_id{0};
    bool operator==(const Assign&) const = default;
};
struct Reject {
    bool operator==(const Reject&) const = default;
};
struct LoadReport {
    double load{0.0};  // quantised to 16 bits on the wire
    bool operator==(const LoadReport&) const = default;
};
enum class Hop : uint8_t { Source = 0, Peer = 1 };
struct Data {
    uint64_t msg_id{0};
    uint32_t origin{0};  // originating end-host id
    Hop hop{Hop::Source};
    std::vector<uint8_t> payload;
    bool operator==(const Data&) const = default;
};
struct Bye {
    bool operator==(const Bye&) const = default;
};
// Directional dedup measurement, sent by a connection's initiator to its
// peer so both ends decide on identical numbers.
struct MeasExchange {
    double rtt_ms{0.0};
    bool operator==(const MeasExchange&) const = default;
};
// Advisory: an overlay host gave up reconnecting to a peer.
struct PeerDown {
    uint32_t peer_id{0};
    bool operator==(const PeerDown&) const = default;
};

using Message = std::variant<Hello, Ping, Pong, MeasReport, Assign, Reject, LoadReport,
                             Data, Bye, MeasExchange, PeerDown>;

MsgType type_of(const Message& m);
const char* type_name(MsgType t);

// Serialises one message as a complete frame.
// Throws std::length_error if the payload exceeds the frame limit.
std::vector<uint8_t> encode(const Message& m);

enum class DecodeStatus { Ok, NeedMore, Malformed };

struct DecodeResult {
    DecodeStatus status{DecodeStatus::NeedMore};
    Message msg;
    size_t consumed{0};
    std::string error;
};

// Decodes at most one frame from the front of `buf`. Streaming-safe: returns
// NeedMore until a full frame is buffered, never consumes a partial frame.
DecodeResult decode_one(std::span<const uint8_t> buf);

// Incremental decoder for a byte stream; owns the carry-over buffer.
class Decoder {
public:
    void feed(std::span<const uint8_t> bytes);
    // Ok -> one message; NeedMore -> feed more bytes; Malformed is sticky.
    DecodeResult next();
    size_t buffered() const { return buf_.size() - pos_; }

private:
    std::vector<uint8_t> buf_;
    size_t pos_{0};
};

}  // namespace mcast::wire
