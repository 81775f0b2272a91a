#include "mcast/wire.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace mcast::wire {

namespace {

void put_u16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back((v >> 8) & 0xff);
    b.push_back(v & 0xff);
}

void put_u32(std::vector<uint8_t>& b, uint32_t v) {
    b.push_back((v >> 24) & 0xff);
    b.push_back((v >> 16) & 0xff);
    b.push_back((v >> 8) & 0xff);
    b.push_back(v & 0xff);
}

void put_u64(std::vector<uint8_t>& b, uint64_t v) {
    for (int i = 7; i >= 0; --i) b.push_back((v >> (i * 8)) & 0xff);
}

void put_f64(std::vector<uint8_t>& b, double v) {
    put_u64(b, std::bit_cast<uint64_t>(v));
}

struct Reader {
    std::span<const uint8_t> s;
    size_t pos{0};
    bool fail{false};

    bool need(size_t n) {
        if (pos + n > s.size()) {
            fail = true;
            return false;
        }
        return true;
    }
    uint8_t u8() {
        if (!need(1)) return 0;
        return s[pos++];
    }
    uint16_t u16() {
        if (!need(2)) return 0;
        uint16_t v = (uint16_t(s[pos]) << 8) | s[pos + 1];
        pos += 2;
        return v;
    }
    uint32_t u32() {
        if (!need(4)) return 0;
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | s[pos + i];
        pos += 4;
        return v;
    }
    uint64_t u64() {
        if (!need(8)) return 0;
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | s[pos + i];
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    bool done() const { return !fail && pos == s.size(); }
};

Role role_from_byte(uint8_t b, bool& ok) {
    switch (b) {
        case 0: return Role::OH;
        case 1: return Role::EH;
        case 2: return Role::MH;
    }
    ok = false;
    return Role::OH;
}

}  // namespace

MsgType type_of(const Message& m) {
    return std::visit(
        [](const auto& v) -> MsgType {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Hello>) return MsgType::Hello;
            else if constexpr (std::is_same_v<T, Ping>) return MsgType::Ping;
            else if constexpr (std::is_same_v<T, Pong>) return MsgType::Pong;
            else if constexpr (std::is_same_v<T, MeasReport>) return MsgType::MeasReport;
            else if constexpr (std::is_same_v<T, Assign>) return MsgType::Assign;
            else if constexpr (std::is_same_v<T, Reject>) return MsgType::Reject;
            else if constexpr (std::is_same_v<T, LoadReport>) return MsgType::LoadReport;
            else if constexpr (std::is_same_v<T, Data>) return MsgType::Data;
            else if constexpr (std::is_same_v<T, Bye>) return MsgType::Bye;
            else if constexpr (std::is_same_v<T, MeasExchange>) return MsgType::MeasExchange;
            else return MsgType::PeerDown;
        },
        m);
}

const char* type_name(MsgType t) {
    switch (t) {
        case MsgType::Hello: return "hello";
        case MsgType::Ping: return "ping";
        case MsgType::Pong: return "pong";
        case MsgType::MeasReport: return "meas_report";
        case MsgType::Assign: return "assign";
        case MsgType::Reject: return "reject";
        case MsgType::LoadReport: return "load_report";
        case MsgType::Data: return "data";
        case MsgType::Bye: return "bye";
        case MsgType::MeasExchange: return "meas_exchange";
        case MsgType::PeerDown: return "peer_down";
    }
    return "?";
}

std::vector<uint8_t> encode(const Message& m) {
    std::vector<uint8_t> payload;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Hello>) {
                payload.push_back(static_cast<uint8_t>(v.node.role));
                put_u32(payload, v.node.id);
            } else if constexpr (std::is_same_v<T, Ping>) {
                put_u32(payload, v.seq);
                // 4 length + 1 type + 4 seq + pad = exactly 1500 bytes
                payload.resize(kPingWireSize - 4 - 1, 0);
            } else if constexpr (std::is_same_v<T, Pong>) {
                put_u32(payload, v.seq);
            } else if constexpr (std::is_same_v<T, MeasReport>) {
                const auto& r = v.report;
                payload.push_back(static_cast<uint8_t>(r.reporter.role));
                put_u32(payload, r.reporter.id);
                put_f64(payload, r.m_i.count());
                if (r.samples.size() > 0xffff)
                    throw std::length_error("too many samples in measurement report");
                put_u16(payload, static_cast<uint16_t>(r.samples.size()));
                for (const auto& s : r.samples) {
                    put_u32(payload, s.oh.id);
                    payload.push_back(static_cast<uint8_t>(s.status));
                    put_f64(payload, s.conn.count());
                    put_f64(payload, s.lat1.count());
                    put_f64(payload, s.lat2.count());
                    put_f64(payload, s.lat3.count());
                    put_f64(payload, s.elapsed.count());
                }
            } else if constexpr (std::is_same_v<T, Assign>) {
                put_u32(payload, v.oh_id);
            } else if constexpr (std::is_same_v<T, Reject>) {
            } else if constexpr (std::is_same_v<T, LoadReport>) {
                double clamped = std::min(1.0, std::max(0.0, v.load));
                put_u16(payload, static_cast<uint16_t>(clamped * 65535.0 + 0.5));
            } else if constexpr (std::is_same_v<T, Data>) {
                put_u64(payload, v.msg_id);
                put_u32(payload, v.origin);
                payload.push_back(static_cast<uint8_t>(v.hop));
                payload.insert(payload.end(), v.payload.begin(), v.payload.end());
            } else if constexpr (std::is_same_v<T, Bye>) {
            } else if constexpr (std::is_same_v<T, MeasExchange>) {
                put_f64(payload, v.rtt_ms);
            } else {  // PeerDown
                put_u32(payload, v.peer_id);
            }
        },
        m);

    if (payload.size() > kMaxPayload) throw std::length_error("frame payload over limit");
    std::vector<uint8_t> out;
    out.reserve(4 + 1 + payload.size());
    put_u32(out, static_cast<uint32_t>(1 + payload.size()));
    out.push_back(static_cast<uint8_t>(type_of(m)));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

DecodeResult decode_one(std::span<const uint8_t> buf) {
    DecodeResult res;
    if (buf.size() < 4) return res;  // NeedMore
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = (len << 8) | buf[i];
    if (len < 1) {
        res.status = DecodeStatus::Malformed;
        res.error = "zero-length frame";
        return res;
    }
    if (len > kMaxPayload + 1) {
        res.status = DecodeStatus::Malformed;
        res.error = "frame length over limit";
        return res;
    }
    if (buf.size() < 4 + static_cast<size_t>(len)) return res;  // NeedMore

    uint8_t type = buf[4];
    Reader r{buf.subspan(5, len - 1)};
    bool ok = true;
    Message msg;
    switch (static_cast<MsgType>(type)) {
        case MsgType::Hello: {
            Hello h;
            h.node.role = role_from_byte(r.u8(), ok);
            h.node.id = r.u32();
            msg = h;
            ok = ok && r.done();
            break;
        }
        case MsgType::Ping: {
            Ping p;
            p.seq = r.u32();
            // remainder is padding; total wire size must be exactly 1500
            ok = !r.fail && (4 + static_cast<size_t>(len) == kPingWireSize);
            msg = p;
            break;
        }
        case MsgType::Pong: {
            Pong p;
            p.seq = r.u32();
            msg = p;
            ok = !r.fail && r.done();
            break;
        }
        case MsgType::MeasReport: {
            MeasReport mr;
            mr.report.reporter.role = role_from_byte(r.u8(), ok);
            mr.report.reporter.id = r.u32();
            mr.report.m_i = ms(r.f64());
            uint16_t n = r.u16();
            for (uint16_t i = 0; i < n && !r.fail; ++i) {
                endhost::LatencySample s;
                s.oh = oh(r.u32());
                uint8_t st = r.u8();
                if (st > 2) ok = false;
                s.status = static_cast<endhost::SampleStatus>(st);
                s.conn = ms(r.f64());
                s.lat1 = ms(r.f64());
                s.lat2 = ms(r.f64());
                s.lat3 = ms(r.f64());
                s.elapsed = ms(r.f64());
                mr.report.samples.push_back(s);
            }
            msg = mr;
            ok = ok && r.done();
            break;
        }
        case MsgType::Assign: {
            Assign a;
            a.oh_id = r.u32();
            msg = a;
            ok = !r.fail && r.done();
            break;
        }
        case MsgType::Reject:
            msg = Reject{};
            ok = r.done();
            break;
        case MsgType::LoadReport: {
            LoadReport lr;
            lr.load = static_cast<double>(r.u16()) / 65535.0;
            msg = lr;
            ok = !r.fail && r.done();
            break;
        }
        case MsgType::Data: {
            Data d;
            d.msg_id = r.u64();
            d.origin = r.u32();
            uint8_t hop = r.u8();
            if (hop > 1) ok = false;
            d.hop = static_cast<Hop>(hop);
            if (!r.fail) d.payload.assign(r.s.begin() + r.pos, r.s.end());
            msg = std::move(d);
            ok = ok && !r.fail;
            break;
        }
        case MsgType::Bye:
            msg = Bye{};
            ok = r.done();
            break;
        case MsgType::MeasExchange: {
            MeasExchange me;
            me.rtt_ms = r.f64();
            msg = me;
            ok = !r.fail && r.done();
            break;
        }
        case MsgType::PeerDown: {
            PeerDown pd;
            pd.peer_id = r.u32();
            msg = pd;
            ok = !r.fail && r.done();
            break;
        }
        default:
            res.status = DecodeStatus::Malformed;
            res.error = "unknown message type";
            return res;
    }
    if (!ok || r.fail) {
        res.status = DecodeStatus::Malformed;
        res.error = std::string("bad payload for ") + type_name(static_cast<MsgType>(type));
        return res;
    }
    res.status = DecodeStatus::Ok;
    res.msg = std::move(msg);
    res.consumed = 4 + len;
    return res;
}

void Decoder::feed(std::span<const uint8_t> bytes) {
    if (pos_ > 0 && pos_ == buf_.size()) {
        buf_.clear();
        pos_ = 0;
    }
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

DecodeResult Decoder::next() {
    auto res = decode_one(std::span<const uint8_t>(buf_).subspan(pos_));
    if (res.status == DecodeStatus::Ok) {
        pos_ += res.consumed;
        if (pos_ == buf_.size()) {
            buf_.clear();
            pos_ = 0;
        } else if (pos_ > (1 << 22)) {
            buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(pos_));
            pos_ = 0;
        }
    }
    return res;
}

}  // namespace mcast::wire
