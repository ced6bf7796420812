#include "splitmesh/wire.hpp"

#include <bit>
#include <cstring>

namespace splitmesh {

namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
    if (s.size() > 0xFFFF) throw MalformedPayload("string field longer than 65535 bytes");
    put_u16(out, static_cast<std::uint16_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

void put_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
    if (t.rank() > 8) throw MalformedPayload("tensor rank above wire limit 8");
    put_u8(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data) put_f32(out, v);
}

void put_train_config(std::vector<std::uint8_t>& out, const TrainConfig& c) {
    put_u32(out, c.epochs);
    put_u32(out, c.batch_size);
    put_f64(out, c.learning_rate);
    put_u64(out, c.seed);
    put_u8(out, static_cast<std::uint8_t>(c.loss));
}

// Bounded reader over one frame payload; every read checks the remaining span
// so a hostile length field can never walk past the buffer.
class Reader {
  public:
    Reader(const std::uint8_t* data, std::size_t len) : p_(data), end_(data + len) {}

    std::uint8_t u8() {
        need(1);
        return *p_++;
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(p_[0] | (p_[1] << 8));
        p_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[i]) << (8 * i);
        p_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p_[i]) << (8 * i);
        p_ += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string str() {
        std::uint16_t n = u16();
        need(n);
        std::string s(reinterpret_cast<const char*>(p_), n);
        p_ += n;
        return s;
    }

    Tensor tensor() {
        std::uint8_t rank = u8();
        if (rank < 1 || rank > 8)
            throw MalformedPayload("tensor rank " + std::to_string(rank) + " outside 1..8");
        std::vector<std::size_t> shape(rank);
        std::uint64_t volume = 1;
        for (auto& d : shape) {
            std::uint32_t v = u32();
            if (v == 0) throw MalformedPayload("tensor dim of 0");
            if (volume > UINT64_MAX / v) throw MalformedPayload("tensor volume overflows");
            volume *= v;
            d = v;
        }
        if (volume > remaining() / 4 + 1)  // cheap pre-check before the exact need()
            throw TruncatedFrame("tensor data larger than remaining payload");
        need(volume * 4);
        Tensor t(shape);
        for (auto& v : t.data) {
            std::uint32_t bits = 0;
            for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p_[i]) << (8 * i);
            p_ += 4;
            v = std::bit_cast<float>(bits);
        }
        return t;
    }

    TrainConfig train_config() {
        TrainConfig c;
        c.epochs = u32();
        c.batch_size = u32();
        c.learning_rate = f64();
        c.seed = u64();
        std::uint8_t loss = u8();
        if (loss > 1) throw MalformedPayload("unknown loss byte " + std::to_string(loss));
        c.loss = static_cast<LossKind>(loss);
        return c;
    }

    std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

    void expect_consumed() const {
        if (p_ != end_)
            throw MalformedPayload(std::to_string(remaining()) + " unexpected trailing payload bytes");
    }

  private:
    void need(std::size_t n) const {
        if (remaining() < n) throw TruncatedFrame("payload ends mid-field");
    }
    const std::uint8_t* p_;
    const std::uint8_t* end_;
};

}  // namespace

MsgType message_type(const Message& m) {
    return std::visit(
        [](const auto& v) -> MsgType {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, HelloMsg>) return MsgType::Hello;
            if constexpr (std::is_same_v<V, ConfigMsg>) return MsgType::Config;
            if constexpr (std::is_same_v<V, ActivationsMsg>) return MsgType::Activations;
            if constexpr (std::is_same_v<V, GradientsMsg>) return MsgType::Gradients;
            if constexpr (std::is_same_v<V, MetricsMsg>) return MsgType::Metrics;
            if constexpr (std::is_same_v<V, DoneMsg>) return MsgType::Done;
        },
        m);
}

std::vector<std::uint8_t> encode_message(const Message& m) {
    std::vector<std::uint8_t> payload;
    std::visit(
        [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, HelloMsg>) {
                put_u32(payload, v.client_id);
                put_u8(payload, v.protocol_version);
            } else if constexpr (std::is_same_v<V, ConfigMsg>) {
                put_u64(payload, v.plan_hash);
                put_train_config(payload, v.train);
                put_string(payload, v.client_segment_json);
                put_u64(payload, v.shard_size);
            } else if constexpr (std::is_same_v<V, ActivationsMsg>) {
                if (v.labels.shape[0] != v.tensor.shape[0])
                    throw MalformedPayload("activations label rows != tensor rows");
                put_u64(payload, v.round_id);
                put_u32(payload, v.client_id);
                put_tensor(payload, v.tensor);
                put_tensor(payload, v.labels);
            } else if constexpr (std::is_same_v<V, GradientsMsg>) {
                put_u64(payload, v.round_id);
                put_u32(payload, v.client_id);
                put_tensor(payload, v.tensor);
            } else if constexpr (std::is_same_v<V, MetricsMsg>) {
                put_u32(payload, v.epoch);
                put_f64(payload, v.loss);
                put_f64(payload, v.metric);
            } else {
                static_assert(std::is_same_v<V, DoneMsg>);
            }
        },
        m);

    std::vector<std::uint8_t> out;
    out.reserve(kFrameHeaderSize + payload.size());
    out.insert(out.end(), kFrameMagic, kFrameMagic + 4);
    put_u8(out, kProtocolVersion);
    put_u8(out, static_cast<std::uint8_t>(message_type(m)));
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Message decode_message(const std::uint8_t* data, std::size_t len, std::size_t max_payload) {
    if (len == 0) throw TruncatedFrame("empty buffer");
    std::size_t magic_avail = len < 4 ? len : 4;
    if (std::memcmp(data, kFrameMagic, magic_avail) != 0) throw BadMagic("frame magic mismatch");
    if (len < kFrameHeaderSize) throw TruncatedFrame("frame shorter than 10-byte header");
    std::uint8_t version = data[4];
    if (version != kProtocolVersion)
        throw UnsupportedVersion("protocol version " + std::to_string(version) + ", expected " +
                                 std::to_string(kProtocolVersion));
    std::uint8_t type = data[5];
    if (type < 1 || type > 6) throw UnknownType("message type byte " + std::to_string(type));
    std::uint32_t payload_len = 0;
    for (int i = 0; i < 4; ++i) payload_len |= static_cast<std::uint32_t>(data[6 + i]) << (8 * i);
    if (payload_len > max_payload)
        throw PayloadOverflow("declared payload " + std::to_string(payload_len) + " exceeds cap " +
                              std::to_string(max_payload));
    if (len < kFrameHeaderSize + payload_len) throw TruncatedFrame("payload shorter than declared");
    if (len > kFrameHeaderSize + payload_len)
        throw MalformedPayload("bytes beyond declared frame end");

    Reader r(data + kFrameHeaderSize, payload_len);
    Message m;
    switch (static_cast<MsgType>(type)) {
        case MsgType::Hello: {
            HelloMsg v;
            v.client_id = r.u32();
            v.protocol_version = r.u8();
            m = v;
            break;
        }
        case MsgType::Config: {
            ConfigMsg v;
            v.plan_hash = r.u64();
            v.train = r.train_config();
            v.client_segment_json = r.str();
            v.shard_size = r.u64();
            m = v;
            break;
        }
        case MsgType::Activations: {
            ActivationsMsg v;
            v.round_id = r.u64();
            v.client_id = r.u32();
            v.tensor = r.tensor();
            v.labels = r.tensor();
            if (v.labels.shape[0] != v.tensor.shape[0])
                throw MalformedPayload("activations label rows != tensor rows");
            m = v;
            break;
        }
        case MsgType::Gradients: {
            GradientsMsg v;
            v.round_id = r.u64();
            v.client_id = r.u32();
            v.tensor = r.tensor();
            m = v;
            break;
        }
        case MsgType::Metrics: {
            MetricsMsg v;
            v.epoch = r.u32();
            v.loss = r.f64();
            v.metric = r.f64();
            m = v;
            break;
        }
        case MsgType::Done:
            m = DoneMsg{};
            break;
    }
    r.expect_consumed();
    return m;
}

Message decode_message(const std::vector<std::uint8_t>& bytes, std::size_t max_payload) {
    return decode_message(bytes.data(), bytes.size(), max_payload);
}

namespace {

bool tensor_bits_equal(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) return false;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (std::bit_cast<std::uint32_t>(a.data[i]) != std::bit_cast<std::uint32_t>(b.data[i]))
            return false;
    return true;
}

bool f64_bits_equal(double a, double b) {
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace

bool message_equal(const Message& a, const Message& b) {
    if (a.index() != b.index()) return false;
    if (const auto* x = std::get_if<HelloMsg>(&a)) {
        const auto& y = std::get<HelloMsg>(b);
        return x->client_id == y.client_id && x->protocol_version == y.protocol_version;
    }
    if (const auto* x = std::get_if<ConfigMsg>(&a)) {
        const auto& y = std::get<ConfigMsg>(b);
        return x->plan_hash == y.plan_hash && x->train.epochs == y.train.epochs &&
               x->train.batch_size == y.train.batch_size &&
               f64_bits_equal(x->train.learning_rate, y.train.learning_rate) &&
               x->train.seed == y.train.seed && x->train.loss == y.train.loss &&
               x->client_segment_json == y.client_segment_json && x->shard_size == y.shard_size;
    }
    if (const auto* x = std::get_if<ActivationsMsg>(&a)) {
        const auto& y = std::get<ActivationsMsg>(b);
        return x->round_id == y.round_id && x->client_id == y.client_id &&
               tensor_bits_equal(x->tensor, y.tensor) && tensor_bits_equal(x->labels, y.labels);
    }
    if (const auto* x = std::get_if<GradientsMsg>(&a)) {
        const auto& y = std::get<GradientsMsg>(b);
        return x->round_id == y.round_id && x->client_id == y.client_id &&
               tensor_bits_equal(x->tensor, y.tensor);
    }
    if (const auto* x = std::get_if<MetricsMsg>(&a)) {
        const auto& y = std::get<MetricsMsg>(b);
        return x->epoch == y.epoch && f64_bits_equal(x->loss, y.loss) &&
               f64_bits_equal(x->metric, y.metric);
    }
    return true;  // DoneMsg
}

}  // namespace splitmesh
