#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "splitmesh/model_spec.hpp"
#include "splitmesh/tensor.hpp"

namespace splitmesh {

// Frame layout, all integers little-endian:
//   magic   4 bytes  "MSSL"
//   version u8       1
//   type    u8       Hello=1 Config=2 Activations=3 Gradients=4 Metrics=5 Done=6
//   length  u32      payload byte count
//   payload length bytes
// Payload primitives: u8; u16/u32/u64 LE; f32/f64 LE bit patterns; string as
// u16 LE length + UTF-8 bytes; tensor as rank u8, dims u32 LE each, f32 LE
// row-major data.

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 10;
inline constexpr std::size_t kDefaultMaxPayload = 256ull << 20;
inline constexpr char kFrameMagic[4] = {'M', 'S', 'S', 'L'};

enum class MsgType : std::uint8_t {
    Hello = 1,
    Config = 2,
    Activations = 3,
    Gradients = 4,
    Metrics = 5,
    Done = 6,
};

struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};
struct BadMagic : ProtocolError {
    explicit BadMagic(const std::string& what) : ProtocolError(what) {}
};
struct UnsupportedVersion : ProtocolError {
    explicit UnsupportedVersion(const std::string& what) : ProtocolError(what) {}
};
struct TruncatedFrame : ProtocolError {
    explicit TruncatedFrame(const std::string& what) : ProtocolError(what) {}
};
struct UnknownType : ProtocolError {
    explicit UnknownType(const std::string& what) : ProtocolError(what) {}
};
struct PayloadOverflow : ProtocolError {
    explicit PayloadOverflow(const std::string& what) : ProtocolError(what) {}
};
// Structurally valid frame whose payload violates message-level rules
// (bad rank/dims, label row mismatch, unknown enum byte, leftover bytes).
struct MalformedPayload : ProtocolError {
    explicit MalformedPayload(const std::string& what) : ProtocolError(what) {}
};

struct HelloMsg {
    std::uint32_t client_id = 0;
    std::uint8_t protocol_version = kProtocolVersion;
};

struct ConfigMsg {
    std::uint64_t plan_hash = 0;
    TrainConfig train;
    std::string client_segment_json;
    std::uint64_t shard_size = 0;  // training rows assigned to the addressed client
};

struct ActivationsMsg {
    std::uint64_t round_id = 0;
    std::uint32_t client_id = 0;
    Tensor tensor;  // [rows, ...feature-map dims]
    Tensor labels;  // [rows]
};

struct GradientsMsg {
    std::uint64_t round_id = 0;
    std::uint32_t client_id = 0;
    Tensor tensor;
};

struct MetricsMsg {
    std::uint32_t epoch = 0;
    double loss = 0.0;
    double metric = 0.0;  // accuracy fraction or rmsle; NaN when no validation rows exist
};

struct DoneMsg {};

using Message = std::variant<HelloMsg, ConfigMsg, ActivationsMsg, GradientsMsg, MetricsMsg, DoneMsg>;

MsgType message_type(const Message& m);

// Canonical: equal messages always produce equal bytes.
std::vector<std::uint8_t> encode_message(const Message& m);

// Expects exactly one frame; throws a typed ProtocolError subclass otherwise.
// Never reads past `len` and never allocates beyond the declared payload.
Message decode_message(const std::uint8_t* data, std::size_t len,
                       std::size_t max_payload = kDefaultMaxPayload);
Message decode_message(const std::vector<std::uint8_t>& bytes,
                       std::size_t max_payload = kDefaultMaxPayload);

// Field-for-field equality with bitwise float comparison (NaN-safe).
bool message_equal(const Message& a, const Message& b);

}  // namespace splitmesh
