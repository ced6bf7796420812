#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "splitmesh/wire.hpp"

namespace splitmesh {

// Every frame that crossed a transport, in send order, both directions.
// Privacy checks scan these bytes for raw-sample leakage.
struct Transcript {
    std::vector<std::uint8_t> bytes;
    std::size_t frames = 0;

    void record(const std::vector<std::uint8_t>& frame) {
        bytes.insert(bytes.end(), frame.begin(), frame.end());
        ++frames;
    }
};

// Byte-level message channel. send() encodes to wire bytes; recv() decodes,
// so both endpoints always exercise the real codec.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual void send(const Message& m) = 0;
    // timeout_ms < 0 blocks until a frame or channel close. In-process queues
    // never block: an empty queue raises Timeout immediately.
    virtual Message recv(int timeout_ms = -1) = 0;
    virtual void close() = 0;
};

// Deterministic in-process pair of endpoints over two byte-frame queues.
// Single-threaded by design; recv on an empty queue throws Timeout.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_pipe(
    Transcript* transcript = nullptr, std::size_t max_payload = kDefaultMaxPayload);

// Client side of session setup: send Hello, expect Config back.
ConfigMsg handshake_client(Transport& t, std::uint32_t client_id,
                           std::uint8_t version = kProtocolVersion, int timeout_ms = -1);

// Server side: expect Hello, verify the version, answer with the given Config.
HelloMsg handshake_server(Transport& t, const ConfigMsg& reply, int timeout_ms = -1);

}  // namespace splitmesh
