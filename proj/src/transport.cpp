#include "splitmesh/transport.hpp"

#include "splitmesh/errors.hpp"

namespace splitmesh {

namespace {

struct PipeCore {
    std::deque<std::vector<std::uint8_t>> a_to_b;
    std::deque<std::vector<std::uint8_t>> b_to_a;
    bool open = true;
    Transcript* transcript = nullptr;
    std::size_t max_payload = kDefaultMaxPayload;
};

class PipeEnd final : public Transport {
  public:
    PipeEnd(std::shared_ptr<PipeCore> core, bool is_a) : core_(std::move(core)), is_a_(is_a) {}

    void send(const Message& m) override {
        if (!core_->open) throw IoError("send on closed pipe");
        auto frame = encode_message(m);
        if (core_->transcript) core_->transcript->record(frame);
        (is_a_ ? core_->a_to_b : core_->b_to_a).push_back(std::move(frame));
    }

    Message recv(int) override {
        auto& q = is_a_ ? core_->b_to_a : core_->a_to_b;
        if (q.empty()) {
            if (!core_->open) throw IoError("recv on closed pipe");
            throw Timeout("no frame queued on in-process pipe");
        }
        auto frame = std::move(q.front());
        q.pop_front();
        return decode_message(frame, core_->max_payload);
    }

    void close() override { core_->open = false; }

  private:
    std::shared_ptr<PipeCore> core_;
    bool is_a_;
};

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_pipe(
    Transcript* transcript, std::size_t max_payload) {
    auto core = std::make_shared<PipeCore>();
    core->transcript = transcript;
    core->max_payload = max_payload;
    return {std::make_unique<PipeEnd>(core, true), std::make_unique<PipeEnd>(core, false)};
}

ConfigMsg handshake_client(Transport& t, std::uint32_t client_id, std::uint8_t version,
                           int timeout_ms) {
    t.send(HelloMsg{client_id, version});
    Message reply = t.recv(timeout_ms);
    if (const auto* cfg = std::get_if<ConfigMsg>(&reply)) return *cfg;
    throw ProtocolError("handshake expected Config reply");
}

HelloMsg handshake_server(Transport& t, const ConfigMsg& reply, int timeout_ms) {
    Message first = t.recv(timeout_ms);
    const auto* hello = std::get_if<HelloMsg>(&first);
    if (!hello) throw ProtocolError("handshake expected Hello");
    if (hello->protocol_version != kProtocolVersion)
        throw UnsupportedVersion("client protocol version " +
                                 std::to_string(hello->protocol_version) + ", server speaks " +
                                 std::to_string(kProtocolVersion));
    t.send(reply);
    return *hello;
}

}  // namespace splitmesh
