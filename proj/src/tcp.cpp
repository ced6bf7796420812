#include "splitmesh/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <thread>

#include "splitmesh/errors.hpp"
#include "splitmesh/log.hpp"

namespace splitmesh {

namespace {

constexpr int kSessionTimeoutMs = 120000;

[[noreturn]] void throw_errno(const std::string& what) {
    throw IoError(what + ": " + std::strerror(errno));
}

// remaining milliseconds until deadline, clamped at 0; -1 for "no deadline"
int remaining_ms(std::chrono::steady_clock::time_point deadline, bool has_deadline) {
    if (!has_deadline) return -1;
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                    deadline - std::chrono::steady_clock::now())
                    .count();
    return left > 0 ? static_cast<int>(left) : 0;
}

void wait_readable(int fd, int timeout_ms) {
    pollfd p{fd, POLLIN, 0};
    for (;;) {
        int rc = ::poll(&p, 1, timeout_ms);
        if (rc > 0) return;
        if (rc == 0) throw Timeout("tcp recv timed out");
        if (errno == EINTR) continue;
        throw_errno("poll");
    }
}

void read_exact(int fd, std::uint8_t* dst, std::size_t n, int timeout_ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    bool has_deadline = timeout_ms >= 0;
    std::size_t got = 0;
    while (got < n) {
        wait_readable(fd, remaining_ms(deadline, has_deadline));
        ssize_t rc = ::recv(fd, dst + got, n - got, 0);
        if (rc > 0) {
            got += static_cast<std::size_t>(rc);
            continue;
        }
        if (rc == 0) throw IoError("connection closed by peer");
        if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
        throw_errno("recv");
    }
}

void write_all(int fd, const std::uint8_t* src, std::size_t n) {
    std::size_t sent = 0;
    while (sent < n) {
        ssize_t rc = ::send(fd, src + sent, n - sent, MSG_NOSIGNAL);
        if (rc > 0) {
            sent += static_cast<std::size_t>(rc);
            continue;
        }
        if (rc < 0 && errno == EINTR) continue;
        throw_errno("send");
    }
}

class TcpTransport final : public Transport {
  public:
    TcpTransport(int fd, Transcript* transcript, std::size_t max_payload)
        : fd_(fd), transcript_(transcript), max_payload_(max_payload) {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }

    ~TcpTransport() override { close(); }

    void send(const Message& m) override {
        if (fd_ < 0) throw IoError("send on closed transport");
        std::vector<std::uint8_t> frame = encode_message(m);
        write_all(fd_, frame.data(), frame.size());
        if (transcript_) transcript_->record(frame);
    }

    Message recv(int timeout_ms = -1) override {
        if (fd_ < 0) throw IoError("recv on closed transport");
        std::vector<std::uint8_t> frame(kFrameHeaderSize);
        read_exact(fd_, frame.data(), kFrameHeaderSize, timeout_ms);
        // Pre-validate before trusting the length field with an allocation;
        // decode_message repeats these checks in the same order.
        if (std::memcmp(frame.data(), kFrameMagic, 4) != 0)
            throw BadMagic("frame does not start with the protocol magic");
        if (frame[4] != kProtocolVersion)
            throw UnsupportedVersion("protocol version " + std::to_string(frame[4]));
        if (frame[5] < 1 || frame[5] > 6)
            throw UnknownType("message type " + std::to_string(frame[5]));
        std::uint32_t len = static_cast<std::uint32_t>(frame[6]) |
                            static_cast<std::uint32_t>(frame[7]) << 8 |
                            static_cast<std::uint32_t>(frame[8]) << 16 |
                            static_cast<std::uint32_t>(frame[9]) << 24;
        if (len > max_payload_)
            throw PayloadOverflow("declared payload of " + std::to_string(len) + " bytes");
        frame.resize(kFrameHeaderSize + len);
        if (len > 0) read_exact(fd_, frame.data() + kFrameHeaderSize, len, timeout_ms);
        Message m = decode_message(frame, max_payload_);
        if (transcript_) transcript_->record(frame);
        return m;
    }

    void close() override {
        if (fd_ < 0) return;
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }

  private:
    int fd_;
    Transcript* transcript_;
    std::size_t max_payload_;
};

}  // namespace

TcpAddr parse_addr(const std::string& text, const std::string& fallback_host,
                   std::uint16_t fallback_port) {
    TcpAddr a{fallback_host, fallback_port};
    if (text.empty()) return a;
    std::string host = text, port;
    auto colon = text.rfind(':');
    if (colon != std::string::npos) {
        host = text.substr(0, colon);
        port = text.substr(colon + 1);
    } else if (text.find_first_not_of("0123456789") == std::string::npos) {
        host.clear();
        port = text;
    }
    if (!host.empty()) a.host = host;
    if (!port.empty()) {
        char* end = nullptr;
        unsigned long v = std::strtoul(port.c_str(), &end, 10);
        if (end == port.c_str() || *end != '\0' || v == 0 || v > 65535)
            throw ConfigError("bad port in address '" + text + "'");
        a.port = static_cast<std::uint16_t>(v);
    }
    return a;
}

namespace {

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(port);
    if (host.empty() || host == "0.0.0.0") {
        sa.sin_addr.s_addr = htonl(INADDR_ANY);
        return sa;
    }
    if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) == 1) return sa;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res);
    if (rc != 0 || !res) throw IoError("cannot resolve host '" + host + "'");
    sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return sa;
}

}  // namespace

int tcp_listen(const std::string& host, std::uint16_t port, std::uint16_t* bound_port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa = resolve(host, port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
        ::close(fd);
        throw_errno("bind " + host + ":" + std::to_string(port));
    }
    if (::listen(fd, 16) != 0) {
        ::close(fd);
        throw_errno("listen");
    }
    if (bound_port) {
        sockaddr_in actual{};
        socklen_t len = sizeof actual;
        if (::getsockname(fd, reinterpret_cast<sockaddr*>(&actual), &len) != 0) {
            ::close(fd);
            throw_errno("getsockname");
        }
        *bound_port = ntohs(actual.sin_port);
    }
    return fd;
}

int tcp_accept(int listen_fd, int timeout_ms) {
    wait_readable(listen_fd, timeout_ms);
    for (;;) {
        int fd = ::accept(listen_fd, nullptr, nullptr);
        if (fd >= 0) return fd;
        if (errno == EINTR) continue;
        throw_errno("accept");
    }
}

int tcp_connect(const std::string& host, std::uint16_t port, int timeout_ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    sockaddr_in sa = resolve(host.empty() ? "127.0.0.1" : host, port);
    for (;;) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw_errno("socket");
        if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) == 0) return fd;
        int saved = errno;
        ::close(fd);
        if (std::chrono::steady_clock::now() >= deadline)
            throw IoError("connect " + host + ":" + std::to_string(port) + ": " +
                          std::strerror(saved));
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
}

std::unique_ptr<Transport> make_tcp_transport(int fd, Transcript* transcript,
                                              std::size_t max_payload) {
    return std::make_unique<TcpTransport>(fd, transcript, max_payload);
}

int run_tcp_server(const ExperimentConfig& config, const std::string& listen_addr) {
    if (config.mode != "split") throw ConfigError("tcp server needs a split-mode config");
    BuiltExperiment b = build_experiment(config);
    const std::size_t N = b.setup.clients.size();
    std::vector<std::size_t> train_sizes;
    for (const auto& c : b.setup.clients) train_sizes.push_back(c.train.size());
    ServerNode server(b.setup.plan, b.setup.train, train_sizes);
    RoundSchedule schedule = compute_schedule(train_sizes, b.setup.train.batch_size);
    const std::size_t R = schedule.rounds.size();

    TcpAddr addr = parse_addr(listen_addr, "0.0.0.0", config.port);
    std::uint16_t bound = 0;
    int listen_fd = tcp_listen(addr.host, addr.port, &bound);
    log_info("listening on " + addr.host + ":" + std::to_string(bound) + " for " +
             std::to_string(N) + " clients");

    std::vector<std::unique_ptr<Transport>> links(N);
    for (std::size_t i = 0; i < N; ++i) {
        auto t = make_tcp_transport(tcp_accept(listen_fd, kSessionTimeoutMs));
        Message m = t->recv(kSessionTimeoutMs);
        auto* hello = std::get_if<HelloMsg>(&m);
        if (!hello) throw IoError("expected Hello as the first frame");
        if (hello->protocol_version != kProtocolVersion)
            throw UnsupportedVersion("client speaks protocol version " +
                                     std::to_string(hello->protocol_version));
        if (hello->client_id >= N)
            throw ConfigError("client id " + std::to_string(hello->client_id) + " out of range");
        if (links[hello->client_id]) throw ConfigError("duplicate client id " +
                                                       std::to_string(hello->client_id));
        t->send(Message{server.config_for(hello->client_id)});
        log_info("client " + std::to_string(hello->client_id) + " connected");
        links[hello->client_id] = std::move(t);
    }
    ::close(listen_fd);

    std::ofstream metrics(config.out, std::ios::trunc);
    if (!metrics) throw IoError("cannot create " + config.out);
    std::ofstream summary(config.out + ".summary.csv", std::ios::trunc);
    std::ofstream timing(config.out + ".timing.csv", std::ios::trunc);
    csv_metrics_header(metrics);
    csv_summary_header(summary);
    csv_timing_header(timing);

    LossKind loss_kind = b.setup.train.loss;
    double final_loss = 0.0, final_metric = 0.0;
    std::size_t epochs_done = 0;
    for (std::uint32_t epoch = 0; epoch < b.setup.train.epochs; ++epoch) {
        auto epoch_start = std::chrono::steady_clock::now();
        double loss_acc = 0.0;
        std::size_t rows_acc = 0;
        for (std::size_t r = 0; r < R; ++r) {
            std::vector<std::uint32_t> expected;
            for (std::size_t c = 0; c < N; ++c)
                if (schedule.rounds[r][c] > 0) expected.push_back(static_cast<std::uint32_t>(c));
            std::vector<ActivationsMsg> acts;
            for (std::uint32_t c : expected) {
                Message m = links[c]->recv(kSessionTimeoutMs);
                auto* a = std::get_if<ActivationsMsg>(&m);
                if (!a) throw IoError("expected Activations from client " + std::to_string(c));
                acts.push_back(std::move(*a));
            }
            ServerNode::RoundOutput out = server.server_round(acts, expected);
            for (std::size_t i = 0; i < expected.size(); ++i)
                links[expected[i]]->send(Message{out.grads[i]});
            loss_acc += out.loss * static_cast<double>(out.rows);
            rows_acc += out.rows;
        }
        double epoch_loss = rows_acc > 0 ? loss_acc / static_cast<double>(rows_acc) : 0.0;

        std::vector<ActivationsMsg> eval_acts;
        for (std::size_t c = 0; c < N; ++c) {
            if (!b.setup.clients[c].val) continue;
            Message m = links[c]->recv(kSessionTimeoutMs);
            auto* a = std::get_if<ActivationsMsg>(&m);
            if (!a) throw IoError("expected eval Activations from client " + std::to_string(c));
            eval_acts.push_back(std::move(*a));
        }
        MetricsMsg mm = server.eval_round(eval_acts, epoch, epoch_loss);
        for (std::size_t c = 0; c < N; ++c) links[c]->send(Message{mm});

        final_loss = epoch_loss;
        final_metric = display_metric(mm.metric, loss_kind);
        ++epochs_done;
        csv_metrics_row(metrics, b.experiment_id, N, ratio_to_string(b.ratio), epoch + 1,
                        epoch_loss, final_metric);
        csv_timing_row(timing, b.experiment_id, epoch + 1,
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
                           .count());
    }
    for (std::size_t c = 0; c < N; ++c) links[c]->send(Message{DoneMsg{}});
    csv_summary_row(summary, b.experiment_id, N, ratio_to_string(b.ratio), b.setup.train.seed,
                    epochs_done, final_loss, final_metric, final_metric, final_metric,
                    final_metric);
    for (auto& t : links) t->close();
    log_info("tcp run complete: " + b.experiment_id);
    return 0;
}

int run_tcp_client(const ExperimentConfig& config, std::size_t shard,
                   const std::string& connect_addr) {
    if (config.mode != "split") throw ConfigError("tcp client needs a split-mode config");
    BuiltExperiment b = build_experiment(config);
    const std::size_t N = b.setup.clients.size();
    if (shard >= N)
        throw ConfigError("shard " + std::to_string(shard) + " out of range for " +
                          std::to_string(N) + " clients");
    std::vector<std::size_t> train_sizes;
    for (const auto& c : b.setup.clients) train_sizes.push_back(c.train.size());
    RoundSchedule schedule = compute_schedule(train_sizes, b.setup.train.batch_size);
    const std::size_t R = schedule.rounds.size();

    ClientNode node(static_cast<std::uint32_t>(shard), std::move(b.setup.clients[shard].train),
                    std::move(b.setup.clients[shard].val), b.setup.plan, b.setup.train);

    TcpAddr addr = parse_addr(connect_addr, "127.0.0.1", config.port);
    auto t = make_tcp_transport(tcp_connect(addr.host, addr.port, kSessionTimeoutMs));
    ConfigMsg cfg = handshake_client(*t, static_cast<std::uint32_t>(shard), kProtocolVersion,
                                     kSessionTimeoutMs);
    node.configure(cfg);  // verifies plan hash, segment, train config, shard size
    log_info("client " + std::to_string(shard) + " configured, " + std::to_string(R) +
             " rounds/epoch");

    for (std::uint32_t epoch = 0; epoch < b.setup.train.epochs; ++epoch) {
        const auto& order = node.begin_epoch();
        std::size_t cursor = 0;
        for (std::size_t r = 0; r < R; ++r) {
            std::size_t share = schedule.rounds[r][shard];
            if (share == 0) continue;
            ActivationsMsg act = node.client_round(
                train_round_id(epoch, R, r),
                std::span<const std::uint64_t>(order.data() + cursor, share));
            cursor += share;
            t->send(Message{act});
            Message m = t->recv(kSessionTimeoutMs);
            auto* g = std::get_if<GradientsMsg>(&m);
            if (!g) throw IoError("expected Gradients from server");
            node.apply_gradients(*g);
        }
        if (auto ev = node.eval_message(eval_round_id(epoch, R))) t->send(Message{*ev});
        Message m = t->recv(kSessionTimeoutMs);
        if (!std::holds_alternative<MetricsMsg>(m)) throw IoError("expected Metrics from server");
    }
    Message done = t->recv(kSessionTimeoutMs);
    if (!std::holds_alternative<DoneMsg>(done)) throw IoError("expected Done from server");
    t->close();
    log_info("client " + std::to_string(shard) + " finished");
    return 0;
}

}  // namespace splitmesh
