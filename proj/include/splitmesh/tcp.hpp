#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "splitmesh/harness.hpp"
#include "splitmesh/transport.hpp"

namespace splitmesh {

// host:port / :port / port; empty host falls back to fallback_host.
struct TcpAddr {
    std::string host;
    std::uint16_t port = 0;
};
TcpAddr parse_addr(const std::string& text, const std::string& fallback_host,
                   std::uint16_t fallback_port);

// Blocking socket helpers. All return connected/listening fds or throw IoError.
int tcp_listen(const std::string& host, std::uint16_t port, std::uint16_t* bound_port);
int tcp_accept(int listen_fd, int timeout_ms);
int tcp_connect(const std::string& host, std::uint16_t port, int timeout_ms);

// Transport over one connected socket: each send writes one encoded frame,
// each recv reads exactly one (header, then payload). Single-owner, no
// internal threads.
std::unique_ptr<Transport> make_tcp_transport(int fd, Transcript* transcript = nullptr,
                                              std::size_t max_payload = kDefaultMaxPayload);

// Server side of a TCP run: accepts one connection per client, handshakes,
// then drives the same synchronous round loop as the in-process simulation.
// Writes the same metrics/summary/timing CSVs as run_experiment.
int run_tcp_server(const ExperimentConfig& config, const std::string& listen_addr);

// Client side: connects, handshakes, verifies the received plan against the
// locally derived one, then serves rounds until Done.
int run_tcp_client(const ExperimentConfig& config, std::size_t shard, const std::string& connect_addr);

}  // namespace splitmesh
