#pragma once

// TCP exchange between two agents: one serves its map, the other sends
// slice features and receives the 4-DoF match result.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tomo/common.hpp"
#include "tomo/consensus.hpp"
#include "tomo/wire.hpp"

namespace tomo::net {

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;
};

inline Endpoint parse_endpoint(const std::string& s) {
    const std::size_t colon = s.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == s.size()) {
        throw ParseError("endpoint must be HOST:PORT, got '" + s + "'");
    }
    Endpoint ep;
    ep.host = s.substr(0, colon);
    const std::string port_str = s.substr(colon + 1);
    char* end = nullptr;
    const long port = std::strtol(port_str.c_str(), &end, 10);
    if (end == port_str.c_str() || *end != '\0' || port < 0 || port > 65535) {
        throw ParseError("invalid port '" + port_str + "'");
    }
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

namespace detail {

class Socket {
  public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            close_fd();
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close_fd(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void close_fd() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

  private:
    int fd_ = -1;
};

inline void wait_readable(int fd, double timeout_s) {
    pollfd pfd{fd, POLLIN, 0};
    const int ms = timeout_s <= 0.0 ? -1 : static_cast<int>(timeout_s * 1000.0);
    const int rc = ::poll(&pfd, 1, ms);
    if (rc == 0) throw Timeout("socket read timed out");
    if (rc < 0) throw ConnectionFailed(std::string("poll: ") + std::strerror(errno));
}

inline void read_exact(int fd, std::uint8_t* buf, std::size_t n, double timeout_s) {
    std::size_t got = 0;
    while (got < n) {
        wait_readable(fd, timeout_s);
        const ssize_t r = ::recv(fd, buf + got, n - got, 0);
        if (r == 0) throw ConnectionFailed("connection closed by peer");
        if (r < 0) {
            if (errno == EINTR) continue;
            throw ConnectionFailed(std::string("recv: ") + std::strerror(errno));
        }
        got += static_cast<std::size_t>(r);
    }
}

inline void write_all(int fd, const std::uint8_t* buf, std::size_t n) {
    std::size_t sent = 0;
    while (sent < n) {
        const ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
        if (r < 0) {
            if (errno == EINTR) continue;
            throw ConnectionFailed(std::string("send: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(r);
    }
}

struct Message {
    wire::MessageTag tag;
    std::vector<std::uint8_t> body;
};

inline Message read_message(int fd, double timeout_s) {
    std::uint8_t header[5];
    read_exact(fd, header, 5, timeout_s);
    const std::uint32_t len = le::get_u32(header + 1);
    if (header[0] < 1 || header[0] > 4) {
        throw CorruptHeader("unknown message tag " + std::to_string(header[0]));
    }
    if (len > wire::kMaxMessageBytes) {
        throw CorruptHeader("message length " + std::to_string(len) + " exceeds limit");
    }
    Message m;
    m.tag = static_cast<wire::MessageTag>(header[0]);
    m.body.resize(len);
    if (len > 0) read_exact(fd, m.body.data(), len, timeout_s);
    return m;
}

inline void write_message(int fd, wire::MessageTag tag, const std::vector<std::uint8_t>& body) {
    const std::vector<std::uint8_t> frame = wire::encode_message(tag, body);
    write_all(fd, frame.data(), frame.size());
}

inline void write_error(int fd, const std::string& message) {
    std::vector<std::uint8_t> body(message.begin(), message.end());
    write_message(fd, wire::MessageTag::Error, body);
}

}  // namespace detail

// Serves the local slice set: for every session the peer's features are
// correlated against the local map and the 4-DoF result is returned. The
// transform in RESULT maps the sender's coordinates into this server's
// frame. Malformed input produces an ERROR reply (when the transport still
// works) and never takes the server down.
class Server {
  public:
    Server(slicing::SliceSet local, consensus::MatchConfig cfg, std::uint32_t agent_id,
           std::ostream* log = &std::cerr)
        : local_(std::move(local)), cfg_(cfg), agent_id_(agent_id), log_(log) {}

    // Binds and listens; with port 0 the OS picks one (see port()).
    void bind(const std::string& host, std::uint16_t port) {
        detail::Socket sock(::socket(AF_INET, SOCK_STREAM, 0));
        if (!sock.valid()) throw ConnectionFailed(std::string("socket: ") + std::strerror(errno));
        int one = 1;
        ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (host == "0.0.0.0" || host.empty()) {
            addr.sin_addr.s_addr = INADDR_ANY;
        } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
            throw ConnectionFailed("cannot parse bind address '" + host + "'");
        }
        if (::bind(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            throw ConnectionFailed(std::string("bind: ") + std::strerror(errno));
        }
        if (::listen(sock.fd(), 8) != 0) {
            throw ConnectionFailed(std::string("listen: ") + std::strerror(errno));
        }
        listen_ = std::move(sock);
    }

    std::uint16_t port() const {
        sockaddr_in addr{};
        socklen_t len = sizeof(addr);
        if (::getsockname(listen_.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
            throw ConnectionFailed(std::string("getsockname: ") + std::strerror(errno));
        }
        return ntohs(addr.sin_port);
    }

    // Accept loop; returns after stop(), or after the first session when
    // once is set. Session failures are logged and never fatal.
    void run(bool once = false) {
        while (!stopping_.load()) {
            sockaddr_in peer{};
            socklen_t len = sizeof(peer);
            const int fd = ::accept(listen_.fd(), reinterpret_cast<sockaddr*>(&peer), &len);
            if (fd < 0) {
                if (stopping_.load()) break;
                if (errno == EINTR) continue;
                break;
            }
            detail::Socket session(fd);
            try {
                handle_session(session.fd());
            } catch (const Error& e) {
                if (log_) *log_ << "session error: " << e.what() << "\n";
            }
            if (once) break;
        }
    }

    void stop() {
        stopping_.store(true);
        if (listen_.valid()) ::shutdown(listen_.fd(), SHUT_RDWR);
    }

    double session_timeout_s = 300.0;

  private:
    void handle_session(int fd) {
        detail::Message hello_msg;
        try {
            hello_msg = detail::read_message(fd, session_timeout_s);
        } catch (const CorruptHeader& e) {
            detail::write_error(fd, std::string("bad-frame: ") + e.what());
            throw;
        }
        if (hello_msg.tag != wire::MessageTag::Hello) {
            detail::write_error(fd, "protocol: expected HELLO");
            throw CorruptHeader("expected HELLO, got tag " +
                                std::to_string(static_cast<int>(hello_msg.tag)));
        }
        wire::Hello peer_hello;
        try {
            peer_hello = wire::decode_hello(hello_msg.body.data(), hello_msg.body.size());
        } catch (const Error& e) {
            detail::write_error(fd, std::string("bad-hello: ") + e.what());
            throw;
        }
        if (std::abs(peer_hello.grid_size - local_.grid_size) >
            1e-9 * std::max({peer_hello.grid_size, local_.grid_size, 1.0})) {
            detail::write_error(fd, "grid-mismatch: local " + std::to_string(local_.grid_size) +
                                        ", peer " + std::to_string(peer_hello.grid_size));
            throw GridMismatch("peer grid " + std::to_string(peer_hello.grid_size));
        }

        wire::Hello mine;
        mine.agent_id = agent_id_;
        mine.grid_size = local_.grid_size;
        detail::write_message(fd, wire::MessageTag::Hello, wire::encode_hello(mine));

        const detail::Message slices_msg = detail::read_message(fd, session_timeout_s);
        if (slices_msg.tag != wire::MessageTag::Slices) {
            detail::write_error(fd, "protocol: expected SLICES");
            throw CorruptHeader("expected SLICES");
        }
        wire::SlicePayload payload;
        try {
            payload = wire::deserialize_payload(slices_msg.body);
        } catch (const Error& e) {
            detail::write_error(fd, std::string("bad-payload: ") + e.what());
            throw;
        }

        try {
            const consensus::MatchResult result =
                consensus::correlate_heights(local_, payload.set, cfg_);
            const std::string json = result.to_json(true).dump();
            detail::write_message(fd, wire::MessageTag::Result,
                                  std::vector<std::uint8_t>(json.begin(), json.end()));
            if (log_) {
                *log_ << "agent " << payload.agent_id << ": consensus "
                      << result.consensus_size << ", z " << result.transform.z << "\n";
            }
        } catch (const NoConsensus& e) {
            detail::write_error(fd, std::string("no-consensus: ") + e.what());
        } catch (const GridMismatch& e) {
            detail::write_error(fd, std::string("grid-mismatch: ") + e.what());
        }
    }

    slicing::SliceSet local_;
    consensus::MatchConfig cfg_;
    std::uint32_t agent_id_ = 0;
    std::ostream* log_ = nullptr;
    detail::Socket listen_;
    std::atomic<bool> stopping_{false};
};

struct RemoteMatch {
    std::string result_json;  // RESULT body, verbatim
    Transform4DoF transform;  // sender frame -> receiver frame
    int consensus_size = 0;
};

// Sends the slice set to a serving peer and waits for the match result.
// The RESULT transform maps this sender's coordinates into the peer's frame.
inline RemoteMatch send_map(const Endpoint& peer, const slicing::SliceSet& set,
                            std::uint32_t agent_id, double timeout_s = 300.0) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(peer.port);
    if (::getaddrinfo(peer.host.c_str(), port_str.c_str(), &hints, &res) != 0 || !res) {
        throw ConnectionFailed("cannot resolve '" + peer.host + "'");
    }
    detail::Socket sock(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
    if (!sock.valid()) {
        ::freeaddrinfo(res);
        throw ConnectionFailed(std::string("socket: ") + std::strerror(errno));
    }
    const int rc = ::connect(sock.fd(), res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc != 0) {
        throw ConnectionFailed("connect to " + peer.host + ":" + port_str + ": " +
                               std::strerror(errno));
    }

    wire::Hello hello;
    hello.agent_id = agent_id;
    hello.grid_size = set.grid_size;
    detail::write_message(sock.fd(), wire::MessageTag::Hello, wire::encode_hello(hello));

    detail::Message reply = detail::read_message(sock.fd(), timeout_s);
    if (reply.tag == wire::MessageTag::Error) {
        throw RemoteError(std::string(reply.body.begin(), reply.body.end()));
    }
    if (reply.tag != wire::MessageTag::Hello) throw CorruptHeader("expected HELLO reply");
    wire::decode_hello(reply.body.data(), reply.body.size());

    detail::write_message(sock.fd(), wire::MessageTag::Slices,
                          wire::serialize_payload(set, agent_id));

    reply = detail::read_message(sock.fd(), timeout_s);
    if (reply.tag == wire::MessageTag::Error) {
        throw RemoteError(std::string(reply.body.begin(), reply.body.end()));
    }
    if (reply.tag != wire::MessageTag::Result) throw CorruptHeader("expected RESULT");

    RemoteMatch out;
    out.result_json.assign(reply.body.begin(), reply.body.end());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(out.result_json);
        out.transform = Transform4DoF(j.at("x").get<double>(), j.at("y").get<double>(),
                                      j.at("z").get<double>(), j.at("theta").get<double>());
        out.consensus_size = j.at("consensus_size").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("RESULT body is not a valid match: ") + e.what());
    }
    return out;
}

}  // namespace tomo::net
