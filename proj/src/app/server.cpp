#include <sarap/app/server.hpp>
#include <sarap/error.hpp>

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <csignal>
#include <cstring>
#include <deque>
#include <optional>

namespace sarap::app {

namespace {

constexpr std::size_t kMaxMessageBytes = std::size_t{512} << 20;
constexpr int kPollMs = 100;

template <class T>
class Channel
{
public:
    bool push(T item)
    {
        {
            std::lock_guard lock(m_mutex);
            if (m_closed) {
                return false;
            }
            m_items.push_back(std::move(item));
        }
        m_cv.notify_one();
        return true;
    }

    std::optional<T> pop()
    {
        std::unique_lock lock(m_mutex);
        m_cv.wait(lock, [&] { return !m_items.empty() || m_closed; });
        if (m_items.empty()) {
            return std::nullopt;
        }
        T item = std::move(m_items.front());
        m_items.pop_front();
        return item;
    }

    void close()
    {
        {
            std::lock_guard lock(m_mutex);
            m_closed = true;
        }
        m_cv.notify_all();
    }

private:
    std::mutex m_mutex;
    std::condition_variable m_cv;
    std::deque<T> m_items;
    bool m_closed = false;
};

enum class Framing { Lines, WebSocket };

namespace ws {
constexpr std::uint8_t kContinuation = 0x0;
constexpr std::uint8_t kText = 0x1;
constexpr std::uint8_t kBinary = 0x2;
constexpr std::uint8_t kClose = 0x8;
constexpr std::uint8_t kPing = 0x9;
constexpr std::uint8_t kPong = 0xA;
} // namespace ws

struct Outgoing
{
    std::string data;
    std::uint8_t opcode = ws::kText;
};

/// Buffered reads that give up when a stop flag is raised.
class Reader
{
public:
    Reader(int fd, const std::atomic<bool>* stop_a, const std::atomic<bool>* stop_b)
        : m_fd(fd)
        , m_stop_a(stop_a)
        , m_stop_b(stop_b)
    {}

    /// Reads more bytes; false on EOF, error or stop.
    bool fill()
    {
        while (!stopped()) {
            pollfd p{m_fd, POLLIN, 0};
            const int r = ::poll(&p, 1, kPollMs);
            if (r < 0 && errno == EINTR) continue;
            if (r < 0) return false;
            if (r == 0) continue;
            char buf[65536];
            const ssize_t n = ::read(m_fd, buf, sizeof buf);
            if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
            if (n <= 0) return false;
            m_buffer.append(buf, static_cast<std::size_t>(n));
            return true;
        }
        return false;
    }

    std::optional<std::string> line()
    {
        std::size_t scanned = 0;
        for (;;) {
            const auto nl = m_buffer.find('\n', scanned);
            if (nl != std::string::npos) {
                std::string out = m_buffer.substr(0, nl);
                m_buffer.erase(0, nl + 1);
                if (!out.empty() && out.back() == '\r') out.pop_back();
                return out;
            }
            scanned = m_buffer.size();
            if (m_buffer.size() > kMaxMessageBytes) return std::nullopt;
            if (!fill()) {
                if (m_buffer.empty()) return std::nullopt;
                std::string out = std::move(m_buffer);
                m_buffer.clear();
                return out;
            }
        }
    }

    bool exact(std::size_t n, std::string& out)
    {
        while (m_buffer.size() < n) {
            if (!fill()) return false;
        }
        out.assign(m_buffer, 0, n);
        m_buffer.erase(0, n);
        return true;
    }

    /// At least `n` bytes buffered (or EOF); does not consume.
    std::string_view peek(std::size_t n)
    {
        while (m_buffer.size() < n && m_buffer.find('\n') == std::string::npos && fill()) {
        }
        return std::string_view(m_buffer).substr(0, std::min(n, m_buffer.size()));
    }

private:
    bool stopped() const { return (m_stop_a && *m_stop_a) || (m_stop_b && *m_stop_b); }

    int m_fd;
    const std::atomic<bool>* m_stop_a;
    const std::atomic<bool>* m_stop_b;
    std::string m_buffer;
};

bool write_all(int fd, std::string_view data)
{
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

std::string ws_frame(std::uint8_t opcode, std::string_view payload)
{
    std::string f;
    f.push_back(static_cast<char>(0x80 | opcode));
    const std::size_t n = payload.size();
    if (n < 126) {
        f.push_back(static_cast<char>(n));
    } else if (n <= 0xFFFF) {
        f.push_back(static_cast<char>(126));
        f.push_back(static_cast<char>(n >> 8));
        f.push_back(static_cast<char>(n & 0xFF));
    } else {
        f.push_back(static_cast<char>(127));
        for (int s = 56; s >= 0; s -= 8) {
            f.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> s) & 0xFF));
        }
    }
    f.append(payload);
    return f;
}

struct WsMessage
{
    std::uint8_t opcode = 0;
    std::string payload;
};

/// Next complete client frame (continuations merged). nullopt on EOF or protocol error.
std::optional<WsMessage> read_ws(Reader& in)
{
    WsMessage msg;
    bool have_start = false;
    for (;;) {
        std::string head;
        if (!in.exact(2, head)) return std::nullopt;
        const auto b0 = static_cast<std::uint8_t>(head[0]);
        const auto b1 = static_cast<std::uint8_t>(head[1]);
        const bool fin = (b0 & 0x80) != 0;
        const std::uint8_t opcode = b0 & 0x0F;
        if ((b1 & 0x80) == 0) {
            spdlog::warn("websocket: unmasked client frame");
            return std::nullopt;
        }
        std::uint64_t len = b1 & 0x7F;
        std::string ext;
        if (len == 126) {
            if (!in.exact(2, ext)) return std::nullopt;
            len = (std::uint64_t(std::uint8_t(ext[0])) << 8) | std::uint8_t(ext[1]);
        } else if (len == 127) {
            if (!in.exact(8, ext)) return std::nullopt;
            len = 0;
            for (char c : ext) len = (len << 8) | std::uint8_t(c);
        }
        if (len > kMaxMessageBytes) return std::nullopt;
        std::string mask;
        std::string payload;
        if (!in.exact(4, mask) || !in.exact(static_cast<std::size_t>(len), payload)) return std::nullopt;
        for (std::size_t i = 0; i < payload.size(); ++i) {
            payload[i] = static_cast<char>(payload[i] ^ mask[i % 4]);
        }
        if (opcode >= 0x8) {
            // control frames may interleave with fragments
            if (!have_start) {
                return WsMessage{opcode, std::move(payload)};
            }
            if (opcode == ws::kClose) return WsMessage{opcode, std::move(payload)};
            continue;
        }
        if (opcode != ws::kContinuation) {
            msg.opcode = opcode;
            have_start = true;
        } else if (!have_start) {
            return std::nullopt;
        }
        msg.payload += payload;
        if (msg.payload.size() > kMaxMessageBytes) return std::nullopt;
        if (fin) return msg;
    }
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

/// Reads the upgrade request and answers it. False if it is not a valid upgrade.
bool websocket_handshake(Reader& in, int fd)
{
    std::string key;
    bool upgrade = false;
    for (;;) {
        auto line = in.line();
        if (!line) return false;
        if (line->empty()) break;
        const auto colon = line->find(':');
        if (colon == std::string::npos) continue;
        const std::string name = lower(trim(std::string_view(*line).substr(0, colon)));
        const std::string value = trim(std::string_view(*line).substr(colon + 1));
        if (name == "sec-websocket-key") key = value;
        if (name == "upgrade" && lower(value) == "websocket") upgrade = true;
    }
    if (!upgrade || key.empty()) {
        write_all(fd, "HTTP/1.1 426 Upgrade Required\r\nUpgrade: websocket\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
        return false;
    }
    const std::string response = "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                                 "Sec-WebSocket-Accept: " +
                                 websocket_accept_key(key) + "\r\n\r\n";
    return write_all(fd, response);
}

/// Reader (calling thread), solver and writer threads for one session.
void run_pipeline(Reader& in, int out_fd, Framing framing, const SessionOptions& options, std::atomic<bool>& closing)
{
    Channel<std::string> inbound;
    Channel<Outgoing> outbound;

    std::thread solver([&] {
        try {
            Session session(options);
            while (auto text = inbound.pop()) {
                for (const json& reply : session.handle_text(*text)) {
                    outbound.push(Outgoing{reply.dump()});
                }
                if (session.finished()) break;
            }
        } catch (const std::exception& e) {
            spdlog::error("session aborted: {}", e.what());
        }
        if (framing == Framing::WebSocket) {
            outbound.push(Outgoing{std::string("\x03\xe8", 2), ws::kClose});
        }
        outbound.close();
        closing = true;
    });

    std::thread writer([&] {
        bool ok = true;
        while (auto item = outbound.pop()) {
            if (!ok) continue;
            if (framing == Framing::WebSocket) {
                ok = write_all(out_fd, ws_frame(item->opcode, item->data));
            } else {
                item->data.push_back('\n');
                ok = write_all(out_fd, item->data);
            }
        }
    });

    while (!closing) {
        if (framing == Framing::Lines) {
            auto line = in.line();
            if (!line) break;
            if (trim(*line).empty()) continue;
            inbound.push(std::move(*line));
            continue;
        }
        auto msg = read_ws(in);
        if (!msg || msg->opcode == ws::kClose) break;
        if (msg->opcode == ws::kPing) {
            outbound.push(Outgoing{std::move(msg->payload), ws::kPong});
        } else if (msg->opcode == ws::kText || msg->opcode == ws::kBinary) {
            inbound.push(std::move(msg->payload));
        }
    }
    inbound.close();
    solver.join();
    writer.join();
}

void ignore_sigpipe()
{
    static const bool once = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)once;
}

} // namespace

std::string websocket_accept_key(std::string_view client_key)
{
    const std::string input = std::string(client_key) + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(input.data(), input.size(), digest, &len, EVP_sha1(), nullptr);
    return base64_encode(std::string_view(reinterpret_cast<const char*>(digest), len));
}

void serve_stream(int in_fd, int out_fd, const SessionOptions& options, const std::atomic<bool>* stop)
{
    ignore_sigpipe();
    std::atomic<bool> closing{false};
    Reader in(in_fd, stop, &closing);
    run_pipeline(in, out_fd, Framing::Lines, options, closing);
}

SessionServer::SessionServer(ServerOptions options)
    : m_options(std::move(options))
{
    ignore_sigpipe();
    if (m_options.port < 0 || m_options.port > 65535) {
        throw Error(ErrorCode::InvalidParam, "port must lie in [0, 65535]");
    }
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* found = nullptr;
    const std::string port = std::to_string(m_options.port);
    if (const int rc = ::getaddrinfo(m_options.host.c_str(), port.c_str(), &hints, &found); rc != 0) {
        throw Error(ErrorCode::IoError, "cannot resolve '" + m_options.host + "': " + ::gai_strerror(rc));
    }
    std::string failure = "no address";
    for (addrinfo* a = found; a; a = a->ai_next) {
        const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
        if (fd < 0) continue;
        const int yes = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 16) == 0) {
            m_listen_fd = fd;
            break;
        }
        failure = std::strerror(errno);
        ::close(fd);
    }
    ::freeaddrinfo(found);
    if (m_listen_fd < 0) {
        throw Error(ErrorCode::IoError, "cannot listen on " + m_options.host + ":" + port + ": " + failure);
    }
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(m_listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
    m_port = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                        : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

SessionServer::~SessionServer()
{
    stop();
    reap(true);
    if (m_listen_fd >= 0) {
        ::close(m_listen_fd);
    }
}

void SessionServer::stop()
{
    m_stop = true;
}

void SessionServer::reap(bool all)
{
    std::lock_guard lock(m_mutex);
    for (auto it = m_connections.begin(); it != m_connections.end();) {
        if (all || it->done) {
            it->thread.join();
            it = m_connections.erase(it);
        } else {
            ++it;
        }
    }
}

void SessionServer::run()
{
    spdlog::info("session server listening on {}:{}", m_options.host, m_port);
    while (!m_stop) {
        pollfd p{m_listen_fd, POLLIN, 0};
        const int r = ::poll(&p, 1, kPollMs);
        reap(false);
        if (r <= 0) continue;
        const int fd = ::accept(m_listen_fd, nullptr, nullptr);
        if (fd < 0) continue;
        std::lock_guard lock(m_mutex);
        Connection& c = m_connections.emplace_back();
        c.thread = std::thread([this, fd, &c] {
            try {
                std::atomic<bool> closing{false};
                Reader in(fd, &m_stop, &closing);
                const std::string_view head = in.peek(4);
                if (head == "GET ") {
                    if (websocket_handshake(in, fd)) {
                        spdlog::info("websocket session opened");
                        run_pipeline(in, fd, Framing::WebSocket, m_options.session, closing);
                    }
                } else if (!head.empty()) {
                    spdlog::info("line-delimited session opened");
                    run_pipeline(in, fd, Framing::Lines, m_options.session, closing);
                }
            } catch (const std::exception& e) {
                spdlog::error("connection failed: {}", e.what());
            }
            ::shutdown(fd, SHUT_RDWR);
            ::close(fd);
            spdlog::info("session closed");
            c.done = true;
        });
    }
    reap(true);
}

} // namespace sarap::app
