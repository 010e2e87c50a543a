#pragma once

#include <sarap/app/session.hpp>

#include <atomic>
#include <list>
#include <mutex>
#include <string>
#include <thread>

namespace sarap::app {

struct ServerOptions
{
    std::string host = "127.0.0.1";
    /// 0 picks a free port; see SessionServer::port().
    int port = 0;
    SessionOptions session;
};

/// TCP front end for Session. Each connection gets its own session and three threads
/// (reader, solver, writer) joined by ordered queues, so a slow client never stalls
/// the solver. The first bytes select the framing: an HTTP "GET" upgrades to a
/// WebSocket (one JSON text message per frame), anything else is newline-delimited JSON.
class SessionServer
{
public:
    /// Binds and listens. Throws IoError.
    explicit SessionServer(ServerOptions options);
    ~SessionServer();
    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    int port() const { return m_port; }

    /// Accepts connections until stop().
    void run();
    /// Thread-safe; closes the listener and ends all connections.
    void stop();

private:
    struct Connection
    {
        std::thread thread;
        std::atomic<bool> done{false};
    };
    void reap(bool all);

    ServerOptions m_options;
    int m_listen_fd = -1;
    int m_port = 0;
    std::atomic<bool> m_stop{false};
    std::mutex m_mutex;
    std::list<Connection> m_connections;
};

/// Serves one newline-delimited JSON session over a pair of file descriptors (for
/// example stdin/stdout) until Shutdown, end of input, or `stop`.
void serve_stream(int in_fd, int out_fd, const SessionOptions& options, const std::atomic<bool>* stop = nullptr);

/// Sec-WebSocket-Accept value for a client key.
std::string websocket_accept_key(std::string_view client_key);

} // namespace sarap::app
