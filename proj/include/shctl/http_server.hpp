#pragma once

#include "shctl/service.hpp"

#include <memory>
#include <string>

namespace shctl::service {

/// HTTP + WebSocket front end for a SessionManager. One thread per connection;
/// GET /sessions/{id}/ws upgrades and pushes a snapshot after every change.
class HttpServer {
public:
    /// Port 0 picks an ephemeral port; see port().
    HttpServer(SessionManager& sessions, const std::string& address, unsigned short port);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    unsigned short port() const;
    /// Accepts connections on a background thread.
    void start();
    /// Blocks until stop() is called from another thread or a signal handler.
    void run();
    /// Closes the listener and all open connections, then joins their threads.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace shctl::service
