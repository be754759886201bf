#include "shctl/http_server.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <sys/socket.h>

#include <atomic>
#include <deque>
#include <functional>
#include <list>
#include <mutex>
#include <thread>

namespace shctl::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr auto kWaitSlice = std::chrono::milliseconds(20);

}  // namespace

struct HttpServer::Impl {
    struct Connection {
        asio::io_context io;  // private to the connection thread; drives websocket I/O
        tcp::socket socket{io};
        std::thread thread;
        std::atomic<bool> done{false};
        std::atomic<bool> websocket{false};
    };

    SessionManager& sessions;
    Router router;
    asio::io_context io;
    tcp::acceptor acceptor;
    std::thread accept_thread;
    std::atomic<bool> stopping{false};
    std::mutex connections_mutex;
    std::list<std::unique_ptr<Connection>> connections;
    std::mutex run_mutex;
    std::condition_variable stopped;
    unsigned short bound_port = 0;

    Impl(SessionManager& s, const std::string& address, unsigned short port)
        : sessions(s), router(s), acceptor(io) {
        const tcp::endpoint endpoint(asio::ip::make_address(address), port);
        acceptor.open(endpoint.protocol());
        acceptor.set_option(asio::socket_base::reuse_address(true));
        acceptor.bind(endpoint);
        acceptor.listen();
        bound_port = acceptor.local_endpoint().port();
    }

    void accept_loop() {
        while (!stopping) {
            beast::error_code ec;
            auto conn = std::make_unique<Connection>();
            acceptor.accept(conn->socket, ec);
            if (ec) {
                if (stopping) break;
                continue;
            }
            std::lock_guard lock(connections_mutex);
            reap();
            Connection* raw = conn.get();
            raw->thread = std::thread([this, raw] {
                serve(*raw);
                raw->done = true;
            });
            connections.push_back(std::move(conn));
        }
    }

    // Caller holds connections_mutex.
    void reap() {
        for (auto it = connections.begin(); it != connections.end();) {
            if ((*it)->done) {
                (*it)->thread.join();
                it = connections.erase(it);
            } else {
                ++it;
            }
        }
    }

    void serve(Connection& conn) {
        tcp::socket& socket = conn.socket;
        beast::flat_buffer buffer;
        for (;;) {
            beast::error_code ec;
            http::request<http::string_body> req;
            http::read(socket, buffer, req, ec);
            if (ec) return;

            if (websocket::is_upgrade(req)) {
                serve_websocket(conn, req);
                return;
            }
            const Response r = router.handle(std::string(req.method_string()), std::string(req.target()), req.body());
            http::response<http::string_body> res{static_cast<http::status>(r.status), req.version()};
            res.set(http::field::server, "shctl");
            res.set(http::field::content_type, r.content_type);
            res.set(http::field::access_control_allow_origin, "*");
            res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
            res.set(http::field::access_control_allow_headers, "Content-Type");
            res.keep_alive(req.keep_alive());
            res.body() = r.body;
            res.prepare_payload();
            http::write(socket, res, ec);
            if (ec || !req.keep_alive()) break;
        }
        beast::error_code ignored;
        socket.shutdown(tcp::socket::shutdown_send, ignored);
    }

    void serve_websocket(Connection& conn, const http::request<http::string_body>& req) {
        const auto id = Router::websocket_session(std::string(req.target()));
        Json initial;
        try {
            if (!id) throw ServiceError(404, "no websocket route for " + std::string(req.target()));
            initial = sessions.snapshot(*id);
        } catch (const ServiceError& e) {
            http::response<http::string_body> res{static_cast<http::status>(e.status()), req.version()};
            res.set(http::field::content_type, "application/json");
            res.body() = e.body().dump();
            res.prepare_payload();
            beast::error_code ignored;
            http::write(conn.socket, res, ignored);
            return;
        }
        conn.websocket = true;
        websocket::stream<tcp::socket&> ws(conn.socket);
        websocket::stream_base::timeout limits{};
        limits.handshake_timeout = std::chrono::seconds(1);
        limits.idle_timeout = websocket::stream_base::none();
        limits.keep_alive_pings = false;
        ws.set_option(limits);
        beast::error_code ec;
        ws.accept(req, ec);
        if (ec) return;
        ws.text(true);

        // Single-threaded: a read loop notices client closes, a timer polls the
        // session for new versions, and writes go out one at a time.
        std::uint64_t seen = initial.at("version").get<std::uint64_t>();
        std::deque<std::string> outbox{initial.dump()};
        bool writing = false;
        bool done = false;
        beast::flat_buffer inbound;
        asio::steady_timer timer(conn.io);

        std::function<void()> pump = [&] {
            if (writing || done || outbox.empty()) return;
            writing = true;
            ws.async_write(asio::buffer(outbox.front()), [&](beast::error_code err, std::size_t) {
                writing = false;
                if (err) {
                    done = true;
                    timer.cancel();
                    return;
                }
                outbox.pop_front();
                pump();
            });
        };
        std::function<void()> read = [&] {
            ws.async_read(inbound, [&](beast::error_code err, std::size_t) {
                if (err) {
                    done = true;
                    timer.cancel();
                    return;
                }
                inbound.consume(inbound.size());
                read();
            });
        };
        std::function<void()> tick = [&] {
            timer.expires_after(kWaitSlice);
            timer.async_wait([&](beast::error_code err) {
                if (err || done) return;
                if (stopping) {
                    done = true;
                    ws.async_close(websocket::close_code::going_away, [](beast::error_code) {});
                    return;
                }
                if (auto update = sessions.wait_for_update(*id, seen, std::chrono::milliseconds(0))) {
                    outbox.push_back(update->dump());
                    pump();
                }
                tick();
            });
        };
        pump();
        read();
        tick();
        conn.io.run();
    }

    void stop() {
        if (stopping.exchange(true)) return;
        {
            // Wakes the blocking accept().
            beast::error_code ec;
            ::shutdown(acceptor.native_handle(), SHUT_RDWR);
            acceptor.close(ec);
        }
        if (accept_thread.joinable()) accept_thread.join();
        std::list<std::unique_ptr<Connection>> pending;
        {
            std::lock_guard lock(connections_mutex);
            // Wakes connections blocked in read(). Websocket loops see `stopping`
            // and send a close frame themselves.
            for (auto& conn : connections)
                if (!conn->websocket) ::shutdown(conn->socket.native_handle(), SHUT_RDWR);
            pending.swap(connections);
        }
        for (auto& conn : pending) conn->thread.join();
        std::lock_guard lock(run_mutex);
        stopped.notify_all();
    }
};

HttpServer::HttpServer(SessionManager& sessions, const std::string& address, unsigned short port)
    : impl_(std::make_unique<Impl>(sessions, address, port)) {}

HttpServer::~HttpServer() { stop(); }

unsigned short HttpServer::port() const { return impl_->bound_port; }

void HttpServer::start() {
    impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void HttpServer::run() {
    start();
    std::unique_lock lock(impl_->run_mutex);
    impl_->stopped.wait(lock, [this] { return impl_->stopping.load(); });
}

void HttpServer::stop() { impl_->stop(); }

}  // namespace shctl::service
