#include "server.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <fstream>
#include <list>
#include <mutex>
#include <thread>

namespace handsdown {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct Server::Impl {
    SessionEngine& engine;
    std::string layout_json;
    ServerOptions opts;
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::mutex mu;
    std::list<std::shared_ptr<tcp::socket>> sockets;
    std::vector<std::thread> workers;
    std::size_t connections = 0;

    Impl(SessionEngine& e, std::string layout, ServerOptions o)
        : engine(e), layout_json(std::move(layout)), opts(std::move(o)) {}

    void accept_next() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;  // acceptor closed
            auto sock = std::make_shared<tcp::socket>(std::move(socket));
            std::lock_guard lock(mu);
            sockets.push_back(sock);
            const std::size_t seq = ++connections;
            workers.emplace_back([this, sock, seq] { serve_socket(sock, seq); });
            accept_next();
        });
    }

    void serve_socket(const std::shared_ptr<tcp::socket>& sock, std::size_t seq) {
        try {
            beast::flat_buffer buffer;
            http::request<http::string_body> req;
            http::read(*sock, buffer, req);
            if (websocket::is_upgrade(req)) {
                serve_websocket(sock, req, seq);
            } else {
                serve_http(*sock, req);
            }
        } catch (const std::exception&) {
            // Client went away or sent garbage; nothing to report to it.
        }
        std::lock_guard lock(mu);
        sockets.remove(sock);
    }

    void serve_http(tcp::socket& sock, const http::request<http::string_body>& req) {
        http::response<http::string_body> res;
        res.version(req.version());
        res.set(http::field::access_control_allow_origin, "*");
        if (req.method() == http::verb::get && (req.target() == "/layout.json" || req.target() == "/layout")) {
            res.result(http::status::ok);
            res.set(http::field::content_type, "application/json");
            res.body() = layout_json;
        } else {
            res.result(http::status::not_found);
            res.set(http::field::content_type, "text/plain");
            res.body() = "not found\n";
        }
        res.keep_alive(false);
        res.prepare_payload();
        http::write(sock, res);
        beast::error_code ec;
        sock.shutdown(tcp::socket::shutdown_send, ec);
    }

    void serve_websocket(const std::shared_ptr<tcp::socket>& sock, const http::request<http::string_body>& req,
                         std::size_t seq) {
        websocket::stream<tcp::socket&> ws(*sock);
        ws.accept(req);
        ws.text(true);

        Connection conn(engine);
        std::ofstream message_log, touch_log;
        if (opts.log_dir) {
            const std::string stem = "connection-" + std::to_string(seq);
            message_log.open(*opts.log_dir / (stem + ".messages.jsonl"));
            touch_log.open(*opts.log_dir / (stem + ".touches.jsonl"));
            conn.set_message_log(&message_log);
            conn.set_touch_log(&touch_log);
        }
        beast::flat_buffer buffer;
        for (;;) {
            buffer.clear();
            beast::error_code ec;
            ws.read(buffer, ec);
            if (ec) break;
            const std::string msg = beast::buffers_to_string(buffer.data());
            for (const std::string& frame : conn.handle(msg)) ws.write(asio::buffer(frame));
            if (message_log.is_open()) message_log.flush();
            if (touch_log.is_open()) touch_log.flush();
        }
    }
};

Server::Server(SessionEngine& engine, std::string layout_json, ServerOptions opts)
    : impl_(std::make_unique<Impl>(engine, std::move(layout_json), std::move(opts))) {
    if (impl_->opts.log_dir) std::filesystem::create_directories(*impl_->opts.log_dir);
}

Server::~Server() {
    stop();
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(impl_->mu);
        workers.swap(impl_->workers);
    }
    for (std::thread& t : workers) t.join();
}

std::uint16_t Server::listen() {
    const tcp::endpoint ep(asio::ip::make_address(impl_->opts.address), impl_->opts.port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
    impl_->accept_next();
    return impl_->acceptor.local_endpoint().port();
}

void Server::run() { impl_->io.run(); }

void Server::stop() {
    asio::post(impl_->io, [this] {
        beast::error_code ec;
        impl_->acceptor.close(ec);
    });
    impl_->io.stop();
    std::lock_guard lock(impl_->mu);
    for (const auto& s : impl_->sockets) {
        beast::error_code ec;
        s->shutdown(tcp::socket::shutdown_both, ec);
    }
}

}  // namespace handsdown
