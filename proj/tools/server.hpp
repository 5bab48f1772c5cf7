#pragma once

// WebSocket transport for the session engine plus the static layout
// endpoint (GET /layout.json) on the same port.

#include "handsdown/session.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace handsdown {

struct ServerOptions {
    std::string address = "127.0.0.1";
    std::uint16_t port = 8080;  // 0 picks a free port
    std::optional<std::filesystem::path> log_dir;
};

class Server {
public:
    Server(SessionEngine& engine, std::string layout_json, ServerOptions opts);
    ~Server();

    /// Binds and returns the bound port.
    std::uint16_t listen();
    /// Accepts until stop(); one thread per connection.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace handsdown
