#include "server.hpp"

#include "handsdown/stack.hpp"

#include "doctest.h"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <httplib.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <thread>

using namespace handsdown;
using nlohmann::json;

namespace {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

json exchange(websocket::stream<tcp::socket>& ws, const json& msg) {
    ws.write(boost::asio::buffer(msg.dump()));
    beast::flat_buffer buf;
    ws.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
}

}  // namespace

TEST_CASE("server speaks the session protocol over WebSocket and serves the layout") {
    StackOptions o;
    o.lexicon = HANDSDOWN_TEST_DATA "/english-10000.txt";
    const DecoderStack stack(o);
    SessionEngine engine(stack.layout(), stack.registry(), EngineConfig{});
    const auto log_dir = std::filesystem::temp_directory_path() / "handsdown_server_test";
    std::filesystem::remove_all(log_dir);

    ServerOptions opts;
    opts.port = 0;
    opts.log_dir = log_dir;
    Server server(engine, stack.layout().to_json(), opts);
    const std::uint16_t port = server.listen();
    std::thread runner([&] { server.run(); });

    {
        httplib::Client http("127.0.0.1", port);
        const auto res = http.Get("/layout.json");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(KeyLayout::from_json(res->body).to_json() == stack.layout().to_json());
        const auto missing = http.Get("/nothing");
        REQUIRE(missing);
        CHECK(missing->status == 404);
    }

    {
        boost::asio::io_context io;
        tcp::resolver resolver(io);
        websocket::stream<tcp::socket> ws(io);
        boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws.handshake("127.0.0.1", "/");
        CHECK(exchange(ws, {{"kind", "open"}, {"backend", "ngram"}})["kind"] == "opened");
        double t = 0;
        for (char c : std::string("ekigible")) {
            const Point p = stack.layout().center(c);
            exchange(ws, {{"kind", "touch"}, {"e", {{"kind", "down"}, {"t", t}, {"x", p.x}, {"y", p.y}}}});
            exchange(ws, {{"kind", "touch"}, {"e", {{"kind", "up"}, {"t", t + 50}, {"x", p.x}, {"y", p.y}}}});
            t += 250;
        }
        const json commit = exchange(ws, {{"kind", "space"}});
        CHECK(commit["kind"] == "commit");
        CHECK(commit["word"] == "eligible");
        ws.close(websocket::close_code::normal);
    }

    server.stop();
    runner.join();

    std::size_t touch_lines = 0, message_logs = 0;
    for (const auto& entry : std::filesystem::directory_iterator(log_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.ends_with(".messages.jsonl")) ++message_logs;
        if (!name.ends_with(".touches.jsonl")) continue;
        std::ifstream in(entry.path());
        for (std::string line; std::getline(in, line);) ++touch_lines;
    }
    CHECK(touch_lines == 16);
    CHECK(message_logs == 1);
    std::filesystem::remove_all(log_dir);
}
