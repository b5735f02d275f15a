#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "idlewatch/api/event_json.hpp"
#include "idlewatch/api/stream_server.hpp"

using namespace idlewatch;
using namespace idlewatch::api;

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

std::vector<IdlingEvent> golden_batch() {
  return {
      {"NYC", "MTA NYCT_9750", "M42", "MQ_D3-Weekday-SDon-012900_M42_301", 40.7625617980957, -74.00098419189453,
       1697178720, 90},
      {"NYC", "MTA NYCT_9890", "M104", "MV_D3-Weekday-SDon-011000_M104_101", 40.814937591552734,
       -73.95511627197266, 1697178722, 120},
      {"NYC", "MTA NYCT_5975", "BX9", "KB_D3-Weekday-SDon-011000_BX9_602", 40.84089279174805, -73.87944030761719,
       1697178721, 60},
  };
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Client {
  net::io_context ioc;
  websocket::stream<tcp::socket> ws{ioc};

  Client(std::uint16_t port, const std::string& path) {
    tcp::resolver resolver(ioc);
    net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws.handshake("127.0.0.1", path);
  }

  std::string read() {
    beast::flat_buffer buffer;
    ws.read(buffer);
    return beast::buffers_to_string(buffer.data());
  }
};

http::status plain_get(std::uint16_t port, const std::string& path, bool upgrade) {
  net::io_context ioc;
  tcp::socket socket(ioc);
  tcp::resolver resolver(ioc);
  net::connect(socket, resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::empty_body> req{http::verb::get, path, 11};
  req.set(http::field::host, "127.0.0.1");
  if (upgrade) {
    req.set(http::field::connection, "Upgrade");
    req.set(http::field::upgrade, "websocket");
    req.set(http::field::sec_websocket_key, "dGhlIHNhbXBsZSBub25jZQ==");
    req.set(http::field::sec_websocket_version, "13");
  }
  http::write(socket, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(socket, buffer, res);
  return res.result();
}

}  // namespace

TEST_CASE("golden batch serializes byte for byte") {
  const auto golden = read_text(std::string(IDLEWATCH_TEST_DATA) + "/websocket_batch.json");
  const auto batch = golden_batch();
  CHECK(events_to_json(batch) == golden);
  CHECK(events_from_json(golden) == batch);
  CHECK(events_to_json({}) == "[]");
}

TEST_CASE("json keys are exactly the eight event fields in order") {
  auto text = events_to_json(golden_batch());
  const std::vector<std::string> keys{"iata_id", "vehicle_id", "route_id", "trip_id",
                                      "latitude", "longitude", "datetime", "duration"};
  std::size_t pos = 0;
  for (const auto& k : keys) {
    auto next = text.find("\"" + k + "\"", pos);
    REQUIRE(next != std::string::npos);
    pos = next;
  }
  CHECK(text.find("\"iata_id\"", 1) < text.find("\"vehicle_id\""));
}

TEST_CASE("null ids and malformed messages") {
  std::vector<IdlingEvent> one{{"NYC", "v", std::nullopt, std::nullopt, 40.5, -73.5, 1, 60}};
  auto text = events_to_json(one);
  CHECK(text.find("\"route_id\":null") != std::string::npos);
  CHECK(events_from_json(text) == one);
  CHECK_THROWS_AS(events_from_json("{}"), std::invalid_argument);
  CHECK_THROWS_AS(events_from_json("[{\"iata_id\":\"NYC\"}]"), std::invalid_argument);
  CHECK_THROWS_AS(events_from_json("not json"), std::invalid_argument);
}

TEST_CASE("broadcast with no subscribers delivers nothing") {
  StreamServer server({"us-east"});
  const auto batch = golden_batch();
  CHECK(server.broadcast("us-east", batch) == 0);
  CHECK(server.broadcast("nowhere", batch) == 0);
}

TEST_CASE("subscribers receive identical frames in order; regions are isolated") {
  StreamServer server({"us-east", "eu-west"});
  Client a(server.port(), "/events/us-east");
  Client b(server.port(), "/events/us-east");
  Client other(server.port(), "/events/eu-west");
  REQUIRE(server.wait_for_subscribers("us-east", 2, std::chrono::seconds(5)));
  REQUIRE(server.wait_for_subscribers("eu-west", 1, std::chrono::seconds(5)));

  const auto batch = golden_batch();
  CHECK(server.broadcast("us-east", batch) == 2);
  CHECK(server.broadcast("us-east", {}) == 2);
  CHECK(server.broadcast("eu-west", std::span(batch).first(1)) == 1);

  const auto first_a = a.read();
  const auto first_b = b.read();
  CHECK(first_a == first_b);
  CHECK(events_from_json(first_a).size() == 3);
  CHECK(a.read() == "[]");
  CHECK(b.read() == "[]");
  CHECK(events_from_json(other.read()) == std::vector<IdlingEvent>{batch[0]});
}

TEST_CASE("unknown paths get 404 and plain requests get 426") {
  StreamServer server({"us-east"});
  CHECK(plain_get(server.port(), "/events/mars", true) == http::status::not_found);
  CHECK(plain_get(server.port(), "/", true) == http::status::not_found);
  CHECK(plain_get(server.port(), "/events/us-east", false) == http::status::upgrade_required);
  CHECK(server.subscriber_count("us-east") == 0);
}

TEST_CASE("a subscriber that falls behind is closed without affecting others") {
  StreamServer server({"us-east"}, {.queue_depth = 2});
  Client slow(server.port(), "/events/us-east");
  REQUIRE(server.wait_for_subscribers("us-east", 1, std::chrono::seconds(5)));
  // Large frames fill socket buffers so the queue backs up while nobody reads.
  std::vector<IdlingEvent> big(5000, golden_batch()[0]);
  std::size_t accepted = 0;
  for (int i = 0; i < 500; ++i) {
    const auto n = server.broadcast("us-east", big);
    if (n == 0) break;
    accepted += n;
  }
  CHECK(accepted < 500);

  Client fresh(server.port(), "/events/us-east");
  REQUIRE(server.wait_for_subscribers("us-east", 1, std::chrono::seconds(5)));
  CHECK(server.broadcast("us-east", {}) >= 1);
  CHECK(fresh.read() == "[]");
}

TEST_CASE("shutdown closes subscriptions with going-away") {
  auto server = std::make_unique<StreamServer>(std::vector<std::string>{"us-east"});
  Client c(server->port(), "/events/us-east");
  REQUIRE(server->wait_for_subscribers("us-east", 1, std::chrono::seconds(5)));
  std::thread closer([&] { server->shutdown(); });
  beast::flat_buffer buffer;
  beast::error_code ec;
  c.ws.read(buffer, ec);
  closer.join();
  CHECK(ec == websocket::error::closed);
  CHECK(c.ws.reason().code == websocket::close_code::going_away);
}
