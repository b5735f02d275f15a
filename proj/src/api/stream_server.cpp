#include "idlewatch/api/stream_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <deque>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "idlewatch/api/event_json.hpp"

namespace idlewatch::api {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr std::string_view kPathPrefix = "/events/";

class Registry;

class Subscriber : public std::enable_shared_from_this<Subscriber> {
 public:
  Subscriber(tcp::socket&& socket, std::string region, std::size_t depth, Registry& registry)
      : ws_(std::move(socket)), region_(std::move(region)), depth_(depth), registry_(registry) {}

  void start(http::request<http::string_body> req);

  /// Thread-safe. False when the subscriber is closed or just overflowed.
  bool enqueue(std::shared_ptr<const std::string> message) {
    std::lock_guard lock(mutex_);
    if (closed_) return false;
    if (queue_.size() >= depth_) {
      closed_ = true;
      queue_.clear();
      net::post(ws_.get_executor(), [self = shared_from_this()] {
        self->close(websocket::close_code::policy_error);
      });
      return false;
    }
    queue_.push_back(std::move(message));
    if (!writing_) {
      writing_ = true;
      net::post(ws_.get_executor(), [self = shared_from_this()] { self->write_next(); });
    }
    return true;
  }

  /// Must run on the subscriber's executor.
  void close(websocket::close_code code) {
    if (close_sent_) return;
    close_sent_ = true;
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    ws_.async_close(code, [self = shared_from_this()](beast::error_code) { self->finish(); });
  }

  void request_close(websocket::close_code code) {
    net::post(ws_.get_executor(), [self = shared_from_this(), code] { self->close(code); });
  }

  const std::string& region() const { return region_; }

 private:
  void read_loop() {
    ws_.async_read(inbound_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->finish();
        return;
      }
      self->inbound_.consume(self->inbound_.size());
      self->read_loop();
    });
  }

  void write_next() {
    std::shared_ptr<const std::string> message;
    {
      std::lock_guard lock(mutex_);
      if (closed_ || queue_.empty()) {
        writing_ = false;
        return;
      }
      message = queue_.front();
    }
    ws_.async_write(net::buffer(*message), [self = shared_from_this(), message](beast::error_code ec, std::size_t) {
      if (ec) {
        self->finish();
        return;
      }
      {
        std::lock_guard lock(self->mutex_);
        if (!self->queue_.empty()) self->queue_.pop_front();
      }
      self->write_next();
    });
  }

  void finish();

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer inbound_;
  std::string region_;
  std::size_t depth_;
  Registry& registry_;

  std::mutex mutex_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool writing_ = false;
  bool closed_ = false;
  bool close_sent_ = false;  // executor-confined
  bool finished_ = false;    // executor-confined
};

class Registry {
 public:
  void add(const std::shared_ptr<Subscriber>& s) {
    std::lock_guard lock(mutex_);
    by_region_[s->region()].insert(s);
  }
  void remove(const std::shared_ptr<Subscriber>& s) {
    std::lock_guard lock(mutex_);
    auto it = by_region_.find(s->region());
    if (it != by_region_.end()) it->second.erase(s);
  }
  std::vector<std::shared_ptr<Subscriber>> snapshot(const std::string& region) const {
    std::lock_guard lock(mutex_);
    auto it = by_region_.find(region);
    if (it == by_region_.end()) return {};
    return {it->second.begin(), it->second.end()};
  }
  std::vector<std::shared_ptr<Subscriber>> all() const {
    std::lock_guard lock(mutex_);
    std::vector<std::shared_ptr<Subscriber>> out;
    for (const auto& [region, subs] : by_region_) out.insert(out.end(), subs.begin(), subs.end());
    return out;
  }
  std::size_t count(const std::string& region) const {
    std::lock_guard lock(mutex_);
    auto it = by_region_.find(region);
    return it == by_region_.end() ? 0 : it->second.size();
  }
  std::size_t total() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& [region, subs] : by_region_) n += subs.size();
    return n;
  }
  void clear() {
    std::lock_guard lock(mutex_);
    by_region_.clear();
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::set<std::shared_ptr<Subscriber>>> by_region_;
};

void Subscriber::start(http::request<http::string_body> req) {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.text(true);
  ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->registry_.add(self);
    self->read_loop();
  });
}

void Subscriber::finish() {
  if (finished_) return;
  finished_ = true;
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
    queue_.clear();
  }
  registry_.remove(shared_from_this());
}

/// Reads the upgrade request and either hands the socket to a Subscriber or
/// answers with an HTTP error.
class Handshake : public std::enable_shared_from_this<Handshake> {
 public:
  Handshake(tcp::socket&& socket, const std::set<std::string>& regions, std::size_t depth, Registry& registry)
      : stream_(std::move(socket)), regions_(regions), depth_(depth), registry_(registry) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (!ec) self->dispatch();
    });
  }

 private:
  void dispatch() {
    const std::string target(req_.target());
    std::string region;
    if (target.rfind(kPathPrefix, 0) == 0) region = target.substr(kPathPrefix.size());
    if (region.empty() || !regions_.contains(region)) {
      reply(http::status::not_found, "unknown stream path\n");
      return;
    }
    if (!websocket::is_upgrade(req_)) {
      reply(http::status::upgrade_required, "websocket upgrade required\n");
      return;
    }
    stream_.expires_never();
    auto sub = std::make_shared<Subscriber>(stream_.release_socket(), region, depth_, registry_);
    sub->start(std::move(req_));
  }

  void reply(http::status status, std::string body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, "text/plain");
    res->keep_alive(false);
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  const std::set<std::string>& regions_;
  std::size_t depth_;
  Registry& registry_;
};

}  // namespace

struct StreamServer::Impl {
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::set<std::string> regions;
  std::size_t depth;
  Registry registry;
  std::thread thread;
  std::mutex shutdown_mutex;
  bool stopped = false;

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<Handshake>(std::move(socket), regions, depth, registry)->run();
      accept();
    });
  }
};

StreamServer::StreamServer(std::vector<std::string> regions, StreamServerOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->regions.insert(regions.begin(), regions.end());
  impl_->depth = options.queue_depth ? options.queue_depth : 1;

  beast::error_code ec;
  const auto address = net::ip::make_address(options.address, ec);
  if (ec) throw BindFailure("bad bind address " + options.address + ": " + ec.message());
  const tcp::endpoint endpoint{address, options.port};
  impl_->acceptor.open(endpoint.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(endpoint, ec);
  if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw BindFailure("cannot bind " + options.address + ":" + std::to_string(options.port) + ": " + ec.message());
  }

  impl_->accept();
  impl_->thread = std::thread([impl = impl_.get()] { impl->ioc.run(); });
}

StreamServer::~StreamServer() { shutdown(); }

std::uint16_t StreamServer::port() const { return impl_->acceptor.local_endpoint().port(); }

std::size_t StreamServer::broadcast(const std::string& region_id, std::span<const IdlingEvent> batch) {
  auto subscribers = impl_->registry.snapshot(region_id);
  if (subscribers.empty()) return 0;
  auto message = std::make_shared<const std::string>(events_to_json(batch));
  std::size_t delivered = 0;
  for (const auto& sub : subscribers) {
    if (sub->enqueue(message)) {
      ++delivered;
    } else {
      spdlog::debug("subscriber on {} dropped", region_id);
    }
  }
  return delivered;
}

std::size_t StreamServer::subscriber_count(const std::string& region_id) const {
  return impl_->registry.count(region_id);
}

bool StreamServer::wait_for_subscribers(const std::string& region_id, std::size_t n,
                                        std::chrono::milliseconds timeout) const {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (subscriber_count(region_id) < n) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return true;
}

void StreamServer::shutdown() {
  std::lock_guard lock(impl_->shutdown_mutex);
  if (impl_->stopped) return;
  impl_->stopped = true;

  net::post(impl_->ioc, [impl = impl_.get()] {
    beast::error_code ignored;
    impl->acceptor.close(ignored);
  });
  for (const auto& sub : impl_->registry.all()) sub->request_close(websocket::close_code::going_away);

  // Give close handshakes a moment to complete before tearing down.
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
  while (impl_->registry.total() > 0 && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  impl_->ioc.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  impl_->registry.clear();
}

}  // namespace idlewatch::api
