#include "holmes/service/server.hpp"

#include <sys/socket.h>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <list>

#include "holmes/service/router.hpp"

namespace holmes::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct Server::Impl {
  Impl(Hub& h, ServerOptions o) : hub(h), options(std::move(o)), acceptor(io) {}

  Hub& hub;
  ServerOptions options;
  asio::io_context io;
  tcp::acceptor acceptor;
  std::thread accept_thread;
  struct Connection {
    asio::io_context ctx;
    tcp::socket socket{ctx};
    std::thread worker;
    std::atomic<bool> finished{false};
  };

  std::mutex mutex;
  std::list<std::unique_ptr<Connection>> connections;
  std::atomic<bool> running{false};

  void add_cors(http::response<http::string_body>& res) const {
    res.set(http::field::access_control_allow_origin, options.allow_origin);
    res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Content-Type");
  }

  // Single-threaded async session: reads answer pings and close frames,
  // writes drain the subscriber queue one message at a time.
  struct EventSession : std::enable_shared_from_this<EventSession> {
    EventSession(tcp::socket& socket, Impl& server)
        : ws(socket), timer(socket.get_executor()), server(server), sub(server.hub.subscribe()) {}

    websocket::stream<tcp::socket&> ws;
    asio::steady_timer timer;
    Impl& server;
    std::shared_ptr<Subscriber> sub;
    beast::flat_buffer inbound;
    std::string outbound;
    bool writing = false;
    bool done = false;

    void start() {
      read();
      pump();
    }

    void read() {
      ws.async_read(inbound, [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) return self->finish();
        self->inbound.clear();
        self->read();
      });
    }

    void pump() {
      if (done) return;
      if (!server.running || server.hub.stopping() || sub->closed()) {
        return close(websocket::close_reason(websocket::close_code::going_away));
      }
      if (!writing) {
        if (auto msg = sub->pop(std::chrono::milliseconds(0))) {
          outbound = std::move(*msg);
          writing = true;
          ws.async_write(asio::buffer(outbound), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->writing = false;
            if (ec) return self->finish();
            self->pump();
          });
          return;
        }
        if (sub->dropped()) return close(websocket::close_reason(websocket::close_code::policy_error, "consumer too slow"));
      }
      timer.expires_after(std::chrono::milliseconds(20));
      timer.async_wait([self = shared_from_this()](beast::error_code ec) {
        if (!ec) self->pump();
      });
    }

    void close(const websocket::close_reason& reason) {
      if (done || writing) return;
      done = true;
      timer.cancel();
      ws.async_close(reason, [self = shared_from_this()](beast::error_code) { self->finish(); });
    }

    void finish() {
      done = true;
      timer.cancel();
      sub->close();
    }
  };

  void stream_events(asio::io_context& ctx, tcp::socket& socket, http::request<http::string_body> req) {
    auto session = std::make_shared<EventSession>(socket, *this);
    session->ws.set_option(
        websocket::stream_base::decorator([origin = options.allow_origin](websocket::response_type& res) {
          res.set(http::field::access_control_allow_origin, origin);
        }));
    session->ws.accept(req);
    session->ws.text(true);
    session->start();
    session.reset();
    ctx.run();
  }

  void serve(Connection& c) {
    tcp::socket* socket = &c.socket;
    beast::flat_buffer buffer;
    beast::error_code ec;
    while (running) {
      http::request<http::string_body> req;
      http::read(*socket, buffer, req, ec);
      if (ec) break;
      if (websocket::is_upgrade(req)) {
        try {
          stream_events(c.ctx, *socket, std::move(req));
        } catch (const std::exception&) {
        }
        break;
      }
      HttpRequest r{std::string(req.method_string()), std::string(req.target()), req.body()};
      const HttpResponse out = route(hub, r);
      http::response<http::string_body> res{static_cast<http::status>(out.status), req.version()};
      res.set(http::field::server, "holmes");
      res.set(http::field::content_type, out.content_type);
      res.set(http::field::cache_control, "no-store");
      add_cors(res);
      res.keep_alive(req.keep_alive());
      res.body() = out.body;
      res.prepare_payload();
      http::write(*socket, res, ec);
      if (ec || !res.keep_alive()) break;
    }
    socket->shutdown(tcp::socket::shutdown_both, ec);
    c.finished = true;
  }

  void prune() {
    for (auto it = connections.begin(); it != connections.end();) {
      if ((*it)->finished) {
        (*it)->worker.join();
        it = connections.erase(it);
      } else {
        ++it;
      }
    }
  }

  void accept_loop() {
    while (running) {
      auto c = std::make_unique<Connection>();
      beast::error_code ec;
      acceptor.accept(c->socket, ec);
      if (ec || !running) break;
      std::lock_guard lock(mutex);
      prune();
      Connection& ref = *c;
      connections.push_back(std::move(c));
      ref.worker = std::thread([this, &ref] { serve(ref); });
    }
  }
};

Server::Server(Hub& hub, ServerOptions options) : impl_(std::make_unique<Impl>(hub, std::move(options))) {}

Server::~Server() { stop(); }

std::uint16_t Server::start() {
  const tcp::endpoint endpoint(asio::ip::make_address(impl_->options.address), impl_->options.port);
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen();
  port_ = impl_->acceptor.local_endpoint().port();
  impl_->running = true;
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
  return port_;
}

void Server::stop() {
  if (!impl_->running.exchange(false)) return;
  ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  beast::error_code ec;
  impl_->acceptor.close(ec);
  std::list<std::unique_ptr<Impl::Connection>> connections;
  {
    std::lock_guard lock(impl_->mutex);
    for (auto& c : impl_->connections) ::shutdown(c->socket.native_handle(), SHUT_RDWR);
    connections.swap(impl_->connections);
  }
  for (auto& c : connections) c->worker.join();
}

}  // namespace holmes::service
