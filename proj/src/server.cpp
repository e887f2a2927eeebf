#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <iostream>

#include "motionspec/service.hpp"

namespace motionspec {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr std::size_t kMaxBody = 256u << 20;
// Frames queued per client before new ones are dropped.
constexpr std::size_t kMaxPendingFrames = 4;

class StreamConnection : public std::enable_shared_from_this<StreamConnection> {
 public:
  StreamConnection(tcp::socket socket, std::shared_ptr<Session> session)
      : ws_(std::move(socket)), session_(std::move(session)) {}

  void start(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&StreamConnection::on_accept, shared_from_this()));
  }

 private:
  struct Message {
    bool binary = false;
    std::shared_ptr<const TickOutput> tick;
    std::string text;
  };

  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<StreamConnection> weak = shared_from_this();
    token_ = session_->subscribe([weak](std::shared_ptr<const TickOutput> out) {
      if (auto self = weak.lock()) {
        asio::post(self->ws_.get_executor(), [self, out] { self->on_tick(out); });
      }
    });
    read();
  }

  void read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&StreamConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return finish();
    if (ws_.got_text()) {
      const auto text = beast::buffers_to_string(buffer_.data());
      std::size_t pos = 0;
      while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        const auto line = std::string_view(text).substr(pos, end - pos);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) session_->post_event(line);
        pos = end + 1;
      }
    }
    buffer_.consume(buffer_.size());
    read();
  }

  void on_tick(std::shared_ptr<const TickOutput> out) {
    if (closed_) return;
    if (!out) {
      closed_ = true;
      ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
      return;
    }
    if (out->png.empty()) return;
    // Each tick is a frame plus its telemetry; a slow client loses whole ticks.
    if (queue_.size() >= 2 * kMaxPendingFrames) return;
    queue_.push_back({true, out, {}});
    queue_.push_back({false, nullptr, out->telemetry()});
    if (!writing_) write();
  }

  void write() {
    writing_ = true;
    const auto& m = queue_.front();
    ws_.binary(m.binary);
    if (m.binary) {
      ws_.async_write(asio::buffer(m.tick->png),
                      beast::bind_front_handler(&StreamConnection::on_write, shared_from_this()));
    } else {
      ws_.async_write(asio::buffer(m.text), beast::bind_front_handler(&StreamConnection::on_write, shared_from_this()));
    }
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) return finish();
    queue_.pop_front();
    if (!queue_.empty() && !closed_) write();
  }

  void finish() {
    if (token_ != 0) session_->unsubscribe(token_);
    token_ = 0;
    closed_ = true;
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<Session> session_;
  beast::flat_buffer buffer_;
  std::deque<Message> queue_;
  std::uint64_t token_ = 0;
  bool writing_ = false;
  bool closed_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, SessionManager& sessions) : stream_(std::move(socket)), sessions_(sessions) {}

  void start() { read(); }

 private:
  void read() {
    parser_.emplace();
    parser_->body_limit(kMaxBody);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, *parser_,
                     beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    auto req = parser_->release();
    const std::string_view target(req.target().data(), req.target().size());
    if (websocket::is_upgrade(req)) {
      if (const auto id = stream_session_id(target)) {
        try {
          auto session = sessions_.find(*id);
          stream_.expires_never();
          std::make_shared<StreamConnection>(stream_.release_socket(), std::move(session))->start(std::move(req));
          return;
        } catch (const Error&) {
        }
      }
      return respond(req, error_result(404, "NOT_FOUND", "no stream at " + std::string(target)));
    }
    const auto content_type = req[http::field::content_type];
    respond(req, handle_request(sessions_, std::string_view(req.method_string().data(), req.method_string().size()),
                                target,
                                std::string_view(content_type.data(), content_type.size()), req.body()));
  }

  void respond(const http::request<http::string_body>& req, HttpResult result) {
    auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(result.status),
                                                                    req.version());
    res->set(http::field::server, "motionspec");
    res->set(http::field::content_type, result.content_type);
    res->set(http::field::access_control_allow_origin, "*");
    res->keep_alive(req.keep_alive());
    res->body() = std::move(result.body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  SessionManager& sessions_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
};

}  // namespace

struct Server::Impl {
  Impl(SessionManager& s, const std::string& bind, unsigned short port, int threads)
      : sessions(s), acceptor(io), thread_count(std::max(threads, 1)) {
    const tcp::endpoint endpoint(asio::ip::make_address(bind), port);
    acceptor.open(endpoint.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen(asio::socket_base::max_listen_connections);
  }

  void accept() {
    acceptor.async_accept(asio::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == asio::error::operation_aborted) return;
      } else {
        std::make_shared<HttpConnection>(std::move(socket), sessions)->start();
      }
      accept();
    });
  }

  SessionManager& sessions;
  asio::io_context io;
  tcp::acceptor acceptor;
  int thread_count;
  std::vector<std::thread> threads;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
};

Server::Server(SessionManager& sessions, const std::string& bind, unsigned short port, int threads) try
    : impl_(std::make_unique<Impl>(sessions, bind, port, threads)) {
} catch (const boost::system::system_error& e) {
  throw Error(ErrorCode::IoError, "cannot listen on " + bind + ":" + std::to_string(port) + ": " + e.what());
}

Server::~Server() { stop(); }

unsigned short Server::port() const noexcept { return impl_->acceptor.local_endpoint().port(); }

void Server::start() {
  if (!impl_->threads.empty()) return;
  impl_->work.emplace(impl_->io.get_executor());
  impl_->accept();
  for (int i = 0; i < impl_->thread_count; ++i) impl_->threads.emplace_back([this] { impl_->io.run(); });
}

void Server::wait() {
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
}

void Server::stop() {
  if (!impl_) return;
  impl_->work.reset();
  impl_->io.stop();
  wait();
  impl_->threads.clear();
}

}  // namespace motionspec
