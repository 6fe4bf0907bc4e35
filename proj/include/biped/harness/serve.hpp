// Copyright 2026 The biped_sim2real Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Websocket transport for the state stream. Each connection gets its own
// session; a steady timer paces control steps at the control period, and
// frames leave through a per-connection write queue. Everything runs on
// one io_context thread, so sessions need no further locking.

#pragma once

#include <chrono>
#include <deque>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "biped/harness/run_config.hpp"
#include "biped/harness/runs.hpp"
#include "biped/harness/stream.hpp"

namespace biped::harness {

struct ServeOptions {
  unsigned short port = 8765;  // 0 picks a free port
  std::optional<ModeCommand> initial;
  std::uint64_t seed = 1;
  bool paced = true;         // sleep to each control-step deadline
  std::size_t max_queued = 256;  // state frames beyond this are dropped for slow clients
};

namespace detail {

namespace beast = boost::beast;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

class StreamConnection : public std::enable_shared_from_this<StreamConnection> {
 public:
  StreamConnection(tcp::socket socket, const nn::ActorCritic<float>& net, const EnvConfig& env,
                   const HeightField& field, const ServeOptions& opt)
      : ws_(std::move(socket)),
        timer_(ws_.get_executor()),
        session_(net, env, field, opt.seed, opt.initial.value_or(ModeCommand{})),
        period_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(env.episode.ControlDt()))),
        opt_(opt) {}

  void Start() {
    ws_.set_option(beast::websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(
        [self = shared_from_this()](beast::error_code ec) { self->OnAccept(ec); });
  }

 private:
  void OnAccept(beast::error_code ec) {
    if (ec) return;
    Send(session_.Handshake().dump(), true);
    Read();
    next_ = std::chrono::steady_clock::now();
    Tick();
  }

  void Read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->OnRead(ec);
    });
  }

  void OnRead(beast::error_code ec) {
    if (ec) {
      Stop();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    Send(session_.HandleMessage(text).dump(), true);
    Read();
  }

  void Tick() {
    if (stopped_) return;
    for (const auto& frame : session_.Step()) {
      Send(frame.dump(), frame["type"] != "state");
    }
    if (opt_.paced) {
      next_ += period_;
      timer_.expires_at(next_);
    } else {
      timer_.expires_after(std::chrono::steady_clock::duration::zero());
    }
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->Tick();
    });
  }

  void Send(std::string text, bool must_deliver) {
    if (stopped_) return;
    if (!must_deliver && outbox_.size() >= opt_.max_queued) return;
    outbox_.push_back(std::move(text));
    if (!writing_) WriteNext();
  }

  void WriteNext() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->OnWrite(ec);
                    });
  }

  void OnWrite(beast::error_code ec) {
    outbox_.pop_front();
    if (ec) {
      Stop();
      return;
    }
    if (!outbox_.empty()) {
      WriteNext();
    } else {
      writing_ = false;
    }
  }

  void Stop() {
    stopped_ = true;
    timer_.cancel();
  }

  beast::websocket::stream<beast::tcp_stream> ws_;
  asio::steady_timer timer_;
  StreamSession session_;
  std::chrono::steady_clock::duration period_;
  std::chrono::steady_clock::time_point next_;
  ServeOptions opt_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool stopped_ = false;
};

}  // namespace detail

/// Accepts websocket clients until Stop(); Run() blocks on the calling
/// thread, Start() runs in a background thread.
class StreamServer {
 public:
  StreamServer(const nn::ActorCritic<float>& net, EnvConfig env, HeightField field,
               ServeOptions opt)
      : net_(net),
        env_(std::move(env)),
        field_(std::move(field)),
        opt_(opt),
        acceptor_(io_, {boost::asio::ip::tcp::v4(), opt.port}) {
    env_.Validate();
    if (opt_.initial) {
      const std::string why = CommandError(*opt_.initial);
      if (!why.empty()) throw ConfigError("initial command: " + why);
    }
    Accept();
  }

  ~StreamServer() { Stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void Run() { io_.run(); }

  void Start() {
    thread_ = std::thread([this] { io_.run(); });
  }

  void Stop() {
    io_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void Accept() {
    acceptor_.async_accept([this](boost::beast::error_code ec, boost::asio::ip::tcp::socket s) {
      if (!ec) {
        std::make_shared<detail::StreamConnection>(std::move(s), net_, env_, field_, opt_)->Start();
      }
      Accept();
    });
  }

  const nn::ActorCritic<float>& net_;
  EnvConfig env_;
  HeightField field_;
  ServeOptions opt_;
  boost::asio::io_context io_;
  boost::asio::ip::tcp::acceptor acceptor_;
  std::thread thread_;
};

/// Blocking entry point for the CLI: serves until SIGINT/SIGTERM.
inline int Serve(const LoadedPolicy& policy, const RunConfig& rc, const ServeOptions& opt,
                 std::ostream& log) {
  const HeightField field = ppo::TrainingTerrain(rc.env, DeriveSeed(opt.seed, 0xE7A3));
  StreamServer server(policy.net, rc.env, field, opt);
  log << "serving on ws://0.0.0.0:" << server.port() << " (" << ToString(rc.env.episode.plant)
      << " plant, " << ToString(rc.env.episode.solver) << " solver)\n";
  boost::asio::io_context signals_io;
  boost::asio::signal_set signals(signals_io, SIGINT, SIGTERM);
  signals.async_wait([&](const boost::system::error_code&, int) { server.Stop(); });
  std::thread waiter([&] { signals_io.run(); });
  server.Run();
  signals_io.stop();
  waiter.join();
  return 0;
}

}  // namespace biped::harness
