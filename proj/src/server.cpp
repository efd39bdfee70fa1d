// Copyright 2026 The InnerSelf Authors.
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

#include "innerself/server.hpp"

#include <condition_variable>
#include <deque>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <httplib.h>

namespace innerself {
namespace {

namespace beast = boost::beast;
namespace net = boost::asio;
using tcp = net::ip::tcp;

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  const int status = http_status(e.code());
  if (status == 503) {
    const auto ms = e.details().is_object() ? e.details().value("retry_after_ms", 1000) : 1000;
    res.set_header("Retry-After", std::to_string((ms + 999) / 1000));
  }
  send_json(res, status, error_body(e));
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

// Maps library errors and malformed JSON onto the error envelope.
Handler guarded(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_error(res, Error(ErrorCode::kInvalidArgument, std::string("malformed JSON body: ") + e.what()));
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", {{"code", "INTERNAL"}, {"message", e.what()}, {"details", nlohmann::json::object()}}}});
    }
  };
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  return nlohmann::json::parse(req.body);
}

bool query_flag(const httplib::Request& req, const std::string& key) {
  if (!req.has_param(key)) return false;
  const auto v = req.get_param_value(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::kInvalidArgument, key + " must be true or false");
}

std::size_t parse_index(const std::string& s) {
  if (s.empty() || s.size() > 9 || !std::all_of(s.begin(), s.end(), ::isdigit)) {
    throw Error(ErrorCode::kInvalidArgument, "index must be a non-negative integer");
  }
  return std::stoul(s);
}

// Serial worker for turns submitted over the WebSocket.
class TaskQueue {
 public:
  TaskQueue() : worker_([this] { run(); }) {}
  ~TaskQueue() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }
  void push(std::function<void()> task) {
    {
      std::lock_guard lock(mu_);
      tasks_.push_back(std::move(task));
    }
    cv_.notify_one();
  }

 private:
  void run() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stopping_ || !tasks_.empty(); });
        if (stopping_ && tasks_.empty()) return;
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
      task();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool stopping_ = false;
  std::thread worker_;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, Engine& engine, TaskQueue& tasks)
      : ws_(std::move(socket)), engine_(engine), tasks_(tasks) {}

  ~WsSession() {
    if (subscription_) engine_.unsubscribe(subscription_);
  }

  void run() {
    beast::http::async_read(ws_.next_layer(), buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
  }

 private:
  using http_request = beast::http::request<beast::http::string_body>;

  void on_request(beast::error_code ec) {
    if (ec) return;
    static const std::regex kLive("/v1/sessions/([A-Za-z0-9_-]{1,64})/live");
    std::smatch m;
    const std::string target(request_.target());
    if (!beast::websocket::is_upgrade(request_) || !std::regex_match(target, m, kLive)) {
      reject(beast::http::status::not_found, "NOT_FOUND", "expected a WebSocket upgrade on /v1/sessions/{id}/live");
      return;
    }
    session_id_ = m[1];
    try {
      engine_.session_info(session_id_);
    } catch (const Error& e) {
      reject(beast::http::status::not_found, std::string(error_code_name(e.code())), e.what());
      return;
    }
    ws_.async_accept(request_, [self = shared_from_this()](beast::error_code ec2) { self->on_accept(ec2); });
  }

  void reject(beast::http::status status, const std::string& code, const std::string& message) {
    auto res = std::make_shared<beast::http::response<beast::http::string_body>>(status, request_.version());
    res->set(beast::http::field::content_type, "application/json");
    res->body() = nlohmann::json{{"error", {{"code", code}, {"message", message}, {"details", nlohmann::json::object()}}}}.dump();
    res->prepare_payload();
    beast::http::async_write(ws_.next_layer(), *res,
                             [self = shared_from_this(), res](beast::error_code, std::size_t) {
                               beast::error_code ignored;
                               self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_send, ignored);
                             });
  }

  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<WsSession> weak = shared_from_this();
    auto executor = ws_.get_executor();
    subscription_ = engine_.subscribe(session_id_, [weak, executor](const std::string&, const nlohmann::json& event) {
      net::post(executor, [weak, text = event.dump()] {
        if (auto self = weak.lock()) self->enqueue(text);
      });
    });
    enqueue(nlohmann::json{{"event", "ready"}, {"session_id", session_id_}}.dump());
    read();
  }

  void read() {
    ws_.async_read(incoming_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) return;  // closed; the destructor unsubscribes
    if (ws_.got_binary()) {
      std::string wav = beast::buffers_to_string(incoming_.data());
      std::weak_ptr<WsSession> weak = shared_from_this();
      auto executor = ws_.get_executor();
      Engine& engine = engine_;
      const std::string id = session_id_;
      tasks_.push([weak, executor, &engine, id, wav = std::move(wav)] {
        nlohmann::json done;
        try {
          const auto outcome = engine.process_turn(id, decode_wav_canonical(wav));
          done = {{"event", "turn_complete"}, {"outcome", outcome}};
        } catch (const Error& e) {
          done = {{"event", "error"}, {"error", error_body(e).at("error")}};
        } catch (const std::exception& e) {
          done = {{"event", "error"},
                  {"error", {{"code", "INTERNAL"}, {"message", e.what()}, {"details", nlohmann::json::object()}}}};
        }
        net::post(executor, [weak, text = done.dump()] {
          if (auto self = weak.lock()) self->enqueue(text);
        });
      });
    }
    incoming_.consume(incoming_.size());
    read();
  }

  void enqueue(std::string text) {
    outbox_.push_back(std::move(text));
    if (outbox_.size() == 1) write_next();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) self->write_next();
    });
  }

  beast::websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  beast::flat_buffer incoming_;
  http_request request_;
  Engine& engine_;
  TaskQueue& tasks_;
  std::string session_id_;
  std::uint64_t subscription_ = 0;
  std::deque<std::string> outbox_;
};

}  // namespace

nlohmann::json error_body(const Error& error) {
  return {{"error",
           {{"code", error_code_name(error.code())},
            {"message", error.what()},
            {"details", error.details().is_object() ? error.details() : nlohmann::json::object()}}}};
}

struct ApiServer::Impl {
  Impl(Engine& e, Config c) : engine(e), config(std::move(c)) {}

  Engine& engine;
  Config config;
  httplib::Server http;
  std::thread http_thread;
  int bound_http = 0;

  net::io_context ioc{1};
  std::unique_ptr<tcp::acceptor> acceptor;
  std::thread ws_thread;
  int bound_ws = 0;
  std::unique_ptr<TaskQueue> tasks;

  std::mutex mu;
  std::condition_variable stopped_cv;
  bool running = false;

  void routes();
  void accept();
};

void ApiServer::Impl::routes() {
  auto& e = engine;
  http.Get("/healthz", guarded([](const auto&, auto& res) { send_json(res, 200, {{"status", "ok"}}); }));

  http.Get("/v1/openapi", guarded([this](const auto&, auto& res) {
    const auto text = read_file_bytes(config.openapi_path);
    res.status = 200;
    res.set_content(text, "application/json");
  }));

  http.Post("/v1/sessions", guarded([&e](const auto& req, auto& res) {
    const auto body = parse_body(req);
    if (!body.contains("user_name") || !body.at("user_name").is_string()) {
      throw Error(ErrorCode::kInvalidArgument, "user_name is required");
    }
    send_json(res, 201, e.create_session(body.at("user_name").template get<std::string>()));
  }));

  http.Get("/v1/sessions", guarded([&e](const auto&, auto& res) {
    send_json(res, 200, {{"sessions", e.list_sessions()}});
  }));

  http.Get("/v1/sessions/:id", guarded([&e](const auto& req, auto& res) {
    send_json(res, 200, e.session_info(req.path_params.at("id")));
  }));

  http.Post("/v1/sessions/:id/enroll", guarded([&e](const auto& req, auto& res) {
    if (!req.is_multipart_form_data()) {
      throw Error(ErrorCode::kInvalidArgument, "enrollment expects multipart/form-data with audio and transcript parts");
    }
    const auto audio = req.get_file_values("audio");
    const auto transcripts = req.get_file_values("transcript");
    if (audio.empty() || audio.size() != transcripts.size()) {
      throw Error(ErrorCode::kInvalidArgument, "each audio part needs a matching transcript part",
                  {{"audio_parts", audio.size()}, {"transcript_parts", transcripts.size()}});
    }
    std::vector<EnrollmentSample> samples;
    for (std::size_t i = 0; i < audio.size(); ++i) {
      auto clip = decode_wav_canonical(audio[i].content);
      std::string transcript = transcripts[i].content.empty() ? clip.annotation() : transcripts[i].content;
      samples.push_back({std::move(clip), std::move(transcript), false});
    }
    send_json(res, 200, e.enroll_voice(req.path_params.at("id"), std::move(samples)));
  }));

  http.Post("/v1/sessions/:id/turn", guarded([&e](const auto& req, auto& res) {
    const auto mode = audio_mode_from_string(req.has_param("audio") ? req.get_param_value("audio") : "auto");
    const auto clip = decode_wav_canonical(req.body);
    send_json(res, 200, e.process_turn(req.path_params.at("id"), clip, mode));
  }));

  http.Get("/v1/sessions/:id/history", guarded([&e](const auto& req, auto& res) {
    const auto& id = req.path_params.at("id");
    send_json(res, 200, {{"session_id", id}, {"turns", e.history(id)}});
  }));

  http.Get("/v1/sessions/:id/trajectory", guarded([&e](const auto& req, auto& res) {
    const auto& id = req.path_params.at("id");
    send_json(res, 200, {{"session_id", id}, {"points", e.trajectory(id)}});
  }));

  http.Get("/v1/sessions/:id/export", guarded([&e](const auto& req, auto& res) {
    send_json(res, 200, e.export_session(req.path_params.at("id"), query_flag(req, "include_audio")));
  }));

  http.Get("/v1/sessions/:id/plans", guarded([&e](const auto& req, auto& res) {
    send_json(res, 200, {{"plans", e.plans(req.path_params.at("id"))}});
  }));

  http.Post("/v1/sessions/:id/plans", guarded([&e](const auto& req, auto& res) {
    const auto body = parse_body(req);
    const auto description = body.at("description").template get<std::string>();
    const auto steps = body.at("steps").template get<std::vector<std::string>>();
    send_json(res, 201, e.add_plan(req.path_params.at("id"), description, steps));
  }));

  http.Post("/v1/sessions/:id/plans/:plan/steps/:n", guarded([&e](const auto& req, auto& res) {
    const auto body = parse_body(req);
    const bool done = body.value("done", true);
    send_json(res, 200,
              e.update_plan_step(req.path_params.at("id"), req.path_params.at("plan"),
                                 parse_index(req.path_params.at("n")), done));
  }));

  http.Post("/v1/sessions/:id/plans/:plan/abandon", guarded([&e](const auto& req, auto& res) {
    send_json(res, 200, e.abandon_plan(req.path_params.at("id"), req.path_params.at("plan")));
  }));

  http.Get("/v1/audio/:sha", guarded([&e](const auto& req, auto& res) {
    const auto bytes = e.store().get_audio(req.path_params.at("sha"));
    if (!bytes) throw Error(ErrorCode::kNotFound, "no audio with that digest");
    res.status = 200;
    res.set_content(*bytes, "audio/wav");
  }));

  if (std::filesystem::is_directory(config.static_dir)) http.set_mount_point("/app", config.static_dir.string());

  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty() && res.status == 404) {
      send_json(res, 404, {{"error", {{"code", "NOT_FOUND"}, {"message", "no such route"}, {"details", nlohmann::json::object()}}}});
    }
  });
}

void ApiServer::Impl::accept() {
  acceptor->async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<WsSession>(std::move(socket), engine, *tasks)->run();
    accept();
  });
}

ApiServer::ApiServer(Engine& engine, Config config) : impl_(std::make_unique<Impl>(engine, std::move(config))) {
  impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::start() {
  auto& i = *impl_;
  i.bound_http = i.config.port == 0 ? i.http.bind_to_any_port(i.config.bind_address)
                                    : (i.http.bind_to_port(i.config.bind_address, i.config.port) ? i.config.port : -1);
  if (i.bound_http < 0) {
    throw Error(ErrorCode::kConfigError, "cannot bind HTTP port", {{"port", i.config.port}});
  }
  try {
    const auto addr = net::ip::make_address(i.config.bind_address);
    i.acceptor = std::make_unique<tcp::acceptor>(i.ioc, tcp::endpoint(addr, static_cast<unsigned short>(i.config.ws_port)));
  } catch (const std::exception& ex) {
    i.http.stop();
    throw Error(ErrorCode::kConfigError, std::string("cannot bind WebSocket port: ") + ex.what(),
                {{"port", i.config.ws_port}});
  }
  i.bound_ws = i.acceptor->local_endpoint().port();
  i.tasks = std::make_unique<TaskQueue>();
  i.accept();
  i.http_thread = std::thread([&i] { i.http.listen_after_bind(); });
  i.http.wait_until_ready();
  i.ws_thread = std::thread([&i] { i.ioc.run(); });
  std::lock_guard lock(i.mu);
  i.running = true;
}

void ApiServer::stop() {
  auto& i = *impl_;
  {
    std::lock_guard lock(i.mu);
    if (!i.running) return;
    i.running = false;
  }
  i.http.stop();
  i.ioc.stop();
  if (i.http_thread.joinable()) i.http_thread.join();
  if (i.ws_thread.joinable()) i.ws_thread.join();
  i.tasks.reset();
  i.stopped_cv.notify_all();
}

void ApiServer::wait() {
  auto& i = *impl_;
  std::unique_lock lock(i.mu);
  i.stopped_cv.wait(lock, [&i] { return !i.running; });
}

int ApiServer::http_port() const noexcept { return impl_->bound_http; }
int ApiServer::ws_port() const noexcept { return impl_->bound_ws; }

}  // namespace innerself
