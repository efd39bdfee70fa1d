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

#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "innerself/error.hpp"
#include "innerself/service.hpp"

namespace innerself {

/// {"error": {"code", "message", "details"}} for an API error.
nlohmann::json error_body(const Error& error);

/// REST API on config.port and the live WebSocket channel on config.ws_port.
/// Port 0 picks a free port; the bound ports are reported after start().
///
///   POST /v1/sessions                          {user_name} -> session
///   GET  /v1/sessions                          -> {sessions: [...]}
///   GET  /v1/sessions/{id}                     -> session
///   POST /v1/sessions/{id}/enroll              multipart audio[] + transcript[]
///   POST /v1/sessions/{id}/turn?audio=         WAV body -> TurnOutcome
///   GET  /v1/sessions/{id}/history             -> {session_id, turns}
///   GET  /v1/sessions/{id}/trajectory          -> {session_id, points}
///   GET  /v1/sessions/{id}/export?include_audio=
///   GET  /v1/sessions/{id}/plans               -> {plans}
///   POST /v1/sessions/{id}/plans               {description, steps}
///   POST /v1/sessions/{id}/plans/{plan}/steps/{n}  {done}
///   POST /v1/sessions/{id}/plans/{plan}/abandon
///   GET  /v1/audio/{sha256}                    -> audio/wav
///   GET  /v1/openapi                           -> OpenAPI document
///   GET  /healthz
///   WS   /v1/sessions/{id}/live                (ws_port)
class ApiServer {
 public:
  ApiServer(Engine& engine, Config config);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds both listeners and serves on background threads.
  void start();
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  int http_port() const noexcept;
  int ws_port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace innerself
