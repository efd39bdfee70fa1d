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

// innerself: serve the API, run offline simulations, enroll voices and
// export sessions from the command line.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "innerself/server.hpp"
#include "innerself/service.hpp"

namespace fs = std::filesystem;
using namespace innerself;

namespace {

fs::path default_root() {
  if (const char* home = std::getenv("INNERSELF_HOME")) return home;
  return INNERSELF_SOURCE_DIR;
}

Config load_config(const std::string& path) {
  return path.empty() ? Config::defaults(default_root()) : Config::load(path);
}

fs::path make_temp_dir() {
  std::string tmpl = (fs::temp_directory_path() / "innerself-sim-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw Error(ErrorCode::kStoreUnavailable, "cannot create a temporary data directory");
  return tmpl;
}

int report(const Error& e) {
  std::cerr << error_body(e).dump() << "\n";
  return 2;
}

int run_serve(const Config& config) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);  // inherited by the server threads

  FileStore store(config.data_dir);
  SystemClock clock;
  Engine engine(config, Resources::load(config), Adapters::from_config(config), store, clock);
  ApiServer server(engine, config);
  server.start();
  std::cerr << "listening on http://" << config.bind_address << ":" << server.http_port() << " (ws port "
            << server.ws_port() << ")\n";
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  return 0;
}

int run_simulate(Config config, const std::string& script_path, const std::string& data_dir, const std::string& out_path) {
  const auto script = load_script(script_path);
  fs::path dir = data_dir.empty() ? make_temp_dir() : fs::path(data_dir);
  config.data_dir = dir;
  FileStore store(dir);
  TurnIndexClock clock;
  Engine engine(config, Resources::load(config), Adapters::from_config(config), store, clock);

  SimulationResult result;
  if (out_path.empty()) {
    result = simulate(engine, script, std::cout);
  } else {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + out_path);
    result = simulate(engine, script, out);
  }
  if (data_dir.empty()) fs::remove_all(dir);
  std::cerr << result.turns << " turns, constraints " << (result.all_constraints_pass ? "pass" : "FAIL") << "\n";
  return result.all_constraints_pass ? 0 : 1;
}

int run_enroll(const Config& config, const std::string& session, const std::vector<std::string>& wavs,
               const std::vector<std::string>& transcripts) {
  if (!transcripts.empty() && transcripts.size() != wavs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "give one --transcript per WAV or none");
  }
  FileStore store(config.data_dir);
  SystemClock clock;
  Engine engine(config, Resources::load(config), Adapters::from_config(config), store, clock);
  std::vector<EnrollmentSample> samples;
  for (std::size_t i = 0; i < wavs.size(); ++i) {
    auto clip = read_wav(wavs[i]);
    std::string text = transcripts.empty() ? clip.annotation() : transcripts[i];
    samples.push_back({std::move(clip), std::move(text), false});
  }
  std::cout << nlohmann::json(engine.enroll_voice(session, std::move(samples))).dump(2) << "\n";
  return 0;
}

int run_export(const Config& config, const std::string& session, bool include_audio, const std::string& out_path) {
  FileStore store(config.data_dir);
  const auto doc = export_session(store, session, ExportOptions{include_audio}).dump(2);
  if (out_path.empty()) {
    std::cout << doc << "\n";
  } else {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + out_path);
    out << doc << "\n";
  }
  return 0;
}

int run_import(const Config& config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read " + path);
  FileStore store(config.data_dir);
  std::cout << import_session(store, nlohmann::json::parse(in)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"InnerSelf conversation service"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON config file (defaults are used when omitted)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP and WebSocket API");
  int port = -1;
  int ws_port = -1;
  serve->add_option("--port", port, "HTTP port (0 picks a free port)");
  serve->add_option("--ws-port", ws_port, "WebSocket port (0 picks a free port)");

  auto* sim = app.add_subcommand("simulate", "Run a scripted session and print one JSON line per turn");
  std::string script;
  std::string data_dir;
  std::string out;
  sim->add_option("script", script, "Script file")->required()->check(CLI::ExistingFile);
  sim->add_option("--data-dir", data_dir, "Keep session files here instead of a temporary directory");
  sim->add_option("-o,--out", out, "Write JSON lines to this file instead of stdout");

  auto* enroll = app.add_subcommand("enroll", "Enroll a voice profile for an existing session");
  std::string session;
  std::vector<std::string> wavs;
  std::vector<std::string> transcripts;
  enroll->add_option("--session", session, "Session id")->required();
  enroll->add_option("wavs", wavs, "Enrollment WAV files")->required()->check(CLI::ExistingFile);
  enroll->add_option("-t,--transcript", transcripts, "Transcript per WAV (default: the WAV comment)");

  auto* exp = app.add_subcommand("export", "Export a session as JSON");
  bool include_audio = false;
  exp->add_option("--session", session, "Session id")->required();
  exp->add_flag("--include-audio", include_audio, "Keep audio references");
  exp->add_option("-o,--out", out, "Output file (default stdout)");

  auto* imp = app.add_subcommand("import", "Import an exported session");
  std::string import_path;
  imp->add_option("file", import_path, "Export document")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    Config config = load_config(config_path);
    if (*serve) {
      if (port >= 0) config.port = port;
      if (ws_port >= 0) config.ws_port = ws_port;
      return run_serve(config);
    }
    if (*sim) return run_simulate(config, script, data_dir, out);
    if (*enroll) return run_enroll(config, session, wavs, transcripts);
    if (*exp) return run_export(config, session, include_audio, out);
    if (*imp) return run_import(config, import_path);
  } catch (const Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}
