#include "arseq/serve.hpp"

#include <chrono>

#include "httplib.h"
#include "json.hpp"

namespace arseq {

namespace {

using json = nlohmann::ordered_json;

HttpReply error_reply(int status, const std::string& message) { return {status, json{{"error", message}}.dump()}; }

}  // namespace

ChatService::ChatService(LoadedCheckpoint checkpoint, const VadLexicon& lexicon, DecodeOptions options,
                         std::string checkpoint_id)
    : checkpoint_(std::move(checkpoint)), checkpoint_id_(std::move(checkpoint_id)) {
  if (!checkpoint_.model) throw std::invalid_argument("ChatService: checkpoint has no model");
  responder_ = std::make_unique<Responder>(*checkpoint_.model, checkpoint_.vocab,
                                           vocabulary_norms(checkpoint_.vocab, lexicon), options);
}

HttpReply ChatService::respond(const std::string& request_body, bool include_attention) const {
  const auto t0 = std::chrono::steady_clock::now();
  json req;
  try {
    req = json::parse(request_body);
  } catch (const json::parse_error& e) {
    return error_reply(400, std::string("invalid JSON: ") + e.what());
  }
  if (!req.is_object()) return error_reply(400, "request must be a JSON object");
  if (!req.contains("message") || !req["message"].is_string()) return error_reply(400, "'message' must be a string");

  std::optional<int> beam;
  if (req.contains("beam_size")) {
    if (!req["beam_size"].is_number_integer() || req["beam_size"].get<long long>() < 1 ||
        req["beam_size"].get<long long>() > 1000)
      return error_reply(400, "'beam_size' must be an integer in [1, 1000]");
    beam = req["beam_size"].get<int>();
  }
  std::optional<bool> rerank;
  if (req.contains("rerank")) {
    if (!req["rerank"].is_boolean()) return error_reply(400, "'rerank' must be a boolean");
    rerank = req["rerank"].get<bool>();
  }
  json display = json::object();
  for (const char* key : {"gamma", "delta"}) {
    if (!req.contains(key)) continue;
    if (!req[key].is_number()) return error_reply(400, std::string("'") + key + "' must be a number");
    display[key] = req[key];
  }

  Response r;
  try {
    r = responder_->respond(req["message"].get<std::string>(), beam, rerank);
  } catch (const EmptyMessageError& e) {
    return error_reply(422, e.what());
  }

  json out;
  out["response"] = r.text();
  out["tokens"] = r.tokens;
  out["affect_norms"] = r.affect_norms;
  if (include_attention) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < r.attention.rows(); ++i) {
      std::vector<double> row;
      for (Eigen::Index j = 0; j < r.attention.cols(); ++j) row.push_back(r.attention(i, j));
      rows.push_back(row);
    }
    out["attention"] = rows;
  }
  out["affect_score"] = r.best.affect_score;
  out["input_tokens"] = r.input;
  out["truncated"] = r.truncated;
  if (!display.empty()) out["display"] = display;
  out["latency_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return {200, out.dump()};
}

HttpReply ChatService::health() const {
  return {200, json{{"status", "ok"}, {"checkpoint", checkpoint_id_}}.dump()};
}

struct HttpServer::Impl {
  const ChatService* service;
  ServeOptions options;
  httplib::Server server;
  bool bound = false;
};

HttpServer::HttpServer(const ChatService& service, ServeOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->service = &service;
  impl_->options = std::move(options);
  auto& srv = impl_->server;
  const int threads = std::max(1, impl_->options.threads);
  srv.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});

  const ChatService* svc = &service;
  srv.Post("/api/respond", [svc](const httplib::Request& req, httplib::Response& res) {
    const bool attention = !(req.has_param("attention") &&
                             (req.get_param_value("attention") == "0" || req.get_param_value("attention") == "false"));
    const HttpReply reply = svc->respond(req.body, attention);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  srv.Get("/api/health", [svc](const httplib::Request&, httplib::Response& res) {
    const HttpReply reply = svc->health();
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (!impl_->options.static_dir.empty() && !srv.set_mount_point("/", impl_->options.static_dir))
    throw std::runtime_error("cannot serve static files from " + impl_->options.static_dir);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  int port = impl_->options.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (!impl_->server.bind_to_port(impl_->options.host, port)) {
    port = -1;
  }
  if (port < 0) throw std::runtime_error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  impl_->bound = true;
  return port;
}

void HttpServer::listen() {
  if (!impl_->bound) bind();
  impl_->server.listen_after_bind();
}

void HttpServer::wait_until_ready() { impl_->server.wait_until_ready(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace arseq
