#pragma once

#include <functional>
#include <memory>
#include <string>

#include "arseq/checkpoint.hpp"
#include "arseq/decode.hpp"
#include "arseq/lexicon.hpp"

namespace arseq {

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

/// Request handling independent of the transport. Holds one frozen model;
/// handlers are const and safe to call concurrently.
class ChatService {
 public:
  ChatService(LoadedCheckpoint checkpoint, const VadLexicon& lexicon, DecodeOptions options,
              std::string checkpoint_id);

  /// POST /api/respond. `include_attention` false drops the matrix.
  HttpReply respond(const std::string& request_body, bool include_attention = true) const;
  /// GET /api/health.
  HttpReply health() const;

  const Responder& responder() const { return *responder_; }
  const std::string& checkpoint_id() const { return checkpoint_id_; }

 private:
  LoadedCheckpoint checkpoint_;
  std::unique_ptr<Responder> responder_;
  std::string checkpoint_id_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string static_dir;
  int threads = 4;
};

/// HTTP front end over a ChatService.
class HttpServer {
 public:
  HttpServer(const ChatService& service, ServeOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket and returns the port.
  int bind();
  /// Serves until stop(); call bind() first.
  void listen();
  /// Blocks until a concurrent listen() is accepting connections.
  void wait_until_ready();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace arseq
