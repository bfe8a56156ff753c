#pragma once

#include <memory>
#include <string>

#include "compbench/provider.hpp"
#include "compbench/service.hpp"

namespace compbench {

// Provider transport over HTTP. `base_url` is "http://host:port[/prefix]";
// at most `max_inflight` requests run concurrently.
ProviderTransport http_provider_transport(const std::string& base_url, int max_inflight, int timeout_ms);

// Serves a Service's /v1 API. The service must outlive the server.
class HttpServer {
 public:
  explicit HttpServer(const Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and returns the bound port (port 0 picks a free one).
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Loads the session and serves until the process is stopped.
int run_service(const SessionConfig& config);

}  // namespace compbench
