#include "compbench/http.hpp"

#include <httplib.h>

#include <cstdio>
#include <semaphore>

#include "compbench/errors.hpp"

namespace compbench {

namespace {

struct ProviderEndpoint {
  std::string scheme_host_port;
  std::string prefix;
};

ProviderEndpoint parse_base_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::BadConfig, url, "provider_url needs a scheme");
  const auto slash = url.find('/', scheme + 3);
  ProviderEndpoint e;
  e.scheme_host_port = url.substr(0, slash);
  if (slash != std::string::npos) e.prefix = url.substr(slash);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

class InflightGuard {
 public:
  explicit InflightGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~InflightGuard() { sem_.release(); }
  InflightGuard(const InflightGuard&) = delete;
  InflightGuard& operator=(const InflightGuard&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

}  // namespace

ProviderTransport http_provider_transport(const std::string& base_url, int max_inflight, int timeout_ms) {
  const ProviderEndpoint endpoint = parse_base_url(base_url);
  auto slots = std::make_shared<std::counting_semaphore<>>(std::max(1, max_inflight));
  return [endpoint, slots, timeout_ms](const std::string& name, const Json& body) -> Json {
    InflightGuard guard(*slots);
    httplib::Client client(endpoint.scheme_host_port);
    client.set_connection_timeout(std::chrono::milliseconds(timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(timeout_ms));
    client.set_write_timeout(std::chrono::milliseconds(timeout_ms));
    const std::string path = endpoint.prefix + "/" + name;
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::ProviderUnavailable, endpoint.scheme_host_port + path, httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::ProviderUnavailable, endpoint.scheme_host_port + path,
                  "provider answered " + std::to_string(res->status));
    }
    try {
      return Json::parse(res->body);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::ProviderProtocolViolation, endpoint.scheme_host_port + path, e.what());
    }
  };
}

struct HttpServer::Impl {
  const Service& service;
  httplib::Server server;

  explicit Impl(const Service& s) : service(s) {}

  void dispatch(const httplib::Request& req, httplib::Response& res) {
    ApiRequest api;
    api.method = req.method;
    api.path = req.path;
    for (const auto& [k, v] : req.params) api.query[k] = v;
    api.body = req.body;
    const ApiResponse out = service.handle(api);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  }
};

HttpServer::HttpServer(const Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) { impl_->dispatch(req, res); };
  impl_->server.Get(R"(/v1/.*)", handler);
  impl_->server.Post(R"(/v1/.*)", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::BadConfig, host, "cannot bind");
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::BadConfig, host + ":" + std::to_string(port), "cannot bind");
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

int run_service(const SessionConfig& config) {
  ProviderTransport transport;
  if (config.provider_url) {
    transport = http_provider_transport(*config.provider_url, config.provider_inflight, config.provider_timeout_ms);
  }
  Service service(config, transport);
  HttpServer server(service);
  const int port = server.bind(config.host, config.port);
  std::fprintf(stderr, "serving %zu models on http://%s:%d/v1\n", service.store().size(), config.host.c_str(), port);
  server.listen();
  return 0;
}

}  // namespace compbench
