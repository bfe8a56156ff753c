#pragma once

#include <cstddef>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "compbench/behavior.hpp"
#include "compbench/errors.hpp"
#include "compbench/json.hpp"
#include "compbench/layers.hpp"
#include "compbench/provider.hpp"
#include "compbench/store.hpp"

namespace compbench {

struct SessionConfig {
  std::filesystem::path experiments;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> outputs_dir;
  std::optional<std::filesystem::path> layers_dir;
  std::optional<std::string> provider_url;  // wins over the static directories
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t cache_size = 64;
  int provider_inflight = 4;
  int provider_timeout_ms = 10000;
};

// Relative paths are resolved against `base_dir`.
SessionConfig config_from_json(const Json& j, const std::filesystem::path& base_dir);
SessionConfig load_config(const std::filesystem::path& file);

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  Json body;
};

int http_status(ErrorCode code);
// {code, message, detail}
Json error_body(const Error& e);

// Thread-safe least-recently-used map.
template <typename Value>
class LruCache {
 public:
  explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

  std::shared_ptr<const Value> get(const std::string& key) {
    std::lock_guard lock(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) return nullptr;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }

  void put(const std::string& key, std::shared_ptr<const Value> value) {
    std::lock_guard lock(mutex_);
    if (capacity_ == 0) return;
    if (auto it = index_.find(key); it != index_.end()) {
      it->second->second = std::move(value);
      order_.splice(order_.begin(), order_, it->second);
      return;
    }
    order_.emplace_front(key, std::move(value));
    index_[key] = order_.begin();
    while (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return order_.size();
  }

 private:
  using Entry = std::pair<std::string, std::shared_ptr<const Value>>;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<Entry> order_;
  std::unordered_map<std::string, typename std::list<Entry>::iterator> index_;
};

// Request handling for the /v1 API. The store and dataset are immutable after
// construction; only the caches change, under their own locks.
class Service {
 public:
  // `transport` is required when the config names a provider.
  explicit Service(SessionConfig config, ProviderTransport transport = {});

  ApiResponse handle(const ApiRequest& request) const;

  const SessionConfig& config() const { return config_; }
  const ModelStore& store() const { return store_; }
  const Dataset& dataset() const { return dataset_; }

  std::shared_ptr<const ModelOutputs> fetch_outputs(const std::string& model,
                                                    const std::vector<std::string>& instance_ids) const;
  std::shared_ptr<const ModelLayers> fetch_layers(const std::string& model) const;

 private:
  Json route(const ApiRequest& request) const;
  Json get_models() const;
  Json get_model(const std::string& id) const;
  Json get_layout(const std::map<std::string, std::string>& query) const;
  Json get_histogram(const std::string& metric, const std::map<std::string, std::string>& query) const;
  Json post_filters(const Json& body) const;
  Json get_pareto(const std::map<std::string, std::string>& query) const;
  Json post_compare(const Json& body) const;
  Json post_behaviors(const Json& body) const;
  Json post_layers(const Json& body) const;

  SessionConfig config_;
  ProviderTransport transport_;
  ModelStore store_;
  Dataset dataset_;
  mutable LruCache<ModelOutputs> outputs_cache_;
  mutable LruCache<ModelLayers> layers_cache_;
};

}  // namespace compbench
