// Copyright 2026 The CPT Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "cpt/backend.hpp"
#include "cpt/image_io.hpp"

namespace cpt {

// ---------------------------------------------------------------------------
// Wire format (POST /v1/score, GET /v1/health)

// Serialized body; keys in the documented order, meta keys sorted, compact.
inline std::string serialize_request(const ScoreRequest& req) {
  nlohmann::ordered_json j;
  j["image_png_b64"] = httplib::detail::base64_encode(encode_png(req.image));
  j["prompt"] = req.prompt;
  j["mask_count"] = req.mask_count;
  auto cands = nlohmann::ordered_json::array();
  for (const auto& slot : req.candidates) {
    auto s = nlohmann::ordered_json::array();
    for (const auto& c : slot) {
      nlohmann::ordered_json item;
      item["label"] = c.label;
      item["tokens"] = c.tokens;
      s.push_back(std::move(item));
    }
    cands.push_back(std::move(s));
  }
  j["candidates"] = std::move(cands);
  auto meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : req.meta) meta[k] = v;
  j["meta"] = std::move(meta);
  return j.dump();
}

// Unknown fields are ignored; anything structurally wrong is a Protocol error.
inline ScoreResponse parse_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw protocol_error(std::string("response is not JSON: ") + e.what());
  }
  try {
    ScoreResponse resp;
    for (const auto& slot : j.at("per_slot_logprobs")) {
      LogProbMap m;
      for (const auto& [label, v] : slot.items()) {
        if (!v.is_number()) throw protocol_error("log-probability for '" + label + "' is not a number");
        m[label] = v.get<double>();
      }
      resp.per_slot_logprobs.push_back(std::move(m));
    }
    resp.backend_id = j.at("backend_id").get<std::string>();
    resp.latency_ms = j.at("latency_ms").get<std::int64_t>();
    return resp;
  } catch (const nlohmann::json::exception& e) {
    throw protocol_error(std::string("malformed response: ") + e.what());
  }
}

inline std::string serialize_response(const ScoreResponse& resp) {
  nlohmann::ordered_json j;
  auto slots = nlohmann::ordered_json::array();
  for (const auto& s : resp.per_slot_logprobs) {
    auto m = nlohmann::ordered_json::object();
    for (const auto& [k, v] : s) m[k] = v;
    slots.push_back(std::move(m));
  }
  j["per_slot_logprobs"] = std::move(slots);
  j["backend_id"] = resp.backend_id;
  j["latency_ms"] = resp.latency_ms;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Client

struct RemoteOptions {
  int max_attempts = 4;
  std::chrono::milliseconds base_backoff{100};
  std::chrono::milliseconds timeout{30000};
  std::size_t pool_size = 4;
};

struct HealthInfo {
  std::string backend_id;
  std::string mode;
};

// Thread-safe client with a bounded pool of keep-alive connections.
// Connection failures and 5xx responses are retried with exponential backoff
// (base * 2^attempt); 4xx and invalid responses are not.
class RemoteBackend : public ScoringBackend {
 public:
  explicit RemoteBackend(std::string endpoint, RemoteOptions options = {})
      : endpoint_(std::move(endpoint)), options_(options) {
    if (options_.pool_size < 1) options_.pool_size = 1;
    if (options_.max_attempts < 1) options_.max_attempts = 1;
  }

  ScoreResponse score(const ScoreRequest& req) override {
    validate_request(req);
    const auto body = serialize_request(req);
    auto resp = post_with_retry("/v1/score", body);
    validate_response(req, resp);
    return resp;
  }

  std::string backend_id() const override { return "remote:" + endpoint_; }

  HealthInfo health() {
    Lease lease(*this);
    auto res = lease.client->Get("/v1/health");
    if (!res) throw BackendError(ErrorKind::kTransport, "health check failed: " + httplib::to_string(res.error()), true);
    if (res->status != 200) {
      throw BackendError(ErrorKind::kProtocol, "health returned HTTP " + std::to_string(res->status), false);
    }
    try {
      auto j = nlohmann::json::parse(res->body);
      return {j.at("backend_id").get<std::string>(), j.at("mode").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
      throw protocol_error(std::string("malformed health response: ") + e.what());
    }
  }

  std::size_t attempts_made() const noexcept { return attempts_.load(); }

 private:
  class Lease {
   public:
    explicit Lease(RemoteBackend& owner) : owner_(owner) { client = owner_.acquire(); }
    ~Lease() { owner_.release(std::move(client)); }
    std::unique_ptr<httplib::Client> client;

   private:
    RemoteBackend& owner_;
  };

  std::unique_ptr<httplib::Client> acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !idle_.empty() || created_ < options_.pool_size; });
    if (!idle_.empty()) {
      auto c = std::move(idle_.back());
      idle_.pop_back();
      return c;
    }
    ++created_;
    lock.unlock();
    auto c = std::make_unique<httplib::Client>(endpoint_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout).count();
    c->set_connection_timeout(secs, 0);
    c->set_read_timeout(secs, 0);
    c->set_write_timeout(secs, 0);
    c->set_keep_alive(true);
    return c;
  }

  void release(std::unique_ptr<httplib::Client> c) {
    {
      std::lock_guard lock(mu_);
      idle_.push_back(std::move(c));
    }
    cv_.notify_one();
  }

  static std::string error_message(const std::string& body) {
    try {
      auto j = nlohmann::json::parse(body);
      if (j.contains("error") && j["error"].is_string()) return j["error"].get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
    return body;
  }

  ScoreResponse post_with_retry(const std::string& path, const std::string& body) {
    for (int attempt = 0;; ++attempt) {
      attempts_.fetch_add(1);
      const bool last = attempt + 1 >= options_.max_attempts;
      std::optional<BackendError> failure;
      {
        Lease lease(*this);
        const auto start = std::chrono::steady_clock::now();
        auto res = lease.client->Post(path, body, "application/json");
        if (!res) {
          failure.emplace(ErrorKind::kTransport, endpoint_ + path + ": " + httplib::to_string(res.error()), true);
        } else if (res->status >= 500) {
          const auto kind = res->status == 500 ? ErrorKind::kModelFailure : ErrorKind::kTransport;
          failure.emplace(kind, "HTTP " + std::to_string(res->status) + ": " + error_message(res->body), true);
        } else if (res->status >= 400) {
          throw BackendError(ErrorKind::kProtocol, "HTTP " + std::to_string(res->status) + ": " + error_message(res->body), false);
        } else if (res->status != 200) {
          throw BackendError(ErrorKind::kProtocol, "unexpected HTTP " + std::to_string(res->status), false);
        } else {
          auto parsed = parse_response(res->body);
          if (parsed.latency_ms == 0) {
            parsed.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                    std::chrono::steady_clock::now() - start)
                                    .count();
          }
          return parsed;
        }
      }
      if (last) throw *failure;
      std::this_thread::sleep_for(options_.base_backoff * (1LL << std::min(attempt, 16)));
    }
  }

  std::string endpoint_;
  RemoteOptions options_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<httplib::Client>> idle_;
  std::size_t created_ = 0;
  std::atomic<std::size_t> attempts_{0};
};

}  // namespace cpt
