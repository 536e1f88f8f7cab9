// Copyright 2026 The GraphMERT KG Authors.
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

// Chat-completion and text-embedding clients. Pipeline code only sees the
// abstract interfaces; backends are an HTTP client (services_http.hpp) and
// deterministic offline mocks.

#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "graphmert/common.hpp"

namespace graphmert {

struct ChatRequest {
  std::string prompt;
  double temperature = 0.6;
  double top_p = 0.95;
  int top_k = 20;
  int max_tokens = 8192;
  // Structured description of the request (task name and slot values). Not
  // sent over the wire; lets offline backends answer without parsing prose.
  json metadata = json::object();
};

struct ChatResponse {
  std::string text;
  std::string finish_reason = "stop";
  int attempts = 1;
};

enum class EmbeddingRole { kConceptLinking, kRelevance };

inline const char* role_name(EmbeddingRole r) {
  return r == EmbeddingRole::kConceptLinking ? "concept_linking" : "relevance";
}

struct EmbeddingRequest {
  std::string text;
  EmbeddingRole role = EmbeddingRole::kRelevance;
};

struct EmbeddingResponse {
  std::vector<double> vector;  // unit norm
  int attempts = 1;
};

class ClientError : public Error {
 public:
  ClientError(const std::string& what, int attempts)
      : Error(ErrorKind::kClientFailure, what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

// Raised by transports for failures worth retrying (timeouts, 429, 5xx).
class TransientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RequestEvent {
  std::string kind;  // "chat" | "embed"
  std::string backend;
  int attempt = 1;
  bool ok = true;
  double latency_ms = 0.0;
  std::string error;
};

using MetricsHook = std::function<void(const RequestEvent&)>;

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const ChatRequest& req) = 0;
};

class EmbeddingClient {
 public:
  virtual ~EmbeddingClient() = default;
  virtual EmbeddingResponse embed(const EmbeddingRequest& req) = 0;
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw invalid_argument("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

inline void normalize_unit(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n == 0.0) throw invalid_argument("cannot normalize a zero vector");
  for (double& x : v) x /= n;
}

// ---------------------------------------------------------------------------
// Concurrency cap and retries.

class Semaphore {
 public:
  explicit Semaphore(int permits) : permits_(std::max(1, permits)) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return permits_ > 0; });
    --permits_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++permits_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int permits_;
};

struct RetryPolicy {
  int max_attempts = 4;
  double initial_backoff_ms = 250.0;
  double multiplier = 2.0;
  double max_backoff_ms = 8000.0;

  double backoff_ms(int failed_attempt) const {
    return std::min(max_backoff_ms, initial_backoff_ms * std::pow(multiplier, failed_attempt - 1));
  }
};

using Sleeper = std::function<void(double ms)>;

inline Sleeper real_sleeper() {
  return [](double ms) {
    std::this_thread::sleep_for(std::chrono::microseconds(static_cast<int64_t>(ms * 1000)));
  };
}

// Runs fn under the semaphore, retrying TransientError with exponential
// backoff. Every attempt is reported to the hook.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Semaphore* sem, const MetricsHook& hook,
                  const Sleeper& sleep, const std::string& kind, const std::string& backend,
                  Fn&& fn) -> std::pair<decltype(fn()), int> {
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, policy.max_attempts); ++attempt) {
    const auto t0 = std::chrono::steady_clock::now();
    if (sem) sem->acquire();
    try {
      auto result = fn();
      if (sem) sem->release();
      if (hook) {
        hook({kind, backend, attempt, true,
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count(),
              ""});
      }
      return {std::move(result), attempt};
    } catch (const TransientError& e) {
      if (sem) sem->release();
      last_error = e.what();
      if (hook) {
        hook({kind, backend, attempt, false,
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count(),
              last_error});
      }
      if (attempt < policy.max_attempts && sleep) sleep(policy.backoff_ms(attempt));
    } catch (...) {
      if (sem) sem->release();
      throw;
    }
  }
  throw ClientError(kind + " via " + backend + " failed after " +
                        std::to_string(std::max(1, policy.max_attempts)) + " attempts: " + last_error,
                    std::max(1, policy.max_attempts));
}

// Transport-level chat call: may throw TransientError.
using ChatTransport = std::function<ChatResponse(const ChatRequest&)>;
using EmbedTransport = std::function<std::vector<double>(const EmbeddingRequest&)>;

class RetryingChatClient : public ChatClient {
 public:
  RetryingChatClient(ChatTransport transport, std::string backend, RetryPolicy policy = {},
                     int max_in_flight = 4, MetricsHook hook = {}, Sleeper sleep = real_sleeper())
      : transport_(std::move(transport)),
        backend_(std::move(backend)),
        policy_(policy),
        sem_(max_in_flight),
        hook_(std::move(hook)),
        sleep_(std::move(sleep)) {}

  ChatResponse complete(const ChatRequest& req) override {
    auto [resp, attempts] =
        with_retries(policy_, &sem_, hook_, sleep_, "chat", backend_, [&] { return transport_(req); });
    resp.attempts = attempts;
    return resp;
  }

 private:
  ChatTransport transport_;
  std::string backend_;
  RetryPolicy policy_;
  Semaphore sem_;
  MetricsHook hook_;
  Sleeper sleep_;
};

class RetryingEmbeddingClient : public EmbeddingClient {
 public:
  RetryingEmbeddingClient(EmbedTransport transport, std::string backend, RetryPolicy policy = {},
                          int max_in_flight = 4, MetricsHook hook = {},
                          Sleeper sleep = real_sleeper())
      : transport_(std::move(transport)),
        backend_(std::move(backend)),
        policy_(policy),
        sem_(max_in_flight),
        hook_(std::move(hook)),
        sleep_(std::move(sleep)) {}

  EmbeddingResponse embed(const EmbeddingRequest& req) override {
    auto [vec, attempts] =
        with_retries(policy_, &sem_, hook_, sleep_, "embed", backend_, [&] { return transport_(req); });
    normalize_unit(vec);
    return {std::move(vec), attempts};
  }

 private:
  EmbedTransport transport_;
  std::string backend_;
  RetryPolicy policy_;
  Semaphore sem_;
  MetricsHook hook_;
  Sleeper sleep_;
};

// ---------------------------------------------------------------------------
// Offline mocks.

inline std::string normalize_for_embedding(std::string_view text) {
  std::string out;
  for (const auto& w : split_whitespace(to_lower_ascii(text))) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// Seeded random unit vector per normalized text: equal texts embed equally,
// different texts are near-orthogonal.
class HashEmbedder : public EmbeddingClient {
 public:
  explicit HashEmbedder(int dim = 64, uint64_t seed = 0) : dim_(dim), seed_(seed) {}

  EmbeddingResponse embed(const EmbeddingRequest& req) override {
    Rng rng(splitmix64(fnv1a(normalize_for_embedding(req.text)) ^ seed_));
    std::vector<double> v(static_cast<size_t>(dim_));
    for (double& x : v) x = rng.normal();
    normalize_unit(v);
    return {std::move(v), 1};
  }

 private:
  int dim_;
  uint64_t seed_;
};

// Overlap-aware mock: a hashed bag of words blended with a component shared
// by every text, so cosine(a, b) = shared + (1 - shared) * cos_bow(a, b).
// Scores therefore rank by word overlap and sit in a realistic range.
class BowEmbedder : public EmbeddingClient {
 public:
  explicit BowEmbedder(int dim = 256, double shared = 0.6, uint64_t seed = 0)
      : dim_(dim), shared_(shared), seed_(seed) {
    if (dim < 2 || shared < 0.0 || shared >= 1.0) throw invalid_argument("bow embedder config");
  }

  // Word-count vector (unnormalized) over dim - 1 hashed buckets.
  std::vector<double> bag(std::string_view text) const {
    std::vector<double> v(static_cast<size_t>(dim_ - 1), 0.0);
    for (const auto& w : split_whitespace(to_lower_ascii(text))) {
      const uint64_t h = splitmix64(fnv1a(w) ^ seed_);
      v[h % static_cast<uint64_t>(dim_ - 1)] += 1.0;
    }
    return v;
  }

  EmbeddingResponse embed(const EmbeddingRequest& req) override {
    std::vector<double> b = bag(req.text);
    double n = 0.0;
    for (double x : b) n += x * x;
    std::vector<double> v(static_cast<size_t>(dim_), 0.0);
    v[0] = std::sqrt(shared_);
    if (n > 0.0) {
      const double s = std::sqrt((1.0 - shared_) / n);
      for (size_t i = 0; i < b.size(); ++i) v[i + 1] = b[i] * s;
    } else {
      v[0] = 1.0;
    }
    return {std::move(v), 1};
  }

  double shared() const { return shared_; }

 private:
  int dim_;
  double shared_;
  uint64_t seed_;
};

// Table-driven chat mock. Exact-prompt fixtures win; otherwise the responder
// callback decides. Unanswered requests fail like an unreachable backend.
class MockChatClient : public ChatClient {
 public:
  using Responder = std::function<std::optional<std::string>(const ChatRequest&)>;

  explicit MockChatClient(Responder responder = {}) : responder_(std::move(responder)) {}

  void add_fixture(const std::string& prompt, const std::string& response) {
    std::lock_guard lock(mu_);
    fixtures_[prompt] = response;
  }

  ChatResponse complete(const ChatRequest& req) override {
    {
      std::lock_guard lock(mu_);
      ++calls_;
      auto it = fixtures_.find(req.prompt);
      if (it != fixtures_.end()) return {it->second, "stop", 1};
    }
    if (responder_) {
      if (auto r = responder_(req)) return {*r, "stop", 1};
    }
    throw ClientError("mock chat: no fixture for request", 1);
  }

  int calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  Responder responder_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> fixtures_;
  int calls_ = 0;
};

// Memoizes embeddings per (role, text); safe to share across workers.
class MemoizingEmbeddingClient : public EmbeddingClient {
 public:
  explicit MemoizingEmbeddingClient(EmbeddingClient& inner) : inner_(inner) {}

  EmbeddingResponse embed(const EmbeddingRequest& req) override {
    const std::string key = std::string(role_name(req.role)) + '\n' + req.text;
    {
      std::lock_guard lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return {it->second, 0};
    }
    EmbeddingResponse r = inner_.embed(req);
    std::lock_guard lock(mu_);
    cache_.emplace(key, r.vector);
    return r;
  }

 private:
  EmbeddingClient& inner_;
  std::mutex mu_;
  std::map<std::string, std::vector<double>> cache_;
};

// ---------------------------------------------------------------------------
// Configuration.

struct ClientConfig {
  std::string backend = "mock";  // "mock" | "http"
  std::string endpoint = "http://127.0.0.1:8000/v1";
  std::string chat_model;
  std::string embedding_model;
  std::string concept_embedding_model;  // defaults to embedding_model
  std::string mock_embedder = "bow";    // "bow" | "hash"
  int embedding_dim = 256;
  double temperature = 0.6;
  double top_p = 0.95;
  int top_k = 20;
  int max_tokens = 8192;
  int max_in_flight = 4;
  double timeout_s = 120.0;
  RetryPolicy retry;
  std::string cache_dir;  // judge cache; empty disables
};

inline ClientConfig client_config_from_json(const json& j, ClientConfig c = {}) {
  c.backend = j.value("backend", c.backend);
  c.endpoint = j.value("endpoint", c.endpoint);
  c.chat_model = j.value("chat_model", c.chat_model);
  c.embedding_model = j.value("embedding_model", c.embedding_model);
  c.concept_embedding_model = j.value("concept_embedding_model", c.concept_embedding_model);
  c.mock_embedder = j.value("mock_embedder", c.mock_embedder);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.temperature = j.value("temperature", c.temperature);
  c.top_p = j.value("top_p", c.top_p);
  c.top_k = j.value("top_k", c.top_k);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.retry.max_attempts = j.value("max_attempts", c.retry.max_attempts);
  c.retry.initial_backoff_ms = j.value("initial_backoff_ms", c.retry.initial_backoff_ms);
  c.cache_dir = j.value("cache_dir", c.cache_dir);
  if (c.backend != "mock" && c.backend != "http") {
    throw invalid_argument("client backend must be 'mock' or 'http'");
  }
  if (c.mock_embedder != "bow" && c.mock_embedder != "hash") {
    throw invalid_argument("mock_embedder must be 'bow' or 'hash'");
  }
  return c;
}

inline json to_json(const ClientConfig& c) {
  // Never contains credentials: the API key only lives in the environment.
  return json{{"backend", c.backend},
              {"endpoint", c.endpoint},
              {"chat_model", c.chat_model},
              {"embedding_model", c.embedding_model},
              {"concept_embedding_model", c.concept_embedding_model},
              {"mock_embedder", c.mock_embedder},
              {"embedding_dim", c.embedding_dim},
              {"temperature", c.temperature},
              {"top_p", c.top_p},
              {"top_k", c.top_k},
              {"max_tokens", c.max_tokens},
              {"max_in_flight", c.max_in_flight},
              {"timeout_s", c.timeout_s},
              {"max_attempts", c.retry.max_attempts},
              {"initial_backoff_ms", c.retry.initial_backoff_ms}};
}

inline ChatRequest make_chat_request(const ClientConfig& c, std::string prompt, json metadata) {
  ChatRequest r;
  r.prompt = std::move(prompt);
  r.temperature = c.temperature;
  r.top_p = c.top_p;
  r.top_k = c.top_k;
  r.max_tokens = c.max_tokens;
  r.metadata = std::move(metadata);
  return r;
}

inline std::unique_ptr<EmbeddingClient> make_mock_embedder(const ClientConfig& c, uint64_t seed) {
  if (c.mock_embedder == "hash") return std::make_unique<HashEmbedder>(c.embedding_dim, seed);
  return std::make_unique<BowEmbedder>(c.embedding_dim, 0.6, seed);
}

}  // namespace graphmert
