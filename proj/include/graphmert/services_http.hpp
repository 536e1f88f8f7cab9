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

// OpenAI-compatible HTTP backend (POST {endpoint}/chat/completions and
// {endpoint}/embeddings). The bearer token is read from GRAPHMERT_API_KEY.
// https endpoints need the build to define CPPHTTPLIB_OPENSSL_SUPPORT.

#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include "httplib.h"

#include "graphmert/services.hpp"

namespace graphmert {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // base path, no trailing slash
};

inline Endpoint parse_endpoint(const std::string& url) {
  const size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw invalid_argument("endpoint needs a scheme: " + url);
  const size_t slash = url.find('/', scheme + 3);
  Endpoint e;
  e.origin = url.substr(0, slash);
  e.path = slash == std::string::npos ? "" : url.substr(slash);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

namespace detail {

inline httplib::Headers auth_headers() {
  httplib::Headers h;
  if (const char* key = std::getenv("GRAPHMERT_API_KEY"); key && *key) {
    h.emplace("Authorization", std::string("Bearer ") + key);
  }
  return h;
}

inline json post_json(const ClientConfig& cfg, const std::string& route, const json& body) {
  const Endpoint ep = parse_endpoint(cfg.endpoint);
  httplib::Client cli(ep.origin);
  const auto secs = static_cast<time_t>(cfg.timeout_s);
  cli.set_connection_timeout(secs, 0);
  cli.set_read_timeout(secs, 0);
  cli.set_write_timeout(secs, 0);
  auto res = cli.Post(ep.path + route, auth_headers(), body.dump(), "application/json");
  if (!res) throw TransientError("transport error: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransientError("HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ClientError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200), 1);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw ClientError(std::string("malformed response: ") + e.what(), 1);
  }
}

}  // namespace detail

inline ChatTransport http_chat_transport(ClientConfig cfg) {
  return [cfg](const ChatRequest& req) {
    const json body{{"model", cfg.chat_model},
                    {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
                    {"temperature", req.temperature},
                    {"top_p", req.top_p},
                    {"top_k", req.top_k},
                    {"max_tokens", req.max_tokens}};
    const json r = detail::post_json(cfg, "/chat/completions", body);
    try {
      const json& choice = r.at("choices").at(0);
      ChatResponse out;
      out.text = choice.at("message").at("content").get<std::string>();
      out.finish_reason = choice.value("finish_reason", std::string("stop"));
      return out;
    } catch (const json::exception& e) {
      throw ClientError(std::string("unexpected chat response: ") + e.what(), 1);
    }
  };
}

inline EmbedTransport http_embed_transport(ClientConfig cfg) {
  return [cfg](const EmbeddingRequest& req) {
    const std::string& model = req.role == EmbeddingRole::kConceptLinking &&
                                       !cfg.concept_embedding_model.empty()
                                   ? cfg.concept_embedding_model
                                   : cfg.embedding_model;
    const json r = detail::post_json(cfg, "/embeddings", json{{"model", model}, {"input", req.text}});
    try {
      return r.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ClientError(std::string("unexpected embedding response: ") + e.what(), 1);
    }
  };
}

inline std::unique_ptr<ChatClient> make_http_chat_client(const ClientConfig& cfg,
                                                         MetricsHook hook = {},
                                                         Sleeper sleep = real_sleeper()) {
  return std::make_unique<RetryingChatClient>(http_chat_transport(cfg), "http", cfg.retry,
                                              cfg.max_in_flight, std::move(hook), std::move(sleep));
}

inline std::unique_ptr<EmbeddingClient> make_http_embedding_client(const ClientConfig& cfg,
                                                                   MetricsHook hook = {},
                                                                   Sleeper sleep = real_sleeper()) {
  return std::make_unique<RetryingEmbeddingClient>(http_embed_transport(cfg), "http", cfg.retry,
                                                   cfg.max_in_flight, std::move(hook),
                                                   std::move(sleep));
}

}  // namespace graphmert
