#pragma once

// HTTP/1.1 query endpoint over an immutable RetrievalIndex.
//
//   GET  /healthz -> 200 {"status":"ok","size":N,"dim":D,"fingerprint":"..."}
//   POST /query   {"embedding":[D floats]} or {"class":"name"}, optional "k" (default 6)
//                 -> 200 {"results":[{"video_id":..,"score":..}],"k":..,"fingerprint":".."}
//                 -> 400 body is not a JSON object / fields have the wrong type
//                 -> 422 dimension mismatch, zero vector, unknown class, k < 1

#include <optional>
#include <string>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "vidembed/data/dataset.hpp"
#include "vidembed/retrieval/index.hpp"

namespace vidembed {

struct HttpReply {
  int status = 200;
  std::string body;
};

class QueryService {
 public:
  QueryService(RetrievalIndex index, std::optional<ClassPrototypes> protos = std::nullopt)
      : index_(std::move(index)), protos_(std::move(protos)) {
    if (protos_) require(protos_->dim() == index_.dim(), Errc::DimMismatch, "prototype and index dimensions differ");
  }

  const RetrievalIndex& index() const noexcept { return index_; }

  HttpReply health() const {
    nlohmann::json j = {{"status", "ok"}, {"size", index_.size()}, {"dim", index_.dim()},
                        {"fingerprint", index_.fingerprint()}};
    return {200, j.dump()};
  }

  /// Pure request handler; holds no mutable state, so it is safe to call
  /// from many connections at once.
  HttpReply handle_query(const std::string& body) const {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      return error(400, std::string("malformed JSON: ") + e.what());
    }
    if (!req.is_object()) return error(400, "request must be a JSON object");

    std::size_t k = kDefaultTopK;
    if (req.contains("k")) {
      if (!req["k"].is_number_integer()) return error(400, "k must be an integer");
      if (req["k"].get<long long>() < 1) return error(422, "k must be >= 1");
      k = req["k"].get<std::size_t>();
    }

    std::vector<float> q;
    if (req.contains("embedding")) {
      const auto& e = req["embedding"];
      if (!e.is_array()) return error(400, "embedding must be an array of numbers");
      for (const auto& x : e) {
        if (!x.is_number()) return error(400, "embedding must be an array of numbers");
        q.push_back(x.get<float>());
      }
    } else if (req.contains("class")) {
      if (!req["class"].is_string()) return error(400, "class must be a string");
      if (!protos_) return error(422, "server has no class prototypes loaded");
      const auto idx = protos_->find(req["class"].get<std::string>());
      if (!idx) return error(422, "unknown class '" + req["class"].get<std::string>() + "'");
      auto row = protos_->vectors.row(*idx);
      q.assign(row.begin(), row.end());
    } else {
      return error(400, "request needs 'embedding' or 'class'");
    }

    try {
      const auto result = index_.query(q, k);
      nlohmann::json out = {{"results", nlohmann::json::array()}, {"k", k}, {"fingerprint", index_.fingerprint()}};
      for (const auto& item : result.items) out["results"].push_back({{"video_id", item.video_id}, {"score", item.score}});
      return {200, out.dump()};
    } catch (const Error& e) {
      return error(422, e.what());
    }
  }

  void mount(httplib::Server& server) const {
    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    server.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, handle_query(req.body));
    });
  }

 private:
  static HttpReply error(int status, const std::string& message) {
    return {status, nlohmann::json({{"error", message}}).dump()};
  }

  static void reply(httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  }

  RetrievalIndex index_;
  std::optional<ClassPrototypes> protos_;
};

}  // namespace vidembed
