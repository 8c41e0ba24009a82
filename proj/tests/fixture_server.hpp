#pragma once

// In-process oracle server speaking the JSON wire protocol, answering from a
// mock fixture. The protocol carries query text, so a text -> fixture id map
// is supplied alongside.

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

class FixtureServer {
 public:
  FixtureServer(nlohmann::json fixture, std::map<std::string, std::string> text_to_id)
      : fixture_(std::move(fixture)), text_to_id_(std::move(text_to_id)) {
    using nlohmann::json;
    auto handler = [this](const char* endpoint) {
      return [this, endpoint](const httplib::Request& req, httplib::Response& res) {
        {
          std::lock_guard<std::mutex> lock(mu_);
          log_.push_back({endpoint, req.body});
        }
        if (fail_all_) {
          res.status = 503;
          return;
        }
        json body;
        try {
          body = json::parse(req.body);
        } catch (...) {
          res.status = 400;
          return;
        }
        const auto it = text_to_id_.find(body.value("query", ""));
        if (it == text_to_id_.end() || !fixture_.contains(it->second)) {
          res.status = 404;
          return;
        }
        const json& entry = fixture_[it->second];
        json out;
        const std::string ep = endpoint;
        try {
          if (ep == "/verify") {
            out = {{"confidence", entry.at("verify").at(body.at("anchor_id").get<std::string>())}};
          } else if (ep == "/questions") {
            out = {{"questions", entry.at("questions").at(body.at("anchor_id").get<std::string>())}};
          } else if (ep == "/answer") {
            out = {{"responses", entry.at("answers").at(body.at("anchor_id").get<std::string>())}};
          } else {
            auto ev = body.at("evidence").get<std::vector<std::string>>();
            std::sort(ev.begin(), ev.end());
            std::string key;
            for (std::size_t i = 0; i < ev.size(); ++i) key += (i ? "|" : "") + ev[i];
            out = {{"enhanced_query", entry.at("reconstruct").at(key)}};
          }
        } catch (const json::exception&) {
          res.status = 404;
          return;
        }
        res.set_content(out.dump(), "application/json");
      };
    };
    for (const char* ep : {"/verify", "/questions", "/answer", "/reconstruct"}) {
      server_.Post(ep, handler(ep));
    }
    server_.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("not json", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FixtureServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  void fail_all(bool on) { fail_all_ = on; }

  struct Call {
    std::string endpoint;
    std::string body;
  };
  std::vector<Call> calls() {
    std::lock_guard<std::mutex> lock(mu_);
    return log_;
  }

 private:
  nlohmann::json fixture_;
  std::map<std::string, std::string> text_to_id_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<bool> fail_all_{false};
  std::mutex mu_;
  std::vector<Call> log_;
};
