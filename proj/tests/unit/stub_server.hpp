// Copyright 2026 The gatekit Authors
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

#ifndef GATEKIT_TESTS__STUB_SERVER_HPP_
#define GATEKIT_TESTS__STUB_SERVER_HPP_

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace gatekit::testing
{

/// Chat-completion envelope around `content`.
inline std::string completion(const std::string & content)
{
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

/// Local HTTP server answering POST .../chat/completions with a fixed body.
class StubServer
{
public:
  explicit StubServer(std::string body, int delay_ms = 0)
  : body_(std::move(body)), delay_ms_(delay_ms)
  {
    server_.Post(R"(.*/chat/completions)", [this](const httplib::Request & req, httplib::Response & res) {
        const int now = ++in_flight_;
        {
          std::lock_guard<std::mutex> lock(mutex_);
          peak_ = std::max(peak_, now);
          requests_.push_back(req.body);
          auth_.push_back(req.get_header_value("Authorization"));
        }
        if (delay_ms_ > 0) {
          std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
        }
        --in_flight_;
        res.set_content(body_, "application/json");
      });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] {server_.listen_after_bind();});
    server_.wait_until_ready();
  }
  ~StubServer()
  {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int port() const { return port_; }
  int peak_in_flight() const
  {
    std::lock_guard<std::mutex> lock(mutex_);
    return peak_;
  }
  std::vector<std::string> requests() const
  {
    std::lock_guard<std::mutex> lock(mutex_);
    return requests_;
  }
  std::vector<std::string> auth_headers() const
  {
    std::lock_guard<std::mutex> lock(mutex_);
    return auth_;
  }

private:
  std::string body_;
  int delay_ms_{0};
  httplib::Server server_;
  std::thread thread_;
  int port_{0};
  std::atomic<int> in_flight_{0};
  mutable std::mutex mutex_;
  int peak_{0};
  std::vector<std::string> requests_;
  std::vector<std::string> auth_;
};

/// A loopback URL nothing listens on: a port bound once, then closed.
inline std::string dead_endpoint()
{
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof(addr);
  ::bind(fd, reinterpret_cast<sockaddr *>(&addr), sizeof(addr));
  ::getsockname(fd, reinterpret_cast<sockaddr *>(&addr), &len);
  ::close(fd);
  return "http://127.0.0.1:" + std::to_string(ntohs(addr.sin_port)) + "/v1";
}

}  // namespace gatekit::testing

#endif  // GATEKIT_TESTS__STUB_SERVER_HPP_
