#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hswarm/exec.hpp"

namespace hswarm {

/// Instruction text placed ahead of the question, chosen by graph position.
std::string prompt_preamble(PositionKind kind);

/// Full prompt: preamble, the question, then each prior response in order.
std::string build_prompt(PositionKind kind, const std::string& task_input, std::span<const Message> prior);

/// JSON body for one node request:
/// {"node", "role", "task_input", "prior": [{"node", "text"}...], "prompt"}.
nlohmann::json build_request(const NodeContext& ctx, std::span<const Message> prior, const Message& task_input);

struct RemoteOptions {
  std::chrono::milliseconds timeout{30000};
  int retries = 0;
  /// Replaces every expert endpoint when non-empty.
  std::string endpoint_override;
};

/// Reads HSWARM_ENDPOINT into endpoint_override when set.
RemoteOptions remote_options_from_env(RemoteOptions base = {});

/// Sends one HTTP POST per node to the expert's endpoint and returns the
/// "text" field of the response.
class RemoteEvaluator final : public NodeEvaluator {
 public:
  explicit RemoteEvaluator(RemoteOptions options = {}) : options_(std::move(options)) {}

  Message evaluate(const NodeContext& ctx, const Expert& expert, std::span<const Message> inputs,
                   const Message& task_input) const override;

 private:
  RemoteOptions options_;
};

/// Local echo server for remote-mode tests: answers every POST with
/// {"text": <request prompt>} and keeps the parsed requests.
class EchoStubServer {
 public:
  EchoStubServer();
  ~EchoStubServer();
  EchoStubServer(const EchoStubServer&) = delete;
  EchoStubServer& operator=(const EchoStubServer&) = delete;

  /// Binds host:port (port 0 picks a free one) and serves on a background
  /// thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop() is called from elsewhere.
  void run_blocking(const std::string& host, int port);
  void stop();

  std::string url() const;
  std::vector<nlohmann::json> requests() const;
  void clear();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hswarm
