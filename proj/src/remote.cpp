#include "hswarm/remote.hpp"

#include <cstdlib>
#include <httplib.h>

#include "hswarm/errors.hpp"

namespace hswarm {

namespace {

constexpr const char* kEntryPrompt = "Please answer the following question.";
constexpr const char* kMiddlePrompt =
    "Please answer the following question with the help of previous responses, feel free to ignore wrong or "
    "unhelpful responses.";
constexpr const char* kEndSuffix = " Make sure to provide a final and definitive answer.";

struct ParsedUrl {
  std::string base;  // scheme://host:port
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

std::string prompt_preamble(PositionKind kind) {
  switch (kind) {
    case PositionKind::entry:
      return kEntryPrompt;
    case PositionKind::middle:
      return kMiddlePrompt;
    case PositionKind::end:
      return std::string(kMiddlePrompt) + kEndSuffix;
  }
  return kEntryPrompt;
}

std::string build_prompt(PositionKind kind, const std::string& task_input, std::span<const Message> prior) {
  std::string prompt = prompt_preamble(kind);
  prompt += "\n\nQuestion: ";
  prompt += task_input;
  for (std::size_t k = 0; k < prior.size(); ++k) {
    prompt += "\n\nPrevious response " + std::to_string(k + 1) + ": ";
    prompt += prior[k].text();
  }
  return prompt;
}

nlohmann::json build_request(const NodeContext& ctx, std::span<const Message> prior, const Message& task_input) {
  if (!task_input.is_text()) throw ContractViolation("remote evaluator needs text payloads");
  nlohmann::json priors = nlohmann::json::array();
  for (const auto& m : prior) {
    if (!m.is_text()) throw ContractViolation("remote evaluator needs text payloads");
    priors.push_back({{"node", m.origin}, {"text", m.text()}});
  }
  return {{"node", ctx.node},
          {"role", to_string(ctx.kind)},
          {"task_input", task_input.text()},
          {"prior", priors},
          {"prompt", build_prompt(ctx.kind, task_input.text(), prior)}};
}

RemoteOptions remote_options_from_env(RemoteOptions base) {
  if (const char* env = std::getenv("HSWARM_ENDPOINT"); env != nullptr && *env != '\0') base.endpoint_override = env;
  return base;
}

Message RemoteEvaluator::evaluate(const NodeContext& ctx, const Expert& expert, std::span<const Message> inputs,
                                  const Message& task_input) const {
  const std::string endpoint = options_.endpoint_override.empty() ? expert.endpoint : options_.endpoint_override;
  if (endpoint.empty()) throw ExecutionError(ctx.node, "expert " + std::to_string(ctx.expert_index) + " has no endpoint");
  const std::string body = build_request(ctx, inputs, task_input).dump();
  const auto url = split_url(endpoint);

  httplib::Client client(url.base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  std::string failure;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    auto res = client.Post(url.path, body, "application/json");
    if (!res) {
      failure = "request failed (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      failure = "HTTP status " + std::to_string(res->status);
      continue;
    }
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("text") || !parsed["text"].is_string())
      throw ExecutionError(ctx.node, endpoint + ": malformed response body");
    Message out{parsed["text"].get<std::string>()};
    out.origin = ctx.node;
    return out;
  }
  throw ExecutionError(ctx.node, endpoint + ": " + failure);
}

struct EchoStubServer::Impl {
  httplib::Server server;
  std::thread worker;
  std::string host;
  int port = 0;
  mutable std::mutex mu;
  std::vector<nlohmann::json> requests;
};

EchoStubServer::EchoStubServer() : impl_(std::make_unique<Impl>()) {
  impl_->server.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    auto parsed = nlohmann::json::parse(req.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("prompt") || !parsed["prompt"].is_string()) {
      res.status = 400;
      res.set_content(R"({"error":"expected JSON with a prompt field"})", "application/json");
      return;
    }
    {
      std::lock_guard lock(impl_->mu);
      impl_->requests.push_back(parsed);
    }
    res.set_content(nlohmann::json{{"text", parsed["prompt"]}}.dump(), "application/json");
  });
}

EchoStubServer::~EchoStubServer() { stop(); }

int EchoStubServer::start(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (impl_->port <= 0) throw std::runtime_error("stub server could not bind " + host);
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void EchoStubServer::run_blocking(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port;
  if (!impl_->server.listen(host, port)) throw std::runtime_error("stub server could not listen on " + host);
}

void EchoStubServer::stop() {
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

std::string EchoStubServer::url() const { return "http://" + impl_->host + ":" + std::to_string(impl_->port) + "/generate"; }

std::vector<nlohmann::json> EchoStubServer::requests() const {
  std::lock_guard lock(impl_->mu);
  return impl_->requests;
}

void EchoStubServer::clear() {
  std::lock_guard lock(impl_->mu);
  impl_->requests.clear();
}

}  // namespace hswarm
