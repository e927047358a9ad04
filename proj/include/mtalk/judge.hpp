#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mtalk::judge {

struct JudgeRequest {
  std::string id;
  std::string question;      // Q
  std::string answer;        // A, the model's response
  std::string ground_truth;  // G, the coach's answer
};

// Template text with Q, A and G appended as an input block. DomainError on an empty field.
std::string build_prompt(std::string_view question, std::string_view answer, std::string_view ground_truth);
std::string build_prompt(const JudgeRequest& request);

// FNV-1a 64-bit hash of the prompt bytes as 16 lowercase hex digits; names offline fixtures.
std::string prompt_hash(std::string_view prompt);

struct CriterionVerdict {
  bool pred = false;
  double score = 0.0;  // [0, 5]
  int confidence = 0;  // 0 or 1

  bool operator==(const CriterionVerdict&) const = default;
};

inline constexpr std::string_view kCriteria[] = {"Reasonableness", "Coherence", "Pertinence",
                                                 "Adaptability"};
inline constexpr std::string_view kOverall = "All";

struct JudgeVerdict {
  CriterionVerdict reasonableness;
  CriterionVerdict coherence;
  CriterionVerdict pertinence;
  CriterionVerdict adaptability;
  CriterionVerdict all;

  // Accepts the four criterion names and "All".
  CriterionVerdict& at(std::string_view name);
  const CriterionVerdict& at(std::string_view name) const;
  bool operator==(const JudgeVerdict&) const = default;
};

// Reads the quasi-object result block (single or double quotes, True/False quoted or
// bare). A missing criterion is a ParseError naming it; a score outside [0, 5] or a
// confidence other than 0/1 is a ValidationError. A missing "All" entry is derived:
// pred = every pred, score = mean score, confidence = min confidence. In every case
// All.confidence is forced to 0 when any criterion has confidence 0.
JudgeVerdict parse_verdict(std::string_view response);

nlohmann::json to_json(const JudgeVerdict& verdict);

// Sends one prompt and returns the judge's reply text. Throws TransportError on failure.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string complete(const JudgeRequest& request, const std::string& prompt) = 0;
};

struct EndpointConfig {
  std::string url;  // chat-completion endpoint, http:// or https://
  std::string api_key;
  std::string model = "gpt-4";
  std::optional<std::filesystem::path> offline_dir;
  std::size_t max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};  // doubled after each failed attempt
  std::chrono::seconds timeout{60};
  std::size_t concurrency = 4;

  // JUDGE_ENDPOINT, JUDGE_API_KEY and JUDGE_OFFLINE_DIR; unset variables stay empty.
  static EndpointConfig from_env();
};

// POSTs {model, messages: [{role: "user", content: prompt}]} with a bearer token and
// returns choices[0].message.content.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(EndpointConfig cfg);
  std::string complete(const JudgeRequest& request, const std::string& prompt) override;

 private:
  EndpointConfig cfg_;
};

// Reads <dir>/<prompt_hash>.txt. A missing file is a TransportError naming the request.
class OfflineTransport : public Transport {
 public:
  explicit OfflineTransport(std::filesystem::path dir);
  std::string complete(const JudgeRequest& request, const std::string& prompt) override;

 private:
  std::filesystem::path dir_;
};

struct JudgeRecord {
  std::string id;
  JudgeVerdict verdict;
  bool parsed = true;  // false: reply was unusable and the verdict is all-zero confidence
  std::string raw;     // reply text
  std::string error;   // parse or validation message when !parsed
};

struct TransportLogEntry {
  std::string id;
  std::size_t attempt = 0;  // 1-based
  bool ok = false;
  std::string message;
};

struct BatchResult {
  std::vector<JudgeRecord> records;  // sorted by request id
  std::vector<TransportLogEntry> log;

  // Records with any zero confidence, for manual review.
  std::vector<const JudgeRecord*> review_queue() const;
};

using TransportFactory = std::function<std::unique_ptr<Transport>(const EndpointConfig&)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Offline mode (offline_dir set) reads fixtures and never calls `http`. Otherwise each
// request is sent through a transport from `http` with up to max_attempts tries and
// exponential backoff; exhausting them raises TransportError. Without an offline dir,
// an empty url is a ConfigError. Missing api_key is also a ConfigError.
BatchResult evaluate_remote(std::span<const JudgeRequest> requests, const EndpointConfig& cfg,
                            const TransportFactory& http = {}, const Sleeper& sleep = {});

}  // namespace mtalk::judge
