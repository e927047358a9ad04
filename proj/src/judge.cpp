#include "mtalk/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "mtalk/errors.hpp"

namespace mtalk::judge {

namespace {

constexpr std::string_view kTemplate =
    R"(You are an expert in swing golf coaching. Below, I will provide you with an input:
<input> = <Q> + <A> + <G>

Where:
<Q> = A question about the athlete's swing motion.
<A> = The LLM's response to the question and motion.
<G> = The coach's standard answer.

Your task is to evaluate the quality of the LLM's response based on the coach's standard answer using the following criteria:

1. Reasonableness: Compare A and G. If A aligns with professional advice, set pred=True. Otherwise, set pred=False.
- If A is limited, give a lower score. If A is comprehensive, give a higher score.
- Confidence = 1 if the evaluation is certain; otherwise, Confidence = 0.

2. Coherence: Evaluate the logical flow of A. If A is consistent with G, set pred=True. Otherwise, set pred=False.
- Logical flaws reduce the score, while strong logic increases it.
- Confidence = 1 if the evaluation is certain; otherwise, Confidence = 0.

3. Pertinence: Assess how closely A addresses the question Q. If relevant, set pred=True. Otherwise, set pred=False.
- General responses lower the score, while targeted responses increase it.
- Confidence = 1 if the evaluation is certain; otherwise, Confidence = 0.

4. Adaptability: Check if A aligns with the athlete's skill level, as indicated in G. If aligned, set pred=True. Otherwise, set pred=False.
- Misaligned suggestions lower the score, while aligned ones increase it.
- Confidence = 1 if the evaluation is certain; otherwise, Confidence = 0.

Finally, combine the evaluations:
- If any criterion has confidence = 0, set the overall confidence = 0.
- The result must follow this format:
{
  'Reasonableness': {'pred': 'True', 'score': 3.9, 'confidence': 1},
  'Coherence': {'pred': 'False', 'score': 0.9, 'confidence': 0},
  'Pertinence': {'pred': 'True', 'score': 3.5, 'confidence': 1},
  'Adaptability': {'pred': 'True', 'score': 4.2, 'confidence': 1},
  'All': {'pred': 'True', 'score': 2.8, 'confidence': 0}
}
)";

std::string field_pattern(std::string_view field, std::string_view value) {
  return std::string("['\"]") + std::string(field) + "['\"]\\s*:\\s*" + std::string(value);
}

CriterionVerdict parse_criterion(std::string_view name, const std::string& body) {
  static const std::regex pred_re(field_pattern("pred", "['\"]?(True|False|true|false)['\"]?"));
  static const std::regex score_re(
      field_pattern("score", "['\"]?(-?[0-9]*\\.?[0-9]+(?:[eE][-+]?[0-9]+)?)['\"]?"));
  static const std::regex conf_re(field_pattern("confidence", "['\"]?(-?[0-9]+(?:\\.[0-9]+)?)['\"]?"));
  std::smatch m;
  CriterionVerdict v;
  if (!std::regex_search(body, m, pred_re)) throw ParseError(std::string(name) + ": missing pred");
  v.pred = m[1] == "True" || m[1] == "true";
  if (!std::regex_search(body, m, score_re)) throw ParseError(std::string(name) + ": missing score");
  v.score = std::stod(m[1]);
  if (!(v.score >= 0.0 && v.score <= 5.0)) {
    throw ValidationError(std::string(name) + ": score " + m[1].str() + " outside [0, 5]");
  }
  if (!std::regex_search(body, m, conf_re)) throw ParseError(std::string(name) + ": missing confidence");
  const double c = std::stod(m[1]);
  if (c != 0.0 && c != 1.0) throw ValidationError(std::string(name) + ": confidence " + m[1].str() + " is not 0 or 1");
  v.confidence = static_cast<int>(c);
  return v;
}

std::optional<std::string> criterion_body(const std::string& text, std::string_view name) {
  const std::regex re("['\"]" + std::string(name) + "['\"]\\s*:\\s*\\{([^{}]*)\\}");
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  return m[1].str();
}

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("judge endpoint must start with http:// or https://");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string getenv_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

}  // namespace

std::string build_prompt(std::string_view question, std::string_view answer, std::string_view ground_truth) {
  if (question.empty()) throw DomainError("build_prompt: empty question");
  if (answer.empty()) throw DomainError("build_prompt: empty answer");
  if (ground_truth.empty()) throw DomainError("build_prompt: empty ground truth");
  std::string out(kTemplate);
  out += "\nInput:\n<Q> = ";
  out += question;
  out += "\n<A> = ";
  out += answer;
  out += "\n<G> = ";
  out += ground_truth;
  out += "\n";
  return out;
}

std::string build_prompt(const JudgeRequest& request) {
  return build_prompt(request.question, request.answer, request.ground_truth);
}

std::string prompt_hash(std::string_view prompt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : prompt) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CriterionVerdict& JudgeVerdict::at(std::string_view name) {
  if (name == "Reasonableness") return reasonableness;
  if (name == "Coherence") return coherence;
  if (name == "Pertinence") return pertinence;
  if (name == "Adaptability") return adaptability;
  if (name == kOverall) return all;
  throw DomainError("unknown criterion " + std::string(name));
}

const CriterionVerdict& JudgeVerdict::at(std::string_view name) const {
  return const_cast<JudgeVerdict*>(this)->at(name);
}

JudgeVerdict parse_verdict(std::string_view response) {
  const std::string text(response);
  JudgeVerdict v;
  bool any_unsure = false;
  bool all_pred = true;
  double score_sum = 0.0;
  for (std::string_view name : kCriteria) {
    const auto body = criterion_body(text, name);
    if (!body) throw ParseError("verdict is missing criterion " + std::string(name));
    v.at(name) = parse_criterion(name, *body);
    any_unsure = any_unsure || v.at(name).confidence == 0;
    all_pred = all_pred && v.at(name).pred;
    score_sum += v.at(name).score;
  }
  if (const auto body = criterion_body(text, kOverall)) {
    v.all = parse_criterion(kOverall, *body);
  } else {
    v.all = {all_pred, score_sum / static_cast<double>(std::size(kCriteria)), any_unsure ? 0 : 1};
  }
  if (any_unsure) v.all.confidence = 0;
  return v;
}

nlohmann::json to_json(const JudgeVerdict& verdict) {
  nlohmann::json j = nlohmann::json::object();
  auto put = [&](std::string_view name) {
    const auto& c = verdict.at(name);
    j[std::string(name)] = {{"pred", c.pred}, {"score", c.score}, {"confidence", c.confidence}};
  };
  for (std::string_view name : kCriteria) put(name);
  put(kOverall);
  return j;
}

EndpointConfig EndpointConfig::from_env() {
  EndpointConfig cfg;
  cfg.url = getenv_or_empty("JUDGE_ENDPOINT");
  cfg.api_key = getenv_or_empty("JUDGE_API_KEY");
  const std::string offline = getenv_or_empty("JUDGE_OFFLINE_DIR");
  if (!offline.empty()) cfg.offline_dir = offline;
  return cfg;
}

HttpTransport::HttpTransport(EndpointConfig cfg) : cfg_(std::move(cfg)) {}

std::string HttpTransport::complete(const JudgeRequest& request, const std::string& prompt) {
  const Endpoint ep = split_url(cfg_.url);
  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(cfg_.timeout);
  client.set_read_timeout(cfg_.timeout);
  const httplib::Headers headers = {{"Authorization", "Bearer " + cfg_.api_key}};
  const nlohmann::json body = {{"model", cfg_.model},
                               {"messages", {{{"role", "user"}, {"content", prompt}}}}};
  auto res = client.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("request " + request.id + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("request " + request.id + ": HTTP " + std::to_string(res->status));
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError("request " + request.id + ": unexpected reply shape: " + e.what());
  }
}

OfflineTransport::OfflineTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string OfflineTransport::complete(const JudgeRequest& request, const std::string& prompt) {
  const auto path = dir_ / (prompt_hash(prompt) + ".txt");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TransportError("no offline fixture for request " + request.id + " (" + path.string() + ")");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<const JudgeRecord*> BatchResult::review_queue() const {
  std::vector<const JudgeRecord*> out;
  for (const auto& r : records) {
    bool unsure = r.verdict.all.confidence == 0;
    for (std::string_view name : kCriteria) unsure = unsure || r.verdict.at(name).confidence == 0;
    if (unsure) out.push_back(&r);
  }
  return out;
}

BatchResult evaluate_remote(std::span<const JudgeRequest> requests, const EndpointConfig& cfg,
                            const TransportFactory& http, const Sleeper& sleep) {
  const bool offline = cfg.offline_dir.has_value();
  if (!offline) {
    if (cfg.url.empty()) throw ConfigError("judge endpoint not configured (JUDGE_ENDPOINT)");
    if (cfg.api_key.empty()) throw ConfigError("judge credentials not configured (JUDGE_API_KEY)");
  }
  const std::size_t attempts = offline ? 1 : std::max<std::size_t>(cfg.max_attempts, 1);
  auto make_transport = [&]() -> std::unique_ptr<Transport> {
    if (offline) return std::make_unique<OfflineTransport>(*cfg.offline_dir);
    if (http) return http(cfg);
    return std::make_unique<HttpTransport>(cfg);
  };
  const Sleeper pause = sleep ? sleep : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

  std::vector<JudgeRecord> records(requests.size());
  std::vector<std::vector<TransportLogEntry>> logs(requests.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    std::unique_ptr<Transport> transport;
    try {
      transport = make_transport();
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      return;
    }
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      const JudgeRequest& req = requests[i];
      try {
        const std::string prompt = build_prompt(req);
        std::string reply;
        auto delay = cfg.initial_backoff;
        for (std::size_t attempt = 1;; ++attempt) {
          try {
            reply = transport->complete(req, prompt);
            logs[i].push_back({req.id, attempt, true, "ok"});
            break;
          } catch (const TransportError& e) {
            logs[i].push_back({req.id, attempt, false, e.what()});
            if (attempt >= attempts) throw;
            pause(delay);
            delay *= 2;
          }
        }
        JudgeRecord& rec = records[i];
        rec.id = req.id;
        rec.raw = reply;
        try {
          rec.verdict = parse_verdict(reply);
        } catch (const ParseError& e) {
          rec.parsed = false;
          rec.error = e.what();
          rec.verdict = {};
        } catch (const ValidationError& e) {
          rec.parsed = false;
          rec.error = e.what();
          rec.verdict = {};
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_workers = std::clamp<std::size_t>(cfg.concurrency, 1, std::max<std::size_t>(requests.size(), 1));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  BatchResult result;
  std::vector<std::size_t> order(requests.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return requests[a].id < requests[b].id; });
  for (std::size_t i : order) {
    result.records.push_back(std::move(records[i]));
    for (auto& entry : logs[i]) result.log.push_back(std::move(entry));
  }
  return result;
}

}  // namespace mtalk::judge
