// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero when any
// criterion other than the documented known failure (1) fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "mtalk/cli.hpp"
#include "mtalk/data.hpp"
#include "mtalk/enhancer.hpp"
#include "mtalk/grad_probe.hpp"
#include "mtalk/judge.hpp"
#include "mtalk/metrics.hpp"
#include "mtalk/model.hpp"
#include "mtalk/training.hpp"
#include "oracle.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using mtalk::Matrix;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mtalk_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = mtalk::cli::run(args, out, err);
  if (code != 0) std::fprintf(stderr, "mtalk %s: %s", args.front().c_str(), err.str().c_str());
  return code;
}

// --- 1 ------------------------------------------------------------------------

Verdict gradient_fidelity() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::uint64_t worst_seed = 0;
  std::string worst_param;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto c = mtalk::diagnostics::composite_grad_check(seed);
    if (c.result.max_relative_error > worst) {
      worst = c.result.max_relative_error;
      worst_seed = seed;
      worst_param = c.result.worst_parameter;
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-4 && elapsed < 60.0,
          fmt("max rel err %.3g (seed %.0f), limit 1e-4, step 1e-5, %.1f s", worst, static_cast<double>(worst_seed),
              elapsed) +
              ", worst " + worst_param};
}

// --- 2 ------------------------------------------------------------------------

Verdict oracle_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t mismatches = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t frames = 3 + seed % 6;
    const std::size_t hidden = seed % 2 ? 4 : 8;
    const std::size_t text_len = 2 + seed % 4;
    const std::size_t k = 1 + seed % 3;
    mtalk::talker::CrossTalker t({k, 2 + seed % 3, hidden, true}, rng);
    const Matrix text = Matrix::uniform(text_len, hidden, 1.0, rng);
    const Matrix motion = Matrix::uniform(frames, hidden, 1.0, rng);
    const auto g_text = oracle::from(text);
    const auto g_motion = oracle::from(motion);

    const auto rel = t.compute_relevance(text, motion);
    const auto rel_o = oracle::relevance(t, g_text, g_motion);
    worst = std::max(worst, oracle::max_diff(rel.attention, rel_o.attention));
    for (std::size_t j = 0; j < frames; ++j) worst = std::max(worst, std::fabs(rel.scores[j] - rel_o.scores[j]));

    if (mtalk::talker::select_viewpoints(rel.scores, k).indices != oracle::top_k(rel.scores, k)) ++mismatches;

    const std::size_t seg = t.config().segment_size;
    worst = std::max(worst, oracle::max_diff(mtalk::talker::pool_segments(motion, seg), oracle::pool(g_motion, seg)));

    for (std::size_t c = 0; c < frames; ++c) {
      const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      const auto win = mtalk::talker::local_window(c, r, frames);
      if (win != oracle::window(c, r, frames)) ++mismatches;
      const Matrix loc = t.aggregate_local(motion, c, win);
      const auto loc_o = oracle::local(t, g_motion, c, win);
      worst = std::max(worst, oracle::max_diff(loc, loc_o));
      const Matrix segments = mtalk::talker::pool_segments(motion, seg);
      worst = std::max(worst, oracle::max_diff(t.aggregate_global(loc, segments),
                                               oracle::global(t, oracle::from(loc), oracle::from(segments))));
    }

    const Matrix vps = Matrix::uniform(k, hidden, 1.0, rng);
    worst = std::max(worst, oracle::max_diff(t.fuse_bidirectional(text, vps).values, oracle::fuse(t, g_text, oracle::from(vps))));
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-10 && mismatches == 0 && elapsed < 30.0,
          fmt("max abs diff %.3g over 20 seeds, %.0f index mismatches, %.2f s", worst, static_cast<double>(mismatches), elapsed)};
}

// --- 3 ------------------------------------------------------------------------

Verdict residual_identity() {
  std::size_t failures = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t hidden = seed % 2 ? 4 : 8;
    mtalk::enhancer::FeatureEnhancer e(hidden, rng);
    e.zero_output_layers();
    const Matrix video = Matrix::uniform(6, hidden, 1.0, rng);
    const Matrix motion = Matrix::uniform(6, hidden, 1.0, rng);
    if (e.enhance(video, motion) != motion) ++failures;
    if (e.enhance_motion_only(motion) != motion) ++failures;

    mtalk::talker::CrossTalker t({3, 4, hidden, true}, rng);
    t.zero_output_layers();
    const Matrix text = Matrix::uniform(4, hidden, 1.0, rng);
    const Matrix vps = Matrix::uniform(3, hidden, 1.0, rng);
    const auto fused = t.fuse_bidirectional(text, vps);
    for (std::size_t r = 0; r < 7; ++r)
      for (std::size_t c = 0; c < hidden; ++c)
        if (fused.values(r, c) != (r < 4 ? text(r, c) : vps(r - 4, c))) {
          ++failures;
          r = 7;
          break;
        }
  }
  return {failures == 0, fmt("%.0f non-identical outputs over 10 seeds (enhance, motion-only, fuse)", static_cast<double>(failures))};
}

// --- 4 ------------------------------------------------------------------------

Verdict complexity() {
  std::mt19937_64 rng(1);
  mtalk::generator::Decoder decoder({4, 32, 1, 512}, rng);
  std::vector<double> x, y;
  for (std::size_t l : {32, 64, 128, 272}) {
    x.push_back(static_cast<double>(l * l));
    y.push_back(static_cast<double>(mtalk::metrics::measure_attention_macs(decoder, l, 1)));
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ss_res += std::pow(y[i] - (my + slope * (x[i] - mx)), 2);
  const double r2 = 1.0 - ss_res / syy;
  const auto report = mtalk::metrics::measure_flops(decoder, 16, 256, 16);
  const double ratio = report.measured_ratio();
  return {r2 > 0.999 && std::fabs(ratio - 0.0138) <= 0.05 * 0.0138,
          fmt("R^2 %.9f (> 0.999), measured ratio K=16/T=256 %.5f (0.0138 +- 5%%)", r2, ratio)};
}

// --- 5 ------------------------------------------------------------------------

Verdict learnability() {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = scratch("learn");
  const std::string data = (dir / "d.jsonl").string();
  bool ok = cli({"gen-data", "--out", data, "--samples", "32", "--seed", "7"}) == 0 &&
            cli({"train", "--data", data, "--stage", "1", "--out", (dir / "run").string()}) == 0 &&
            cli({"train", "--data", data, "--stage", "2", "--init", (dir / "run/stage1.ckpt").string(), "--out",
                 (dir / "run").string()}) == 0 &&
            cli({"eval", "--data", data, "--checkpoint", (dir / "run/stage2.ckpt").string(), "--report",
                 (dir / "report.json").string()}) == 0;
  if (!ok) return {false, "pipeline failed"};
  const json report = json::parse(slurp(dir / "report.json"));
  const double nll = report["mean_nll"].get<double>();
  const double em = report["exact_match"].get<double>();
  const double elapsed = seconds_since(start);
  fs::remove_all(dir);
  return {nll < 0.1 && em >= 0.9 && elapsed < 300.0,
          fmt("mean NLL %.4f (< 0.1), exact match %.3f (>= 0.9), %.1f s", nll, em, elapsed)};
}

// --- 6 ------------------------------------------------------------------------

struct Trained {
  mtalk::data::Tokenizer tokenizer;
  std::vector<mtalk::EncodedSample> samples;
  std::unique_ptr<mtalk::MotionTalkModel> model;
};

Trained train_default(const std::vector<mtalk::data::MotionSample>& raw, std::uint64_t seed) {
  Trained t;
  t.tokenizer = mtalk::data::Tokenizer::build(raw);
  for (const auto& s : raw) t.samples.push_back(mtalk::encode_sample(s, t.tokenizer));
  mtalk::ModelConfig mc;
  mc.motion_dim = raw.front().motion.dims();
  mc.video_dim = mc.motion_dim;
  mc.vocab = t.tokenizer.vocabulary().size();
  mc.seed = seed;
  t.model = std::make_unique<mtalk::MotionTalkModel>(mc);
  auto s1 = mtalk::training::TrainConfig::defaults(1);
  s1.seed = seed;
  mtalk::training::pretrain_decoder(*t.model, t.samples, s1);
  t.model->configure_stage(1);
  mtalk::training::train_stage(*t.model, t.samples, s1);
  auto s2 = mtalk::training::TrainConfig::defaults(2);
  s2.seed = seed;
  std::mt19937_64 rng(seed ^ 0xada9);
  t.model->decoder.attach_adapters(s2.lora, rng);
  t.model->configure_stage(2);
  mtalk::training::train_stage(*t.model, t.samples, s2);
  return t;
}

Verdict selection_signal() {
  double recall_sum = 0.0, baseline_sum = 0.0, window_baseline_sum = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    mtalk::data::DatasetOptions opt;
    opt.samples = 32;
    opt.seed = seed;
    opt.video_fraction = 0.0;
    opt.families = {mtalk::data::QueryFamily::kCounting};
    const auto raw = mtalk::data::generate_dataset(opt);
    Trained t = train_default(raw, seed);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const std::size_t k = raw[i].labels.rep_count;
      const double frames = static_cast<double>(raw[i].motion.frames());
      t.model->talker.config().viewpoints = k;
      mtalk::Tape tape;
      const auto sel = t.model->prefix(tape, t.samples[i]).selection;
      recall_sum += mtalk::metrics::selection_pr(sel.indices, raw[i].labels.key_frames, 2).recall;
      baseline_sum += static_cast<double>(k) / frames;
      // Random K-subsets scored with the same matcher and tolerance.
      std::mt19937_64 rng(seed * 1000 + i);
      std::vector<std::size_t> all(raw[i].motion.frames());
      std::iota(all.begin(), all.end(), 0);
      double random_recall = 0.0;
      for (int draw = 0; draw < 200; ++draw) {
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<std::size_t> pick(all.begin(), all.begin() + k);
        std::sort(pick.begin(), pick.end());
        random_recall += mtalk::metrics::selection_pr(pick, raw[i].labels.key_frames, 2).recall / 200.0;
      }
      window_baseline_sum += random_recall;
      ++n;
    }
  }
  const double recall = recall_sum / n, baseline = baseline_sum / n;
  return {recall >= 2.0 * baseline,
          fmt("mean recall %.3f vs random K/T %.3f (ratio %.2f, need 2); random subsets under the same w=2 matcher %.3f",
              recall, baseline, recall / baseline, window_baseline_sum / n)};
}

// --- 7 ------------------------------------------------------------------------

Verdict metric_correctness() {
  using mtalk::metrics::count_metrics;
  struct Case {
    mtalk::metrics::CountEval ev;
    double obo, obz, mae, rmse;
  };
  const Case cases[] = {{{{3, 5, 7}, {3, 5, 7}}, 1.0, 1.0, 0.0, 0.0},
                        {{{5}, {4}}, 1.0, 0.0, 0.25, 1.0},
                        {{{2, 8}, {4, 8}}, 0.5, 0.5, 0.25, std::sqrt(2.0)}};
  std::size_t bad = 0;
  for (const auto& c : cases) {
    const auto m = count_metrics(c.ev);
    if (m.obo != c.obo || m.obz != c.obz || m.mae != c.mae || m.rmse != c.rmse) ++bad;
  }
  return {bad == 0, fmt("%.0f of 3 hand-computed examples differ", static_cast<double>(bad))};
}

// --- 8 ------------------------------------------------------------------------

Verdict schedule_optimizer() {
  using namespace mtalk::training;
  TrainConfig cfg;
  const std::size_t total = 320;
  const std::size_t warmup = warmup_steps(total, cfg);
  const bool endpoints =
      lr_at(0, total, cfg) == 0.0 && lr_at(warmup, total, cfg) == cfg.lr_max && lr_at(total, total, cfg) == 0.0;

  mtalk::Parameter p("theta", Matrix{{1.0}});
  AdamState state;
  mtalk::Parameter* params[] = {&p};
  double theta = 1.0, m = 0.0, v = 0.0, adam_err = 0.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = 2.0 * theta;
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    theta -= 0.1 * (m / (1 - std::pow(cfg.beta1, t))) / (std::sqrt(v / (1 - std::pow(cfg.beta2, t))) + cfg.epsilon);
    p.grad = Matrix{{2.0 * p.value(0, 0)}};
    adam_step(params, state, 0.1, cfg);
    adam_err = std::max(adam_err, std::fabs(p.value(0, 0) - theta));
  }

  mtalk::data::DatasetOptions opt;
  opt.samples = 6;
  opt.frames = 24;
  const auto raw = mtalk::data::generate_dataset(opt);
  const auto tok = mtalk::data::Tokenizer::build(raw);
  std::vector<mtalk::EncodedSample> samples;
  for (const auto& s : raw) samples.push_back(mtalk::encode_sample(s, tok));
  mtalk::ModelConfig mc;
  mc.vocab = tok.vocabulary().size();
  mtalk::MotionTalkModel stage1(mc);
  stage1.estimator = mtalk::encoders::MotionEstimator::identity(mc.motion_dim);
  stage1.configure_stage(1);
  auto c1 = TrainConfig::defaults(1);
  c1.epochs = 2;
  train_stage(stage1, samples, c1);
  const auto bytes = serialize_checkpoint(capture(stage1, "{}", 1, 0, 0, {}));

  mtalk::MotionTalkModel stage2(mc);
  restore(stage2, deserialize_checkpoint(bytes));
  std::mt19937_64 rng(3);
  stage2.decoder.attach_adapters(TrainConfig::defaults(2).lora, rng);
  double lora_err = 0.0;
  for (const auto& s : samples) lora_err = std::max(lora_err, std::fabs(stage2.evaluate_loss(s) - stage1.evaluate_loss(s)));

  return {endpoints && adam_err <= 1e-12 && lora_err <= 1e-12,
          std::string("lr endpoints ") + (endpoints ? "exact" : "WRONG") +
              fmt(", Adam two-step err %.3g (<= 1e-12), LoRA step-0 loss diff %.3g (<= 1e-12)", adam_err, lora_err)};
}

// --- 9 ------------------------------------------------------------------------

std::size_t open_sockets() {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator("/proc/self/fd")) {
    std::error_code ec;
    const auto target = fs::read_symlink(e.path(), ec);
    if (!ec && target.string().rfind("socket:", 0) == 0) ++n;
  }
  return n;
}

Verdict judge_protocol() {
  using namespace mtalk::judge;
  const auto v = parse_verdict(R"({
  'Reasonableness': {'pred': 'True', 'score': 3.9, 'confidence': 1},
  'Coherence': {'pred': 'False', 'score': 0.9, 'confidence': 0},
  'Pertinence': {'pred': 'True', 'score': 3.5, 'confidence': 1},
  'Adaptability': {'pred': 'True', 'score': 4.2, 'confidence': 1},
  'All': {'pred': 'True', 'score': 2.8, 'confidence': 0}
})");
  const bool parsed = v.reasonableness == CriterionVerdict{true, 3.9, 1} && v.all.confidence == 0;

  const fs::path dir = scratch("judge");
  std::vector<JudgeRequest> requests;
  for (int i = 0; i < 10; ++i) {
    const std::string k = std::to_string(i);
    requests.push_back({"q" + k, "question " + k, "answer " + k, "coach " + k});
    std::ofstream(dir / (prompt_hash(build_prompt(requests.back())) + ".txt"))
        << "{'Reasonableness': {'pred': 'True', 'score': " << i % 6 << ", 'confidence': 1}, "
        << "'Coherence': {'pred': 'True', 'score': 2, 'confidence': " << i % 2 << "}, "
        << "'Pertinence': {'pred': 'False', 'score': 1.5, 'confidence': 1}, "
        << "'Adaptability': {'pred': 'True', 'score': 4, 'confidence': 1}}";
  }
  EndpointConfig cfg;
  cfg.offline_dir = dir;
  cfg.url = "http://127.0.0.1:9/";
  cfg.api_key = "unused";
  int network_transports = 0;
  const auto factory = [&](const EndpointConfig&) -> std::unique_ptr<Transport> {
    ++network_transports;
    return nullptr;
  };
  const std::size_t sockets = open_sockets();
  const auto a = evaluate_remote(requests, cfg, factory);
  const auto b = evaluate_remote(requests, cfg, factory);
  bool same = a.records.size() == 10 && b.records.size() == 10;
  for (std::size_t i = 0; same && i < 10; ++i)
    same = a.records[i].id == b.records[i].id && a.records[i].verdict == b.records[i].verdict && a.records[i].parsed;
  const bool no_sockets = network_transports == 0 && open_sockets() == sockets;
  fs::remove_all(dir);
  return {parsed && same && no_sockets,
          std::string("appendix block ") + (parsed ? "ok" : "WRONG") + ", offline batch of 10 " +
              (same ? "deterministic" : "NOT deterministic") + ", network " + (no_sockets ? "untouched" : "USED")};
}

// --- 10 -----------------------------------------------------------------------

int run_binary(const std::string& args) {
  const int status = std::system((std::string(MTALK_BINARY) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism() {
  std::vector<fs::path> dirs;
  for (const char* name : {"det_a", "det_b"}) {
    const fs::path dir = scratch(name);
    const std::string d = (dir / "d.jsonl").string();
    const std::string run = (dir / "run").string();
    const bool ok = run_binary("gen-data --out " + d + " --samples 16 --seed 11") == 0 &&
                    run_binary("train --data " + d + " --stage 1 --out " + run) == 0 &&
                    run_binary("train --data " + d + " --stage 2 --init " + run + "/stage1.ckpt --out " + run) == 0 &&
                    run_binary("eval --data " + d + " --checkpoint " + run + "/stage2.ckpt --report " +
                               (dir / "report.json").string()) == 0;
    if (!ok) return {false, "pipeline failed in " + dir.string()};
    dirs.push_back(dir);
  }
  std::size_t compared = 0, differing = 0;
  for (const char* file : {"run/pretrain_loss.csv", "run/loss_stage1.csv", "run/loss_stage2.csv", "report.json",
                           "run/stage2.ckpt"}) {
    const auto a = slurp(dirs[0] / file);
    ++compared;
    if (a.empty() || a != slurp(dirs[1] / file)) ++differing;
  }
  for (const auto& d : dirs) fs::remove_all(d);
  return {differing == 0, fmt("%.0f of %.0f artifacts differ between two seeded runs of the binary",
                              static_cast<double>(differing), static_cast<double>(compared))};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
    bool known_failure;
  };
  const Criterion criteria[] = {
      {1, "gradient fidelity", gradient_fidelity, true},
      {2, "oracle equivalence", oracle_equivalence, false},
      {3, "residual identity", residual_identity, false},
      {4, "complexity claim", complexity, false},
      {5, "learnability", learnability, false},
      {6, "selection signal", selection_signal, false},
      {7, "metric correctness", metric_correctness, false},
      {8, "schedule and optimizer", schedule_optimizer, false},
      {9, "judge protocol", judge_protocol, false},
      {10, "determinism", determinism, false},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const char* tag = v.pass ? "PASS" : (c.known_failure ? "FAIL (known, see notes)" : "FAIL");
    std::printf("[%s] %d %s: %s\n", tag, c.id, c.name, v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass && !c.known_failure) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
