#include "mtalk/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "mtalk/errors.hpp"
#include "mtalk/grad_probe.hpp"
#include "mtalk/judge.hpp"
#include "mtalk/metrics.hpp"
#include "mtalk/run_config.hpp"

namespace mtalk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kAdapterSalt = 0xada9;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

fs::path vocab_path(const fs::path& data) { return fs::path(data.string() + ".vocab"); }

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load(path);
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

std::vector<data::MotionSample> load_samples(const fs::path& path) {
  auto samples = data::load_jsonl(path);
  if (samples.empty()) throw DomainError("dataset " + path.string() + " has no samples");
  return samples;
}

std::vector<EncodedSample> encode_all(std::span<const data::MotionSample> samples, const data::Tokenizer& tok) {
  std::vector<EncodedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(encode_sample(s, tok));
  return out;
}

// Everything needed to rebuild a model from a checkpoint.
struct Provenance {
  ModelConfig model;
  std::vector<std::string> vocabulary;
  bool adapters = false;
  training::LoraConfig lora;
  std::map<std::string, std::string> run;
};

std::string provenance_json(const Provenance& p) {
  json j;
  j["model"] = to_json(p.model);
  j["vocabulary"] = p.vocabulary;
  j["adapters"] = p.adapters;
  j["lora"] = {{"rank", p.lora.rank}, {"alpha", p.lora.alpha}};
  j["run"] = p.run;
  return j.dump();
}

Provenance parse_provenance(const std::string& text) {
  try {
    const json j = json::parse(text);
    Provenance p;
    p.model = model_config_from_json(j.at("model"));
    p.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    p.adapters = j.at("adapters").get<bool>();
    p.lora.enabled = p.adapters;
    p.lora.rank = j.at("lora").at("rank").get<std::size_t>();
    p.lora.alpha = j.at("lora").at("alpha").get<double>();
    p.run = j.at("run").get<std::map<std::string, std::string>>();
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint config: ") + e.what());
  }
}

void attach_adapters(MotionTalkModel& model, const training::LoraConfig& lora) {
  std::seed_seq seq{model.config().seed, kAdapterSalt};
  std::mt19937_64 rng(seq);
  model.decoder.attach_adapters(lora, rng);
}

struct LoadedModel {
  Provenance provenance;
  data::Tokenizer tokenizer;
  std::unique_ptr<MotionTalkModel> model;
  training::Checkpoint checkpoint;
};

LoadedModel load_model(const fs::path& path, std::optional<std::size_t> viewpoints = std::nullopt) {
  LoadedModel m;
  m.checkpoint = training::load_checkpoint(path);
  m.provenance = parse_provenance(m.checkpoint.config_json);
  m.tokenizer = data::Tokenizer(generator::Vocabulary::from_tokens(m.provenance.vocabulary));
  ModelConfig mc = m.provenance.model;
  if (viewpoints) mc.viewpoints = *viewpoints;
  m.model = std::make_unique<MotionTalkModel>(mc);
  if (m.provenance.adapters) attach_adapters(*m.model, m.provenance.lora);
  training::restore(*m.model, m.checkpoint);
  return m;
}

const data::MotionSample& find_sample(std::span<const data::MotionSample> samples, const std::string& id) {
  for (const auto& s : samples)
    if (s.id == id) return s;
  throw DomainError("no sample with id '" + id + "'");
}

void check_dims(const ModelConfig& mc, std::span<const data::MotionSample> samples) {
  for (const auto& s : samples) {
    if (s.motion.values.cols() != mc.motion_dim || (s.video && s.video->values.cols() != mc.video_dim)) {
      throw DimensionError("sample " + s.id + " does not match the model's input widths");
    }
  }
}

// --- gen-data -----------------------------------------------------------------

struct GenDataArgs {
  std::string out;
  std::size_t samples = 32;
  std::uint64_t seed = 7;
  std::string cycles = "2..5";
  std::size_t frames = 40;
};

int gen_data(const GenDataArgs& a, std::ostream& out) {
  data::DatasetOptions opt;
  opt.samples = a.samples;
  opt.seed = a.seed;
  opt.frames = a.frames;
  const auto dots = a.cycles.find("..");
  if (dots == std::string::npos) throw ConfigError("--cycles-range must look like a..b");
  try {
    opt.min_cycles = std::stoul(a.cycles.substr(0, dots));
    opt.max_cycles = std::stoul(a.cycles.substr(dots + 2));
  } catch (const std::exception&) {
    throw ConfigError("--cycles-range must look like a..b");
  }
  if (opt.min_cycles < 1 || opt.min_cycles > opt.max_cycles) throw ConfigError("--cycles-range needs 1 <= a <= b");
  const auto samples = data::generate_dataset(opt);
  data::save_jsonl(samples, a.out);
  data::Tokenizer::build(samples).vocabulary().save(vocab_path(a.out));
  std::ostringstream provenance;
  provenance << "samples=" << opt.samples << "\nseed=" << opt.seed << "\ncycles_range=" << opt.min_cycles
             << ".." << opt.max_cycles << "\nframes=" << opt.frames << "\nmotion_dim=" << opt.motion_dim
             << "\nvideo_dim=" << opt.video_dim << "\nnoise=" << opt.noise
             << "\nvideo_fraction=" << opt.video_fraction << "\n";
  write_text(a.out + ".config", provenance.str());
  out << "wrote " << samples.size() << " samples to " << a.out << "\n";
  return kExitOk;
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  int stage = 1;
  std::string config;
  std::string out;
  std::string init;
  std::string resume;
  std::vector<std::string> overrides;
};

class LossLog {
 public:
  LossLog(const fs::path& path, bool append) {
    const bool exists = append && fs::exists(path);
    out_.open(path, exists ? std::ios::app : std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    if (!exists) out_ << "epoch,mean_loss,lr\n";
  }
  void add(const training::EpochRecord& r) {
    out_ << r.epoch << ',' << json(r.mean_loss).dump() << ',' << json(r.lr).dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

void fit_estimator(MotionTalkModel& model, std::span<const data::MotionSample> samples) {
  std::vector<std::pair<encoders::VideoFeatureSequence, encoders::MotionSequence>> pairs;
  for (const auto& s : samples)
    if (s.video) pairs.emplace_back(*s.video, s.motion);
  if (!pairs.empty()) {
    model.estimator = encoders::train_estimator(pairs).estimator;
  } else if (model.config().motion_dim == model.config().video_dim) {
    model.estimator = encoders::MotionEstimator::identity(model.config().motion_dim);
  }
}

int train(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = load_config(a.config, a.overrides);
  const training::TrainConfig tc = cfg.train_config(a.stage);
  const auto samples = load_samples(a.data);
  const fs::path dir(a.out);
  fs::create_directories(dir);

  std::optional<LoadedModel> loaded;
  if (!a.resume.empty()) {
    loaded = load_model(a.resume);
    if (loaded->checkpoint.stage != a.stage) {
      throw ConfigError("--resume checkpoint is from stage " + std::to_string(loaded->checkpoint.stage));
    }
  } else if (!a.init.empty()) {
    loaded = load_model(a.init);
    if (a.stage == 2 && loaded->provenance.adapters) throw ConfigError("--init checkpoint already has adapters");
  } else if (a.stage == 2) {
    throw ConfigError("stage 2 needs --init with a stage-1 checkpoint (or --resume)");
  }

  Provenance prov;
  data::Tokenizer tokenizer;
  std::unique_ptr<MotionTalkModel> model;
  if (loaded) {
    prov = loaded->provenance;
    tokenizer = loaded->tokenizer;
    model = std::move(loaded->model);
  } else {
    tokenizer = fs::exists(vocab_path(a.data))
                    ? data::Tokenizer(generator::Vocabulary::load(vocab_path(a.data)))
                    : data::Tokenizer::build(samples);
    prov.model = cfg.model_config(samples.front().motion.values.cols(),
                                  samples.front().video ? samples.front().video->values.cols()
                                                        : samples.front().motion.values.cols(),
                                  tokenizer.vocabulary().size());
    prov.vocabulary = tokenizer.vocabulary().tokens();
    model = std::make_unique<MotionTalkModel>(prov.model);
  }
  check_dims(model->config(), samples);
  prov.run = cfg.effective(a.stage);
  write_text(dir / "config.txt", cfg.effective_text(a.stage));
  const auto encoded = encode_all(samples, tokenizer);

  training::TrainState state;
  const bool resuming = !a.resume.empty();
  if (resuming) {
    state = {loaded->checkpoint.step, loaded->checkpoint.epoch, loaded->checkpoint.optimizer};
  } else if (a.stage == 1) {
    fit_estimator(*model, samples);
    if (tc.pretrain_epochs > 0) {
      LossLog pre_log(dir / "pretrain_loss.csv", false);
      training::pretrain_decoder(*model, encoded, tc, [&](const training::EpochRecord& r, const training::TrainState&) {
        pre_log.add(r);
        out << "pretrain epoch " << r.epoch << " loss " << r.mean_loss << "\n";
      });
    }
  } else if (tc.lora.enabled) {
    attach_adapters(*model, tc.lora);
    prov.adapters = true;
    prov.lora = tc.lora;
  }
  model->configure_stage(a.stage);

  const std::string stage_name = "stage" + std::to_string(a.stage);
  LossLog log(dir / ("loss_" + stage_name + ".csv"), resuming);
  const std::string provenance = provenance_json(prov);
  auto on_epoch = [&](const training::EpochRecord& r, const training::TrainState& s) {
    log.add(r);
    training::save_checkpoint(training::capture(*model, provenance, a.stage, s.step, s.epoch, s.optimizer),
                              dir / (stage_name + "_last.ckpt"));
    out << stage_name << " epoch " << r.epoch << " loss " << r.mean_loss << " lr " << r.lr << "\n";
  };
  const auto result = training::train_stage(*model, encoded, tc, std::move(state), on_epoch);
  const auto& s = result.state;
  training::save_checkpoint(training::capture(*model, provenance, a.stage, s.step, s.epoch, s.optimizer),
                            dir / (stage_name + ".ckpt"));
  out << "wrote " << (dir / (stage_name + ".ckpt")).string() << "\n";
  return kExitOk;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string report;
  std::string config;
  std::vector<std::string> overrides;
};

std::optional<std::size_t> first_integer(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    if (!word.empty() && std::all_of(word.begin(), word.end(), [](unsigned char c) { return std::isdigit(c); })) {
      try {
        return std::stoul(word);
      } catch (const std::exception&) {
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

int eval(const EvalArgs& a, std::ostream& out) {
  const RunConfig cfg = load_config(a.config, a.overrides);
  const auto samples = load_samples(a.data);
  LoadedModel m = load_model(a.checkpoint);
  check_dims(m.model->config(), samples);
  const auto encoded = encode_all(samples, m.tokenizer);
  const std::size_t max_new = cfg.max_new_tokens();
  const std::size_t tolerance = cfg.tolerance();

  std::vector<generator::TokenSequence> outputs, targets;
  metrics::CountEval counts;
  std::size_t unparsed = 0;
  double nll_sum = 0.0, precision_sum = 0.0, recall_sum = 0.0;
  json predictions = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto& e = encoded[i];
    auto generated = m.model->generate(e, max_new);
    nll_sum += m.model->evaluate_loss(e);
    const std::string text = m.tokenizer.detokenize(generated);
    outputs.push_back(generated);
    targets.push_back(e.targets);
    if (data::query_family(s.query) == data::QueryFamily::kCounting && s.labels.rep_count > 0) {
      const auto parsed = first_integer(text);
      if (!parsed) ++unparsed;
      counts.predictions.push_back(parsed.value_or(0));
      counts.ground_truths.push_back(s.labels.rep_count);
    }
    Tape tape;
    const auto selection = m.model->prefix(tape, e).selection;
    const auto pr = metrics::selection_pr(selection.indices, s.labels.key_frames, tolerance);
    precision_sum += pr.precision;
    recall_sum += pr.recall;
    predictions.push_back({{"id", s.id}, {"query", s.query}, {"target", s.answer}, {"output", text},
                           {"selected", selection.indices}});
  }
  const double n = static_cast<double>(samples.size());
  json report;
  report["schema"] = "mtalk.eval";
  report["version"] = 1;
  report["samples"] = samples.size();
  report["exact_match"] = metrics::exact_match(outputs, targets);
  report["mean_nll"] = nll_sum / n;
  if (counts.predictions.empty()) {
    report["count"] = nullptr;
  } else {
    const auto c = metrics::count_metrics(counts);
    report["count"] = {{"n", counts.predictions.size()}, {"obo", c.obo}, {"obz", c.obz}, {"mae", c.mae},
                       {"rmse", c.rmse}, {"unparsed", unparsed}};
  }
  report["selection"] = {{"tolerance", tolerance}, {"precision", precision_sum / n}, {"recall", recall_sum / n}};
  report["predictions"] = predictions;
  report["config"] = m.provenance.run;
  write_text(a.report, report.dump(2) + "\n");
  out << "exact_match " << report["exact_match"].dump() << " mean_nll " << report["mean_nll"].dump() << "\n";
  return kExitOk;
}

// --- select -------------------------------------------------------------------

struct SelectArgs {
  std::string data;
  std::string checkpoint;
  std::string id;
  std::optional<std::size_t> k;
};

int select(const SelectArgs& a, std::ostream& out) {
  const auto samples = load_samples(a.data);
  LoadedModel m = load_model(a.checkpoint, a.k);
  const auto& sample = find_sample(samples, a.id);
  check_dims(m.model->config(), std::span(&sample, 1));
  const auto e = encode_sample(sample, m.tokenizer);
  Tape tape;
  const auto p = m.model->prefix(tape, e);
  json j;
  j["id"] = sample.id;
  j["frames"] = sample.motion.values.rows();
  j["k"] = m.model->config().viewpoints;
  j["scores"] = p.diagnostics.scores;
  j["selected"] = p.selection.indices;
  j["receptive_fields"] = p.diagnostics.receptive_fields;
  j["windows"] = p.diagnostics.windows;
  j["warnings"] = p.diagnostics.warnings;
  out << j.dump(2) << "\n";
  return kExitOk;
}

// --- flops --------------------------------------------------------------------

struct FlopsArgs {
  std::size_t lt = 16;
  std::size_t t = 256;
  std::size_t k = 16;
  std::size_t h = 32;
};

int flops(const FlopsArgs& a, std::ostream& out) {
  if (a.h == 0) throw ConfigError("--h must be positive");
  std::mt19937_64 rng(1);
  generator::Decoder decoder({4, a.h, 1, a.lt + std::max(a.t, a.k)}, rng);
  const auto r = metrics::measure_flops(decoder, a.lt, a.t, a.k);
  json j = {{"text_len", r.text_len},
            {"frames", r.frames},
            {"viewpoints", r.viewpoints},
            {"hidden", r.hidden},
            {"analytic_full", r.analytic_full},
            {"analytic_selected", r.analytic_selected},
            {"measured_full", r.measured_full},
            {"measured_selected", r.measured_selected},
            {"analytic_ratio", r.analytic_ratio()},
            {"measured_ratio", r.measured_ratio()}};
  out << j.dump(2) << "\n";
  return kExitOk;
}

// --- grad-check ---------------------------------------------------------------

int grad_check(std::uint64_t seed, bool inject_fault, std::ostream& out) {
  constexpr double kTolerance = 1e-4;
  const auto c = diagnostics::composite_grad_check(seed, inject_fault);
  const bool ok = c.result.max_relative_error <= kTolerance;
  json j = {{"seed", seed},
            {"shape", {{"T", c.shape.frames}, {"H", c.shape.hidden}, {"L_T", c.shape.text_len}, {"K", c.shape.viewpoints}}},
            {"coordinates", c.result.coordinates},
            {"max_relative_error", c.result.max_relative_error},
            {"worst_parameter", c.result.worst_parameter},
            {"worst_index", c.result.worst_index},
            {"worst_module", c.worst_module},
            {"analytic", c.result.analytic},
            {"numeric", c.result.numeric},
            {"pass", ok}};
  out << j.dump(2) << "\n";
  return ok ? kExitOk : kExitConfig;
}

// --- judge --------------------------------------------------------------------

struct JudgeArgs {
  std::string answers;
  std::string gt;
  std::string offline;
  std::string out;
  std::string review;
  std::string model;
  std::size_t concurrency = 4;
};

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<json> rows;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

std::string field(const json& row, const char* name, const fs::path& path) {
  if (!row.contains(name) || !row[name].is_string()) {
    throw ParseError(path.string() + ": record lacks string field '" + name + "'");
  }
  return row[name].get<std::string>();
}

int judge_cmd(const JudgeArgs& a, std::ostream& out) {
  judge::EndpointConfig cfg = judge::EndpointConfig::from_env();
  if (!a.offline.empty()) cfg.offline_dir = a.offline;
  if (!a.model.empty()) cfg.model = a.model;
  cfg.concurrency = a.concurrency;

  std::map<std::string, std::string> truth;
  for (const auto& row : read_jsonl(a.gt)) truth[field(row, "id", a.gt)] = field(row, "answer", a.gt);
  std::vector<judge::JudgeRequest> requests;
  for (const auto& row : read_jsonl(a.answers)) {
    judge::JudgeRequest r;
    r.id = field(row, "id", a.answers);
    r.question = field(row, "question", a.answers);
    r.answer = field(row, "answer", a.answers);
    const auto it = truth.find(r.id);
    if (it == truth.end()) throw ParseError("no ground truth for answer " + r.id);
    r.ground_truth = it->second;
    requests.push_back(std::move(r));
  }

  const auto result = judge::evaluate_remote(requests, cfg);
  std::string verdicts, review;
  for (const auto& rec : result.records) {
    json j = {{"id", rec.id}, {"verdict", judge::to_json(rec.verdict)}, {"parsed", rec.parsed}};
    if (!rec.parsed) {
      j["raw"] = rec.raw;
      j["error"] = rec.error;
    }
    verdicts += j.dump() + "\n";
  }
  for (const auto* rec : result.review_queue()) review += json{{"id", rec->id}, {"raw", rec->raw}}.dump() + "\n";
  if (a.out.empty()) {
    out << verdicts;
  } else {
    write_text(a.out, verdicts);
  }
  const std::string review_path = !a.review.empty() ? a.review : (a.out.empty() ? "" : a.out + ".review.jsonl");
  if (!review_path.empty()) write_text(review_path, review);
  out << "review queue: " << result.review_queue().size() << " of " << result.records.size() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Motion-language cross talker toolkit", "mtalk"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic JSONL dataset and vocabulary");
  gen_cmd->add_option("--out", gen.out, "output JSONL path")->required();
  gen_cmd->add_option("--samples", gen.samples, "number of samples");
  gen_cmd->add_option("--seed", gen.seed, "dataset seed");
  gen_cmd->add_option("--cycles-range", gen.cycles, "repetition range a..b");
  gen_cmd->add_option("--frames", gen.frames, "frames per sample");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "run one training stage");
  train_cmd->add_option("--data", tr.data, "training JSONL")->required();
  train_cmd->add_option("--stage", tr.stage, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
  train_cmd->add_option("--config", tr.config, "key=value config file");
  train_cmd->add_option("--out", tr.out, "output directory")->required();
  train_cmd->add_option("--init", tr.init, "checkpoint to start from");
  train_cmd->add_option("--resume", tr.resume, "checkpoint of an interrupted run of the same stage");
  train_cmd->add_option("--set", tr.overrides, "config override key=value (repeatable)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and write a JSON report");
  eval_cmd->add_option("--data", ev.data, "evaluation JSONL")->required();
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint")->required();
  eval_cmd->add_option("--report", ev.report, "report path")->required();
  eval_cmd->add_option("--config", ev.config, "key=value config file");
  eval_cmd->add_option("--set", ev.overrides, "config override key=value (repeatable)");

  SelectArgs sel;
  auto* select_cmd = app.add_subcommand("select", "print viewpoint selection for one sample");
  select_cmd->add_option("--data", sel.data, "JSONL")->required();
  select_cmd->add_option("--checkpoint", sel.checkpoint, "checkpoint")->required();
  select_cmd->add_option("--id", sel.id, "sample id")->required();
  select_cmd->add_option("--k", sel.k, "override the number of viewpoints");

  FlopsArgs fl;
  auto* flops_cmd = app.add_subcommand("flops", "analytic and measured decoder attention MACs");
  flops_cmd->set_help_flag("--help", "print help");
  flops_cmd->add_option("--lt", fl.lt, "text length L_T");
  flops_cmd->add_option("--t", fl.t, "frames T");
  flops_cmd->add_option("--k", fl.k, "viewpoints K");
  flops_cmd->add_option("--h", fl.h, "hidden width H");

  std::uint64_t gc_seed = 1;
  bool gc_fault = false;
  auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference check of the composite graph");
  gc_cmd->add_option("--seed", gc_seed, "seed");
  gc_cmd->add_flag("--inject-fault", gc_fault)->group("");

  JudgeArgs jd;
  auto* judge_cmd_app = app.add_subcommand("judge", "score answers with the judge protocol");
  judge_cmd_app->add_option("--answers", jd.answers, "JSONL of {id, question, answer}")->required();
  judge_cmd_app->add_option("--gt", jd.gt, "JSONL of {id, answer} coach answers")->required();
  judge_cmd_app->add_option("--offline", jd.offline, "fixture directory; no network access");
  judge_cmd_app->add_option("--out", jd.out, "verdict JSONL (default stdout)");
  judge_cmd_app->add_option("--review", jd.review, "review-queue JSONL");
  judge_cmd_app->add_option("--model", jd.model, "judge model name");
  judge_cmd_app->add_option("--concurrency", jd.concurrency, "parallel requests");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*gen_cmd) return gen_data(gen, out);
    if (*train_cmd) return train(tr, out);
    if (*eval_cmd) return eval(ev, out);
    if (*select_cmd) return select(sel, out);
    if (*flops_cmd) return flops(fl, out);
    if (*gc_cmd) return grad_check(gc_seed, gc_fault, out);
    if (*judge_cmd_app) return judge_cmd(jd, out);
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace mtalk::cli
