// mccd: command-line front end for splitting, scoring, agreement, synthetic
// data generation, toy training and gradient checking.
//
// Exit codes: 0 success, 1 a check failed, 2 usage or IO error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mccd/ablation.hpp"
#include "mccd/agreement.hpp"
#include "mccd/binary_io.hpp"
#include "mccd/dataset.hpp"
#include "mccd/gradcheck.hpp"
#include "mccd/robustness.hpp"
#include "mccd/splitter.hpp"
#include "mccd/synthetic.hpp"
#include "mccd/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mccd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

constexpr double kGradTolerance = 1e-5;

// Usage and IO problems; both map to exit code 2.
struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 42;
  unsigned threads = default_thread_count();
  std::string output_dir = ".";
  std::string format = "text";
};

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw CliError("cannot open '" + path + "'");
  return in;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(content.data(), static_cast<std::streamsize>(content.size())))
    throw CliError("cannot write '" + path.string() + "'");
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

template <typename F>
auto parse_file(const std::string& path, F parse) {
  auto in = open_in(path);
  try {
    return parse(in);
  } catch (const FormatError& e) {
    throw CliError(path + ": " + e.what());
  }
}

std::vector<QASample> load_samples(const std::string& path) {
  auto parsed = parse_file(path, [](std::istream& in) { return parse_samples(in); });
  for (const auto& w : parsed.warnings) std::cerr << "warning: " << path << ": " << w << "\n";
  return std::move(parsed.samples);
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json mccd_json(const MccdConfig& m) {
  return {{"alpha", m.alpha},
          {"beta", m.beta},
          {"epsilon", m.epsilon},
          {"distance_space", std::string(to_string(m.distance_space))},
          {"discrepancy_terms", {{"audio", m.discrepancy_terms[0]}, {"video", m.discrepancy_terms[1]},
                                 {"question", m.discrepancy_terms[2]}}},
          {"active_discrepancy_terms", m.active_terms()}};
}

json synthetic_json(const SyntheticConfig& s) {
  return {{"num_classes", s.num_classes},   {"feature_dim", s.feature_dim},
          {"train_n", s.train_n},           {"test_n", s.test_n},
          {"bias_strength", s.bias_strength}, {"tail_fraction", s.tail_fraction},
          {"num_head_classes", s.head_classes()}, {"cue_scale", s.cue_scale},
          {"cue_noise", s.cue_noise},       {"seed", s.seed}};
}

// Flags shared by the commands that train.
struct ObjectiveFlags {
  double alpha = MccdConfig{}.alpha;
  double beta = MccdConfig{}.beta;
  double epsilon = MccdConfig{}.epsilon;
  std::string distance_space = "probability";
  std::string variant = "full";
  std::size_t epochs = TrainConfig{}.epochs;

  void add_to(CLI::App* cmd, bool with_variant) {
    cmd->add_option("--alpha", alpha, "Weight of the discrepancy term")->check(CLI::NonNegativeNumber);
    cmd->add_option("--beta", beta, "Weight of the cycle term")->check(CLI::NonNegativeNumber);
    cmd->add_option("--epsilon", epsilon, "Denominator offset of the inverse distances")->check(CLI::PositiveNumber);
    cmd->add_option("--distance-space", distance_space, "probability or raw_logit")
        ->check(CLI::IsMember({"probability", "raw_logit"}));
    if (with_variant) {
      std::vector<std::string> names;
      for (Variant v : kAllVariants) names.emplace_back(to_string(v));
      cmd->add_option("--variant", variant, "Objective variant")->check(CLI::IsMember(names));
    }
    cmd->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
  }

  MccdConfig mccd() const {
    MccdConfig m;
    m.alpha = alpha;
    m.beta = beta;
    m.epsilon = epsilon;
    m.distance_space = distance_space == "raw_logit" ? DistanceSpace::RawLogit : DistanceSpace::Probability;
    m.validate();
    return m;
  }

  TrainConfig train_config(const Globals& g) const {
    TrainConfig t;
    t.epochs = epochs;
    t.mccd = mccd();
    t.seed = g.seed;
    t.threads = g.threads;
    t.validate();
    return t;
  }
};

// ---------------------------------------------------------------- split

struct SplitFlags {
  std::string input;
  double entropy_threshold = 0.9;
  double tail_factor = 1.2;
  bool tie_both_head = false;
};

int cmd_split(const Globals& g, const SplitFlags& f) {
  SplitConfig cfg;
  cfg.entropy_threshold = f.entropy_threshold;
  cfg.tail_factor = Ratio::from_double(f.tail_factor);
  cfg.two_answer_tie_both_head = f.tie_both_head;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError(e.what());
  }
  const auto corpus = load_samples(f.input);
  if (corpus.empty()) throw CliError(f.input + ": corpus is empty");
  SplitResult r;
  try {
    r = assign_splits(corpus, cfg);
  } catch (const SplitError& e) {
    throw CliError(e.what());
  }
  const fs::path dir = prepare_dir(g.output_dir);
  std::ostringstream splits;
  write_splits(splits, r.assignments);
  write_file(dir / "splits.jsonl", splits.str());
  write_file(dir / "groups.json", group_report_json(r, cfg).dump(2) + "\n");

  std::size_t tails = 0;
  for (const auto& a : r.assignments) tails += a.label == SplitLabel::Tail;
  if (g.format == "json") {
    std::cout << json{{"schema_version", 1},
                      {"assignments", r.assignments.size()},
                      {"head", r.assignments.size() - tails},
                      {"tail", tails},
                      {"skipped_groups", r.skipped.size()}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "assigned " << r.assignments.size() << " samples (" << r.assignments.size() - tails << " head, "
              << tails << " tail); " << r.skipped.size() << " group(s) skipped\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- score

struct ScoreFlags {
  std::string gold, splits, preds;
};

int cmd_score(const Globals& g, const ScoreFlags& f) {
  const auto gold = load_samples(f.gold);
  const auto splits = parse_file(f.splits, [](std::istream& in) { return parse_splits(in); });
  const auto preds = parse_file(f.preds, [](std::istream& in) { return parse_predictions(in); });
  RobustnessReport r;
  try {
    r = score_predictions(gold, splits, preds);
  } catch (const ScoringError& e) {
    throw CliError(e.what());
  }
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << render_report(r, g.format == "json" ? ReportFormat::Json : ReportFormat::TextTable);
  return kExitOk;
}

// ---------------------------------------------------------------- kappa

int cmd_kappa(const Globals& g, const std::string& votes) {
  auto in = open_in(votes);
  FleissTerms terms;
  try {
    terms = fleiss_terms(vote_table_from_json(json::parse(in)));
  } catch (const json::exception& e) {
    throw CliError(votes + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CliError(votes + ": " + e.what());
  } catch (const std::domain_error& e) {
    throw CliError(votes + ": " + e.what());
  }
  if (g.format == "json") {
    std::cout << json{{"schema_version", 1},
                      {"kappa", terms.kappa},
                      {"observed_agreement", terms.observed},
                      {"expected_agreement", terms.expected}}
                     .dump(2)
              << "\n";
  } else {
    std::printf("%.4f\n", terms.kappa);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const Globals& g, const std::string& input, const std::string& vocab_path) {
  std::set<std::string> vocab;
  if (!vocab_path.empty()) {
    auto in = open_in(vocab_path);
    vocab = read_vocabulary(in);
  }
  const auto corpus = load_samples(input);
  const CorpusStats st = validate_corpus(corpus, vocab_path.empty() ? nullptr : &vocab);
  if (g.format == "json") {
    std::cout << to_json(st).dump(2) << "\n";
  } else {
    std::cout << "samples: " << st.sample_count << "\n";
    std::cout << "vocabulary: " << st.vocabulary.size() << " answer classes\n";
    for (const auto& [key, n] : st.per_group_counts) std::cout << "  " << to_string(key) << ": " << n << "\n";
    for (const auto& id : st.duplicate_ids) std::cout << "duplicate id: " << id << "\n";
    for (const auto& w : st.warnings) std::cout << "warning: " << w << "\n";
  }
  return st.duplicate_ids.empty() ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- gen-synth

struct SynthFlags {
  SyntheticConfig cfg;
};

int cmd_gen_synth(const Globals& g, SynthFlags f) {
  f.cfg.seed = g.seed;
  try {
    f.cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError(e.what());
  }
  const SyntheticData d = generate_synthetic(f.cfg);
  const fs::path dir = prepare_dir(g.output_dir);
  for (const auto* part : {&d.train, &d.test}) {
    const std::string name = part == &d.train ? "train" : "test";
    std::ostringstream samples, feats;
    write_samples(samples, part->samples);
    write_features(feats, part->features);
    write_file(dir / (name + ".jsonl"), samples.str());
    write_file(dir / (name + ".features.bin"), feats.str());
  }
  std::ostringstream splits;
  write_splits(splits, d.splits);
  write_file(dir / "splits.jsonl", splits.str());
  const json meta = {{"schema_version", 1}, {"config", synthetic_json(f.cfg)}, {"class_names", d.train.class_names}};
  write_file(dir / "meta.json", meta.dump(2) + "\n");
  if (g.format == "json")
    std::cout << json{{"train", d.train.size()}, {"test", d.test.size()}, {"output_dir", g.output_dir}}.dump(2) << "\n";
  else
    std::cout << "wrote " << d.train.size() << " train and " << d.test.size() << " test samples to " << g.output_dir
              << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train-toy

SyntheticCorpus load_corpus(const fs::path& dir, const std::string& name, const std::vector<std::string>& classes) {
  SyntheticCorpus c;
  c.class_names = classes;
  c.samples = load_samples((dir / (name + ".jsonl")).string());
  auto in = open_in((dir / (name + ".features.bin")).string(), std::ios::binary);
  try {
    c.features = read_features(in);
  } catch (const BinaryFormatError& e) {
    throw CliError((dir / (name + ".features.bin")).string() + ": " + e.what());
  }
  if (c.features.size() != c.samples.size())
    throw CliError(name + ": " + std::to_string(c.samples.size()) + " samples but " +
                   std::to_string(c.features.size()) + " feature rows");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = i;
  for (const auto& s : c.samples) {
    const auto it = index.find(s.answer);
    if (it == index.end()) throw CliError(name + ": answer '" + s.answer + "' is not in meta.json class_names");
    c.labels.push_back(it->second);
  }
  return c;
}

json history_line(const EpochStats& e) {
  return {{"epoch", e.epoch},        {"learning_rate", e.learning_rate}, {"answer_loss", e.answer},
          {"discrepancy_loss", e.discrepancy}, {"cycle_loss", e.cycle},   {"train_acc", e.train_acc}};
}

struct TrainFlags {
  std::string data_dir;
  ObjectiveFlags objective;
  bool no_timestamp = false;
};

int cmd_train_toy(const Globals& g, const TrainFlags& f) {
  const TrainConfig tcfg = f.objective.train_config(g);
  const Variant variant = *parse_variant(f.objective.variant);
  const fs::path data(f.data_dir);
  json meta;
  {
    auto in = open_in((data / "meta.json").string());
    try {
      meta = json::parse(in);
    } catch (const json::exception& e) {
      throw CliError("meta.json: " + std::string(e.what()));
    }
  }
  const auto classes = meta.at("class_names").get<std::vector<std::string>>();
  const SyntheticCorpus train_set = load_corpus(data, "train", classes);
  const SyntheticCorpus test_set = load_corpus(data, "test", classes);
  const auto splits =
      parse_file((data / "splits.jsonl").string(), [](std::istream& in) { return parse_splits(in); });

  const TrainResult r = train(train_set, tcfg, variant);
  const RobustnessReport rep = evaluate(r.model, test_set, splits, tcfg.threads);
  const HeadStatistics stats = head_statistics(r.model, test_set);

  const fs::path dir = prepare_dir(g.output_dir);
  json config = {{"schema_version", 1},
                 {"variant", f.objective.variant},
                 {"objective", mccd_json(apply_variant(tcfg.mccd, variant))},
                 {"epochs", tcfg.epochs},
                 {"batch_size", tcfg.batch_size},
                 {"learning_rate", tcfg.learning_rate},
                 {"lr_decay", {{"every_epochs", tcfg.lr_decay_every}, {"factor", tcfg.lr_decay_factor}}},
                 {"optimizer", {{"name", "adam"}, {"beta1", tcfg.adam_beta1}, {"beta2", tcfg.adam_beta2},
                                {"epsilon", tcfg.adam_epsilon}}},
                 {"model", {{"feature_dim", r.model.shape().feature_dim}, {"hidden", r.model.shape().hidden},
                            {"bias_hidden", r.model.shape().bias_hidden}, {"classes", r.model.shape().classes}}},
                 {"seed", tcfg.seed},
                 {"data_dir", f.data_dir}};
  if (!f.no_timestamp) config["created_at"] = timestamp_utc();
  write_file(dir / "config.json", config.dump(2) + "\n");

  std::ostringstream history;
  for (const auto& e : r.history) history << history_line(e).dump() << "\n";
  write_file(dir / "history.jsonl", history.str());

  std::ostringstream model;
  write_model(model, r.model);
  write_file(dir / "model.bin", model.str());

  json report = report_json(rep);
  report["head_statistics"] = {{"unimodal_pairwise_kl", stats.unimodal_pairwise_kl},
                               {"unimodal_fused_distance", stats.unimodal_fused_distance}};
  write_file(dir / "report.json", report.dump(2) + "\n");

  std::cout << render_report(rep, g.format == "json" ? ReportFormat::Json : ReportFormat::TextTable);
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradFlags {
  std::string loss = "joint";
  std::size_t classes = 10;
  std::size_t batch = 4;
  double step = 1e-5;
  ObjectiveFlags objective;
};

int cmd_gradcheck(const Globals& g, const GradFlags& f) {
  const MccdConfig cfg = f.objective.mccd();
  Rng rng(g.seed);
  std::vector<LogitBundle> batch(f.batch, LogitBundle::zeros(f.classes));
  for (auto& b : batch)
    for (Head h : kAllHeads)
      for (double& x : b.head(h)) x = 1.5 * rng.normal();
  std::vector<std::size_t> labels(f.batch);
  for (auto& l : labels) l = rng.below(f.classes);

  BatchLoss loss;
  if (f.loss == "answer") loss = [&](auto b) { return answer_loss(b, labels); };
  else if (f.loss == "discrepancy") loss = [&](auto b) { return discrepancy_loss(b, cfg); };
  else if (f.loss == "cycle") loss = [&](auto b) { return cycle_loss(b, cfg); };
  else loss = [&](auto b) { return joint_loss(b, labels, cfg).total; };

  const GradCheckResult r = finite_difference_check(loss, batch, f.step);
  const json out = {{"loss", f.loss},
                    {"max_rel_err", r.max_rel_err},
                    {"mode", std::string(to_string(cfg.distance_space))},
                    {"seed", g.seed}};
  std::cout << out.dump(2) << "\n";
  return r.max_rel_err < kGradTolerance ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- ablation / grid

struct AblationFlags {
  std::size_t seeds = 10;
  std::vector<std::string> variants;
  double bias_strength = SyntheticConfig{}.bias_strength;
  ObjectiveFlags objective;
};

std::vector<std::uint64_t> seed_list(std::uint64_t first, std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = first + i;
  return s;
}

int cmd_ablation(const Globals& g, const AblationFlags& f) {
  const TrainConfig tcfg = f.objective.train_config(g);
  SyntheticConfig scfg;
  scfg.bias_strength = f.bias_strength;
  scfg.validate();
  std::vector<Variant> variants;
  if (f.variants.empty()) variants.assign(kAllVariants.begin(), kAllVariants.end());
  for (const auto& v : f.variants) variants.push_back(*parse_variant(v));

  const AblationTable t = ablation_run(scfg, tcfg, variants, seed_list(g.seed, f.seeds), g.threads);
  json j = ablation_json(t);
  j["synthetic"] = synthetic_json(scfg);
  j["synthetic"].erase("seed");
  j["seeds"] = seed_list(g.seed, f.seeds);
  j["epochs"] = tcfg.epochs;
  const fs::path dir = prepare_dir(g.output_dir);
  write_file(dir / "ablation.json", j.dump(2) + "\n");
  std::cout << (g.format == "json" ? j.dump(2) + "\n" : ablation_text(t));
  return kExitOk;
}

struct GridFlags {
  std::vector<double> alphas = {0.0, 1e-3, 1e-2, 1e-1};
  std::vector<double> betas = {0.0, 1e-1, 3e-1, 1.0};
  std::size_t seeds = 3;
  ObjectiveFlags objective;
};

int cmd_grid(const Globals& g, const GridFlags& f) {
  TrainConfig tcfg = f.objective.train_config(g);
  const Variant variant = *parse_variant(f.objective.variant);
  for (double a : f.alphas)
    if (!(a >= 0)) throw CliError("--alphas must be >= 0");
  for (double b : f.betas)
    if (!(b >= 0)) throw CliError("--betas must be >= 0");
  const SyntheticConfig scfg;
  std::ostringstream csv;
  csv << "alpha,beta,median_head_acc,median_tail_acc,median_overall_acc\n";
  const auto seeds = seed_list(g.seed, f.seeds);
  const std::vector<Variant> one{variant};
  for (double a : f.alphas)
    for (double b : f.betas) {
      tcfg.mccd.alpha = a;
      tcfg.mccd.beta = b;
      const AblationTable t = ablation_run(scfg, tcfg, one, seeds, g.threads);
      char line[160];
      std::snprintf(line, sizeof line, "%.6g,%.6g,%.4f,%.4f,%.4f\n", a, b, t.rows[0].median_head,
                    t.rows[0].median_tail, t.rows[0].median_overall);
      csv << line;
    }
  const fs::path dir = prepare_dir(g.output_dir);
  write_file(dir / "grid.csv", csv.str());
  std::cout << csv.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Head/tail robustness splits, scoring and debiasing toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads (default: hardware concurrency)")->check(CLI::PositiveNumber);
  app.add_option("--output-dir", g.output_dir, "Directory for output files")->envname("MCCD_OUTPUT_DIR");
  app.add_option("--format", g.format, "text or json")->check(CLI::IsMember({"text", "json"}));

  SplitFlags split;
  auto* c_split = app.add_subcommand("split", "Assign head/tail labels to a corpus");
  c_split->add_option("--input", split.input, "Corpus JSONL")->required();
  c_split->add_option("--entropy-threshold", split.entropy_threshold, "Keep groups with normalized entropy below this")
      ->check(CLI::Range(0.0, 1.0));
  c_split->add_option("--tail-factor", split.tail_factor, "Tail iff count <= factor * mean count")
      ->check(CLI::PositiveNumber);
  c_split->add_flag("--tie-both-head", split.tie_both_head, "Label both answers of a tied two-answer group head");

  ScoreFlags score;
  auto* c_score = app.add_subcommand("score", "Score predictions under a split");
  c_score->add_option("--gold", score.gold, "Gold corpus JSONL")->required();
  c_score->add_option("--splits", score.splits, "Split assignments JSONL")->required();
  c_score->add_option("--preds", score.preds, "Predictions JSONL")->required();

  std::string votes;
  auto* c_kappa = app.add_subcommand("kappa", "Fleiss' kappa of a vote table");
  c_kappa->add_option("--votes", votes, "Vote table JSON")->required();

  std::string validate_input, vocab;
  auto* c_validate = app.add_subcommand("validate", "Corpus statistics and structural checks");
  c_validate->add_option("--input", validate_input, "Corpus JSONL")->required();
  c_validate->add_option("--vocab", vocab, "Fixed answer vocabulary, one class per line");

  SynthFlags synth;
  auto* c_synth = app.add_subcommand("gen-synth", "Generate the synthetic biased corpus");
  c_synth->add_option("--bias-strength", synth.cfg.bias_strength, "Probability the question cue copies the label")
      ->check(CLI::Range(0.0, 1.0));
  c_synth->add_option("--classes", synth.cfg.num_classes, "Number of answer classes")->check(CLI::Range(2, 100000));
  c_synth->add_option("--feature-dim", synth.cfg.feature_dim, "Feature dimension per modality")
      ->check(CLI::PositiveNumber);
  c_synth->add_option("--train-n", synth.cfg.train_n, "Training samples")->check(CLI::PositiveNumber);
  c_synth->add_option("--test-n", synth.cfg.test_n, "Test samples")->check(CLI::PositiveNumber);

  TrainFlags train_flags;
  auto* c_train = app.add_subcommand("train-toy", "Train the toy model on a gen-synth directory");
  c_train->add_option("--data-dir", train_flags.data_dir, "Output directory of gen-synth")->required();
  train_flags.objective.add_to(c_train, true);
  c_train->add_flag("--no-timestamp", train_flags.no_timestamp, "Omit created_at from config.json");

  GradFlags grad;
  auto* c_grad = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  c_grad->add_option("--loss", grad.loss, "answer, discrepancy, cycle or joint")
      ->check(CLI::IsMember({"answer", "discrepancy", "cycle", "joint"}));
  c_grad->add_option("--classes", grad.classes, "Answer classes")->check(CLI::Range(2, 4096));
  c_grad->add_option("--batch", grad.batch, "Batch size")->check(CLI::Range(1, 4096));
  c_grad->add_option("--step", grad.step, "Finite-difference step")->check(CLI::PositiveNumber);
  grad.objective.add_to(c_grad, false);

  AblationFlags abl;
  auto* c_abl = app.add_subcommand("ablation", "Median accuracies of objective variants over seeds");
  c_abl->add_option("--seeds", abl.seeds, "Number of seeds, starting at --seed")->check(CLI::PositiveNumber);
  std::vector<std::string> variant_names;
  for (Variant v : kAllVariants) variant_names.emplace_back(to_string(v));
  c_abl->add_option("--variants", abl.variants, "Variants to run (default: all)")
      ->delimiter(',')
      ->check(CLI::IsMember(variant_names));
  c_abl->add_option("--bias-strength", abl.bias_strength, "Synthetic bias strength")->check(CLI::Range(0.0, 1.0));
  abl.objective.add_to(c_abl, false);

  GridFlags grid;
  auto* c_grid = app.add_subcommand("grid", "Alpha/beta sensitivity grid as CSV");
  c_grid->add_option("--alphas", grid.alphas, "Alpha values")->delimiter(',');
  c_grid->add_option("--betas", grid.betas, "Beta values")->delimiter(',');
  c_grid->add_option("--seeds", grid.seeds, "Number of seeds, starting at --seed")->check(CLI::PositiveNumber);
  grid.objective.add_to(c_grid, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_split) return cmd_split(g, split);
    if (*c_score) return cmd_score(g, score);
    if (*c_kappa) return cmd_kappa(g, votes);
    if (*c_validate) return cmd_validate(g, validate_input, vocab);
    if (*c_synth) return cmd_gen_synth(g, synth);
    if (*c_train) return cmd_train_toy(g, train_flags);
    if (*c_grad) return cmd_gradcheck(g, grad);
    if (*c_abl) return cmd_ablation(g, abl);
    if (*c_grid) return cmd_grid(g, grid);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
