// Builds head/tail splits for a tiny corpus, scores predictions against them,
// then trains the toy model for a few epochs on synthetic biased data.

#include <iostream>
#include <vector>

#include "mccd/agreement.hpp"
#include "mccd/robustness.hpp"
#include "mccd/splitter.hpp"
#include "mccd/trainer.hpp"

using namespace mccd;

int main() {
  // 6 "yes", 2 "no" and 1 "maybe" in one group.
  std::vector<QASample> corpus;
  const char* answers[] = {"yes", "yes", "yes", "yes", "yes", "yes", "no", "no", "maybe"};
  for (int i = 0; i < 9; ++i)
    corpus.push_back({"q" + std::to_string(i), Task::AVQA, QuestionType::Existential, "Is the piano playing?",
                      answers[i], std::nullopt});

  const SplitConfig cfg;
  const SplitResult split = assign_splits(corpus, cfg);
  for (const auto& a : split.assignments)
    std::cout << a.sample_id << " " << a.answer_class << " -> " << to_string(a.label) << "\n";

  // A model that always answers "yes".
  std::vector<Prediction> preds;
  for (const auto& s : corpus) preds.push_back({s.id, "yes"});
  std::cout << render_report(score_predictions(corpus, split.assignments, preds), ReportFormat::TextTable);

  VoteTable votes{3, 2, {{{3, 0}, 5}, {{2, 1}, 3}, {{0, 3}, 2}}};
  std::cout << "kappa: " << fleiss_kappa(votes) << "\n";

  SyntheticConfig scfg;
  scfg.train_n = 1000;
  scfg.test_n = 500;
  const SyntheticData data = generate_synthetic(scfg);
  TrainConfig tcfg;
  tcfg.epochs = 5;
  const TrainResult run = train(data.train, tcfg, Variant::Full);
  for (const auto& e : run.history)
    std::cout << "epoch " << e.epoch << " L_a=" << e.answer << " L_d=" << e.discrepancy << " L_c=" << e.cycle
              << " acc=" << e.train_acc << "\n";
  std::cout << render_report(evaluate(run.model, data.test, data.splits), ReportFormat::TextTable);
}
