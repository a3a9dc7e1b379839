#pragma once
// Joint-objective training of PeeModel.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pee/corpus.hpp"
#include "pee/net.hpp"

namespace pee::net {

struct LossWeights {
  double gamma1 = 0.1;      // P-Match
  double gamma2 = 0.1;      // P-BoWs
  double lambda = 1.0;      // persona word boost in the P-BoWs target
  double threshold = 0.03;  // Jaccard threshold for P-Match labels
};

struct TrainingExample {
  std::size_t conversation = 0;
  DialogueInput input;
  std::vector<std::size_t> targets;   // response ids followed by <eos>
  std::vector<double> match_targets;  // one label per persona sentence in `input`
  std::vector<double> bows_targets;   // one entry per vocabulary id
};

// `expansion` holds the conversation's expanded persona words.
TrainingExample prepare_example(const corpus::DialogueExample& example,
                                const std::vector<std::string>& expansion,
                                const corpus::Vocabulary& vocab, const LossWeights& weights);

struct LossTerms {
  nk::Var total, nll, p_match, p_bows;
};

struct LossValues {
  double total = 0, nll = 0, p_match = 0, p_bows = 0;
};

LossTerms example_loss(nk::Tape& tape, const PeeModel& model, const TrainingExample& example,
                       const LossWeights& weights);
LossValues loss_values(const LossTerms& terms);

// Mean of each term over `examples`.
LossValues evaluate_loss(const PeeModel& model, const std::vector<TrainingExample>& examples,
                         const LossWeights& weights);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  double clip_norm = 5.0;
  LossWeights weights;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossValues train;       // mean over the epoch's examples, before each update
  std::optional<LossValues> valid;
  bool best = false;      // validation total improved (always true without validation)
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Shuffled mini-batches with `rng`; the batch gradient is the mean of the
// per-example gradients, clipped by global norm before each Adam step.
// Throws NumericError naming the batch and the loss terms on a non-finite loss.
std::vector<EpochRecord> train(PeeModel& model, const std::vector<TrainingExample>& train_set,
                               const std::vector<TrainingExample>& valid_set,
                               const TrainConfig& config, nk::Rng& rng,
                               const EpochCallback& on_epoch = {});

}  // namespace pee::net
