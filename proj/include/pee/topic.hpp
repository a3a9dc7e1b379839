#pragma once
// Variational topic model over tf-idf document vectors.
//
//   h = softplus(f_h(v)), mu = f_mu(h), log sigma^2 = f_sigma(h)
//   z = mu + exp(0.5 log sigma^2) * eps
//   v' = softmax(f_v'(softplus(f_h'(z))))
//
// dim(z) = K, so the weight of f_v' read as K x |V'| is the word-topic matrix
// and its columns are topic-space word vectors.

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pee/corpus.hpp"
#include "pee/numkit/layers.hpp"

namespace pee::topic {

struct TopicConfig {
  std::size_t num_topics = 50;
  std::size_t hidden = 256;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double learning_rate = 2e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
};

class TopicModel {
 public:
  static TopicModel create(std::size_t vocab_dim, std::size_t hidden, std::size_t num_topics,
                           nk::Rng& rng);
  // Rebinds layers to tensors already in `params` (checkpoint loading).
  static TopicModel from_params(nk::ParamStore params);

  std::size_t vocab_dim() const { return vocab_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t num_topics() const { return num_topics_; }

  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }

  const nk::Affine& f_h() const { return f_h_; }
  const nk::Affine& f_mu() const { return f_mu_; }
  const nk::Affine& f_sigma() const { return f_sigma_; }
  const nk::Affine& f_hprime() const { return f_hprime_; }
  const nk::Affine& f_vprime() const { return f_vprime_; }

  // Word-topic matrix W, shape [K, |V'|].
  nk::Tensor word_topic_matrix() const;

 private:
  void bind();

  nk::ParamStore params_;
  nk::Affine f_h_, f_mu_, f_sigma_, f_hprime_, f_vprime_;
  std::size_t vocab_dim_ = 0;
  std::size_t hidden_ = 0;
  std::size_t num_topics_ = 0;
};

struct Encoding {
  nk::Var mu;
  nk::Var log_var;
  nk::Var hidden;
};

Encoding encode(nk::Tape& tape, const corpus::TfIdfDoc& doc, const TopicModel& model);
Encoding encode(nk::Tape& tape, nk::Var dense_doc, const TopicModel& model);

// z = mu + exp(0.5 * log_var) * eps
nk::Var reparameterize(nk::Var mu, nk::Var log_var, nk::Var eps);

// Probability vector over V'.
nk::Var decode(nk::Tape& tape, nk::Var z, const TopicModel& model);

struct ElboTerms {
  nk::Var loss;            // reconstruction + kl
  nk::Var reconstruction;  // -sum_w v_w log v'_w
  nk::Var kl;              // KL(N(mu, sigma^2) || N(0, I))
};

ElboTerms elbo_loss(nk::Tape& tape, const corpus::TfIdfDoc& doc, const TopicModel& model,
                    const std::vector<double>& eps);

struct TopicTrainResult {
  TopicModel model;
  std::vector<double> epoch_losses;
};

// Adam over shuffled mini-batches of the mean negative ELBO, one eps sample
// per document per step. Throws NumericError on a non-finite loss.
TopicTrainResult train_topic_model(const std::vector<corpus::TfIdfDoc>& docs,
                                   std::size_t vocab_dim, const TopicConfig& config);

// Continues training `model` in place. Returns the per-epoch mean losses.
std::vector<double> train_topic_model(TopicModel& model, const std::vector<corpus::TfIdfDoc>& docs,
                                      const TopicConfig& config, nk::Rng& rng);

struct TopicWordVector {
  std::string token;
  std::vector<double> u;  // column of W, length K
};

// Columns of W keyed by token. `vocab` must be the vocabulary the model was
// trained over (content_size() == model.vocab_dim()).
class WordVectors {
 public:
  WordVectors() = default;
  explicit WordVectors(std::vector<TopicWordVector> vectors);

  const std::vector<TopicWordVector>& all() const noexcept { return vectors_; }
  const TopicWordVector* find(const std::string& token) const;
  std::size_t size() const noexcept { return vectors_.size(); }

 private:
  std::vector<TopicWordVector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

WordVectors word_topic_vectors(const TopicModel& model, const corpus::Vocabulary& vocab);

}  // namespace pee::topic
