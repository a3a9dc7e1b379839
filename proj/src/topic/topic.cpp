#include "pee/topic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pee/error.hpp"
#include "pee/numkit/optim.hpp"

namespace pee::topic {

using nk::Tape;
using nk::Tensor;
using nk::Var;

TopicModel TopicModel::create(std::size_t vocab_dim, std::size_t hidden, std::size_t num_topics,
                              nk::Rng& rng) {
  if (vocab_dim == 0 || hidden == 0 || num_topics == 0) {
    throw ContractError("topic model dimensions must be positive");
  }
  TopicModel m;
  nk::Affine::create(m.params_, "topic.f_h", vocab_dim, hidden, rng);
  nk::Affine::create(m.params_, "topic.f_mu", hidden, num_topics, rng);
  nk::Affine::create(m.params_, "topic.f_sigma", hidden, num_topics, rng);
  nk::Affine::create(m.params_, "topic.f_hprime", num_topics, num_topics, rng);
  nk::Affine::create(m.params_, "topic.f_vprime", num_topics, vocab_dim, rng);
  m.bind();
  return m;
}

TopicModel TopicModel::from_params(nk::ParamStore params) {
  TopicModel m;
  m.params_ = std::move(params);
  m.bind();
  return m;
}

void TopicModel::bind() {
  auto layer = [&](const std::string& name) {
    nk::Affine a;
    a.weight = &params_.at(name + ".weight");
    a.bias = &params_.at(name + ".bias");
    return a;
  };
  f_h_ = layer("topic.f_h");
  f_mu_ = layer("topic.f_mu");
  f_sigma_ = layer("topic.f_sigma");
  f_hprime_ = layer("topic.f_hprime");
  f_vprime_ = layer("topic.f_vprime");
  vocab_dim_ = f_h_.in_dim();
  hidden_ = f_h_.out_dim();
  num_topics_ = f_mu_.out_dim();
  if (f_sigma_.out_dim() != num_topics_ || f_hprime_.in_dim() != num_topics_ ||
      f_hprime_.out_dim() != num_topics_ || f_vprime_.in_dim() != num_topics_ ||
      f_vprime_.out_dim() != vocab_dim_ || f_mu_.in_dim() != hidden_ ||
      f_sigma_.in_dim() != hidden_) {
    throw ContractError("topic model parameters have inconsistent shapes");
  }
}

Tensor TopicModel::word_topic_matrix() const {
  const Tensor& w = *f_vprime_.weight;  // [|V'|, K]
  Tensor out({num_topics_, vocab_dim_});
  for (std::size_t v = 0; v < vocab_dim_; ++v) {
    for (std::size_t k = 0; k < num_topics_; ++k) out.at(k, v) = w.at(v, k);
  }
  return out;
}

Encoding encode(Tape& tape, Var dense_doc, const TopicModel& model) {
  Var h = nk::softplus(model.f_h()(tape, dense_doc));
  return {model.f_mu()(tape, h), model.f_sigma()(tape, h), h};
}

Encoding encode(Tape& tape, const corpus::TfIdfDoc& doc, const TopicModel& model) {
  return encode(tape, tape.constant(Tensor({model.vocab_dim()}, doc.dense(model.vocab_dim()))),
                model);
}

Var reparameterize(Var mu, Var log_var, Var eps) {
  return nk::add(mu, nk::mul(nk::exp(nk::scale(log_var, 0.5)), eps));
}

Var decode(Tape& tape, Var z, const TopicModel& model) {
  if (z.size() != model.num_topics()) throw ContractError("decode: dim(z) must equal K");
  Var h = nk::softplus(model.f_hprime()(tape, z));
  return nk::softmax(model.f_vprime()(tape, h));
}

ElboTerms elbo_loss(Tape& tape, const corpus::TfIdfDoc& doc, const TopicModel& model,
                    const std::vector<double>& eps) {
  if (eps.size() != model.num_topics()) throw ContractError("elbo_loss: eps must have K entries");
  Var v = tape.constant(Tensor({model.vocab_dim()}, doc.dense(model.vocab_dim())));
  const Encoding enc = encode(tape, v, model);
  Var z = reparameterize(enc.mu, enc.log_var, tape.constant(Tensor::vector(eps)));
  Var probs = decode(tape, z, model);
  // Floor guards only against underflow of the softmax.
  Var recon = nk::neg(nk::dot(v, nk::log(probs, 1e-300)));
  // 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2)
  Var kl_terms = nk::sub(nk::add(nk::mul(enc.mu, enc.mu), nk::exp(enc.log_var)),
                         nk::add_scalar(enc.log_var, 1.0));
  Var kl = nk::scale(nk::sum(kl_terms), 0.5);
  return {nk::add(recon, kl), recon, kl};
}

std::vector<double> train_topic_model(TopicModel& model, const std::vector<corpus::TfIdfDoc>& docs,
                                      const TopicConfig& config, nk::Rng& rng) {
  if (docs.empty()) throw ContractError("train_topic_model: no documents");
  if (config.batch_size == 0) throw ContractError("train_topic_model: batch_size must be positive");
  auto params = model.params().tensors();
  nk::AdamState adam(nk::AdamConfig{config.learning_rate});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::size_t> order(docs.size());
  std::vector<double> trace;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      nk::Gradients batch;
      for (std::size_t i = start; i < end; ++i) {
        std::vector<double> eps(model.num_topics());
        for (double& e : eps) e = normal(rng);
        Tape tape;
        const ElboTerms terms = elbo_loss(tape, docs[order[i]], model, eps);
        const double loss = terms.loss.item();
        if (!std::isfinite(loss)) {
          throw NumericError("topic training: non-finite loss at epoch " +
                             std::to_string(epoch + 1) + ", document " + std::to_string(order[i]));
        }
        total += loss;
        batch.add(tape.backward(terms.loss));
      }
      batch.scale(1.0 / static_cast<double>(end - start));
      nk::clip_global_norm(params, batch, config.clip_norm);
      nk::adam_step(params, batch, adam);
    }
    trace.push_back(total / static_cast<double>(docs.size()));
  }
  return trace;
}

TopicTrainResult train_topic_model(const std::vector<corpus::TfIdfDoc>& docs,
                                   std::size_t vocab_dim, const TopicConfig& config) {
  nk::Rng rng(config.seed);
  TopicModel model = TopicModel::create(vocab_dim, config.hidden, config.num_topics, rng);
  auto trace = train_topic_model(model, docs, config, rng);
  return {std::move(model), std::move(trace)};
}

WordVectors::WordVectors(std::vector<TopicWordVector> vectors) : vectors_(std::move(vectors)) {
  for (std::size_t i = 0; i < vectors_.size(); ++i) index_.emplace(vectors_[i].token, i);
}

const TopicWordVector* WordVectors::find(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

WordVectors word_topic_vectors(const TopicModel& model, const corpus::Vocabulary& vocab) {
  if (vocab.content_size() != model.vocab_dim()) {
    throw ContractError("word_topic_vectors: vocabulary has " +
                        std::to_string(vocab.content_size()) + " words, model expects " +
                        std::to_string(model.vocab_dim()));
  }
  const Tensor w = model.word_topic_matrix();
  std::vector<TopicWordVector> out;
  out.reserve(model.vocab_dim());
  for (std::size_t v = 0; v < model.vocab_dim(); ++v) {
    TopicWordVector twv;
    twv.token = vocab.token(v + corpus::Vocabulary::kNumReserved);
    twv.u.resize(model.num_topics());
    for (std::size_t k = 0; k < model.num_topics(); ++k) twv.u[k] = w.at(k, v);
    out.push_back(std::move(twv));
  }
  return WordVectors(std::move(out));
}

}  // namespace pee::topic
