#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "dfr/nn/interfaces.hpp"
#include "dfr/nn/vocab.hpp"

namespace dfr::nn {

enum class BackendFamily { decoder_only, encoder_decoder };

struct LmConfig {
  int dim = 48;
  int ffn = 96;
  int max_len = 160;
  double lr = 3e-3;
  std::uint64_t seed = 1;
  BackendFamily family = BackendFamily::decoder_only;
};

struct SeqExample {
  std::string input;   // conditioning prefix, may be empty for pure LM text
  std::string output;  // the sequence the model should produce
};

struct LmTrainReport {
  std::vector<double> epoch_losses;  // mean nats per loss-bearing token
  // Per example: number of loss-bearing target positions, excluding the
  // synthetic end-of-sequence marker (which also carries loss but is an
  // artifact of sequence framing, not of the serialized text).
  std::vector<std::size_t> loss_positions;
  std::vector<std::size_t> eos_positions;  // always 1 per example
  std::uint64_t seed = 0;
};

// Single-layer causal self-attention language model over whitespace tokens.
// decoder_only computes loss over the whole [input; output] sequence;
// encoder_decoder masks the input prefix so only output tokens bear loss.
class TinyLm : public TextGenerator {
 public:
  TinyLm() = default;

  // Initializes parameters and vocabulary from the given texts/pairs.
  static TinyLm create(const std::vector<SeqExample>& examples,
                       const LmConfig& config,
                       const std::vector<std::string>& special_tokens = {});

  // Further training on examples; returns the report for this run.
  LmTrainReport train(const std::vector<SeqExample>& examples, int epochs);

  // Mean nats per loss-bearing token over the examples, no updates.
  double evaluate(const std::vector<SeqExample>& examples) const;

  std::vector<std::string> generate(const std::string& prompt,
                                    const DecodingConfig& config) const override;
  std::size_t count_tokens(const std::string& text) const override;

  // Top beam only, beam search with the given size.
  std::string generate_beam(const std::string& prompt, int beam_size,
                            int max_new_tokens) const;

  void save(const std::string& path) const;
  static TinyLm load(const std::string& path);

  const Vocab& vocab() const { return vocab_; }
  const LmConfig& config() const { return config_; }

  // True when every marker tokenizes to one id (they always do under the
  // whitespace vocabulary; exposed so callers can assert it).
  bool token_is_atomic(const std::string& marker) const;

  // Next-token log-probabilities given a fixed id prefix (teacher-forced).
  Eigen::VectorXd next_token_logprobs(const std::vector<int>& prefix) const;

 private:
  struct Cache;
  void forward(const std::vector<int>& ids, Cache& cache) const;

  Vocab vocab_;
  LmConfig config_;
  Eigen::MatrixXd emb_;   // V x d
  Eigen::MatrixXd pos_;   // max_len x d
  Eigen::MatrixXd wq_, wk_, wv_;  // d x d
  Eigen::MatrixXd w1_;    // ffn x d
  Eigen::MatrixXd b1_;    // ffn x 1
  Eigen::MatrixXd w2_;    // d x ffn
  Eigen::MatrixXd b2_;    // d x 1
  Eigen::MatrixXd out_w_;  // V x d
  Eigen::MatrixXd out_b_;  // V x 1

  friend struct TinyLmGradCheck;
};

// Loss-bearing position counts for one example under a backend family,
// computed from the tokenizer alone (the mask definition).
std::size_t loss_position_count(const Vocab& vocab, const SeqExample& ex,
                                BackendFamily family);

}  // namespace dfr::nn
