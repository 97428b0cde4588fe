#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "dfr/nn/interfaces.hpp"
#include "dfr/nn/vocab.hpp"

namespace dfr::nn {

struct ClassifierConfig {
  int dim = 32;
  int max_len = 128;
  int epochs = 30;
  double lr = 5e-3;
  std::uint64_t seed = 42;
};

struct ClassifierTrainReport {
  std::vector<double> epoch_losses;
  double train_accuracy = 0.0;
};

// Tiny additive-attention classifier: embeddings + learned positions, one
// attention layer whose query plays the classification-token role, linear
// head. The attention weights over input tokens are part of the public
// output (saliency extraction reads them).
class AttentionClassifier : public BinaryTextClassifier {
 public:
  static AttentionClassifier train(const std::vector<std::string>& texts,
                                   const std::vector<int>& labels,
                                   const ClassifierConfig& config,
                                   ClassifierTrainReport* report = nullptr);

  ClassifierOutput run(const std::string& text) const override;

  double accuracy(const std::vector<std::string>& texts,
                  const std::vector<int>& labels) const;

  void save(const std::string& path) const;
  static AttentionClassifier load(const std::string& path);

  const Vocab& vocab() const { return vocab_; }
  const ClassifierConfig& config() const { return config_; }

 private:
  Vocab vocab_;
  ClassifierConfig config_;
  Eigen::MatrixXd emb_;   // V x d
  Eigen::MatrixXd pos_;   // max_len x d
  Eigen::MatrixXd attn_w_;  // d x d
  Eigen::MatrixXd attn_b_;  // d x 1
  Eigen::MatrixXd query_;   // d x 1
  Eigen::MatrixXd head_w_;  // 2 x d
  Eigen::MatrixXd head_b_;  // 2 x 1
};

}  // namespace dfr::nn
