#pragma once

#include <array>
#include <string>
#include <vector>

#include "dfr/corpus.hpp"

namespace dfr::nn {

// Left-to-right text generator. Backend-neutral: real tiny models and test
// stubs implement the same surface.
class TextGenerator {
 public:
  virtual ~TextGenerator() = default;

  // Returns up to config.num_return continuations (prompt excluded).
  virtual std::vector<std::string> generate(const std::string& prompt,
                                            const DecodingConfig& config) const = 0;

  // Token count under the generator's own tokenizer (guards decode cost).
  virtual std::size_t count_tokens(const std::string& text) const = 0;
};

// Text-to-text model (trained input -> output mapping).
class Seq2SeqModel {
 public:
  virtual ~Seq2SeqModel() = default;
  virtual std::string generate_one(const std::string& input) const = 0;
};

// If-then commonsense model: (event sentence, relation) -> tail phrases,
// ordered as the decoder's beam.
class IfThenModel {
 public:
  virtual ~IfThenModel() = default;
  virtual bool has_relation(const std::string& relation) const = 0;
  virtual std::vector<std::string> query(const std::string& event,
                                         const std::string& relation,
                                         int beam_size) const = 0;
};

// Output of a binary classifier with token-level attention.
struct ClassifierOutput {
  std::array<double, 2> logits{};
  std::array<double, 2> probs{};           // softmax(logits), sums to 1
  std::vector<std::string> tokens;         // input tokens actually consumed
  std::vector<double> attention;           // one weight per token, sums to 1
  bool truncated = false;
  int label() const { return probs[1] > probs[0] ? 1 : 0; }
};

class BinaryTextClassifier {
 public:
  virtual ~BinaryTextClassifier() = default;
  virtual ClassifierOutput run(const std::string& text) const = 0;
};

}  // namespace dfr::nn
