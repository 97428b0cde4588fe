#include "dfr/nn/tiny_lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dfr/nn/adam.hpp"
#include "dfr/nn/serialize.hpp"

namespace dfr::nn {

namespace {

Eigen::VectorXd softmax_vec(const Eigen::VectorXd& x) {
  Eigen::VectorXd shifted = x.array() - x.maxCoeff();
  Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

}  // namespace

struct TinyLm::Cache {
  std::vector<int> ids;
  Eigen::MatrixXd h;       // L x d  embeddings + positions
  Eigen::MatrixXd q, k, v;  // L x d
  Eigen::MatrixXd a;       // L x L  row-softmax attention (causal)
  Eigen::MatrixXd z;       // L x d  h + attention context
  Eigen::MatrixXd g;       // L x f  tanh features
  Eigen::MatrixXd r;       // L x d  z + ffn residual
  Eigen::MatrixXd logits;  // L x V
};

void TinyLm::forward(const std::vector<int>& ids, Cache& c) const {
  const int L = static_cast<int>(ids.size());
  const int d = config_.dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  c.ids = ids;
  c.h.resize(L, d);
  for (int i = 0; i < L; ++i)
    c.h.row(i) = emb_.row(ids[static_cast<std::size_t>(i)]) + pos_.row(i);
  c.q = c.h * wq_;
  c.k = c.h * wk_;
  c.v = c.h * wv_;
  c.a = Eigen::MatrixXd::Zero(L, L);
  for (int i = 0; i < L; ++i) {
    Eigen::VectorXd scores(i + 1);
    for (int j = 0; j <= i; ++j)
      scores(j) = c.q.row(i).dot(c.k.row(j)) * scale;
    Eigen::VectorXd a = softmax_vec(scores);
    for (int j = 0; j <= i; ++j) c.a(i, j) = a(j);
  }
  c.z = c.h + c.a * c.v;
  Eigen::MatrixXd pre = (c.z * w1_.transpose()).rowwise() + b1_.col(0).transpose();
  c.g = pre.array().tanh().matrix();
  c.r = c.z + ((c.g * w2_.transpose()).rowwise() + b2_.col(0).transpose()).eval();
  c.logits = (c.r * out_w_.transpose()).rowwise() + out_b_.col(0).transpose();
}

namespace {

// ids = <bos> input output <eos>; mask[i] = weight of target ids[i+1].
struct FramedExample {
  std::vector<int> ids;
  std::vector<double> mask;       // size ids.size() - 1
  std::size_t content_positions = 0;  // masked targets that are not <eos>
};

FramedExample frame(const Vocab& vocab, const SeqExample& ex,
                    BackendFamily family, int max_len) {
  FramedExample f;
  std::vector<int> in = vocab.encode(ex.input);
  std::vector<int> out = vocab.encode(ex.output);
  f.ids.push_back(Vocab::kBos);
  f.ids.insert(f.ids.end(), in.begin(), in.end());
  f.ids.insert(f.ids.end(), out.begin(), out.end());
  f.ids.push_back(Vocab::kEos);
  if (static_cast<int>(f.ids.size()) > max_len) {
    f.ids.resize(static_cast<std::size_t>(max_len) - 1);
    f.ids.push_back(Vocab::kEos);
  }
  const std::size_t n_targets = f.ids.size() - 1;
  f.mask.assign(n_targets, 0.0);
  for (std::size_t i = 0; i < n_targets; ++i) {
    std::size_t target_index = i + 1;  // position of the predicted token
    bool in_output = target_index > in.size();
    if (family == BackendFamily::decoder_only || in_output) {
      f.mask[i] = 1.0;
      if (f.ids[target_index] != Vocab::kEos) ++f.content_positions;
    }
  }
  return f;
}

}  // namespace

std::size_t loss_position_count(const Vocab& vocab, const SeqExample& ex,
                                BackendFamily family) {
  std::size_t n_out = vocab.encode(ex.output).size();
  if (family == BackendFamily::encoder_decoder) return n_out;
  return vocab.encode(ex.input).size() + n_out;
}

TinyLm TinyLm::create(const std::vector<SeqExample>& examples,
                      const LmConfig& config,
                      const std::vector<std::string>& special_tokens) {
  if (examples.empty()) throw ContractError("LM training set is empty");
  TinyLm lm;
  lm.config_ = config;
  for (const std::string& s : special_tokens) lm.vocab_.register_special(s);
  for (const SeqExample& ex : examples) {
    lm.vocab_.add_text(ex.input);
    lm.vocab_.add_text(ex.output);
  }
  const int d = config.dim;
  const int f = config.ffn;
  const int v = lm.vocab_.size();
  Rng rng(config.seed);
  std::normal_distribution<double> init(0.0, 0.08);
  auto randm = [&](int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = init(rng);
    return m;
  };
  lm.emb_ = randm(v, d);
  lm.pos_ = randm(config.max_len, d);
  lm.wq_ = randm(d, d);
  lm.wk_ = randm(d, d);
  lm.wv_ = randm(d, d);
  lm.w1_ = randm(f, d);
  lm.b1_ = Eigen::MatrixXd::Zero(f, 1);
  lm.w2_ = randm(d, f);
  lm.b2_ = Eigen::MatrixXd::Zero(d, 1);
  lm.out_w_ = randm(v, d);
  lm.out_b_ = Eigen::MatrixXd::Zero(v, 1);
  return lm;
}

LmTrainReport TinyLm::train(const std::vector<SeqExample>& examples,
                            int epochs) {
  if (examples.empty()) throw ContractError("LM training set is empty");
  if (epochs < 1) throw ContractError("epochs must be >= 1");
  const int d = config_.dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  LmTrainReport report;
  report.seed = config_.seed;
  std::vector<FramedExample> framed;
  framed.reserve(examples.size());
  for (const SeqExample& ex : examples) {
    framed.push_back(frame(vocab_, ex, config_.family, config_.max_len));
    report.loss_positions.push_back(framed.back().content_positions);
    report.eos_positions.push_back(1);
  }

  AdamSlot s_emb, s_pos, s_wq, s_wk, s_wv, s_w1, s_b1, s_w2, s_b2, s_ow, s_ob;
  long step = 0;
  Rng rng(config_.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(framed.size());
  std::iota(order.begin(), order.end(), 0);

  Cache c;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double nll_sum = 0.0;
    double weight_sum = 0.0;
    for (std::size_t idx : order) {
      const FramedExample& ex = framed[idx];
      const int L = static_cast<int>(ex.ids.size());
      if (L < 2) continue;
      forward(ex.ids, c);

      double n_masked = 0.0;
      for (double w : ex.mask) n_masked += w;
      if (n_masked == 0.0) continue;

      // softmax CE at each masked position, grad wrt logits
      Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(L, vocab_.size());
      for (int i = 0; i + 1 < L; ++i) {
        double w = ex.mask[static_cast<std::size_t>(i)];
        if (w == 0.0) continue;
        Eigen::VectorXd p = softmax_vec(c.logits.row(i).transpose());
        int t = ex.ids[static_cast<std::size_t>(i) + 1];
        nll_sum += -std::log(std::max(p(t), 1e-12)) * w;
        weight_sum += w;
        p(t) -= 1.0;
        dlogits.row(i) = (w / n_masked) * p.transpose();
      }

      // backward
      Eigen::MatrixXd d_ow = dlogits.transpose() * c.r;
      Eigen::MatrixXd d_ob = dlogits.colwise().sum().transpose();
      Eigen::MatrixXd dr = dlogits * out_w_;

      Eigen::MatrixXd dz = dr;
      Eigen::MatrixXd dg = dr * w2_;
      Eigen::MatrixXd d_w2 = dr.transpose() * c.g;
      Eigen::MatrixXd d_b2 = dr.colwise().sum().transpose();
      Eigen::MatrixXd df =
          (dg.array() * (1.0 - c.g.array().square())).matrix();
      Eigen::MatrixXd d_w1 = df.transpose() * c.z;
      Eigen::MatrixXd d_b1 = df.colwise().sum().transpose();
      dz += df * w1_;

      Eigen::MatrixXd dh = dz;                  // residual path
      Eigen::MatrixXd dctx = dz;                // attention output path
      Eigen::MatrixXd da = dctx * c.v.transpose();  // L x L
      Eigen::MatrixXd dv = c.a.transpose() * dctx;
      Eigen::MatrixXd dscore = Eigen::MatrixXd::Zero(L, L);
      for (int i = 0; i < L; ++i) {
        double dot = 0.0;
        for (int j = 0; j <= i; ++j) dot += c.a(i, j) * da(i, j);
        for (int j = 0; j <= i; ++j)
          dscore(i, j) = c.a(i, j) * (da(i, j) - dot);
      }
      Eigen::MatrixXd dq = dscore * c.k * scale;
      Eigen::MatrixXd dk = dscore.transpose() * c.q * scale;
      Eigen::MatrixXd d_wq = c.h.transpose() * dq;
      Eigen::MatrixXd d_wk = c.h.transpose() * dk;
      Eigen::MatrixXd d_wv = c.h.transpose() * dv;
      dh += dq * wq_.transpose() + dk * wk_.transpose() + dv * wv_.transpose();

      Eigen::MatrixXd d_emb = Eigen::MatrixXd::Zero(emb_.rows(), d);
      Eigen::MatrixXd d_pos = Eigen::MatrixXd::Zero(pos_.rows(), d);
      for (int i = 0; i < L; ++i) {
        d_emb.row(ex.ids[static_cast<std::size_t>(i)]) += dh.row(i);
        d_pos.row(i) += dh.row(i);
      }

      ++step;
      s_emb.step(emb_, d_emb, config_.lr, step);
      s_pos.step(pos_, d_pos, config_.lr, step);
      s_wq.step(wq_, d_wq, config_.lr, step);
      s_wk.step(wk_, d_wk, config_.lr, step);
      s_wv.step(wv_, d_wv, config_.lr, step);
      s_w1.step(w1_, d_w1, config_.lr, step);
      s_b1.step(b1_, d_b1, config_.lr, step);
      s_w2.step(w2_, d_w2, config_.lr, step);
      s_b2.step(b2_, d_b2, config_.lr, step);
      s_ow.step(out_w_, d_ow, config_.lr, step);
      s_ob.step(out_b_, d_ob, config_.lr, step);
    }
    report.epoch_losses.push_back(weight_sum > 0 ? nll_sum / weight_sum : 0.0);
  }
  return report;
}

double TinyLm::evaluate(const std::vector<SeqExample>& examples) const {
  double nll_sum = 0.0, weight_sum = 0.0;
  Cache c;
  for (const SeqExample& ex : examples) {
    FramedExample f = frame(vocab_, ex, config_.family, config_.max_len);
    if (f.ids.size() < 2) continue;
    forward(f.ids, c);
    for (std::size_t i = 0; i + 1 < f.ids.size(); ++i) {
      double w = f.mask[i];
      if (w == 0.0) continue;
      Eigen::VectorXd p =
          softmax_vec(c.logits.row(static_cast<int>(i)).transpose());
      nll_sum += -std::log(std::max(p(f.ids[i + 1]), 1e-12)) * w;
      weight_sum += w;
    }
  }
  return weight_sum > 0 ? nll_sum / weight_sum : 0.0;
}

Eigen::VectorXd TinyLm::next_token_logprobs(
    const std::vector<int>& prefix) const {
  Cache c;
  std::vector<int> ids = prefix;
  if (static_cast<int>(ids.size()) > config_.max_len)
    ids.erase(ids.begin(),
              ids.end() - static_cast<std::ptrdiff_t>(config_.max_len));
  forward(ids, c);
  Eigen::VectorXd p =
      softmax_vec(c.logits.row(static_cast<int>(ids.size()) - 1).transpose());
  return p.array().max(1e-12).log();
}

namespace {

bool id_is_generatable(int id) {
  return id != Vocab::kPad && id != Vocab::kBos && id != Vocab::kUnk &&
         id != Vocab::kCls;
}

}  // namespace

std::vector<std::string> TinyLm::generate(const std::string& prompt,
                                          const DecodingConfig& config) const {
  config.validate();
  if (config.strategy == DecodingStrategy::beam) {
    std::vector<std::string> beams;
    // beam search returns the whole beam, best first
    struct Beam {
      std::vector<int> ids;
      double logp = 0.0;
      bool done = false;
    };
    std::vector<int> prefix;
    prefix.push_back(Vocab::kBos);
    for (int id : vocab_.encode(prompt)) prefix.push_back(id);
    std::vector<Beam> frontier{{{}, 0.0, false}};
    for (int step = 0; step < config.max_new_tokens; ++step) {
      std::vector<Beam> next;
      bool all_done = true;
      for (const Beam& b : frontier) {
        if (b.done) {
          next.push_back(b);
          continue;
        }
        all_done = false;
        std::vector<int> ids = prefix;
        ids.insert(ids.end(), b.ids.begin(), b.ids.end());
        Eigen::VectorXd logp = next_token_logprobs(ids);
        for (int t = 0; t < logp.size(); ++t) {
          if (!id_is_generatable(t)) continue;
          Beam nb = b;
          nb.logp += logp(t);
          if (t == Vocab::kEos) {
            nb.done = true;
          } else {
            nb.ids.push_back(t);
          }
          next.push_back(std::move(nb));
        }
      }
      if (all_done) break;
      std::sort(next.begin(), next.end(), [](const Beam& a, const Beam& b) {
        if (a.logp != b.logp) return a.logp > b.logp;
        return a.ids < b.ids;  // deterministic tie-break
      });
      if (static_cast<int>(next.size()) > config.beam_size)
        next.resize(static_cast<std::size_t>(config.beam_size));
      frontier = std::move(next);
    }
    std::sort(frontier.begin(), frontier.end(),
              [](const Beam& a, const Beam& b) {
                if (a.logp != b.logp) return a.logp > b.logp;
                return a.ids < b.ids;
              });
    for (const Beam& b : frontier) {
      beams.push_back(vocab_.decode(b.ids));
      if (static_cast<int>(beams.size()) >= config.num_return) break;
    }
    return beams;
  }

  // nucleus sampling
  Rng rng(config.seed ^ fnv1a64(prompt));
  std::vector<std::string> outputs;
  std::vector<int> prefix;
  prefix.push_back(Vocab::kBos);
  for (int id : vocab_.encode(prompt)) prefix.push_back(id);
  for (int s = 0; s < config.num_return; ++s) {
    std::vector<int> ids = prefix;
    std::vector<int> gen;
    for (int step = 0; step < config.max_new_tokens; ++step) {
      Cache c;
      std::vector<int> window = ids;
      if (static_cast<int>(window.size()) > config_.max_len)
        window.erase(window.begin(),
                     window.end() - static_cast<std::ptrdiff_t>(config_.max_len));
      forward(window, c);
      Eigen::VectorXd logits =
          c.logits.row(static_cast<int>(window.size()) - 1).transpose() /
          config.temperature;
      Eigen::VectorXd probs = softmax_vec(logits);
      std::vector<int> idx;
      for (int t = 0; t < probs.size(); ++t)
        if (id_is_generatable(t)) idx.push_back(t);
      std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (probs(a) != probs(b)) return probs(a) > probs(b);
        return a < b;
      });
      // smallest set whose cumulative mass reaches p
      double cum = 0.0;
      std::size_t cut = 0;
      for (; cut < idx.size(); ++cut) {
        cum += probs(idx[cut]);
        if (cum >= config.p) {
          ++cut;
          break;
        }
      }
      if (cut == 0) cut = 1;
      double mass = 0.0;
      for (std::size_t i = 0; i < cut; ++i) mass += probs(idx[i]);
      std::uniform_real_distribution<double> unif(0.0, mass);
      double r = unif(rng);
      int picked = idx[cut - 1];
      for (std::size_t i = 0; i < cut; ++i) {
        r -= probs(idx[i]);
        if (r <= 0) {
          picked = idx[i];
          break;
        }
      }
      if (picked == Vocab::kEos) break;
      gen.push_back(picked);
      ids.push_back(picked);
    }
    outputs.push_back(vocab_.decode(gen));
  }
  return outputs;
}

std::string TinyLm::generate_beam(const std::string& prompt, int beam_size,
                                  int max_new_tokens) const {
  DecodingConfig cfg;
  cfg.strategy = DecodingStrategy::beam;
  cfg.beam_size = beam_size;
  cfg.max_new_tokens = max_new_tokens;
  cfg.num_return = 1;
  std::vector<std::string> beams = generate(prompt, cfg);
  return beams.empty() ? std::string() : beams.front();
}

std::size_t TinyLm::count_tokens(const std::string& text) const {
  return Vocab::count_tokens(text);
}

bool TinyLm::token_is_atomic(const std::string& marker) const {
  return Vocab::whitespace_tokens(marker).size() == 1 &&
         vocab_.contains(marker);
}

void TinyLm::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open model file for writing: " + path);
  write_string(os, "dfr-tiny-lm-v1");
  write_vocab(os, vocab_.tokens());
  write_u64(os, static_cast<std::uint64_t>(config_.dim));
  write_u64(os, static_cast<std::uint64_t>(config_.ffn));
  write_u64(os, static_cast<std::uint64_t>(config_.max_len));
  write_u64(os, config_.family == BackendFamily::decoder_only ? 0 : 1);
  write_u64(os, config_.seed);
  for (const Eigen::MatrixXd* m :
       {&emb_, &pos_, &wq_, &wk_, &wv_, &w1_, &b1_, &w2_, &b2_, &out_w_,
        &out_b_})
    write_matrix(os, *m);
}

TinyLm TinyLm::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model file: " + path);
  if (read_string(is) != "dfr-tiny-lm-v1")
    throw IoError("not a tiny LM model: " + path);
  TinyLm lm;
  Vocab v;
  for (const auto& tok : read_vocab(is)) v.add(tok);
  lm.vocab_ = v;
  lm.config_.dim = static_cast<int>(read_u64(is));
  lm.config_.ffn = static_cast<int>(read_u64(is));
  lm.config_.max_len = static_cast<int>(read_u64(is));
  lm.config_.family = read_u64(is) == 0 ? BackendFamily::decoder_only
                                        : BackendFamily::encoder_decoder;
  lm.config_.seed = read_u64(is);
  for (Eigen::MatrixXd* m :
       {&lm.emb_, &lm.pos_, &lm.wq_, &lm.wk_, &lm.wv_, &lm.w1_, &lm.b1_,
        &lm.w2_, &lm.b2_, &lm.out_w_, &lm.out_b_})
    *m = read_matrix(is);
  return lm;
}

}  // namespace dfr::nn
