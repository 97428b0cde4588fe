#include "dfr/nn/attention_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dfr/nn/adam.hpp"
#include "dfr/nn/serialize.hpp"

namespace dfr::nn {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
  Eigen::VectorXd shifted = x.array() - x.maxCoeff();
  Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

struct ForwardCache {
  std::vector<int> ids;
  Eigen::MatrixXd x;   // n x d token representations
  Eigen::MatrixXd u;   // n x d tanh features
  Eigen::VectorXd a;   // n attention weights
  Eigen::VectorXd context;  // d
  Eigen::Vector2d logits;
  Eigen::Vector2d probs;
};

}  // namespace

static ForwardCache forward(const Vocab& vocab, const ClassifierConfig& cfg,
                            const Eigen::MatrixXd& emb,
                            const Eigen::MatrixXd& pos,
                            const Eigen::MatrixXd& attn_w,
                            const Eigen::MatrixXd& attn_b,
                            const Eigen::MatrixXd& query,
                            const Eigen::MatrixXd& head_w,
                            const Eigen::MatrixXd& head_b,
                            const std::vector<int>& ids) {
  ForwardCache c;
  c.ids = ids;
  const int n = static_cast<int>(ids.size());
  const int d = cfg.dim;
  c.x.resize(n, d);
  for (int i = 0; i < n; ++i)
    c.x.row(i) = emb.row(ids[static_cast<std::size_t>(i)]) + pos.row(i);
  c.u.resize(n, d);
  Eigen::VectorXd scores(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd f = attn_w * c.x.row(i).transpose() + attn_b.col(0);
    c.u.row(i) = f.array().tanh().matrix().transpose();
    scores(i) = query.col(0).dot(c.u.row(i));
  }
  c.a = softmax(scores);
  c.context = c.x.transpose() * c.a;
  c.logits = head_w * c.context + head_b.col(0);
  Eigen::VectorXd p = softmax(c.logits);
  c.probs = p;
  return c;
}

AttentionClassifier AttentionClassifier::train(
    const std::vector<std::string>& texts, const std::vector<int>& labels,
    const ClassifierConfig& config, ClassifierTrainReport* report) {
  if (texts.empty()) throw ContractError("classifier training set is empty");
  if (texts.size() != labels.size())
    throw ContractError("texts/labels size mismatch");

  AttentionClassifier clf;
  clf.config_ = config;
  for (const auto& t : texts) clf.vocab_.add_text(t);

  const int d = config.dim;
  const int v = clf.vocab_.size();
  Rng rng(config.seed);
  std::normal_distribution<double> init(0.0, 0.1);
  auto randm = [&](int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = init(rng);
    return m;
  };
  clf.emb_ = randm(v, d);
  clf.pos_ = randm(config.max_len, d);
  clf.attn_w_ = randm(d, d);
  clf.attn_b_ = Eigen::MatrixXd::Zero(d, 1);
  clf.query_ = randm(d, 1);
  clf.head_w_ = randm(2, d);
  clf.head_b_ = Eigen::MatrixXd::Zero(2, 1);

  std::vector<std::vector<int>> encoded;
  encoded.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<int> ids = clf.vocab_.encode(t);
    if (static_cast<int>(ids.size()) > config.max_len)
      ids.resize(static_cast<std::size_t>(config.max_len));
    encoded.push_back(std::move(ids));
  }

  AdamSlot s_emb, s_pos, s_aw, s_ab, s_q, s_hw, s_hb;
  long step = 0;
  std::vector<std::size_t> order(texts.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const std::vector<int>& ids = encoded[idx];
      if (ids.empty()) continue;
      const int n = static_cast<int>(ids.size());
      ForwardCache c =
          forward(clf.vocab_, config, clf.emb_, clf.pos_, clf.attn_w_,
                  clf.attn_b_, clf.query_, clf.head_w_, clf.head_b_, ids);
      int y = labels[idx];
      epoch_loss += -std::log(std::max(c.probs(y), 1e-12));

      // backward
      Eigen::Vector2d dlogits = c.probs;
      dlogits(y) -= 1.0;
      Eigen::MatrixXd d_head_w = dlogits * c.context.transpose();
      Eigen::MatrixXd d_head_b = dlogits;
      Eigen::VectorXd dctx = clf.head_w_.transpose() * dlogits;

      Eigen::VectorXd da = c.x * dctx;                      // n
      Eigen::MatrixXd dx = c.a * dctx.transpose();          // n x d
      double dot = c.a.dot(da);
      Eigen::VectorXd ds = c.a.array() * (da.array() - dot);

      Eigen::MatrixXd d_query = Eigen::MatrixXd::Zero(d, 1);
      Eigen::MatrixXd d_attn_w = Eigen::MatrixXd::Zero(d, d);
      Eigen::MatrixXd d_attn_b = Eigen::MatrixXd::Zero(d, 1);
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd ui = c.u.row(i).transpose();
        d_query.col(0) += ds(i) * ui;
        Eigen::VectorXd du = ds(i) * clf.query_.col(0);
        Eigen::VectorXd df = du.array() * (1.0 - ui.array().square());
        d_attn_w += df * c.x.row(i);
        d_attn_b.col(0) += df;
        dx.row(i) += (clf.attn_w_.transpose() * df).transpose();
      }

      ++step;
      // sparse embedding/position update: accumulate into full grads
      Eigen::MatrixXd d_emb = Eigen::MatrixXd::Zero(clf.emb_.rows(), d);
      Eigen::MatrixXd d_pos = Eigen::MatrixXd::Zero(clf.pos_.rows(), d);
      for (int i = 0; i < n; ++i) {
        d_emb.row(ids[static_cast<std::size_t>(i)]) += dx.row(i);
        d_pos.row(i) += dx.row(i);
      }
      s_emb.step(clf.emb_, d_emb, config.lr, step);
      s_pos.step(clf.pos_, d_pos, config.lr, step);
      s_aw.step(clf.attn_w_, d_attn_w, config.lr, step);
      s_ab.step(clf.attn_b_, d_attn_b, config.lr, step);
      s_q.step(clf.query_, d_query, config.lr, step);
      s_hw.step(clf.head_w_, d_head_w, config.lr, step);
      s_hb.step(clf.head_b_, d_head_b, config.lr, step);
    }
    if (report)
      report->epoch_losses.push_back(epoch_loss /
                                     static_cast<double>(texts.size()));
  }
  if (report) report->train_accuracy = clf.accuracy(texts, labels);
  return clf;
}

ClassifierOutput AttentionClassifier::run(const std::string& text) const {
  std::vector<std::string> toks = Vocab::whitespace_tokens(text);
  ClassifierOutput out;
  if (static_cast<int>(toks.size()) > config_.max_len) {
    toks.resize(static_cast<std::size_t>(config_.max_len));
    out.truncated = true;
  }
  std::vector<int> ids;
  for (const auto& t : toks) ids.push_back(vocab_.id_of(t));
  if (ids.empty()) throw ContractError("classifier input is empty");
  ForwardCache c = forward(vocab_, config_, emb_, pos_, attn_w_, attn_b_,
                           query_, head_w_, head_b_, ids);
  out.logits = {c.logits(0), c.logits(1)};
  out.probs = {c.probs(0), c.probs(1)};
  out.tokens = std::move(toks);
  out.attention.assign(c.a.data(), c.a.data() + c.a.size());
  return out;
}

double AttentionClassifier::accuracy(const std::vector<std::string>& texts,
                                     const std::vector<int>& labels) const {
  if (texts.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < texts.size(); ++i)
    if (run(texts[i]).label() == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(texts.size());
}

void AttentionClassifier::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open model file for writing: " + path);
  write_string(os, "dfr-attn-clf-v1");
  write_vocab(os, vocab_.tokens());
  write_u64(os, static_cast<std::uint64_t>(config_.dim));
  write_u64(os, static_cast<std::uint64_t>(config_.max_len));
  write_matrix(os, emb_);
  write_matrix(os, pos_);
  write_matrix(os, attn_w_);
  write_matrix(os, attn_b_);
  write_matrix(os, query_);
  write_matrix(os, head_w_);
  write_matrix(os, head_b_);
}

AttentionClassifier AttentionClassifier::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model file: " + path);
  if (read_string(is) != "dfr-attn-clf-v1")
    throw IoError("not an attention classifier model: " + path);
  AttentionClassifier clf;
  Vocab v;
  for (const auto& tok : read_vocab(is)) v.add(tok);
  clf.vocab_ = v;
  clf.config_.dim = static_cast<int>(read_u64(is));
  clf.config_.max_len = static_cast<int>(read_u64(is));
  clf.emb_ = read_matrix(is);
  clf.pos_ = read_matrix(is);
  clf.attn_w_ = read_matrix(is);
  clf.attn_b_ = read_matrix(is);
  clf.query_ = read_matrix(is);
  clf.head_w_ = read_matrix(is);
  clf.head_b_ = read_matrix(is);
  return clf;
}

}  // namespace dfr::nn
