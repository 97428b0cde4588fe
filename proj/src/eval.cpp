#include "dfr/eval.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace dfr {

std::vector<std::string> metric_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char raw : lowercase(text)) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      current.push_back(raw);
    } else {
      if (!current.empty()) {
        out.push_back(current);
        current.clear();
      }
      if (!std::isspace(c)) out.push_back(std::string(1, raw));
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

namespace {

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  Counts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

void check_items(const std::vector<std::string>& predictions,
                 const std::vector<std::vector<std::string>>& references) {
  if (predictions.size() != references.size())
    throw ContractError("predictions and references differ in size");
  if (predictions.empty()) throw ContractError("no items to score");
  for (const auto& refs : references)
    if (refs.empty()) throw ContractError("every item needs >= 1 reference");
}

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double bleu4(const std::vector<std::string>& predictions,
             const std::vector<std::vector<std::string>>& references,
             const BleuOptions& options) {
  check_items(predictions, references);
  constexpr std::size_t kMaxN = 4;
  std::array<double, kMaxN> matched{}, total{};
  double cand_len = 0.0, ref_len = 0.0;

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::vector<std::string> pred = metric_tokens(predictions[i]);
    std::vector<std::vector<std::string>> refs;
    for (const std::string& r : references[i]) refs.push_back(metric_tokens(r));

    cand_len += static_cast<double>(pred.size());
    // effective reference length: closest to the candidate, shorter on ties
    std::size_t best = refs[0].size();
    for (const auto& r : refs) {
      auto diff = [&](std::size_t len) {
        return len > pred.size() ? len - pred.size() : pred.size() - len;
      };
      if (diff(r.size()) < diff(best) ||
          (diff(r.size()) == diff(best) && r.size() < best))
        best = r.size();
    }
    ref_len += static_cast<double>(best);

    for (std::size_t n = 1; n <= kMaxN; ++n) {
      Counts pc = ngram_counts(pred, n);
      Counts clip;
      for (const auto& r : refs) {
        for (const auto& [gram, count] : ngram_counts(r, n))
          clip[gram] = std::max(clip[gram], count);
      }
      for (const auto& [gram, count] : pc) {
        total[n - 1] += static_cast<double>(count);
        auto it = clip.find(gram);
        if (it != clip.end())
          matched[n - 1] += static_cast<double>(std::min(count, it->second));
      }
    }
  }

  double log_sum = 0.0;
  for (std::size_t n = 0; n < kMaxN; ++n) {
    double m = matched[n], t = total[n];
    if (options.smooth && n > 0 && m == 0.0) {
      m += 1.0;
      t += 1.0;
    }
    if (m == 0.0 || t == 0.0) return 0.0;
    log_sum += std::log(m / t);
  }
  if (cand_len == 0.0) return 0.0;
  double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(kMaxN));
}

double rougeL(const std::vector<std::string>& predictions,
              const std::vector<std::vector<std::string>>& references) {
  check_items(predictions, references);
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::vector<std::string> pred = metric_tokens(predictions[i]);
    double best = 0.0;
    for (const std::string& raw : references[i]) {
      std::vector<std::string> ref = metric_tokens(raw);
      if (pred.empty() || ref.empty()) continue;
      double lcs = static_cast<double>(lcs_length(pred, ref));
      if (lcs == 0.0) continue;
      double prec = lcs / static_cast<double>(pred.size());
      double rec = lcs / static_cast<double>(ref.size());
      best = std::max(best, 2.0 * prec * rec / (prec + rec));
    }
    sum += best;
  }
  return 100.0 * sum / static_cast<double>(predictions.size());
}

EvalReport evaluate_rationales(
    const std::vector<DefeasibleInstance>& instances,
    const std::vector<std::string>& predictions,
    const std::vector<std::vector<std::string>>& references,
    const BleuOptions& options) {
  if (instances.size() != predictions.size())
    throw ContractError("instances and predictions differ in size");
  check_items(predictions, references);

  auto subset = [&](UpdateType type, MetricRow* row) {
    std::vector<std::string> preds;
    std::vector<std::vector<std::string>> refs;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (instances[i].update_type != type) continue;
      preds.push_back(predictions[i]);
      refs.push_back(references[i]);
    }
    row->n = preds.size();
    if (!preds.empty()) {
      row->bleu4 = bleu4(preds, refs, options);
      row->rougeL = rougeL(preds, refs);
    }
  };

  EvalReport report;
  report.smoothed = options.smooth;
  report.overall = {bleu4(predictions, references, options),
                    rougeL(predictions, references), predictions.size()};
  subset(UpdateType::strengthener, &report.strengthener);
  subset(UpdateType::weakener, &report.weakener);
  return report;
}

HumanEvalExport export_human_eval(
    const std::vector<DefeasibleInstance>& items,
    const std::map<std::string, std::vector<std::string>>& model_outputs,
    std::size_t sample_size, std::uint64_t seed) {
  if (items.empty()) throw ContractError("no items to export");
  if (model_outputs.empty()) throw ContractError("no model outputs to export");
  for (const auto& [name, outputs] : model_outputs) {
    if (outputs.size() != items.size())
      throw ContractError("model " + name +
                          " outputs do not align with the item list");
  }

  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  if (idx.size() > sample_size) idx.resize(sample_size);
  std::sort(idx.begin(), idx.end());

  // blinded codes: shuffled assignment over the sorted model names
  std::vector<std::string> names;
  for (const auto& [name, outputs] : model_outputs) names.push_back(name);
  std::vector<std::size_t> code_order(names.size());
  std::iota(code_order.begin(), code_order.end(), 0);
  std::shuffle(code_order.begin(), code_order.end(), rng);

  HumanEvalExport exp;
  std::map<std::string, std::string> name_to_code;
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::string code = "M" + std::to_string(code_order[i] + 1);
    exp.key[code] = names[i];
    name_to_code[names[i]] = code;
  }

  for (std::size_t i : idx) {
    std::vector<std::string> codes;
    for (const auto& [code, name] : exp.key) codes.push_back(code);
    for (const std::string& code : codes) {
      const DefeasibleInstance& inst = items[i];
      HumanEvalRow row;
      row.item_id = inst.id;
      row.model_code = code;
      row.premise = inst.premise;
      row.hypothesis = inst.hypothesis;
      row.update = inst.update;
      row.update_type = inst.update_type;
      row.rationale = model_outputs.at(exp.key.at(code))[i];
      exp.rows.push_back(std::move(row));
    }
  }
  return exp;
}

namespace {

const std::vector<std::string>& human_eval_columns() {
  static const std::vector<std::string> cols = {
      "item_id",   "model_code", "premise",  "hypothesis",
      "update",    "update_type", "rationale", "grammatical",
      "relevant",  "correct",     "explanatory"};
  return cols;
}

}  // namespace

void write_human_eval(const HumanEvalExport& exp, const std::string& task_path,
                      const std::string& key_path) {
  std::ostringstream out;
  out << join(human_eval_columns(), "\t") << "\n";
  for (const HumanEvalRow& r : exp.rows) {
    out << r.item_id << "\t" << r.model_code << "\t" << normalize_ws(r.premise)
        << "\t" << normalize_ws(r.hypothesis) << "\t"
        << normalize_ws(r.update) << "\t" << to_string(r.update_type) << "\t"
        << normalize_ws(r.rationale) << "\t\t\t\t\n";
  }
  write_file(task_path, out.str());

  std::ostringstream key;
  for (const auto& [code, name] : exp.key) key << code << "\t" << name << "\n";
  write_file(key_path, key.str());
}

std::vector<HumanEvalRow> read_human_eval(const std::string& task_path) {
  std::vector<std::string> lines = read_lines(task_path);
  if (lines.empty()) throw SchemaError(task_path + ": empty file");
  std::vector<std::string> header = split(lines[0], '\t');
  auto col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw SchemaError(task_path + ": missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  std::size_t c_id = col("item_id"), c_code = col("model_code"),
              c_p = col("premise"), c_h = col("hypothesis"),
              c_u = col("update"), c_t = col("update_type"),
              c_r = col("rationale");

  std::vector<HumanEvalRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (normalize_ws(lines[i]).empty()) continue;
    std::vector<std::string> f = split(lines[i], '\t');
    std::size_t needed =
        std::max({c_id, c_code, c_p, c_h, c_u, c_t, c_r}) + 1;
    if (f.size() < needed)
      throw SchemaError(task_path + ":" + std::to_string(i + 1) +
                        ": short row");
    HumanEvalRow row;
    row.item_id = f[c_id];
    row.model_code = f[c_code];
    row.premise = f[c_p];
    row.hypothesis = f[c_h];
    row.update = f[c_u];
    row.update_type = update_type_from_string(f[c_t]);
    row.rationale = f[c_r];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_string(Grammaticality g) {
  switch (g) {
    case Grammaticality::grammatical: return "grammatical";
    case Grammaticality::understandable: return "understandable";
    default: return "not_understandable";
  }
}

Grammaticality grammaticality_from_string(const std::string& s) {
  if (s == "grammatical") return Grammaticality::grammatical;
  if (s == "understandable") return Grammaticality::understandable;
  if (s == "not_understandable") return Grammaticality::not_understandable;
  throw ValueError("unknown grammaticality level: " + s);
}

VoteAggregate aggregate_votes(
    const std::vector<HumanAnnotation>& annotations,
    const std::map<std::string, UpdateType>& item_types) {
  std::map<std::string, std::vector<const HumanAnnotation*>> by_item;
  for (const HumanAnnotation& a : annotations)
    by_item[a.item_id].push_back(&a);

  VoteAggregate agg;
  std::map<std::string, std::size_t> gram_counts;
  std::size_t total_annotations = 0;
  struct Tally {
    std::size_t n = 0, gram = 0, rel = 0, corr = 0, expl = 0;
  };
  Tally tally_s, tally_w;

  for (const auto& [item, anns] : by_item) {
    auto type_it = item_types.find(item);
    if (anns.size() != 3 || type_it == item_types.end()) {
      agg.excluded.push_back(item);
      continue;
    }
    ItemMajority m;
    int gram = 0, rel = 0, corr = 0, expl = 0;
    for (const HumanAnnotation* a : anns) {
      if (a->grammatical != Grammaticality::not_understandable) ++gram;
      if (a->relevant) ++rel;
      if (a->correct) ++corr;
      if (a->explanatory) ++expl;
      ++gram_counts[to_string(a->grammatical)];
      ++total_annotations;
    }
    m.grammatical = gram >= 2;
    m.relevant = rel >= 2;
    m.correct = corr >= 2;
    m.explanatory = expl >= 2;
    agg.per_item[item] = m;

    Tally& t = type_it->second == UpdateType::strengthener ? tally_s : tally_w;
    ++t.n;
    t.gram += m.grammatical;
    t.rel += m.relevant;
    t.corr += m.correct;
    t.expl += m.explanatory;
  }

  auto to_pct = [](const Tally& t) {
    QuestionPercentages q;
    q.n = t.n;
    if (t.n == 0) return q;
    double n = static_cast<double>(t.n);
    q.grammatical = 100.0 * static_cast<double>(t.gram) / n;
    q.relevant = 100.0 * static_cast<double>(t.rel) / n;
    q.correct = 100.0 * static_cast<double>(t.corr) / n;
    q.explanatory = 100.0 * static_cast<double>(t.expl) / n;
    return q;
  };
  agg.strengthener = to_pct(tally_s);
  agg.weakener = to_pct(tally_w);
  for (const auto& [level, count] : gram_counts)
    agg.grammaticality_distribution[level] =
        100.0 * static_cast<double>(count) /
        static_cast<double>(total_annotations);
  return agg;
}

KappaResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts) {
  if (counts.empty()) throw ContractError("fleiss_kappa: no items");
  std::size_t categories = counts[0].size();
  if (categories == 0) throw ContractError("fleiss_kappa: no categories");
  std::size_t raters = std::accumulate(counts[0].begin(), counts[0].end(),
                                       std::size_t{0});
  if (raters < 2) throw ContractError("fleiss_kappa: needs >= 2 raters");
  for (const auto& row : counts) {
    if (row.size() != categories)
      throw ContractError("fleiss_kappa: ragged count matrix");
    if (std::accumulate(row.begin(), row.end(), std::size_t{0}) != raters)
      throw ContractError("fleiss_kappa: rows must sum to the rater count");
  }

  double N = static_cast<double>(counts.size());
  double n = static_cast<double>(raters);
  double p_bar = 0.0;
  std::vector<double> p_j(categories, 0.0);
  for (const auto& row : counts) {
    double agree = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      double c = static_cast<double>(row[j]);
      agree += c * c;
      p_j[j] += c;
    }
    p_bar += (agree - n) / (n * (n - 1.0));
  }
  p_bar /= N;
  double p_e = 0.0;
  for (double& pj : p_j) {
    pj /= N * n;
    p_e += pj * pj;
  }

  KappaResult result;
  constexpr double kEps = 1e-12;
  if (1.0 - p_e < kEps) {
    if (p_bar >= 1.0 - kEps) {
      result.value = 1.0;
    } else {
      result.degenerate = true;
    }
    return result;
  }
  result.value = (p_bar - p_e) / (1.0 - p_e);
  return result;
}

}  // namespace dfr
