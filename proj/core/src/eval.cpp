#include "bingan/eval.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "bingan/errors.hpp"

namespace bingan {

double average_precision(std::int32_t query_label, std::span<const std::int32_t> ranked, std::size_t n_relevant,
                         long k) {
  if (k <= 0) throw ContractError("average_precision: k must be positive");
  if (n_relevant == 0) return 0.0;
  const std::size_t depth = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (ranked[i] != query_label) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(std::min<std::size_t>(n_relevant, static_cast<std::size_t>(k)));
}

std::size_t eval_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BINGAN_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
  }
  return n;
}

RetrievalReport map_retrieval(const BitMatrix& queries, std::span<const std::int32_t> query_labels,
                              const BitMatrix& db, std::span<const std::int32_t> db_labels,
                              const RetrievalOptions& options) {
  if (queries.bits() != db.bits()) throw ContractError("map_retrieval: code lengths differ");
  if (query_labels.size() != queries.rows()) throw DataError("map_retrieval: query label count mismatch");
  if (db_labels.size() != db.rows()) throw DataError("map_retrieval: database label count mismatch");
  if (options.k == 0) throw ContractError("map_retrieval: k must be positive");
  const bool exclude = options.exclude_self.value_or(&queries == &db || queries == db);
  if (exclude && queries.rows() != db.rows()) {
    throw ContractError("map_retrieval: self exclusion needs queries and database of equal size");
  }

  std::map<std::int32_t, std::size_t> class_count;
  for (auto l : db_labels) ++class_count[l];

  RetrievalReport report;
  report.k = options.k;
  report.bits = db.bits();
  report.average_precisions.assign(queries.rows(), 0.0);

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<std::int32_t> ranked;
    for (std::size_t q = begin; q < end; ++q) {
      const std::optional<std::size_t> skip = exclude ? std::optional<std::size_t>(q) : std::nullopt;
      const auto hits = hamming_search(queries.row(q), db, options.k, skip);
      ranked.clear();
      for (const auto& h : hits) ranked.push_back(db_labels[h.index]);
      const std::int32_t label = query_labels[q];
      auto it = class_count.find(label);
      std::size_t r = it == class_count.end() ? 0 : it->second;
      if (exclude && db_labels[q] == label) --r;
      report.average_precisions[q] = average_precision(label, ranked, r, static_cast<long>(options.k));
    }
  };

  const std::size_t n = queries.rows();
  const std::size_t threads = std::min(eval_threads(), std::max<std::size_t>(n / 16, 1));
  if (threads <= 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }

  double sum = 0.0;
  for (double ap : report.average_precisions) sum += ap;
  report.map_at_k = n == 0 ? 0.0 : sum / static_cast<double>(n);
  return report;
}

RetrievalReport map_retrieval(const DescriptorFile& queries, const DescriptorFile& db,
                              const RetrievalOptions& options) {
  if (!queries.labels || !db.labels) throw DataError("map_retrieval: descriptor files need labels");
  RetrievalOptions opts = options;
  if (!opts.exclude_self) opts.exclude_self = queries.codes == db.codes && *queries.labels == *db.labels;
  return map_retrieval(queries.codes, *queries.labels, db.codes, *db.labels, opts);
}

MatchingReport fpr_at_tpr(std::span<const int> matched, std::span<const int> nonmatched, double tpr_target) {
  if (matched.empty() || nonmatched.empty()) throw ContractError("fpr_at_tpr: distance lists must be nonempty");
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) throw ContractError("fpr_at_tpr: tpr_target must be in (0, 1]");
  std::vector<int> m(matched.begin(), matched.end()), u(nonmatched.begin(), nonmatched.end());
  std::sort(m.begin(), m.end());
  std::sort(u.begin(), u.end());
  if (m.front() < 0 || u.front() < 0) throw ContractError("fpr_at_tpr: negative distance");

  std::vector<int> thresholds;
  std::merge(m.begin(), m.end(), u.begin(), u.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  auto rate = [](const std::vector<int>& sorted, int t) {
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    return static_cast<double>(count) / static_cast<double>(sorted.size());
  };

  MatchingReport report;
  report.tpr_target = tpr_target;
  bool found = false;
  for (int t : thresholds) {
    const RocPoint p{t, rate(m, t), rate(u, t)};
    report.roc.push_back(p);
    if (!found && p.tpr >= tpr_target) {
      found = true;
      report.threshold = t;
      report.tpr = p.tpr;
      report.fpr_at_95 = p.fpr;
    }
  }
  return report;
}

void pair_distances(const Network& disc, const PatchPairSet& pairs, std::vector<int>& matched,
                    std::vector<int>& nonmatched) {
  pairs.validate();
  const BitMatrix a = extract_codes(disc, pairs.a, pairs.shape);
  const BitMatrix b = extract_codes(disc, pairs.b, pairs.shape);
  matched.clear();
  nonmatched.clear();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int d = hamming_distance(a.row(i), b.row(i));
    (pairs.match[i] ? matched : nonmatched).push_back(d);
  }
}

MatchingReport evaluate_matching(const Network& disc, const PatchPairSet& pairs, double tpr_target) {
  std::vector<int> matched, nonmatched;
  pair_distances(disc, pairs, matched, nonmatched);
  return fpr_at_tpr(matched, nonmatched, tpr_target);
}

std::vector<std::pair<double, double>> ablation_grid(double lambda_dmr, double lambda_bre) {
  return {{0.0, 0.0}, {0.0, lambda_bre}, {lambda_dmr, 0.0}, {lambda_dmr, lambda_bre}};
}

std::vector<AblationRow> run_ablation(const PatchPairSet& train_set, const PatchPairSet& test_set,
                                      const TrainConfig& base,
                                      const std::function<void(std::size_t, const LogEntry&)>& on_step) {
  const double dmr = base.reg.lambda_dmr > 0.0 ? base.reg.lambda_dmr : 0.05;
  const double bre = base.reg.lambda_bre > 0.0 ? base.reg.lambda_bre : 0.01;

  const std::size_t n_probe = std::min<std::size_t>(test_set.size(), 128);
  std::vector<std::size_t> probe(n_probe);
  for (std::size_t i = 0; i < n_probe; ++i) probe[i] = i;
  const Tensor held_out = to_tensor(test_set.a, test_set.shape, probe);

  std::vector<AblationRow> rows;
  const auto grid = ablation_grid(dmr, bre);
  for (std::size_t r = 0; r < grid.size(); ++r) {
    TrainConfig cfg = base;
    cfg.reg.lambda_dmr = grid[r].first;
    cfg.reg.lambda_bre = grid[r].second;
    TrainHooks hooks;
    if (on_step) hooks.on_step = [&](const LogEntry& e) { on_step(r, e); };
    TrainResult result = train(cfg, Dataset(train_set), std::nullopt, hooks);
    AblationRow row;
    row.lambda_dmr = grid[r].first;
    row.lambda_bre = grid[r].second;
    row.report = evaluate_matching(result.checkpoint.discriminator, test_set);
    row.diagnostics = diagnose_codes(result.checkpoint.discriminator, held_out, cfg.reg.gamma);
    row.log = std::move(result.log);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::pair<PatchPairSet, PatchPairSet> split_pairs(const PatchPairSet& pairs, std::size_t test_every) {
  if (test_every < 2) throw ContractError("split_pairs: test_every must be >= 2");
  pairs.validate();
  PatchPairSet train_set, test_set;
  train_set.shape = test_set.shape = pairs.shape;
  train_set.split = Split::kTrain;
  test_set.split = Split::kTest;
  const std::size_t sz = pairs.shape.size();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    PatchPairSet& dst = (i / 2) % test_every == 0 ? test_set : train_set;
    dst.a.insert(dst.a.end(), pairs.a.begin() + i * sz, pairs.a.begin() + (i + 1) * sz);
    dst.b.insert(dst.b.end(), pairs.b.begin() + i * sz, pairs.b.begin() + (i + 1) * sz);
    dst.match.push_back(pairs.match[i]);
  }
  return {std::move(train_set), std::move(test_set)};
}

void write_retrieval_csv(std::ostream& out, const RetrievalReport& report) {
  out << "query,ap\n" << std::setprecision(17);
  for (std::size_t i = 0; i < report.average_precisions.size(); ++i) {
    out << i << ',' << report.average_precisions[i] << '\n';
  }
}

void write_matching_csv(std::ostream& out, const MatchingReport& report) {
  out << "threshold,tpr,fpr\n" << std::setprecision(17);
  for (const auto& p : report.roc) out << p.threshold << ',' << p.tpr << ',' << p.fpr << '\n';
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "lambda_dmr,lambda_bre,fpr_at_95,threshold,tpr,distance_gap,bit_balance\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.lambda_dmr << ',' << r.lambda_bre << ',' << r.report.fpr_at_95 << ',' << r.report.threshold << ','
        << r.report.tpr << ',' << r.diagnostics.distance_gap << ',' << r.diagnostics.bit_balance << '\n';
  }
}

std::string summarize(const RetrievalReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << "mAP@" << report.k << " = " << report.map_at_k << " over "
     << report.average_precisions.size() << " queries (" << report.bits << " bits)";
  return os.str();
}

std::string summarize(const MatchingReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << "FPR@" << std::setprecision(0) << report.tpr_target * 100
     << "%TPR = " << std::setprecision(4) << report.fpr_at_95 << " (threshold " << report.threshold
     << ", TPR " << report.tpr << ")";
  return os.str();
}

}  // namespace bingan
