#pragma once

// Retrieval mAP over Hamming rankings, matching FPR at a target TPR, and the
// four-way regulariser ablation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bingan/data.hpp"
#include "bingan/quantize.hpp"
#include "bingan/train.hpp"

namespace bingan {

/// AP@k = (Σ_{i≤k} Prec(i)·rel(i)) / min(R, k), 0 when R = 0.
/// `ranked` is the retrieved label list, best first; `n_relevant` is R.
double average_precision(std::int32_t query_label, std::span<const std::int32_t> ranked, std::size_t n_relevant,
                         long k);

struct RetrievalReport {
  double map_at_k = 0.0;
  std::size_t k = 1000;
  std::size_t bits = 0;
  std::vector<double> average_precisions;
};

struct RetrievalOptions {
  std::size_t k = 1000;
  // Drop db row i for query i. Defaults to on when queries and db coincide.
  std::optional<bool> exclude_self;
};

/// Threads used by evaluation: BINGAN_THREADS if set, else hardware.
std::size_t eval_threads();

RetrievalReport map_retrieval(const BitMatrix& queries, std::span<const std::int32_t> query_labels,
                              const BitMatrix& db, std::span<const std::int32_t> db_labels,
                              const RetrievalOptions& options = {});
RetrievalReport map_retrieval(const DescriptorFile& queries, const DescriptorFile& db,
                              const RetrievalOptions& options = {});

struct RocPoint {
  int threshold;
  double tpr;
  double fpr;
};

struct MatchingReport {
  double fpr_at_95 = 0.0;  // at tpr_target, whatever it is
  int threshold = 0;
  double tpr = 0.0;
  double tpr_target = 0.95;
  std::vector<RocPoint> roc;  // one point per integer threshold 0..max distance
};

MatchingReport fpr_at_tpr(std::span<const int> matched, std::span<const int> nonmatched, double tpr_target = 0.95);

/// Hamming distances between the codes of each pair's two patches.
void pair_distances(const Network& disc, const PatchPairSet& pairs, std::vector<int>& matched,
                    std::vector<int>& nonmatched);
MatchingReport evaluate_matching(const Network& disc, const PatchPairSet& pairs, double tpr_target = 0.95);

struct AblationRow {
  double lambda_dmr = 0.0;
  double lambda_bre = 0.0;
  MatchingReport report;
  CodeDiagnostics diagnostics;
  std::vector<LogEntry> log;
};

/// (λ_dmr, λ_bre) settings in table order: none, BRE only, DMR only, both.
std::vector<std::pair<double, double>> ablation_grid(double lambda_dmr = 0.05, double lambda_bre = 0.01);

/// Trains one model per grid setting on `train_set` with otherwise identical
/// configuration and evaluates each on `test_set`.
std::vector<AblationRow> run_ablation(const PatchPairSet& train_set, const PatchPairSet& test_set,
                                      const TrainConfig& base,
                                      const std::function<void(std::size_t, const LogEntry&)>& on_step = {});

/// Splits pairs into train/test halves keeping matched/non-matched balance
/// (every other even/odd couple goes to test).
std::pair<PatchPairSet, PatchPairSet> split_pairs(const PatchPairSet& pairs, std::size_t test_every = 4);

void write_retrieval_csv(std::ostream& out, const RetrievalReport& report);
void write_matching_csv(std::ostream& out, const MatchingReport& report);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
std::string summarize(const RetrievalReport& report);
std::string summarize(const MatchingReport& report);

}  // namespace bingan
