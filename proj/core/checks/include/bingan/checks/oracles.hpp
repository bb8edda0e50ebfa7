#pragma once

// Slow, loop-by-loop reference implementations. They share no code with
// the library paths they are compared against.

#include <cstdint>
#include <vector>

namespace bingan::checks {

using Matrix = std::vector<std::vector<double>>;
using Codes = std::vector<std::vector<int>>;  // entries +1 / -1

int hamming_oracle(const std::vector<int>& a, const std::vector<int>& b);

double dmr_oracle(const Matrix& b_h, const Matrix& s_f);
double me_oracle(const Matrix& s_f);
double ac_oracle(const Matrix& s_f);
double mac_oracle(const Matrix& s_f, const Matrix& b_h, double beta);

/// Ranks the database by per-bit Hamming distance (stable on index), drops
/// `skip` (if >= 0), and evaluates AP@k by recounting precision at every
/// relevant rank.
double ap_oracle(const std::vector<int>& query, int query_label, const Codes& db, const std::vector<int>& db_labels,
                 long k, long skip);

struct FprOracle {
  double fpr;
  int threshold;
};
/// Sweeps every integer threshold from 0 upwards.
FprOracle fpr_oracle(const std::vector<int>& matched, const std::vector<int>& nonmatched, double tpr_target);

}  // namespace bingan::checks
