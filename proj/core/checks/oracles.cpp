#include "bingan/checks/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bingan::checks {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

int hamming_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i] ? 1 : 0;
  return d;
}

double dmr_oracle(const Matrix& b_h, const Matrix& s_f) {
  const std::size_t n = s_f.size();
  const double m = static_cast<double>(b_h[0].size());
  const double k = static_cast<double>(s_f[0].size());
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      total += std::abs(dot(b_h[a], b_h[b]) / m - dot(s_f[a], s_f[b]) / k);
    }
  }
  return total / static_cast<double>(n * (n - 1));
}

double me_oracle(const Matrix& s_f) {
  const std::size_t n = s_f.size(), k = s_f[0].size();
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += s_f[i][j];
    col /= static_cast<double>(n);
    total += col * col;
  }
  return total / static_cast<double>(k);
}

double ac_oracle(const Matrix& s_f) {
  const std::size_t n = s_f.size();
  const double k = static_cast<double>(s_f[0].size());
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b) total += std::abs(dot(s_f[a], s_f[b])) / k;
    }
  }
  return total / static_cast<double>(n * (n - 1));
}

double mac_oracle(const Matrix& s_f, const Matrix& b_h, double beta) {
  const std::size_t n = s_f.size();
  const double m = static_cast<double>(b_h[0].size());
  const double k = static_cast<double>(s_f[0].size());
  double z = 0.0, total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double alpha = std::exp(-std::abs(dot(b_h[a], b_h[b])) / (beta * m));
      z += alpha;
      total += alpha * std::abs(dot(s_f[a], s_f[b])) / k;
    }
  }
  return total / z;
}

double ap_oracle(const std::vector<int>& query, int query_label, const Codes& db, const std::vector<int>& db_labels,
                 long k, long skip) {
  if (k <= 0) throw std::invalid_argument("k must be positive");
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (static_cast<long>(i) != skip) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return hamming_oracle(query, db[x]) < hamming_oracle(query, db[y]);
  });
  std::size_t relevant = 0;
  for (std::size_t i : order) relevant += db_labels[i] == query_label ? 1 : 0;
  if (relevant == 0) return 0.0;

  const std::size_t depth = std::min<std::size_t>(order.size(), static_cast<std::size_t>(k));
  double sum = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (db_labels[order[r]] != query_label) continue;
    std::size_t hits = 0;
    for (std::size_t q = 0; q <= r; ++q) hits += db_labels[order[q]] == query_label ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(std::min<std::size_t>(relevant, static_cast<std::size_t>(k)));
}

FprOracle fpr_oracle(const std::vector<int>& matched, const std::vector<int>& nonmatched, double tpr_target) {
  const int top = std::max(*std::max_element(matched.begin(), matched.end()),
                           *std::max_element(nonmatched.begin(), nonmatched.end()));
  for (int t = 0; t <= top; ++t) {
    std::size_t tp = 0, fp = 0;
    for (int d : matched) tp += d <= t ? 1 : 0;
    for (int d : nonmatched) fp += d <= t ? 1 : 0;
    if (static_cast<double>(tp) / static_cast<double>(matched.size()) >= tpr_target) {
      return {static_cast<double>(fp) / static_cast<double>(nonmatched.size()), t};
    }
  }
  return {1.0, top};
}

}  // namespace bingan::checks
