#include "bingan/checks/suite.hpp"

#include <cmath>
#include <sstream>

#include "bingan/checks/oracles.hpp"
#include "bingan/eval.hpp"
#include "bingan/losses.hpp"
#include "bingan/quantize.hpp"

namespace bingan::checks {

namespace {

using Ops = std::function<Tensor(const std::vector<Tensor>&)>;
using Makers = std::function<std::vector<Tensor>(std::mt19937_64&)>;

// Uniform magnitudes in [0.1, 1] with random sign: keeps kinks (abs, leaky
// ReLU, softsign's sharp core) well outside the finite-difference stencil.
Tensor away_from_zero(Shape shape, std::mt19937_64& rng, bool grad = true) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = coin(rng) ? mag(rng) : -mag(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi, bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

Tensor bipolar(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<double> v(n * m);
  for (auto& x : v) x = coin(rng) ? 1.0 : -1.0;
  return Tensor({n, m}, std::move(v));
}

// Tensor-valued ops are probed through <op(inputs), R> with a fixed random
// R appended as the last (constant) input.
GradCase projected(const std::string& name, Makers make, Ops op) {
  auto maker = [make, op](std::mt19937_64& rng) {
    std::vector<Tensor> in = make(rng);
    const Shape out = op(in).shape();
    in.push_back(uniform(out, rng, -1.0, 1.0, false));
    return in;
  };
  auto fn = [op](const std::vector<Tensor>& in) {
    const std::vector<Tensor> args(in.begin(), in.end() - 1);
    return sum(mul(op(args), in.back()));
  };
  return {name, maker, fn};
}

GradCase unary(const std::string& name, Shape shape, std::function<Tensor(const Tensor&)> op) {
  return projected(
      name, [shape](std::mt19937_64& rng) { return std::vector<Tensor>{away_from_zero(shape, rng)}; },
      [op](const std::vector<Tensor>& in) { return op(in[0]); });
}

GradCase binary(const std::string& name, Shape a, Shape b, std::function<Tensor(const Tensor&, const Tensor&)> op) {
  return projected(
      name,
      [a, b](std::mt19937_64& rng) { return std::vector<Tensor>{away_from_zero(a, rng), away_from_zero(b, rng)}; },
      [op](const std::vector<Tensor>& in) { return op(in[0], in[1]); });
}

constexpr double kGamma = 0.001;

}  // namespace

std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> c;
  c.push_back(binary("matmul", {4, 5}, {5, 3}, [](auto& a, auto& b) { return matmul(a, b); }));
  c.push_back(unary("transpose", {3, 5}, [](auto& x) { return transpose(x); }));
  c.push_back(binary("conv2d_3x3_s1_p1", {2, 3, 5, 5}, {4, 3, 3, 3},
                     [](auto& x, auto& w) { return conv2d(x, w, 1, 1); }));
  c.push_back(binary("conv2d_3x3_s2_p1", {2, 2, 6, 6}, {3, 2, 3, 3},
                     [](auto& x, auto& w) { return conv2d(x, w, 2, 1); }));
  c.push_back(binary("conv2d_3x3_s1_p0", {1, 2, 5, 4}, {2, 2, 3, 3},
                     [](auto& x, auto& w) { return conv2d(x, w, 1, 0); }));
  c.push_back(binary("conv2d_1x1", {2, 4, 3, 3}, {5, 4, 1, 1}, [](auto& x, auto& w) { return conv2d(x, w, 1, 0); }));
  c.push_back(binary("add_bias_2d", {4, 3}, {3}, [](auto& x, auto& b) { return add_bias(x, b); }));
  c.push_back(binary("add_bias_4d", {2, 3, 2, 2}, {3}, [](auto& x, auto& b) { return add_bias(x, b); }));
  c.push_back(binary("add", {3, 4}, {3, 4}, [](auto& a, auto& b) { return add(a, b); }));
  c.push_back(binary("add_scalar_rhs", {3, 4}, {}, [](auto& a, auto& b) { return add(a, b); }));
  c.push_back(binary("sub", {3, 4}, {3, 4}, [](auto& a, auto& b) { return sub(a, b); }));
  c.push_back(binary("mul", {3, 4}, {3, 4}, [](auto& a, auto& b) { return mul(a, b); }));
  c.push_back(binary("mul_scalar_rhs", {3, 4}, {1}, [](auto& a, auto& b) { return mul(a, b); }));
  c.push_back(unary("scale", {3, 4}, [](auto& x) { return scale(x, -1.7); }));
  c.push_back(unary("add_constant", {3, 4}, [](auto& x) { return add_scalar(x, 0.3); }));
  c.push_back(unary("leaky_relu", {4, 6}, [](auto& x) { return leaky_relu(x, 0.2); }));
  c.push_back(unary("tanh", {4, 6}, [](auto& x) { return tanh(x); }));
  c.push_back(unary("sigmoid", {4, 6}, [](auto& x) { return sigmoid(x); }));
  c.push_back(unary("abs", {4, 6}, [](auto& x) { return abs(x); }));
  c.push_back(unary("exp", {4, 6}, [](auto& x) { return exp(x); }));
  c.push_back(unary("square", {4, 6}, [](auto& x) { return square(x); }));
  c.push_back(unary("softplus", {4, 6}, [](auto& x) { return softplus(scale(x, 5.0)); }));
  c.push_back(unary("softsign", {4, 6}, [](auto& x) { return softsign(x, kGamma); }));
  c.push_back(unary("sum", {3, 5}, [](auto& x) { return sum(x); }));
  c.push_back(unary("mean", {3, 5}, [](auto& x) { return mean(x); }));
  c.push_back(unary("mean_rows", {6, 4}, [](auto& x) { return mean_rows(x); }));
  c.push_back(unary("avg_pool_global", {2, 3, 4, 4}, [](auto& x) { return avg_pool_global(x); }));
  c.push_back(unary("reshape", {2, 3, 4}, [](auto& x) { return reshape(x, {4, 6}); }));
  c.push_back(unary("flatten", {2, 3, 2, 2}, [](auto& x) { return flatten(x); }));
  c.push_back(binary("concat_rows", {2, 3}, {4, 3}, [](auto& a, auto& b) { return concat_rows(a, b); }));
  c.push_back(unary("upsample2x", {2, 2, 3, 3}, [](auto& x) { return upsample2x(x); }));
  c.push_back(projected(
      "batch_stats_norm_2d",
      [](std::mt19937_64& rng) {
        return std::vector<Tensor>{away_from_zero({6, 3}, rng), away_from_zero({3}, rng), away_from_zero({3}, rng)};
      },
      [](const std::vector<Tensor>& in) { return batch_stats_norm(in[0], in[1], in[2]); }));
  c.push_back(projected(
      "batch_stats_norm_4d",
      [](std::mt19937_64& rng) {
        return std::vector<Tensor>{away_from_zero({3, 2, 3, 3}, rng), away_from_zero({2}, rng),
                                   away_from_zero({2}, rng)};
      },
      [](const std::vector<Tensor>& in) { return batch_stats_norm(in[0], in[1], in[2]); }));

  // Loss terms, differentiated through softsign of a raw f.
  c.push_back({"loss_dmr",
               [](std::mt19937_64& rng) {
                 return std::vector<Tensor>{away_from_zero({6, 8}, rng), bipolar(6, 24, rng)};
               },
               [](const std::vector<Tensor>& in) { return loss_dmr(in[1], softsign(in[0], kGamma)); }});
  c.push_back({"loss_me", [](std::mt19937_64& rng) { return std::vector<Tensor>{away_from_zero({6, 8}, rng)}; },
               [](const std::vector<Tensor>& in) { return loss_me(softsign(in[0], kGamma)); }});
  c.push_back({"loss_ac", [](std::mt19937_64& rng) { return std::vector<Tensor>{away_from_zero({6, 8}, rng)}; },
               [](const std::vector<Tensor>& in) { return loss_ac(softsign(in[0], kGamma)); }});
  c.push_back({"loss_mac",
               [](std::mt19937_64& rng) {
                 return std::vector<Tensor>{away_from_zero({6, 8}, rng), bipolar(6, 24, rng)};
               },
               [](const std::vector<Tensor>& in) { return loss_mac(softsign(in[0], kGamma), in[1], 0.5); }});
  c.push_back({"loss_feature_matching",
               [](std::mt19937_64& rng) {
                 return std::vector<Tensor>{away_from_zero({5, 4}, rng), away_from_zero({5, 4}, rng)};
               },
               [](const std::vector<Tensor>& in) { return loss_feature_matching(in[0], in[1]); }});
  c.push_back({"loss_gan_d",
               [](std::mt19937_64& rng) {
                 return std::vector<Tensor>{uniform({6, 1}, rng, -4, 4), uniform({6, 1}, rng, -4, 4)};
               },
               [](const std::vector<Tensor>& in) { return loss_gan_d(in[0], in[1]); }});
  c.push_back({"loss_total",
               [](std::mt19937_64& rng) {
                 return std::vector<Tensor>{uniform({6, 1}, rng, -4, 4), uniform({6, 1}, rng, -4, 4),
                                            away_from_zero({6, 8}, rng), bipolar(6, 24, rng)};
               },
               [](const std::vector<Tensor>& in) {
                 const Tensor s_f = softsign(in[2], kGamma);
                 const LossTerms terms{loss_gan_d(in[0], in[1]), loss_dmr(in[3], s_f), loss_me(s_f),
                                       loss_mac(s_f, in[3], 0.5)};
                 return total_loss(terms, RegularizerConfig{}).total;
               }});
  return c;
}

std::vector<CheckLine> run_gradient_suite(std::uint64_t seed, std::size_t points, double tol) {
  std::vector<CheckLine> lines;
  std::mt19937_64 rng(seed);
  for (const auto& gc : gradient_cases()) {
    const GradCheckResult r = check_gradient(gc.name, gc.make, gc.fn, rng, points);
    std::ostringstream os;
    os << r.points << " points, max rel err " << r.max_rel_err;
    if (r.max_rel_err >= tol) os << " (analytic " << r.worst_analytic << " vs numeric " << r.worst_numeric << ")";
    lines.push_back({"grad " + gc.name, r.max_rel_err < tol, os.str()});
  }
  return lines;
}

namespace {

Matrix rows_of(const Tensor& t) {
  Matrix m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t[i * t.dim(1) + j];
  }
  return m;
}

std::vector<int> to_ints(const Bipolar& b, std::size_t begin, std::size_t n) {
  return std::vector<int>(b.begin() + begin, b.begin() + begin + n);
}

CheckLine hamming_line(std::mt19937_64& rng) {
  const std::size_t lengths[] = {8, 16, 32, 63, 64, 100, 256};
  std::size_t mismatches = 0;
  const std::size_t trials = 10000;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t m = lengths[t % std::size(lengths)];
    Bipolar a(m), b(m);
    long dot = 0;
    for (std::size_t i = 0; i < m; ++i) {
      a[i] = (rng() & 1) ? 1 : -1;
      b[i] = (rng() & 1) ? 1 : -1;
      dot += a[i] * b[i];
    }
    const BitMatrix pa = BitMatrix::pack(a, 1, m), pb = BitMatrix::pack(b, 1, m);
    const int via_dot = hamming_from_dot(dot, static_cast<int>(m));
    const int via_xor = hamming_distance(pa.row(0), pb.row(0));
    const int oracle = hamming_oracle(to_ints(a, 0, m), to_ints(b, 0, m));
    if (via_dot != via_xor || via_xor != oracle) ++mismatches;
  }
  return {"oracle hamming_from_dot vs popcount-xor", mismatches == 0,
          std::to_string(trials) + " random pairs, " + std::to_string(mismatches) + " mismatches"};
}

CheckLine loss_line(std::mt19937_64& rng) {
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t n = 2; n <= 8; ++n) {
    for (int rep = 0; rep < 20; ++rep, ++cases) {
      const std::size_t k = 1 + rng() % 16, m = k + 1 + rng() % 48;
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      std::vector<double> sv(n * k);
      for (auto& v : sv) v = u(rng);
      const Tensor s_f({n, k}, sv);
      std::vector<double> hv(n * m);
      for (auto& v : hv) v = (rng() & 1) ? 1.0 : -1.0;
      const Tensor b_h({n, m}, hv);
      const double beta = rep % 2 ? 0.5 : 0.05 + 2.0 * (u(rng) + 1.0);
      const Matrix s = rows_of(s_f), b = rows_of(b_h);
      worst = std::max(worst, std::abs(loss_dmr(b_h, s_f).item() - dmr_oracle(b, s)));
      worst = std::max(worst, std::abs(loss_me(s_f).item() - me_oracle(s)));
      worst = std::max(worst, std::abs(loss_ac(s_f).item() - ac_oracle(s)));
      worst = std::max(worst, std::abs(loss_mac(s_f, b_h, beta).item() - mac_oracle(s, b, beta)));
    }
  }
  std::ostringstream os;
  os << cases << " batches with N in [2, 8], max abs diff " << worst;
  return {"oracle loss_dmr/loss_me/loss_ac/loss_mac vs pairwise loops", worst <= 1e-12, os.str()};
}

CheckLine retrieval_line(std::mt19937_64& rng) {
  double worst = 0.0;
  std::size_t instances = 0;
  for (int rep = 0; rep < 40; ++rep, ++instances) {
    const std::size_t n_db = 2 + rng() % 49, n_bits = 1 + rng() % 12;
    const int n_classes = 1 + static_cast<int>(rng() % 5);
    const long k = 1 + static_cast<long>(rng() % (n_db + 3));
    const bool self = rep % 2 == 0;
    const std::size_t n_q = self ? n_db : 1 + rng() % 20;

    Bipolar db_bits(n_db * n_bits), q_bits(n_q * n_bits);
    for (auto& v : db_bits) v = (rng() & 1) ? 1 : -1;
    std::vector<std::int32_t> db_labels(n_db), q_labels(n_q);
    for (auto& l : db_labels) l = static_cast<std::int32_t>(rng() % n_classes);
    if (self) {
      q_bits = db_bits;
      q_labels = db_labels;
    } else {
      for (auto& v : q_bits) v = (rng() & 1) ? 1 : -1;
      for (auto& l : q_labels) l = static_cast<std::int32_t>(rng() % (n_classes + 1));
    }
    const BitMatrix db = BitMatrix::pack(db_bits, n_db, n_bits);
    const BitMatrix qs = BitMatrix::pack(q_bits, n_q, n_bits);
    RetrievalOptions opts;
    opts.k = static_cast<std::size_t>(k);
    opts.exclude_self = self;
    const RetrievalReport report = map_retrieval(qs, q_labels, db, db_labels, opts);

    Codes db_codes(n_db);
    for (std::size_t i = 0; i < n_db; ++i) db_codes[i] = to_ints(db_bits, i * n_bits, n_bits);
    const std::vector<int> dbl(db_labels.begin(), db_labels.end());
    double mean = 0.0;
    for (std::size_t q = 0; q < n_q; ++q) {
      const double ap = ap_oracle(to_ints(q_bits, q * n_bits, n_bits), q_labels[q], db_codes, dbl, k,
                                  self ? static_cast<long>(q) : -1);
      worst = std::max(worst, std::abs(ap - report.average_precisions[q]));
      mean += ap;
    }
    worst = std::max(worst, std::abs(mean / static_cast<double>(n_q) - report.map_at_k));
  }
  std::ostringstream os;
  os << instances << " instances of <= 50 items, max abs diff " << worst;
  return {"oracle average precision / mAP vs exhaustive sort", worst <= 1e-12, os.str()};
}

CheckLine fpr_line(std::mt19937_64& rng) {
  double worst = 0.0;
  std::size_t threshold_mismatch = 0, instances = 0;
  const double targets[] = {0.95, 0.5, 0.8, 1.0};
  for (int rep = 0; rep < 200; ++rep, ++instances) {
    const int top = 1 + static_cast<int>(rng() % 64);
    std::vector<int> matched(1 + rng() % 25), nonmatched(1 + rng() % 25);
    for (auto& d : matched) d = static_cast<int>(rng() % (top + 1));
    for (auto& d : nonmatched) d = static_cast<int>(rng() % (top + 1));
    const double target = targets[rep % 4];
    const MatchingReport r = fpr_at_tpr(matched, nonmatched, target);
    const FprOracle o = fpr_oracle(matched, nonmatched, target);
    worst = std::max(worst, std::abs(r.fpr_at_95 - o.fpr));
    if (r.threshold != o.threshold) ++threshold_mismatch;
  }
  std::ostringstream os;
  os << instances << " instances of <= 50 distances, max abs diff " << worst << ", " << threshold_mismatch
     << " threshold mismatches";
  return {"oracle FPR at target TPR vs threshold sweep", worst <= 1e-12 && threshold_mismatch == 0, os.str()};
}

}  // namespace

std::vector<CheckLine> run_oracle_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {hamming_line(rng), loss_line(rng), retrieval_line(rng), fpr_line(rng)};
}

}  // namespace bingan::checks
