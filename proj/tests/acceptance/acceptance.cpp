// Acceptance run: one PASS/FAIL line per criterion. Optional arguments pick
// a subset, e.g. `acceptance 1 3 9`. Exit status is 0 only if every selected
// criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bingan/checks/suite.hpp"
#include "bingan/errors.hpp"
#include "bingan/eval.hpp"
#include "bingan/losses.hpp"
#include "bingan/train.hpp"

using namespace bingan;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += fmt(i ? ", %.4f" : "%.4f", v[i]);
  return s + "]";
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& x : t.data()) x = u(rng);
  return t;
}

Tensor random_signs(Shape shape, std::mt19937_64& rng) {
  Tensor t(shape);
  for (double& x : t.data()) x = (rng() & 1) ? 1.0 : -1.0;
  return t;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

// --- 1, 2 -------------------------------------------------------------------

Outcome check_lines(const std::vector<checks::CheckLine>& lines, double secs, double budget) {
  std::size_t failed = 0;
  std::string first_failure;
  for (const auto& l : lines) {
    if (!l.passed) {
      if (failed++ == 0) first_failure = l.name + ": " + l.detail;
    }
  }
  Outcome o;
  o.passed = failed == 0 && secs < budget;
  o.detail = fmt("%zu/%zu checks passed in %.1fs (budget %.0fs)", lines.size() - failed, lines.size(), secs, budget);
  if (failed) o.detail += "; first failure " + first_failure;
  return o;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto lines = checks::run_gradient_suite(1, 100, 1e-4);
  return check_lines(lines, seconds_since(t0), 120.0);
}

Outcome oracle_suite() {
  const auto t0 = Clock::now();
  const auto lines = checks::run_oracle_suite(1);
  return check_lines(lines, seconds_since(t0), 60.0);
}

// --- 3 ----------------------------------------------------------------------

Outcome reduction_identities() {
  std::mt19937_64 rng(3);
  bool ok = true;
  std::string detail;

  // Rows of a Sylvester-Hadamard matrix: every pairwise dot is 0.
  const std::size_t m = 8, n = 8, k = 5;
  Tensor hadamard({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) hadamard.data()[i * m + j] = std::popcount(i & j) % 2 ? -1.0 : 1.0;
  }
  // Identical rows: every pairwise dot is M.
  Tensor identical({n, m});
  const Tensor row = random_signs({1, m}, rng);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(row.data().begin(), m, identical.data().begin() + i * m);

  std::size_t exact = 0, cases = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor s_f = softsign(random_tensor({n, k}, rng), 0.001);
    for (const Tensor* b_h : {&hadamard, &identical}) {
      for (double beta : {0.5, 2.0}) {
        ++cases;
        exact += loss_mac(s_f, *b_h, beta)[0] == loss_ac(s_f)[0];
      }
    }
  }
  ok &= exact == cases;
  detail += fmt("equal-dot L_MAC==L_AC %zu/%zu exact", exact, cases);

  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nn = 2 + trial % 7, mm = 16 + trial % 5;
    const Tensor s_f = softsign(random_tensor({nn, k}, rng), 0.001);
    const Tensor b_h = random_signs({nn, mm}, rng);
    worst = std::max(worst, std::abs(loss_mac(s_f, b_h, 1e9)[0] - loss_ac(s_f)[0]));
  }
  ok &= worst <= 1e-6;
  detail += fmt("; beta=1e9 max |L_MAC-L_AC| %.2e", worst);

  RegularizerConfig zero;
  zero.lambda_dmr = zero.lambda_bre = 0.0;
  std::size_t total_exact = 0;
  for (int trial = 0; trial < 50; ++trial) {
    LossTerms t{Tensor::scalar(std::exp(random_tensor({1}, rng)[0]), true), Tensor::scalar(rng() % 1000 / 7.0),
                Tensor::scalar(rng() % 1000 / 3.0), Tensor::scalar(rng() % 1000 / 11.0)};
    const WeightedLoss w = total_loss(t, zero);
    total_exact += w.total[0] == t.l_d[0] &&
                   compose_total(t.l_d[0], t.l_dmr[0], t.l_me[0], t.l_mac[0], zero) == t.l_d[0];
  }
  // Through a real training step as well.
  TrainConfig cfg;
  cfg.task = Task::kToy;
  cfg.code_bits = 8;
  cfg.batch_size = 8;
  cfg.z_dim = 8;
  cfg.gen_base_channels = 8;
  cfg.reg = zero;
  const ImageSet data = synth_toy_retrieval(3, 4, 4, 8, 1);
  Checkpoint state = initialize(cfg, data.shape);
  std::vector<std::size_t> idx(8);
  for (std::size_t i = 0; i < 8; ++i) idx[i] = i;
  const LossBreakdown step = train_step(state, to_tensor(data.pixels, data.shape, idx));
  const bool step_exact = step.l_total == step.l_d;
  ok &= total_exact == 50 && step_exact;
  detail += fmt("; lambda=0 L_total==L_D %zu/50 exact, train step %s", total_exact, step_exact ? "exact" : "differs");
  return {ok, detail};
}

// --- 4 ----------------------------------------------------------------------

std::vector<double> all_grads(const Network& net) {
  std::vector<double> g;
  for (const Tensor& p : net.parameters()) {
    if (p.has_grad()) {
      g.insert(g.end(), p.grad().begin(), p.grad().end());
    } else {
      g.insert(g.end(), p.size(), 0.0);
    }
  }
  return g;
}

void zero_grads(Network& net) {
  for (Tensor& p : net.parameters()) p.zero_grad();
}

Outcome stop_gradient_contract() {
  TrainConfig cfg;
  cfg.task = Task::kToy;
  cfg.code_bits = 16;
  const ImageSet data = synth_toy_retrieval(4, 8, 4, 16);
  Checkpoint state = initialize(cfg, data.shape);
  Network& d = state.discriminator;
  const Tensor batch = to_tensor(data.pixels, data.shape);
  const RegularizerConfig& reg = cfg.reg;

  // Loss reachable only through b_h: s_f is held constant.
  DiscriminatorOutput out = forward(d, batch);
  RegularizerInputs in = regularizer_inputs(out, out, RegTarget::kReal, reg.gamma);
  const Tensor s_const = stop_gradient(in.s_f);
  const Tensor only_bh = add(loss_dmr(in.b_h, s_const), loss_mac(s_const, in.b_h, reg.beta));
  double norm_bh = 0.0;
  if (only_bh.requires_grad()) {
    backward(only_bh);
    for (double g : all_grads(d)) norm_bh += g * g;
    zero_grads(d);
  }

  // Full objective: gradients are unchanged when b_h is swapped for a
  // history-free copy of the same values.
  const auto full_grads = [&](bool detached_copy) {
    DiscriminatorOutput o = forward(d, batch);
    RegularizerInputs r = regularizer_inputs(o, o, RegTarget::kReal, reg.gamma);
    Tensor b_h = detached_copy ? Tensor(r.b_h.shape(), std::vector<double>(r.b_h.data().begin(), r.b_h.data().end()))
                               : r.b_h;
    const LossTerms terms{loss_gan_d(o.logit, scale(o.logit, -1.0)), loss_dmr(b_h, r.s_f), loss_me(r.s_f),
                          loss_mac(r.s_f, b_h, reg.beta)};
    backward(total_loss(terms, reg).total);
    auto g = all_grads(d);
    zero_grads(d);
    return g;
  };
  const auto through_path = full_grads(false);
  const auto with_copy = full_grads(true);
  double diff = 0.0, scale_norm = 0.0;
  for (std::size_t i = 0; i < through_path.size(); ++i) {
    diff += (through_path[i] - with_copy[i]) * (through_path[i] - with_copy[i]);
    scale_norm += through_path[i] * through_path[i];
  }
  const bool ok = norm_bh == 0.0 && diff == 0.0 && scale_norm > 0.0 && !in.b_h.requires_grad();
  return {ok, fmt("||dL/dtheta|| via b_h = %.1f, full-objective grad diff vs constant b_h = %.1f "
                  "(reference grad norm %.3e)",
                  std::sqrt(norm_bh), std::sqrt(diff), std::sqrt(scale_norm))};
}

// --- 5 ----------------------------------------------------------------------

constexpr std::size_t kRetrievalSteps = 300;

double random_code_map(const ImageSet& q, const ImageSet& db, std::size_t bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto codes = [&](std::size_t n) {
    Bipolar v(n * bits);
    for (auto& x : v) x = (rng() & 1) ? 1 : -1;
    return BitMatrix::pack(v, n, bits);
  };
  const BitMatrix qc = codes(q.size());
  const BitMatrix dc = codes(db.size());
  RetrievalOptions o;
  o.k = 100;
  return map_retrieval(qc, q.labels, dc, db.labels, o).map_at_k;
}

double trained_map(const ImageSet& train_set, const ImageSet& test_set, std::uint64_t seed, double l_dmr,
                   double l_bre) {
  TrainConfig cfg;
  cfg.task = Task::kToy;
  cfg.code_bits = 16;
  cfg.epochs = 1000;
  cfg.max_steps = kRetrievalSteps;
  cfg.seed = seed;
  cfg.reg.lambda_dmr = l_dmr;
  cfg.reg.lambda_bre = l_bre;
  const TrainResult r = train(cfg, train_set);
  RetrievalOptions o;
  o.k = 100;
  return map_retrieval(extract_codes(r.checkpoint.discriminator, test_set),
                       extract_codes(r.checkpoint.discriminator, train_set), o)
      .map_at_k;
}

Outcome desk_retrieval() {
  const auto t0 = Clock::now();
  std::vector<double> full, none, rnd;
  for (std::uint64_t s : kSeeds) {
    const ImageSet train_set = synth_toy_retrieval(s, 500, 4, 16);
    const ImageSet test_set = synth_toy_retrieval(s + 7777, 50, 4, 16);
    full.push_back(trained_map(train_set, test_set, s, 0.05, 0.01));
    none.push_back(trained_map(train_set, test_set, s, 0.0, 0.0));
    rnd.push_back(random_code_map(test_set, train_set, 16, s));
  }
  const double mf = median(full), mn = median(none), mr = median(rnd);
  const double secs = seconds_since(t0);
  return {mf > mr && mf > mn && secs < 900.0,
          fmt("median mAP@100 full %.4f vs random %.4f vs lambda=0 %.4f; full %s none %s random %s; %.0fs", mf, mr, mn,
              list(full).c_str(), list(none).c_str(), list(rnd).c_str(), secs)};
}

// --- 6, 7 -------------------------------------------------------------------

constexpr std::size_t kPairSteps = 200;
constexpr std::size_t kPairBits = 8;
constexpr std::size_t kPairs = 2000;

// Rows per seed, in ablation_grid order: none, BRE only, DMR only, both.
const std::vector<std::vector<AblationRow>>& ablation_runs() {
  static const std::vector<std::vector<AblationRow>> runs = [] {
    std::vector<std::vector<AblationRow>> all;
    for (std::uint64_t s : kSeeds) {
      TrainConfig cfg;
      cfg.task = Task::kToy;
      cfg.code_bits = kPairBits;
      cfg.epochs = 1000;
      cfg.max_steps = kPairSteps;
      cfg.seed = s;
      const auto [train_set, test_set] = split_pairs(synth_toy_pairs(s, kPairs, 16), 4);
      all.push_back(run_ablation(train_set, test_set, cfg));
    }
    return all;
  }();
  return runs;
}

std::vector<double> column(std::size_t row, const std::function<double(const AblationRow&)>& get) {
  std::vector<double> v;
  for (const auto& seed_rows : ablation_runs()) v.push_back(get(seed_rows.at(row)));
  return v;
}

enum Row : std::size_t { kNone = 0, kBreOnly = 1, kDmrOnly = 2, kFull = 3 };

Outcome ablation_trend() {
  const auto t0 = Clock::now();
  const auto fpr = [](const AblationRow& r) { return r.report.fpr_at_95; };
  const auto none = column(kNone, fpr), bre = column(kBreOnly, fpr), dmr = column(kDmrOnly, fpr),
             full = column(kFull, fpr);
  const double mn = median(none), mb = median(bre), md = median(dmr), mf = median(full);
  return {mf <= mn && md <= mn,
          fmt("median FPR@95 none %.4f, BRE-only %.4f, DMR-only %.4f, full %.4f; per seed none %s DMR-only %s full %s; "
              "%.0fs",
              mn, mb, md, mf, list(none).c_str(), list(dmr).c_str(), list(full).c_str(), seconds_since(t0))};
}

Outcome mechanism_checks() {
  const auto gap = [](const AblationRow& r) { return r.diagnostics.distance_gap; };
  const auto bal = [](const AblationRow& r) { return r.diagnostics.bit_balance; };
  const double gap_on = median(column(kDmrOnly, gap)), gap_off = median(column(kNone, gap));
  const double bal_on = median(column(kBreOnly, bal)), bal_off = median(column(kNone, bal));
  // Same comparisons with the other regulariser switched on.
  const double gap_on2 = median(column(kFull, gap)), gap_off2 = median(column(kBreOnly, gap));
  const double bal_on2 = median(column(kFull, bal)), bal_off2 = median(column(kDmrOnly, bal));
  return {gap_on < gap_off && bal_on < bal_off,
          fmt("(a) distance gap DMR on %.4f < off %.4f; (b) bit balance BRE on %.4f < off %.4f "
              "[with the other term on: gap %.4f vs %.4f, balance %.4f vs %.4f]",
              gap_on, gap_off, bal_on, bal_off, gap_on2, gap_off2, bal_on2, bal_off2)};
}

// --- 8 ----------------------------------------------------------------------

Outcome determinism() {
  TrainConfig cfg;
  cfg.task = Task::kToy;
  cfg.code_bits = 16;
  cfg.batch_size = 16;
  cfg.epochs = 1000;
  cfg.max_steps = 20;
  cfg.seed = 8;
  const ImageSet data = synth_toy_retrieval(8, 40, 4, 16);
  const TrainResult a = train(cfg, data), b = train(cfg, data);
  const bool ck = encode_checkpoint(a.checkpoint) == encode_checkpoint(b.checkpoint);
  const bool desc = encode_descriptors(extract_codes(a.checkpoint.discriminator, data)) ==
                    encode_descriptors(extract_codes(b.checkpoint.discriminator, data));
  TrainConfig other = cfg;
  other.seed = 9;
  const bool seed_matters = encode_checkpoint(train(other, data).checkpoint) != encode_checkpoint(a.checkpoint);
  return {ck && desc && seed_matters && a.checkpoint.step == 20,
          fmt("checkpoints after %llu steps %s, descriptor files %s, different seed %s",
              static_cast<unsigned long long>(a.checkpoint.step), ck ? "identical" : "DIFFER",
              desc ? "identical" : "DIFFER", seed_matters ? "differs" : "IDENTICAL")};
}

// --- 9 ----------------------------------------------------------------------

template <class Decode>
bool rejects_corruption(std::vector<std::uint8_t> bytes, Decode decode) {
  bool all = true;
  for (std::size_t pos : {bytes.size() - 1, bytes.size() - 4, bytes.size() / 2, std::size_t{9}}) {
    auto bad = bytes;
    bad[pos] ^= 0x10;
    try {
      decode(bad);
      all = false;
    } catch (const FormatError&) {
    }
  }
  return all;
}

Outcome format_round_trips() {
  std::vector<std::string> failures;
  const auto check = [&](const std::string& name, const std::vector<std::uint8_t>& bytes, auto decode, auto encode) {
    if (encode(decode(bytes)) != bytes) failures.push_back(name + " round trip");
    if (!rejects_corruption(bytes, decode)) failures.push_back(name + " corruption");
  };
  const auto dec_ds = [](const std::vector<std::uint8_t>& b) { return decode_dataset(b); };
  const auto enc_ds = [](const Dataset& d) { return encode_dataset(d); };
  const ImageSet images = synth_toy_retrieval(9, 6, 4, 16);
  check("BGDS images", encode_dataset(images), dec_ds, enc_ds);
  check("BGDS pairs", encode_dataset(synth_toy_pairs(9, 10, 16)), dec_ds, enc_ds);

  TrainConfig cfg;
  cfg.task = Task::kToy;
  cfg.code_bits = 16;
  cfg.batch_size = 8;
  cfg.max_steps = 2;
  const Checkpoint ck = train(cfg, images).checkpoint;
  check("BGCK", encode_checkpoint(ck), [](const std::vector<std::uint8_t>& b) { return decode_checkpoint(b); },
        [](const Checkpoint& c) { return encode_checkpoint(c); });

  const auto dec_bd = [](const std::vector<std::uint8_t>& b) { return decode_descriptors(b); };
  const auto enc_bd = [](const DescriptorFile& f) { return encode_descriptors(f); };
  DescriptorFile labelled = extract_codes(ck.discriminator, images);
  check("BGBD labelled", encode_descriptors(labelled), dec_bd, enc_bd);
  labelled.labels.reset();
  check("BGBD unlabelled", encode_descriptors(labelled), dec_bd, enc_bd);

  std::string detail = "BGDS (images, pairs), BGCK, BGBD (labelled, unlabelled): ";
  if (failures.empty()) {
    detail += "write-read-write identical; flipped bytes rejected by CRC";
  } else {
    for (const auto& f : failures) detail += f + " FAILED; ";
  }
  return {failures.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient suite", gradient_suite},
      {2, "oracle equivalence", oracle_suite},
      {3, "reduction identities", reduction_identities},
      {4, "stop-gradient contract", stop_gradient_contract},
      {5, "desk-scale retrieval", desk_retrieval},
      {6, "desk-scale ablation trend", ablation_trend},
      {7, "regulariser mechanism checks", mechanism_checks},
      {8, "determinism", determinism},
      {9, "format round-trips", format_round_trips},
  };
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));

  bool all_passed = true;
  for (const auto& c : all) {
    if (!chosen.empty() && !chosen.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all_passed &= o.passed;
    std::printf("%s criterion %d (%s): %s\n", o.passed ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return all_passed ? 0 : 1;
}
