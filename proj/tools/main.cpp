// bingan: train binary-descriptor GANs and evaluate their codes.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "bingan/checks/suite.hpp"
#include "bingan/data.hpp"
#include "bingan/errors.hpp"
#include "bingan/eval.hpp"
#include "bingan/quantize.hpp"
#include "bingan/train.hpp"
#include "manifest.hpp"
#include "pnm.hpp"

namespace fs = std::filesystem;
using namespace bingan;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    cells.push_back(cell);
  }
  return cells;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (cells.size() != columns) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                      " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

tools::Raster load_raster(const fs::path& dir, const std::string& name, std::optional<RasterShape>& shape) {
  tools::Raster r = tools::read_pnm(dir / name);
  if (shape && !(r.shape == *shape)) throw DataError("image " + name + " differs in size from the first image");
  shape = r.shape;
  return r;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "' (expected train|test)");
}

Dataset import_dataset(const std::string& kind, const fs::path& dir, const fs::path& labels, Split split) {
  std::optional<RasterShape> shape;
  if (kind == "image") {
    auto rows = read_csv(labels, 2);
    if (!rows.empty() && rows[0][0] == "file" && rows[0][1] == "label") rows.erase(rows.begin());
    std::set<std::string> names;
    for (const auto& r : rows) names.insert(r[1]);
    // Integer labels keep numeric order; other labels are sorted as text.
    std::vector<std::string> ordered(names.begin(), names.end());
    const bool numeric = std::all_of(ordered.begin(), ordered.end(), [](const std::string& s) {
      return !s.empty() && s.find_first_not_of("-0123456789") == std::string::npos;
    });
    if (numeric) {
      std::sort(ordered.begin(), ordered.end(),
                [](const std::string& a, const std::string& b) { return std::stol(a) < std::stol(b); });
    }
    std::map<std::string, std::int32_t> ids;
    for (const auto& n : ordered) ids.emplace(n, static_cast<std::int32_t>(ids.size()));
    ImageSet set;
    set.split = split;
    for (const auto& r : rows) {
      const auto raster = load_raster(dir, r[0], shape);
      set.pixels.insert(set.pixels.end(), raster.planar.begin(), raster.planar.end());
      set.labels.push_back(ids.at(r[1]));
    }
    if (shape) set.shape = *shape;
    set.validate();
    return set;
  }
  if (kind == "pairs") {
    auto rows = read_csv(labels, 3);
    if (!rows.empty() && rows[0][2] == "match") rows.erase(rows.begin());
    PatchPairSet set;
    set.split = split;
    for (const auto& r : rows) {
      if (r[2] != "0" && r[2] != "1") throw DataError("match column must be 0 or 1, got '" + r[2] + "'");
      const auto a = load_raster(dir, r[0], shape);
      const auto b = load_raster(dir, r[1], shape);
      set.a.insert(set.a.end(), a.planar.begin(), a.planar.end());
      set.b.insert(set.b.end(), b.planar.begin(), b.planar.end());
      set.match.push_back(r[2] == "1" ? 1 : 0);
    }
    if (shape) set.shape = *shape;
    set.validate();
    return set;
  }
  throw ConfigError("unknown import kind '" + kind + "' (expected image|pairs)");
}

void apply_overrides(TrainConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

fs::path manifest_for(const fs::path& artifact) { return fs::path(artifact.string() + ".manifest.json"); }

void progress(const LogEntry& e, std::size_t every) {
  if (every == 0 || e.step % every != 0) return;
  std::fprintf(stderr, "step %6llu  l_d %.4f  l_dmr %.4f  l_me %.4f  l_mac %.4f  l_total %.4f  l_g %.4f\n",
               static_cast<unsigned long long>(e.step), e.loss.l_d, e.loss.l_dmr, e.loss.l_me, e.loss.l_mac,
               e.loss.l_total, e.loss.l_g);
}

struct TrainArgs {
  std::string data, config, out, resume, task;
  std::size_t bits = 0;
  std::vector<std::string> sets;
  std::size_t log_every = 10;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  if (!a.task.empty()) cfg.task = task_from_string(a.task);
  if (a.bits != 0) cfg.code_bits = a.bits;
  apply_overrides(cfg, a.sets);
  cfg.validate();

  const Dataset data = load_container(a.data);
  std::optional<Checkpoint> resume;
  if (!a.resume.empty()) resume = load_checkpoint(a.resume);

  const fs::path out(a.out);
  ensure_dir(out);
  tools::RunManifest manifest("train");
  manifest.config(to_config_text(cfg));
  manifest.seed(cfg.seed);
  manifest.input(a.data);
  if (!a.config.empty()) manifest.input(a.config);
  if (!a.resume.empty()) manifest.input(a.resume);

  TrainHooks hooks;
  hooks.on_step = [&](const LogEntry& e) { progress(e, a.log_every); };
  hooks.on_checkpoint = [&](const Checkpoint& c) {
    char name[32];
    std::snprintf(name, sizeof(name), "step_%06llu.bgck", static_cast<unsigned long long>(c.step));
    save_checkpoint(out / name, c);
    manifest.output(out / name);
  };
  const TrainResult result = train(cfg, data, std::move(resume), hooks);

  save_checkpoint(out / "final.bgck", result.checkpoint);
  {
    std::ofstream csv(out / "loss.csv");
    write_loss_csv(csv, result.log);
  }
  manifest.output(out / "final.bgck");
  manifest.output(out / "loss.csv");
  manifest.note("steps", result.checkpoint.step);
  manifest.write(out / "manifest.json");
  std::printf("trained %llu steps -> %s\n", static_cast<unsigned long long>(result.checkpoint.step),
              (out / "final.bgck").c_str());
  return 0;
}

int cmd_extract(const std::string& ckpt_path, const std::string& data_path, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset data = load_container(data_path);
  DescriptorFile file;
  if (const auto* images = std::get_if<ImageSet>(&data)) {
    file = extract_codes(ckpt.discriminator, *images);
  } else {
    RasterShape shape;
    const auto pool = training_pool(data, shape);
    file.codes = extract_codes(ckpt.discriminator, pool, shape);
  }
  write_descriptors(out_path, file);
  tools::RunManifest manifest("extract");
  manifest.config(to_config_text(ckpt.config));
  manifest.seed(ckpt.config.seed);
  manifest.input(ckpt_path);
  manifest.input(data_path);
  manifest.output(out_path);
  manifest.note("rows", file.codes.rows());
  manifest.note("bits", file.codes.bits());
  manifest.write(manifest_for(out_path));
  std::printf("%zu codes of %zu bits -> %s\n", file.codes.rows(), file.codes.bits(), out_path.c_str());
  return 0;
}

int cmd_eval_retrieval(const std::string& q_path, const std::string& db_path, std::size_t k,
                       const std::string& exclude, const std::string& csv_path) {
  const DescriptorFile queries = read_descriptors(q_path);
  const DescriptorFile db = read_descriptors(db_path);
  RetrievalOptions opts;
  opts.k = k;
  if (exclude == "on") opts.exclude_self = true;
  else if (exclude == "off") opts.exclude_self = false;
  else if (exclude != "auto") throw ConfigError("--exclude-self expects auto|on|off");
  const RetrievalReport report = map_retrieval(queries, db, opts);
  std::printf("%s\n", summarize(report).c_str());
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    write_retrieval_csv(out, report);
    tools::RunManifest manifest("eval-retrieval");
    manifest.input(q_path);
    manifest.input(db_path);
    manifest.output(csv_path);
    manifest.note("map_at_k", report.map_at_k);
    manifest.note("k", report.k);
    manifest.write(manifest_for(csv_path));
  }
  return 0;
}

int cmd_eval_matching(const std::string& ckpt_path, const std::string& pairs_path, double tpr,
                      const std::string& csv_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset data = load_container(pairs_path);
  const auto* pairs = std::get_if<PatchPairSet>(&data);
  if (!pairs) throw DataError(pairs_path + " holds images, not patch pairs");
  const MatchingReport report = evaluate_matching(ckpt.discriminator, *pairs, tpr);
  std::printf("%s\n", summarize(report).c_str());
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    write_matching_csv(out, report);
    tools::RunManifest manifest("eval-matching");
    manifest.config(to_config_text(ckpt.config));
    manifest.seed(ckpt.config.seed);
    manifest.input(ckpt_path);
    manifest.input(pairs_path);
    manifest.output(csv_path);
    manifest.note("fpr", report.fpr_at_95);
    manifest.note("threshold", report.threshold);
    manifest.write(manifest_for(csv_path));
  }
  return 0;
}

int cmd_ablate(const std::string& data_path, const std::string& config_path, const std::string& test_path,
               const std::vector<std::string>& sets, std::size_t test_every, const std::string& out_dir,
               std::size_t log_every) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  cfg.task = Task::kMatching;
  apply_overrides(cfg, sets);
  cfg.validate();

  const Dataset data = load_container(data_path);
  const auto* pairs = std::get_if<PatchPairSet>(&data);
  if (!pairs) throw DataError(data_path + " holds images, not patch pairs");
  PatchPairSet train_set, test_set;
  if (!test_path.empty()) {
    const Dataset test = load_container(test_path);
    if (!std::holds_alternative<PatchPairSet>(test)) throw DataError(test_path + " holds images, not patch pairs");
    train_set = *pairs;
    test_set = std::get<PatchPairSet>(test);
  } else {
    std::tie(train_set, test_set) = split_pairs(*pairs, test_every);
  }

  const fs::path out(out_dir);
  ensure_dir(out);
  const auto rows = run_ablation(train_set, test_set, cfg, [&](std::size_t row, const LogEntry& e) {
    if (log_every != 0 && e.step % log_every == 0) std::fprintf(stderr, "[run %zu] ", row);
    progress(e, log_every);
  });

  tools::RunManifest manifest("ablate");
  manifest.config(to_config_text(cfg));
  manifest.seed(cfg.seed);
  manifest.input(data_path);
  if (!config_path.empty()) manifest.input(config_path);
  if (!test_path.empty()) manifest.input(test_path);
  {
    std::ofstream csv(out / "ablation.csv");
    write_ablation_csv(csv, rows);
  }
  manifest.output(out / "ablation.csv");
  std::printf("%-12s %-12s %-10s %-10s\n", "lambda_dmr", "lambda_bre", "FPR@95", "threshold");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::printf("%-12g %-12g %-10.4f %-10d\n", r.lambda_dmr, r.lambda_bre, r.report.fpr_at_95, r.report.threshold);
    const fs::path log_path = out / ("loss_run" + std::to_string(i) + ".csv");
    std::ofstream csv(log_path);
    write_loss_csv(csv, r.log);
    manifest.output(log_path);
    manifest.note("fpr_run" + std::to_string(i), r.report.fpr_at_95);
  }
  manifest.write(out / "manifest.json");
  return 0;
}

int cmd_sample(const std::string& ckpt_path, std::size_t n, std::uint64_t seed, const std::string& out_path) {
  if (n == 0) throw ConfigError("--n must be positive");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  auto rng = substream(seed, 99, 0);
  const Network gen = frozen(ckpt.generator);
  const Tensor images = run(gen, sample_noise(n, ckpt.config.z_dim, rng));
  const RasterShape shape{images.dim(1), images.dim(2), images.dim(3)};
  std::vector<std::uint8_t> bytes(images.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp((images[i] + 1.0) * 127.5, 0.0, 255.0);
    bytes[i] = static_cast<std::uint8_t>(std::lround(v));
  }
  tools::write_pnm(out_path, tools::tile(bytes, shape, n));
  tools::RunManifest manifest("sample");
  manifest.config(to_config_text(ckpt.config));
  manifest.seed(seed);
  manifest.input(ckpt_path);
  manifest.output(out_path);
  manifest.write(manifest_for(out_path));
  std::printf("%zu samples -> %s\n", n, out_path.c_str());
  return 0;
}

int cmd_selfcheck(std::uint64_t seed) {
  bool ok = true;
  auto report = [&](const std::vector<checks::CheckLine>& lines) {
    for (const auto& l : lines) {
      std::printf("[%s] %s: %s\n", l.passed ? "PASS" : "FAIL", l.name.c_str(), l.detail.c_str());
      ok = ok && l.passed;
    }
  };
  report(checks::run_gradient_suite(seed));
  report(checks::run_oracle_suite(seed));
  std::printf("selfcheck %s\n", ok ? "passed" : "FAILED");
  return ok ? 0 : static_cast<int>(ExitCode::kAcceptance);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary descriptors from regularised GAN discriminators"};
  app.require_subcommand(1);

  std::string kind, in_dir, labels, out, split = "train";
  auto* import = app.add_subcommand("import", "Pack PGM/PPM images into a dataset container");
  import->add_option("--kind", kind, "image|pairs")->required();
  import->add_option("--in", in_dir, "Directory holding the images")->required();
  import->add_option("--labels", labels, "CSV: file,label or file_a,file_b,match")->required();
  import->add_option("--out", out, "Output .bgds")->required();
  import->add_option("--split", split, "train|test");

  std::string task = "retrieval";
  std::uint64_t seed = 0;
  std::size_t n_per_class = 500, n_classes = 4, hw = 16, channels = 3, n_pairs = 2000;
  auto* synth = app.add_subcommand("synth", "Generate a toy dataset");
  synth->add_option("--task", task, "retrieval|pairs");
  synth->add_option("--seed", seed);
  synth->add_option("--out", out, "Output .bgds")->required();
  synth->add_option("--n-per-class", n_per_class);
  synth->add_option("--classes", n_classes);
  synth->add_option("--hw", hw, "Image side length");
  synth->add_option("--channels", channels, "Channels for retrieval images");
  synth->add_option("--pairs", n_pairs, "Number of pairs (even)");
  synth->add_option("--split", split, "train|test");

  TrainArgs targs;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", targs.data, "Training .bgds")->required();
  train_cmd->add_option("--task", targs.task, "retrieval|matching|toy (overrides config)");
  train_cmd->add_option("--bits", targs.bits, "Code length K (overrides config)");
  train_cmd->add_option("--config", targs.config, "key = value config file");
  train_cmd->add_option("--set", targs.sets, "key=value override, repeatable");
  train_cmd->add_option("--resume", targs.resume, "Checkpoint to continue from");
  train_cmd->add_option("--out", targs.out, "Output directory")->required();
  train_cmd->add_option("--log-every", targs.log_every, "Progress line interval (0: quiet)");

  std::string ckpt, data;
  auto* extract = app.add_subcommand("extract", "Binary descriptors for every image");
  extract->add_option("--ckpt", ckpt)->required();
  extract->add_option("--data", data)->required();
  extract->add_option("--out", out, "Output .bgbd")->required();

  std::string queries, db, exclude = "auto", csv;
  std::size_t k = 1000;
  auto* eval_r = app.add_subcommand("eval-retrieval", "mAP over top-k Hamming neighbours");
  eval_r->add_option("--queries", queries)->required();
  eval_r->add_option("--db", db)->required();
  eval_r->add_option("--k", k);
  eval_r->add_option("--exclude-self", exclude, "auto|on|off");
  eval_r->add_option("--csv", csv, "Per-query AP output");

  double tpr = 0.95;
  auto* eval_m = app.add_subcommand("eval-matching", "FPR at a target TPR on patch pairs");
  eval_m->add_option("--ckpt", ckpt)->required();
  eval_m->add_option("--pairs", data)->required();
  eval_m->add_option("--tpr", tpr);
  eval_m->add_option("--csv", csv, "ROC points output");

  std::string config, test_data;
  std::vector<std::string> sets;
  std::size_t test_every = 4, log_every = 0;
  auto* ablate = app.add_subcommand("ablate", "Four-way regulariser ablation on patch pairs");
  ablate->add_option("--data", data)->required();
  ablate->add_option("--config", config);
  ablate->add_option("--test", test_data, "Held-out pairs (default: split --data)");
  ablate->add_option("--test-every", test_every, "Every n-th pair couple goes to test when splitting");
  ablate->add_option("--set", sets, "key=value override, repeatable");
  ablate->add_option("--out", out)->required();
  ablate->add_option("--log-every", log_every);

  std::size_t n_samples = 64;
  auto* sample = app.add_subcommand("sample", "Generator samples as a PGM/PPM grid");
  sample->add_option("--ckpt", ckpt)->required();
  sample->add_option("--n", n_samples);
  sample->add_option("--seed", seed);
  sample->add_option("--out", out)->required();

  auto* selfcheck = app.add_subcommand("selfcheck", "Gradient checks and oracle suites");
  selfcheck->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "config_error: %s\n", e.what());
    return static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*import) {
      const Dataset d = import_dataset(kind, in_dir, labels, parse_split(split));
      save_dataset(out, d);
      tools::RunManifest manifest("import");
      manifest.input(labels);
      manifest.output(out);
      manifest.write(manifest_for(out));
      return 0;
    }
    if (*synth) {
      Dataset d;
      if (task == "retrieval") {
        ImageSet s = synth_toy_retrieval(seed, n_per_class, n_classes, hw, channels);
        s.split = parse_split(split);
        d = std::move(s);
      } else if (task == "pairs") {
        PatchPairSet s = synth_toy_pairs(seed, n_pairs, hw);
        s.split = parse_split(split);
        d = std::move(s);
      } else {
        throw ConfigError("unknown synth task '" + task + "' (expected retrieval|pairs)");
      }
      save_dataset(out, d);
      tools::RunManifest manifest("synth");
      manifest.seed(seed);
      manifest.output(out);
      manifest.write(manifest_for(out));
      return 0;
    }
    if (*train_cmd) return cmd_train(targs);
    if (*extract) return cmd_extract(ckpt, data, out);
    if (*eval_r) return cmd_eval_retrieval(queries, db, k, exclude, csv);
    if (*eval_m) return cmd_eval_matching(ckpt, data, tpr, csv);
    if (*ablate) return cmd_ablate(data, config, test_data, sets, test_every, out, log_every);
    if (*sample) return cmd_sample(ckpt, n_samples, seed, out);
    if (*selfcheck) return cmd_selfcheck(seed);
  } catch (const Error& e) {
    std::fprintf(stderr, "%s: %s\n", e.error_class(), e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal_error: %s\n", e.what());
    return 1;
  }
  return 0;
}
