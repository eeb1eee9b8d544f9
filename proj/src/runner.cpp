#include "spikedict/runner.hpp"

#include "spikedict/io.hpp"
#include "spikedict/oracle.hpp"
#include "spikedict/version.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace spikedict {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kSimKeys = {
    "sim.dt", "sim.window", "sim.warmup", "sim.tau_s", "sim.max_rate",
    "sim.input_mode", "sim.reset",
};

const std::set<std::string> kDataKeys = {
    "data.source", "data.dim",        "data.atoms",      "data.sparsity", "data.count",
    "data.noise_sigma", "data.scale", "data.path",       "data.heldout",  "data.export",
    "data.patch_edge",
};

const std::set<std::string> kNetKeys = {"net.gamma", "net.lambda"};

std::set<std::string> merge(std::initializer_list<std::set<std::string>> sets) {
  std::set<std::string> out;
  for (const auto& s : sets) out.insert(s.begin(), s.end());
  return out;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void require_file(const std::string& key, const fs::path& p) {
  if (!fs::exists(p)) throw ConfigError("config: " + key + " names a missing file: " + p.string());
}

void write_csv_artifact(const fs::path& path, const std::function<void(std::ostream&)>& fn,
                        std::vector<ManifestEntry>& outputs, const fs::path& out_dir) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  fn(os);
  os.close();
  outputs.push_back({fs::relative(path, out_dir).string(), fnv1a_file(path)});
}

MatrixXd flatten_images(const std::vector<MatrixXd>& images, long cap) {
  if (images.empty()) throw ConfigError("data: image set is empty");
  const long rows = cap > 0 ? std::min<long>(cap, images.size()) : static_cast<long>(images.size());
  const long dim = images[0].size();
  MatrixXd out(rows, dim);
  for (long n = 0; n < rows; ++n) {
    const MatrixXd& img = images[n];
    if (img.size() != dim) throw ConfigError("data: images have mixed dimensions");
    long k = 0;
    for (long i = 0; i < img.rows(); ++i)
      for (long j = 0; j < img.cols(); ++j) out(n, k++) = img(i, j);
  }
  return out;
}

}  // namespace

StageConfig stage_config_from(const Config& cfg) {
  StageConfig sc;
  sc.window = cfg.get_double("sim.window", 20.0);
  sc.warmup = cfg.get_double("sim.warmup", 0.0);
  sc.sim.dt = cfg.get_double("sim.dt", 1.0 / 32.0);
  sc.sim.tau_s = cfg.get_double("sim.tau_s", 1.0);
  sc.sim.max_rate = cfg.get_double("sim.max_rate", 100.0);

  const std::string mode = cfg.get_string("sim.input_mode", "spiking");
  if (mode == "spiking")
    sc.input_mode = InputMode::spiking;
  else if (mode == "analytic")
    sc.input_mode = InputMode::analytic;
  else
    throw ConfigError("config: sim.input_mode must be spiking or analytic");

  const std::string reset = cfg.get_string("sim.reset", "subtract");
  if (reset == "subtract")
    sc.sim.reset_to_zero = false;
  else if (reset == "zero")
    sc.sim.reset_to_zero = true;
  else
    throw ConfigError("config: sim.reset must be subtract or zero");
  return sc;
}

std::pair<Dataset, GroundTruth> load_dataset(const Config& cfg, std::uint64_t seed) {
  const std::string source = cfg.get_string("data.source");
  if (source == "synthetic") {
    return gen_synthetic(static_cast<int>(cfg.get_long("data.dim")),
                         static_cast<int>(cfg.get_long("data.atoms")),
                         static_cast<int>(cfg.get_long("data.sparsity")),
                         cfg.get_long("data.count"), cfg.get_double("data.noise_sigma", 0.0),
                         seed);
  }
  if (source == "sparse-drive") {
    Dataset ds = gen_sparse_drive(static_cast<int>(cfg.get_long("data.dim")),
                                  static_cast<int>(cfg.get_long("data.sparsity")),
                                  cfg.get_long("data.count"), cfg.get_double("data.scale", 1.0),
                                  seed);
    return {std::move(ds), GroundTruth{}};
  }
  if (source == "dlm") {
    const fs::path path = cfg.get_string("data.path");
    require_file("data.path", path);
    Dataset ds;
    ds.samples = load_matrix(path);
    const long cap = cfg.get_long("data.count", 0);
    if (cap > 0 && cap < ds.samples.rows()) ds.samples = ds.samples.topRows(cap).eval();
    ds.meta.source = "dlm:" + path.string();
    return {std::move(ds), GroundTruth{}};
  }
  if (source == "idx") {
    const fs::path path = cfg.get_string("data.path");
    require_file("data.path", path);
    Dataset ds;
    ds.samples = flatten_images(load_idx_images(path), cfg.get_long("data.count", 0));
    ds.meta.source = "idx:" + path.string();
    return {std::move(ds), GroundTruth{}};
  }
  if (source == "pgm") {
    const fs::path path = cfg.get_string("data.path");
    require_file("data.path", path);
    const MatrixXd image = load_pgm(path);
    const int edge = static_cast<int>(cfg.get_long("data.patch_edge", 8));
    const MatrixXd patches = sample_patches(image, edge, cfg.get_long("data.count"), seed);
    Dataset ds = preprocess_split(patches);
    ds.meta.source = "pgm:" + path.string();
    ds.meta.seed = seed;
    return {std::move(ds), GroundTruth{}};
  }
  throw ConfigError("config: unknown data.source `" + source + "`");
}

void write_manifest(const fs::path& out_dir, const std::string& command, const Config& cfg,
                    std::uint64_t seed, double wall_ms, const std::vector<ManifestEntry>& outputs) {
  std::ostringstream os;
  os << "command = " << command << "\n";
  os << "version = " << kVersion << "\n";
  os << "seed = " << seed << "\n";
  os << "wall_ms = " << format_fixed(wall_ms, 3) << "\n";
  os << "[config]\n";
  for (const auto& [k, v] : cfg.values()) os << k << " = " << v << "\n";
  os << "[outputs]\n";
  char hex[32];
  for (const auto& e : outputs) {
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(e.hash));
    os << e.path << " fnv1a=" << hex << "\n";
  }
  write_text_file(out_dir / "run_manifest.txt", os.str());
}

namespace {

LearnRates learn_rates_from(const Config& cfg) {
  LearnRates r;
  r.eta_f = cfg.get_double("learn.eta_f", 0.01);
  r.eta_b = cfg.get_double("learn.eta_b", r.eta_f);
  r.eta_h = cfg.get_double("learn.eta_h", 32.0 * r.eta_f);
  r.eta_sgd = cfg.get_double("learn.eta_sgd", r.eta_f);
  const double shared = cfg.get_double("learn.decay", 0.0);
  r.decay_f = cfg.get_double("learn.decay_f", shared);
  r.decay_b = cfg.get_double("learn.decay_b", shared);
  r.decay_h = cfg.get_double("learn.decay_h", shared);
  return r;
}

TrainConfig train_config_from(const Config& cfg, const MatrixXd* heldout) {
  TrainConfig tc;
  tc.rates = learn_rates_from(cfg);
  tc.stage = stage_config_from(cfg);

  const std::string mode = cfg.get_string("learn.mode", "simultaneous");
  if (mode == "simultaneous")
    tc.mode = TrainMode::simultaneous;
  else if (mode == "two-phase")
    tc.mode = TrainMode::two_phase;
  else
    throw ConfigError("config: learn.mode must be simultaneous or two-phase");
  tc.consistency_samples = cfg.get_long("learn.consistency_samples", 0);

  tc.projection.theta_min = cfg.get_double("learn.theta_min", 0.05);
  const std::string dmode = cfg.get_string("learn.decay_mode", "full");
  if (dmode == "full")
    tc.projection.decay_mode = DecayMode::full;
  else if (dmode == "diagonal")
    tc.projection.decay_mode = DecayMode::diagonal;
  else
    throw ConfigError("config: learn.decay_mode must be full or diagonal");

  tc.h_step_cap = cfg.get_double("learn.h_step_cap", 1.0);
  tc.normalized_h_step = cfg.get_bool("learn.normalized_h_step", false);
  tc.anneal_after = cfg.get_long("learn.anneal_after", -1);
  tc.anneal_tau = cfg.get_double("learn.anneal_tau", 100.0);

  tc.eval_every = cfg.get_long("train.eval_every", 0);
  tc.heldout_cap = cfg.get_long("train.heldout_cap", 200);
  if (heldout && heldout->rows() > 0) tc.heldout = *heldout;
  return tc;
}

std::pair<MatrixXd, MatrixXd> split_heldout(const MatrixXd& samples, long heldout) {
  if (heldout <= 0) return {samples, MatrixXd()};
  if (heldout >= samples.rows())
    throw ConfigError("config: data.heldout must leave at least one training sample");
  const long train_rows = samples.rows() - heldout;
  return {samples.topRows(train_rows), samples.bottomRows(heldout)};
}

}  // namespace

int run_encode(const Config& cfg, const fs::path& out_dir, std::uint64_t seed) {
  cfg.validate_keys(merge({kSimKeys, kDataKeys, kNetKeys,
                           {"encode.dictionary", "encode.raster_count", "seed",
                            "oracle.tol"}}));
  Stopwatch watch;
  fs::create_directories(out_dir);

  const fs::path dict_path = cfg.get_string("encode.dictionary");
  require_file("encode.dictionary", dict_path);
  const MatrixXd D = load_matrix(dict_path);

  const double lambda = cfg.get_double("net.lambda", 0.1);
  const double gamma = cfg.get_double("net.gamma", 0.5);
  NetworkParams params = configure_from_dictionary(D, lambda, gamma);

  auto [dataset, gt] = load_dataset(cfg, seed);
  if (dataset.dim() != params.input_dim())
    throw ConfigError("config: input dimension does not match the dictionary");

  const StageConfig stage = stage_config_from(cfg);
  const long raster_count = cfg.get_long("encode.raster_count", 3);
  const SolveOptions solve_opts{cfg.get_double("oracle.tol", 1e-8), 0, std::nullopt};

  std::vector<ManifestEntry> outputs;
  std::ofstream codes(out_dir / "codes.csv", std::ios::binary | std::ios::trunc);
  std::ofstream gaps(out_dir / "gaps.csv", std::ios::binary | std::ios::trunc);
  codes << "input_idx,neuron_id,snn_rate,oracle_a\n";
  gaps << "input_idx,max_gap,oracle_kkt_residual\n";

  for (long i = 0; i < dataset.count(); ++i) {
    const VectorXd x = dataset.samples.row(i);
    StageRun run = run_feedforward(params, x, stage);
    const SparseCode code = solve_sparse_code(D, x, lambda, solve_opts);

    double max_gap = 0.0;
    for (int j = 0; j < params.code_dim(); ++j) {
      codes << i << ',' << j << ',' << format_fixed(run.readout.z[j], 9) << ','
            << format_fixed(code.a[j], 9) << '\n';
      max_gap = std::max(max_gap, std::abs(run.readout.z[j] - code.a[j]));
    }
    gaps << i << ',' << format_fixed(max_gap, 9) << ',' << format_fixed(code.kkt_residual, 12)
         << '\n';

    if (i < raster_count) {
      const std::string tag = std::to_string(i);
      write_csv_artifact(out_dir / ("raster_" + tag + ".csv"),
                         [&](std::ostream& os) { write_raster_csv(run.state.spike_log, os); },
                         outputs, out_dir);
      write_csv_artifact(out_dir / ("readout_" + tag + ".csv"),
                         [&](std::ostream& os) { write_readout_csv(run.readout, os); }, outputs,
                         out_dir);
    }
  }
  codes.close();
  gaps.close();
  outputs.push_back({"codes.csv", fnv1a_file(out_dir / "codes.csv")});
  outputs.push_back({"gaps.csv", fnv1a_file(out_dir / "gaps.csv")});

  write_manifest(out_dir, "encode", cfg, seed, watch.ms(), outputs);
  return 0;
}

namespace {

const std::set<std::string> kLearnKeys = {
    "learn.eta_f",        "learn.eta_b",      "learn.eta_h",
    "learn.eta_sgd",      "learn.decay",      "learn.decay_f",
    "learn.decay_b",      "learn.decay_h",    "learn.calibrate_decay",
    "learn.mode",         "learn.consistency_samples",
    "learn.theta_min",    "learn.decay_mode", "learn.h_step_cap",
    "learn.normalized_h_step", "learn.anneal_after", "learn.anneal_tau",
};

}  // namespace

int run_train(const Config& cfg, const fs::path& out_dir, std::uint64_t seed) {
  cfg.validate_keys(merge({kSimKeys, kDataKeys, kNetKeys, kLearnKeys,
                           {"net.init", "net.init_dictionary", "net.code_dim", "train.eval_every",
                            "train.heldout_cap", "seed"}}));
  Stopwatch watch;
  fs::create_directories(out_dir);

  auto [dataset, gt] = load_dataset(cfg, seed);
  auto [train_samples, heldout] = split_heldout(dataset.samples, cfg.get_long("data.heldout", 0));

  const double gamma = cfg.get_double("net.gamma", 0.5);
  const double lambda = cfg.get_double("net.lambda", 0.1);

  NetworkParams params;
  const std::string init = cfg.get_string("net.init", "random");
  if (init == "random") {
    const int code_dim = static_cast<int>(cfg.get_long("net.code_dim"));
    params = random_init(dataset.dim(), code_dim, seed + 1, gamma, lambda);
  } else if (init == "dictionary") {
    const fs::path dict_path = cfg.get_string("net.init_dictionary");
    require_file("net.init_dictionary", dict_path);
    params = configure_from_dictionary(load_matrix(dict_path), lambda, gamma);
  } else {
    throw ConfigError("config: net.init must be random or dictionary");
  }

  TrainConfig tc = train_config_from(cfg, &heldout);
  if (cfg.get_bool("learn.calibrate_decay", false)) {
    const double decay = calibrate_decay(params, train_samples, tc);
    tc.rates.decay_f = tc.rates.decay_b = tc.rates.decay_h = decay;
  }

  TrainResult result = train_snn(params, train_samples, tc);

  std::vector<ManifestEntry> outputs;
  write_csv_artifact(out_dir / "metrics.csv",
                     [&](std::ostream& os) { write_metrics_csv(result.metrics, os); }, outputs,
                     out_dir);
  save_params(result.params, out_dir / "params.snn");
  outputs.push_back({"params.snn", fnv1a_file(out_dir / "params.snn")});
  write_csv_artifact(
      out_dir / "consistency_scatter.csv",
      [&](std::ostream& os) { write_scatter_csv(consistency_scatter(result.params), os); },
      outputs, out_dir);
  // learned dictionary, one atom per row
  write_csv_artifact(out_dir / "atoms.csv",
                     [&](std::ostream& os) { write_dataset_csv(result.params.F, os); }, outputs,
                     out_dir);
  if (gt.dictionary.size() > 0) {
    save_matrix(gt.dictionary, out_dir / "ground_truth.dlm");
    outputs.push_back({"ground_truth.dlm", fnv1a_file(out_dir / "ground_truth.dlm")});
  }
  if (heldout.rows() > 0) {
    save_matrix(heldout, out_dir / "heldout.dlm");
    outputs.push_back({"heldout.dlm", fnv1a_file(out_dir / "heldout.dlm")});
  }
  if (cfg.get_bool("data.export", false))
    write_csv_artifact(out_dir / "dataset.csv",
                       [&](std::ostream& os) { write_dataset_csv(train_samples, os); }, outputs,
                       out_dir);

  write_manifest(out_dir, "train", cfg, seed, watch.ms(), outputs);
  return 0;
}

int run_train_sgd(const Config& cfg, const fs::path& out_dir, std::uint64_t seed) {
  cfg.validate_keys(merge({kDataKeys, kNetKeys, kLearnKeys,
                           {"net.code_dim", "train.eval_every", "train.heldout_cap", "seed",
                            "oracle.tol"}}));
  Stopwatch watch;
  fs::create_directories(out_dir);

  auto [dataset, gt] = load_dataset(cfg, seed);
  auto [train_samples, heldout] = split_heldout(dataset.samples, cfg.get_long("data.heldout", 0));

  const double lambda = cfg.get_double("net.lambda", 0.1);
  const int code_dim = static_cast<int>(cfg.get_long("net.code_dim"));
  const double eta_base = learn_rates_from(cfg).eta_sgd;
  const long eval_every = cfg.get_long("train.eval_every", 0);
  const long heldout_cap = cfg.get_long("train.heldout_cap", 200);
  const SolveOptions solve_opts{cfg.get_double("oracle.tol", 1e-8), 0, std::nullopt};

  // shared random initial dictionary: unit-norm nonnegative columns
  std::mt19937_64 init_rng(seed + 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MatrixXd D0(dataset.dim(), code_dim);
  for (int j = 0; j < code_dim; ++j) {
    for (int i = 0; i < dataset.dim(); ++i) D0(i, j) = unit(init_rng);
    D0.col(j) /= D0.col(j).norm();
  }

  const std::vector<std::pair<std::string, double>> etas = {
      {"base", eta_base}, {"double", 2.0 * eta_base}, {"half", 0.5 * eta_base}};

  std::vector<ManifestEntry> outputs;
  for (const auto& [tag, eta] : etas) {
    std::mt19937_64 rng(seed + 3);
    MatrixXd D = D0;
    std::ostringstream metrics;
    metrics << "sample_idx,heldout_objective\n";
    for (long p = 0; p < train_samples.rows(); ++p) {
      const VectorXd x = train_samples.row(p);
      const SparseCode code = solve_sparse_code(D, x, lambda, solve_opts);
      sgd_step(D, x, code.a, eta, rng);
      if (eval_every > 0 && heldout.rows() > 0 && (p + 1) % eval_every == 0) {
        const long rows = std::min<long>(heldout.rows(), heldout_cap > 0 ? heldout_cap : heldout.rows());
        metrics << p << ',' << format_fixed(dict_objective(D, heldout.topRows(rows), lambda), 12)
                << '\n';
      }
    }
    const std::string metrics_name = "sgd_metrics_eta_" + tag + ".csv";
    write_text_file(out_dir / metrics_name, metrics.str());
    outputs.push_back({metrics_name, fnv1a_file(out_dir / metrics_name)});
    const std::string dict_name = "dict_eta_" + tag + ".dlm";
    save_matrix(D, out_dir / dict_name);
    outputs.push_back({dict_name, fnv1a_file(out_dir / dict_name)});
  }

  if (gt.dictionary.size() > 0) {
    save_matrix(gt.dictionary, out_dir / "ground_truth.dlm");
    outputs.push_back({"ground_truth.dlm", fnv1a_file(out_dir / "ground_truth.dlm")});
  }
  if (heldout.rows() > 0) {
    save_matrix(heldout, out_dir / "heldout.dlm");
    outputs.push_back({"heldout.dlm", fnv1a_file(out_dir / "heldout.dlm")});
  }

  write_manifest(out_dir, "train-sgd", cfg, seed, watch.ms(), outputs);
  return 0;
}

int run_eval(const Config& cfg, const fs::path& out_dir, std::uint64_t seed) {
  cfg.validate_keys(merge({kDataKeys, kNetKeys,
                           {"eval.checkpoint", "eval.ground_truth", "eval.correlation_threshold",
                            "seed", "oracle.tol"}}));
  Stopwatch watch;
  fs::create_directories(out_dir);

  const fs::path ckpt = cfg.get_string("eval.checkpoint");
  require_file("eval.checkpoint", ckpt);
  MatrixXd D;
  if (is_matrix_checkpoint(ckpt)) {
    D = load_matrix(ckpt);
  } else {
    const NetworkParams params = load_params(ckpt);
    D = params.F.transpose();
  }

  auto [dataset, gt] = load_dataset(cfg, seed);
  if (dataset.count() == 0) throw ConfigError("config: empty test set");
  const double lambda = cfg.get_double("net.lambda", 0.1);
  const SolveOptions solve_opts{cfg.get_double("oracle.tol", 1e-8), 0, std::nullopt};

  const DictObjective obj = evaluate_dictionary(D, dataset.samples, lambda, solve_opts);

  std::ostringstream report;
  report << "metric,value\n";
  report << "objective_l1," << format_fixed(obj.l1_mean, 12) << "\n";
  report << "objective_weighted," << format_fixed(obj.weighted_mean, 12) << "\n";
  report << "solver_not_converged," << obj.not_converged << "\n";

  std::ostringstream console;
  console << "objective_l1 = " << format_fixed(obj.l1_mean, 6)
          << "\nobjective_weighted = " << format_fixed(obj.weighted_mean, 6) << "\n";

  MatrixXd d_true;
  if (cfg.has("eval.ground_truth")) {
    const fs::path gt_path = cfg.get_string("eval.ground_truth");
    require_file("eval.ground_truth", gt_path);
    d_true = load_matrix(gt_path);
  } else if (gt.dictionary.size() > 0) {
    d_true = gt.dictionary;
  }
  if (d_true.size() > 0) {
    const double thr = cfg.get_double("eval.correlation_threshold", 0.9);
    const double score = recovery_score(d_true, D, thr);
    report << "recovery_score," << format_fixed(score, 6) << "\n";
    console << "recovery_score = " << format_fixed(score, 6) << "\n";
  }

  write_text_file(out_dir / "eval.csv", report.str());
  std::vector<ManifestEntry> outputs{{"eval.csv", fnv1a_file(out_dir / "eval.csv")}};
  write_manifest(out_dir, "eval", cfg, seed, watch.ms(), outputs);
  std::fputs(console.str().c_str(), stdout);
  return 0;
}

}  // namespace spikedict
