// Command-line front end: synthetic data generation, training, evaluation,
// subspace-geometry reports, and factorization micro-benchmarks.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gcr/analysis.hpp"
#include "gcr/checkpoint.hpp"
#include "gcr/csv.hpp"
#include "gcr/synth.hpp"
#include "gcr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CliError : std::runtime_error {
  int code;
  CliError(int code, const std::string& msg)
      : std::runtime_error(msg), code(code) {}
};

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(kExitData, "cannot open input: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    h ^= std::uint64_t(static_cast<unsigned char>(c));
    h *= 1099511628211ULL;
  }
  return h;
}

gcr::Dataset load_dataset(const std::string& features_path,
                          const std::string& labels_path) {
  gcr::Dataset data;
  data.features = gcr::read_matrix_csv(features_path);
  data.labels = gcr::read_labels_csv(labels_path);
  data.validate();
  return data;
}

gcr::HeadKind parse_head(const std::string& s) {
  if (s == "linear") return gcr::HeadKind::Linear;
  if (s == "cosine") return gcr::HeadKind::Cosine;
  if (s == "gcr") return gcr::HeadKind::Gcr;
  throw CliError(kExitUsage, "unknown head type: " + s);
}

std::string head_name(gcr::HeadKind h) {
  switch (h) {
    case gcr::HeadKind::Linear: return "linear";
    case gcr::HeadKind::Cosine: return "cosine";
    default: return "gcr";
  }
}

json config_to_json(const gcr::TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["tau"] = c.tau;
  j["mu"] = c.mu;
  j["reorth_period"] = c.reorth_period;
  j["gamma"] = c.gamma;
  j["k"] = c.k;
  j["head"] = head_name(c.head);
  j["retraction"] = c.retraction == gcr::Retraction::Geodesic ? "geodesic" : "qr";
  j["normalize"] = c.normalize;
  j["vanilla_geometry"] = c.vanilla_geometry;
  j["seed"] = c.seed;
  j["feature_dim"] = c.feature_dim;
  j["hidden"] = std::vector<long>(c.hidden.begin(), c.hidden.end());
  return j;
}

void config_from_json(const json& j, gcr::TrainConfig& c) {
  if (j.contains("epochs")) c.epochs = j["epochs"];
  if (j.contains("batch_size")) c.batch_size = j["batch_size"];
  if (j.contains("lr")) c.lr = j["lr"];
  if (j.contains("momentum")) c.momentum = j["momentum"];
  if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"];
  if (j.contains("tau")) c.tau = j["tau"];
  if (j.contains("mu")) c.mu = j["mu"];
  if (j.contains("reorth_period")) c.reorth_period = j["reorth_period"];
  if (j.contains("gamma")) c.gamma = j["gamma"];
  if (j.contains("k")) c.k = j["k"];
  if (j.contains("head")) c.head = parse_head(j["head"]);
  if (j.contains("retraction"))
    c.retraction = j["retraction"] == "qr" ? gcr::Retraction::Qr
                                           : gcr::Retraction::Geodesic;
  if (j.contains("normalize")) c.normalize = j["normalize"];
  if (j.contains("vanilla_geometry")) c.vanilla_geometry = j["vanilla_geometry"];
  if (j.contains("seed")) c.seed = j["seed"];
  if (j.contains("feature_dim")) c.feature_dim = long(j["feature_dim"]);
  if (j.contains("hidden")) {
    c.hidden.clear();
    for (long h : j["hidden"].get<std::vector<long>>()) c.hidden.push_back(h);
  }
}

void write_metrics_csv(const std::string& path,
                       const std::vector<gcr::MetricsRow>& log) {
  std::ofstream out(path);
  if (!out) throw CliError(kExitData, "cannot write " + path);
  out << "epoch,step,loss,top1,ortho_error,wall_ms\n";
  for (const auto& r : log)
    out << r.epoch << "," << r.step << "," << gcr::format_double(r.loss) << ","
        << gcr::format_double(r.top1) << ","
        << gcr::format_double(r.ortho_error) << ","
        << gcr::format_double(r.wall_ms) << "\n";
}

// Run feature extraction through the backbone for every sample.
gcr::FeatureBank extract_features(const gcr::Model& model,
                                  const gcr::Dataset& data) {
  gcr::FeatureBank bank;
  bank.labels = data.labels;
  const Eigen::Index n = model.net.layers.empty()
                             ? data.dim()
                             : model.net.output_dim();
  bank.features.resize(data.size(), n);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    gcr::Vector f = model.net.layers.empty()
                        ? gcr::Vector(data.features.row(i).transpose())
                        : model.net.forward(data.features.row(i).transpose());
    bank.features.row(i) = f.transpose();
  }
  return bank;
}

fs::path default_out_dir(const std::string& stem, std::uint64_t seed) {
  const char* root = std::getenv("GCR_OUT_ROOT");
  fs::path base = root ? fs::path(root) : fs::path(".");
  return base / (stem + "-" + std::to_string(seed));
}

int cmd_gen_data(Eigen::Index classes, Eigen::Index dim, Eigen::Index per_class,
                 double spread, std::uint64_t seed, const std::string& out) {
  gcr::Dataset data = gcr::make_blobs(classes, dim, per_class, spread, seed);
  fs::create_directories(out);
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < dim; ++j)
    header.push_back("f" + std::to_string(j));
  gcr::write_matrix_csv((fs::path(out) / "features.csv").string(),
                        data.features, header);
  gcr::write_labels_csv((fs::path(out) / "labels.csv").string(), data.labels);
  std::cout << "wrote " << data.size() << " samples to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& features_path,
              const std::string& labels_path, std::string out,
              const json& overrides) {
  gcr::TrainConfig config;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw CliError(kExitData, "cannot open config: " + config_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw CliError(kExitData, std::string("config parse: ") + e.what());
    }
    config_from_json(j, config);
  }
  config_from_json(overrides, config);

  gcr::Dataset data = load_dataset(features_path, labels_path);
  if (out.empty()) out = default_out_dir("run", config.seed).string();
  if (fs::exists(out))
    throw CliError(kExitData,
                   "run directory exists (runs are append-only): " + out);
  fs::create_directories(out);

  gcr::TrainResult result = gcr::train(config, data);

  json manifest;
  manifest["config"] = config_to_json(config);
  manifest["seed"] = config.seed;
  manifest["input_hash"] = fnv1a_file(features_path) ^ fnv1a_file(labels_path);
  manifest["outputs"] = {"metrics.csv", "model.ckpt"};
  std::ofstream mf(fs::path(out) / "manifest.json");
  mf << manifest.dump(2) << "\n";

  write_metrics_csv((fs::path(out) / "metrics.csv").string(), result.log);
  gcr::Checkpoint ckpt;
  ckpt.model = result.model;
  if (result.has_rsgd) {
    ckpt.momentum = result.rsgd.momentum;
    ckpt.tau = result.rsgd.tau;
    ckpt.mu = result.rsgd.mu;
    ckpt.reorth_period = std::uint32_t(result.rsgd.reorth_period);
    ckpt.iter = std::uint64_t(result.rsgd.iter);
  }
  gcr::save_checkpoint((fs::path(out) / "model.ckpt").string(), ckpt);

  const auto& last = result.log.back();
  std::cout << "final_loss=" << gcr::format_double(last.loss)
            << " final_top1=" << gcr::format_double(last.top1)
            << " ortho_error=" << gcr::format_double(last.ortho_error)
            << " out=" << out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& features_path,
             const std::string& labels_path, const std::string& report_path) {
  gcr::Checkpoint ckpt = gcr::load_checkpoint(ckpt_path);
  gcr::Dataset data = load_dataset(features_path, labels_path);
  gcr::EvalResult r = gcr::evaluate(ckpt.model, data);
  std::cout << "top1=" << gcr::format_double(r.top1) << "\n";
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!report_path.empty()) {
    file.open(report_path);
    if (!file) throw CliError(kExitData, "cannot write " + report_path);
    out = &file;
  }
  *out << "class,count,accuracy\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    *out << c << "," << r.class_counts[c] << ",";
    if (r.class_counts[c] == 0)
      *out << "absent";
    else
      *out << gcr::format_double(r.per_class[c]);
    *out << "\n";
  }
  return 0;
}

int cmd_angles(const std::string& ckpt_path, const std::string& out) {
  gcr::Checkpoint ckpt = gcr::load_checkpoint(ckpt_path);
  if (ckpt.model.kind != gcr::HeadKind::Gcr)
    throw CliError(kExitData, "angles: checkpoint has no subspace head");
  const auto& head = std::get<gcr::GcrHead>(ckpt.model.head);
  gcr::AngleReport report = gcr::angle_report(head.param);
  fs::create_directories(out);

  std::ofstream af(fs::path(out) / "angles.csv");
  if (!af) throw CliError(kExitData, "cannot write angles.csv");
  Eigen::Index kmax = 0;
  for (Eigen::Index k : head.param.dims) kmax = std::max(kmax, k);
  af << "i,j";
  for (Eigen::Index t = 0; t < kmax; ++t) af << ",theta" << (t + 1);
  af << "\n";
  for (Eigen::Index i = 0; i < report.num_classes; ++i)
    for (Eigen::Index j = 0; j < report.num_classes; ++j) {
      af << i << "," << j;
      const gcr::Vector& a = report.angles[i][j];
      for (Eigen::Index t = 0; t < kmax; ++t) {
        af << ",";
        if (t < a.size()) af << gcr::format_double(a(t));
      }
      af << "\n";
    }

  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < report.num_classes; ++j)
    header.push_back("c" + std::to_string(j));
  gcr::write_matrix_csv((fs::path(out) / "min_angle.csv").string(),
                        report.min_angle, header);
  gcr::write_matrix_csv((fs::path(out) / "max_angle.csv").string(),
                        report.max_angle, header);
  std::cout << "wrote angle report for " << report.num_classes
            << " classes to " << out << "\n";
  return 0;
}

int cmd_feature_stats(const std::string& ckpt_path,
                      const std::string& features_path,
                      const std::string& labels_path, bool r2_centered) {
  gcr::Checkpoint ckpt = gcr::load_checkpoint(ckpt_path);
  gcr::Dataset data = load_dataset(features_path, labels_path);
  gcr::FeatureBank bank = extract_features(ckpt.model, data);

  gcr::FeatureBank centered = bank;
  centered.center();
  long dropped = 0;
  const double variability = gcr::intra_class_variability(centered, &dropped);
  const double r2 = gcr::class_separation_r2(r2_centered ? centered : bank);
  std::cout << "variability_deg=" << gcr::format_double(variability)
            << " r2=" << gcr::format_double(r2) << " dropped=" << dropped
            << "\n";
  return 0;
}

int cmd_bench(const std::string& shapes_arg, int repeats,
              const std::string& out_path) {
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw CliError(kExitData, "cannot write " + out_path);
    out = &file;
  }
  *out << "classes,n,k,svd_ms,qf_ms\n";
  // shapes: "C,n,k;C,n,k;..."
  std::istringstream ss(shapes_arg);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto fields = gcr::split_csv_line(item);
    if (fields.size() != 3)
      throw CliError(kExitUsage, "bench: shape must be C,n,k");
    const long c = std::stol(fields[0]);
    const long n = std::stol(fields[1]);
    const long k = std::stol(fields[2]);
    if (c < 1 || n < 1 || k < 1 || k > n)
      throw CliError(kExitUsage, "bench: invalid shape");
    std::mt19937_64 gen(12345);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<gcr::Matrix> mats(c);
    for (auto& m : mats) {
      m.resize(n, k);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) m(i, j) = gauss(gen);
    }
    auto median_ms = [&](auto&& body) {
      std::vector<double> times;
      for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        times.push_back(std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count());
      }
      std::sort(times.begin(), times.end());
      return times[times.size() / 2];
    };
    const double svd_ms = median_ms([&] {
      for (const auto& m : mats) gcr::thin_svd(m);
    });
    const double qf_ms = median_ms([&] {
      for (const auto& m : mats) gcr::qf(m);
    });
    *out << c << "," << n << "," << k << "," << gcr::format_double(svd_ms)
         << "," << gcr::format_double(qf_ms) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grassmann class representation training and analysis"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  long gd_classes = 10, gd_dim = 64, gd_per_class = 100;
  double gd_spread = 0.1;
  std::uint64_t gd_seed = 0;
  std::string gd_out = "data";
  gen->add_option("--classes", gd_classes);
  gen->add_option("--dim", gd_dim);
  gen->add_option("--per-class", gd_per_class);
  gen->add_option("--spread", gd_spread);
  gen->add_option("--seed", gd_seed);
  gen->add_option("--out", gd_out);

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  std::string tr_config, tr_features, tr_labels, tr_out;
  tr->add_option("--config", tr_config, "JSON config file");
  tr->add_option("--features", tr_features)->required();
  tr->add_option("--labels", tr_labels)->required();
  tr->add_option("--out", tr_out, "run directory (must not exist)");
  json overrides;
  std::string tr_head, tr_retraction;
  double tr_lr = -1, tr_tau = -1, tr_gamma = -1, tr_mu = -1, tr_momentum = -1,
         tr_wd = -1;
  long tr_k = -1, tr_epochs = -1, tr_batch = -1, tr_reorth = -1, tr_fdim = -1;
  std::int64_t tr_seed = -1;
  bool tr_no_normalize = false, tr_vanilla = false;
  tr->add_option("--head", tr_head, "linear | cosine | gcr");
  tr->add_option("--retraction", tr_retraction, "geodesic | qr");
  tr->add_option("--lr", tr_lr);
  tr->add_option("--tau", tr_tau);
  tr->add_option("--momentum", tr_momentum);
  tr->add_option("--mu", tr_mu);
  tr->add_option("--weight-decay", tr_wd);
  tr->add_option("--gamma", tr_gamma);
  tr->add_option("--k", tr_k);
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--batch-size", tr_batch);
  tr->add_option("--reorth-period", tr_reorth);
  tr->add_option("--feature-dim", tr_fdim);
  tr->add_option("--seed", tr_seed);
  tr->add_flag("--no-normalize", tr_no_normalize,
               "disable feature length normalization");
  tr->add_flag("--vanilla-geometry", tr_vanilla,
               "plain SGD on the subspace weight (ablation)");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_features, ev_labels, ev_report;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--features", ev_features)->required();
  ev->add_option("--labels", ev_labels)->required();
  ev->add_option("--report", ev_report, "per-class CSV output path");

  // angles
  auto* an = app.add_subcommand("angles", "pairwise principal-angle report");
  std::string an_ckpt, an_out = "angles";
  an->add_option("--checkpoint", an_ckpt)->required();
  an->add_option("--out", an_out);

  // feature-stats
  auto* st = app.add_subcommand("feature-stats",
                                "intra-class variability and separation R^2");
  std::string st_ckpt, st_features, st_labels;
  bool st_r2_centered = false;
  st->add_option("--checkpoint", st_ckpt)->required();
  st->add_option("--features", st_features)->required();
  st->add_option("--labels", st_labels)->required();
  st->add_flag("--r2-centered", st_r2_centered,
               "compute R^2 on centered features");

  // bench
  auto* be = app.add_subcommand("bench", "SVD vs QR timing table");
  std::string be_shapes = "10,64,8;100,256,8;1000,2048,8";
  int be_repeats = 5;
  std::string be_out;
  be->add_option("--shapes", be_shapes, "semicolon-separated C,n,k triples");
  be->add_option("--repeats", be_repeats);
  be->add_option("--out", be_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed())
      return cmd_gen_data(gd_classes, gd_dim, gd_per_class, gd_spread, gd_seed,
                          gd_out);
    if (tr->parsed()) {
      if (!tr_head.empty()) overrides["head"] = tr_head;
      if (!tr_retraction.empty()) overrides["retraction"] = tr_retraction;
      if (tr_lr > 0) overrides["lr"] = tr_lr;
      if (tr_tau > 0) overrides["tau"] = tr_tau;
      if (tr_momentum >= 0) overrides["momentum"] = tr_momentum;
      if (tr_mu >= 0) overrides["mu"] = tr_mu;
      if (tr_wd >= 0) overrides["weight_decay"] = tr_wd;
      if (tr_gamma > 0) overrides["gamma"] = tr_gamma;
      if (tr_k > 0) overrides["k"] = tr_k;
      if (tr_epochs > 0) overrides["epochs"] = tr_epochs;
      if (tr_batch > 0) overrides["batch_size"] = tr_batch;
      if (tr_reorth >= 0) overrides["reorth_period"] = tr_reorth;
      if (tr_fdim > 0) overrides["feature_dim"] = tr_fdim;
      if (tr_seed >= 0) overrides["seed"] = std::uint64_t(tr_seed);
      if (tr_no_normalize) overrides["normalize"] = false;
      if (tr_vanilla) overrides["vanilla_geometry"] = true;
      return cmd_train(tr_config, tr_features, tr_labels, tr_out, overrides);
    }
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_features, ev_labels, ev_report);
    if (an->parsed()) return cmd_angles(an_ckpt, an_out);
    if (st->parsed())
      return cmd_feature_stats(st_ckpt, st_features, st_labels, st_r2_centered);
    if (be->parsed()) return cmd_bench(be_shapes, be_repeats, be_out);
    return kExitUsage;
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const gcr::CorruptContainer& e) {
    std::cerr << "error: corrupt-container: " << e.what() << "\n";
    return kExitData;
  } catch (const gcr::VersionMismatch& e) {
    std::cerr << "error: version-mismatch: " << e.what() << "\n";
    return kExitData;
  } catch (const gcr::InvalidSpec& e) {
    std::cerr << "error: invalid-spec: " << e.what() << "\n";
    return kExitData;
  } catch (const gcr::EmptyClass& e) {
    std::cerr << "error: empty-class: " << e.what() << "\n";
    return kExitData;
  } catch (const gcr::Error& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
