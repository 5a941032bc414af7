#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "petsa/dataio.hpp"
#include "petsa/errors.hpp"
#include "petsa/forecasters.hpp"
#include "petsa/metrics.hpp"
#include "petsa/ttaengine.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace petsa;

namespace {

// Every tunable is one flat key, readable from `key = value` config lines and
// overridable by the command line flag of the same name.
struct Opts {
  std::string config_path;
  std::string dataset;
  std::string data_root = "data";
  std::string backbone = "ols";
  std::size_t lookback = 96;
  std::string horizons = "96,192,336,720";
  std::string methods = "frozen,dense_mse,petsa";
  std::string out = "results";
  std::string checkpoints = "checkpoints";
  std::size_t seed = 0;
  std::string optimizer = "adam";
  double lr = 1e-3;
  std::size_t steps_per_event = 1;
  std::size_t rank = 4;
  double alpha0 = 0.5;
  double delta = 0.5;
  double beta = 0.1;
  std::size_t patch_len = 16;
  std::size_t patch_stride = 0;
  std::size_t period_cap = 720;
  bool store_predictions = false;
  bool audit = false;
  bool force = false;
  double ridge_lambda = 1e-3;
  std::size_t kernel = 25;
  std::size_t hidden = 64;
  std::size_t epochs = 20;
  double fit_lr = 0.0;  // 0 picks the backbone's own default
  std::size_t batch = 256;
  std::string axis;
  std::string betas = "0,0.1,0.5,1.0";
  std::string ranks = "1,2,4,8,16";
  std::string alpha0s = "0.1,0.25,0.5,0.75,1.0";
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config file '" + path + "' not found");
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config " + path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config " + path + ":" + std::to_string(lineno) + ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

template <class T>
T parse_scalar(const std::string& key, const std::string& raw);

template <>
double parse_scalar<double>(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("bad numeric value '" + raw + "' for " + key);
  }
}

template <>
std::size_t parse_scalar<std::size_t>(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(raw, &used);
    if (used != raw.size()) throw std::invalid_argument("");
    return static_cast<std::size_t>(v);
  } catch (...) {
    throw std::invalid_argument("bad integer value '" + raw + "' for " + key);
  }
}

template <>
std::string parse_scalar<std::string>(const std::string&, const std::string& raw) {
  return raw;
}

template <>
bool parse_scalar<bool>(const std::string& key, const std::string& raw) {
  if (raw == "1" || raw == "true" || raw == "yes" || raw == "on") return true;
  if (raw == "0" || raw == "false" || raw == "no" || raw == "off") return false;
  throw std::invalid_argument("bad boolean value '" + raw + "' for " + key);
}

/// Registers one CLI flag per config key and replays config-file values into
/// any field the command line left untouched.
class Binder {
 public:
  explicit Binder(CLI::App* cmd) : cmd_(cmd) {}

  template <class T>
  void bind(const std::string& key, T& field, const std::string& help) {
    CLI::Option* opt = cmd_->add_option("--" + key, field, help);
    opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    entries_.push_back({key, opt, [&field, key](const std::string& raw) {
                          field = parse_scalar<T>(key, raw);
                        }});
  }

  void bind_flag(const std::string& key, bool& field, const std::string& help) {
    CLI::Option* opt = cmd_->add_flag("--" + key, field, help);
    entries_.push_back({key, opt, [&field, key](const std::string& raw) {
                          field = parse_scalar<bool>(key, raw);
                        }});
  }

  void apply(const std::map<std::string, std::string>& kv) const {
    std::set<std::string> known;
    for (const Entry& e : entries_) known.insert(e.key);
    for (const auto& [key, value] : kv) {
      if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    for (const Entry& e : entries_) {
      const auto it = kv.find(e.key);
      if (it != kv.end() && e.opt->count() == 0) e.set(it->second);
    }
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    std::function<void(const std::string&)> set;
  };
  CLI::App* cmd_;
  std::vector<Entry> entries_;
};

Binder bind_all(CLI::App* cmd, Opts& o) {
  Binder b(cmd);
  b.bind("dataset", o.dataset, "CSV path, or a name resolved under the data root");
  b.bind("data_root", o.data_root, "directory with dataset CSVs (env PETSA_DATA_ROOT)");
  b.bind("backbone", o.backbone, "ols | dlinear | mlp");
  b.bind("lookback", o.lookback, "input window length L");
  b.bind("horizons", o.horizons, "comma-separated forecast horizons");
  b.bind("methods", o.methods,
         "comma-separated subset of frozen, dense_mse (TAFAS-like dense output map), petsa");
  b.bind("out", o.out, "output directory for results and tables");
  b.bind("checkpoints", o.checkpoints, "checkpoint directory");
  b.bind("seed", o.seed, "seed for calibration init and training");
  b.bind("optimizer", o.optimizer, "adam | sgd");
  b.bind("lr", o.lr, "adaptation learning rate");
  b.bind("steps_per_event", o.steps_per_event, "optimizer updates per adaptation event");
  b.bind("rank", o.rank, "low-rank r of the calibration modules");
  b.bind("alpha0", o.alpha0, "initial gating scale");
  b.bind("delta", o.delta, "Huber threshold");
  b.bind("beta", o.beta, "frequency-loss weight");
  b.bind("patch_len", o.patch_len, "patch length P of the structural loss");
  b.bind("patch_stride", o.patch_stride, "patch stride (0 = patch_len)");
  b.bind("period_cap", o.period_cap, "upper clamp for the dominant period");
  b.bind_flag("store_predictions", o.store_predictions, "embed full predictions in result files");
  b.bind_flag("audit", o.audit, "poison unobserved labels with NaN (causality audit)");
  b.bind_flag("force", o.force, "overwrite existing checkpoints");
  b.bind("ridge_lambda", o.ridge_lambda, "OLS ridge strength");
  b.bind("kernel", o.kernel, "DLinear moving-average kernel (odd)");
  b.bind("hidden", o.hidden, "MLP hidden width");
  b.bind("epochs", o.epochs, "training epochs for dlinear/mlp");
  b.bind("fit_lr", o.fit_lr, "training learning rate (0 = backbone default)");
  b.bind("batch", o.batch, "training minibatch size");
  b.bind("axis", o.axis, "sweep axis: beta | rank | alpha0");
  b.bind("betas", o.betas, "beta sweep values");
  b.bind("ranks", o.ranks, "rank sweep values");
  b.bind("alpha0s", o.alpha0s, "alpha0 sweep values");
  return b;
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> parts;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& raw) {
  std::vector<std::size_t> out;
  for (const std::string& s : split_list(raw)) {
    const std::size_t v = parse_scalar<std::size_t>(key, s);
    if (v == 0) throw std::invalid_argument(key + " entries must be positive");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument(key + " list is empty");
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  for (const std::string& s : split_list(raw)) out.push_back(parse_scalar<double>(key, s));
  if (out.empty()) throw std::invalid_argument(key + " list is empty");
  return out;
}

std::string resolve_dataset(const Opts& o) {
  if (o.dataset.empty()) throw std::invalid_argument("--dataset is required");
  if (fs::exists(o.dataset)) return o.dataset;
  const fs::path root(o.data_root);
  for (const fs::path& cand : {root / o.dataset, root / (o.dataset + ".csv")}) {
    if (fs::exists(cand)) return cand.string();
  }
  throw DataError("dataset '" + o.dataset + "' not found directly or under '" + o.data_root +
                  "'; point --data_root or PETSA_DATA_ROOT at the CSV directory");
}

AdaptationConfig adaptation_config(const Opts& o) {
  AdaptationConfig cfg;
  if (o.optimizer == "adam") {
    cfg.optimizer = OptimKind::adam;
  } else if (o.optimizer == "sgd") {
    cfg.optimizer = OptimKind::sgd;
  } else {
    throw std::invalid_argument("optimizer must be adam or sgd, got '" + o.optimizer + "'");
  }
  cfg.lr = o.lr;
  cfg.steps_per_event = o.steps_per_event;
  cfg.rank = o.rank;
  cfg.alpha0 = o.alpha0;
  cfg.loss.delta = o.delta;
  cfg.loss.beta = o.beta;
  cfg.loss.patch_len = o.patch_len;
  cfg.loss.patch_stride = o.patch_stride;
  cfg.period_cap = o.period_cap;
  cfg.seed = o.seed;
  cfg.audit_causality = o.audit;
  cfg.store_predictions = o.store_predictions;
  return cfg;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, path);
}

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Result file: compact JSON, except that the volatile timing object sits on
/// its own line so byte comparisons can drop exactly one line.
std::string run_result_json(const RunReport& rep, const Opts& o, const Dataset& ds,
                            const std::string& sweep_axis = "", double sweep_value = 0.0) {
  json j;
  j["schema"] = "petsa-run-v1";
  j["dataset"] = ds.name;
  j["backbone"] = o.backbone;
  j["method"] = method_name(rep.method);
  j["lookback"] = rep.lookback;
  j["horizon"] = rep.horizon;
  j["vars"] = rep.vars;
  j["dominant_period"] = rep.dominant_period;
  j["adapt_params"] = rep.adapt_params;
  j["backbone_params"] = rep.backbone_params;
  j["mse"] = rep.mse;
  j["mae"] = rep.mae;
  j["mse_raw"] = rep.mse_raw;
  j["mae_raw"] = rep.mae_raw;
  j["prediction_checksum"] = hex64(rep.prediction_checksum);
  j["backbone_checksum"] = hex64(rep.backbone_checksum);
  j["config"] = {{"optimizer", o.optimizer},
                 {"lr", o.lr},
                 {"steps_per_event", o.steps_per_event},
                 {"rank", o.rank},
                 {"alpha0", o.alpha0},
                 {"delta", o.delta},
                 {"beta", o.beta},
                 {"patch_len", o.patch_len},
                 {"patch_stride", o.patch_stride},
                 {"period_cap", o.period_cap},
                 {"seed", o.seed}};
  if (!sweep_axis.empty()) {
    j["sweep_axis"] = sweep_axis;
    j["sweep_value"] = sweep_value;
  }

  json wins;
  for (const auto& w : rep.windows) {
    wins["t_star"].push_back(w.t_star);
    wins["mse_raw"].push_back(w.mse_raw);
    wins["mae_raw"].push_back(w.mae_raw);
    wins["mse_cal"].push_back(w.mse_cal);
    wins["mae_cal"].push_back(w.mae_cal);
  }
  j["windows"] = wins.is_null() ? json::object() : wins;

  json evs = json::object();
  for (const auto& e : rep.events) {
    evs["step"].push_back(e.step);
    evs["mode"].push_back(e.mode == LossMode::partial ? "partial" : "total");
    evs["total"].push_back(e.total);
    evs["huber"].push_back(e.huber);
    evs["freq"].push_back(e.freq);
    evs["patch"].push_back(e.patch);
    evs["n_observed"].push_back(e.n_observed);
    evs["patch_skipped"].push_back(e.patch_skipped);
  }
  j["events"] = evs;

  if (!rep.predictions.empty()) {
    j["predictions"] = rep.predictions;
    j["predictions_raw"] = rep.predictions_raw;
  }

  json timing = {{"generated_at", iso_now()}, {"wall_seconds", rep.wall_seconds}};
  const std::string body = j.dump();
  return "{\n\"timing\": " + timing.dump() + ",\n" + body.substr(1) + "\n";
}

Dataset load_split(const Opts& o) {
  Dataset ds = load_csv(resolve_dataset(o));
  split_and_normalize(ds);
  return ds;
}

Forecaster fit_backbone(const Opts& o, const std::vector<WindowPair>& train, BackboneKind kind) {
  switch (kind) {
    case BackboneKind::ols:
      return fit_ols(train, o.ridge_lambda);
    case BackboneKind::dlinear:
      return fit_dlinear(train, o.kernel, o.epochs, o.fit_lr > 0 ? o.fit_lr : 1e-2, o.batch);
    case BackboneKind::mlp:
      return fit_mlp(train, o.hidden, o.epochs, o.fit_lr > 0 ? o.fit_lr : 1e-3, o.seed, o.batch);
  }
  throw std::invalid_argument("unknown backbone");
}

double batched_mse(const Forecaster& f, const std::vector<WindowPair>& wins) {
  const std::size_t N = wins.size();
  Tensor x = Tensor::zeros({N, f.L, f.V});
  Tensor y = Tensor::zeros({N, f.H, f.V});
  for (std::size_t i = 0; i < N; ++i) {
    std::copy(wins[i].x.data(), wins[i].x.data() + f.L * f.V, x.data() + i * f.L * f.V);
    std::copy(wins[i].y.data(), wins[i].y.data() + f.H * f.V, y.data() + i * f.H * f.V);
  }
  return mse(predict(f, x), y);
}

Forecaster load_backbone(const Opts& o, const Dataset& ds, std::size_t H) {
  const std::string path =
      checkpoint_path(o.checkpoints, ds.name, kind_from_name(o.backbone), o.lookback, H);
  if (!fs::exists(path)) {
    throw DataError("checkpoint " + path + " not found; run `petsa train` first");
  }
  Forecaster f = load_checkpoint(path);
  if (f.L != o.lookback || f.H != H || f.V != ds.vars) {
    throw DimensionError("checkpoint " + path + " is L=" + std::to_string(f.L) +
                         " H=" + std::to_string(f.H) + " V=" + std::to_string(f.V) +
                         ", which does not match the requested configuration");
  }
  return f;
}

int cmd_train(const Opts& o) {
  Dataset ds = load_split(o);
  const BackboneKind kind = kind_from_name(o.backbone);
  std::printf("dataset %s: %zu rows, %zu vars, train/val/test = %zu/%zu/%zu\n", ds.name.c_str(),
              ds.rows, ds.vars, ds.train_end, ds.val_end - ds.train_end, ds.rows - ds.val_end);
  for (const std::size_t H : parse_size_list("horizons", o.horizons)) {
    const std::string path = checkpoint_path(o.checkpoints, ds.name, kind, o.lookback, H);
    if (fs::exists(path) && !o.force) {
      throw std::invalid_argument("checkpoint " + path + " already exists; pass --force to refit");
    }
    Forecaster f = fit_backbone(o, windows(ds, Part::train, o.lookback, H), kind);
    stamp_provenance(f, ds);
    save_checkpoint(f, path);
    const auto val = windows(ds, Part::val, o.lookback, H);
    if (val.empty()) {
      std::printf("H=%zu  val_mse=n/a  -> %s\n", H, path.c_str());
    } else {
      std::printf("H=%zu  val_mse=%.6f  -> %s\n", H, batched_mse(f, val), path.c_str());
    }
  }
  return 0;
}

std::vector<Method> parse_methods(const std::string& raw) {
  std::vector<Method> out;
  for (const std::string& name : split_list(raw)) out.push_back(method_from_name(name));
  if (out.empty()) throw std::invalid_argument("methods list is empty");
  return out;
}

int cmd_adapt(const Opts& o) {
  Dataset ds = load_split(o);
  const std::vector<std::size_t> horizons = parse_size_list("horizons", o.horizons);
  const std::vector<Method> methods = parse_methods(o.methods);
  const AdaptationConfig cfg = adaptation_config(o);

  std::ostringstream summary, params;
  summary << "horizon";
  for (const Method m : methods) summary << "\t" << method_name(m);
  summary << "\n";
  params << "horizon\tmethod\tparams\tmemory_mb\n";

  for (const std::size_t H : horizons) {
    Forecaster f = load_backbone(o, ds, H);
    summary << H;
    std::printf("H=%zu", H);
    for (const Method m : methods) {
      RunReport rep = run_tta(ds, f, cfg, m);
      const fs::path file = fs::path(o.out) / (ds.name + "_" + o.backbone + "_H" +
                                               std::to_string(H) + "_" + method_name(m) + ".json");
      write_atomic(file, run_result_json(rep, o, ds));
      summary << "\t" << fmt(rep.mse);
      params << H << "\t" << method_name(m) << "\t" << rep.adapt_params << "\t"
             << fmt(static_cast<double>(rep.adapt_params) * 8.0 / (1024.0 * 1024.0)) << "\n";
      std::printf("  %s=%.6f", method_name(m), rep.mse);
    }
    summary << "\n";
    const double ratio = static_cast<double>(dense_param_count(H, ds.vars)) /
                         static_cast<double>(petsa_param_count(o.lookback, H, ds.vars, o.rank));
    std::printf("  dense/petsa params = %.1fx\n", ratio);
  }

  const std::string stem = ds.name + "_" + o.backbone;
  write_atomic(fs::path(o.out) / (stem + "_summary.tsv"), summary.str());
  write_atomic(fs::path(o.out) / (stem + "_params.tsv"), params.str());
  std::printf("results in %s\n", o.out.c_str());
  return 0;
}

int cmd_sweep(const Opts& o) {
  if (o.axis != "beta" && o.axis != "rank" && o.axis != "alpha0") {
    throw std::invalid_argument("--axis must be beta, rank, or alpha0");
  }
  Dataset ds = load_split(o);
  const std::vector<std::size_t> horizons = parse_size_list("horizons", o.horizons);

  std::vector<double> values;
  if (o.axis == "beta") {
    values = parse_double_list("betas", o.betas);
  } else if (o.axis == "alpha0") {
    values = parse_double_list("alpha0s", o.alpha0s);
  } else {
    for (const std::size_t r : parse_size_list("ranks", o.ranks))
      values.push_back(static_cast<double>(r));
  }

  std::ostringstream table;
  table << "axis\tvalue\thorizon\tmse\tparams\n";
  for (const std::size_t H : horizons) {
    Forecaster f = load_backbone(o, ds, H);
    for (const double v : values) {
      AdaptationConfig cfg = adaptation_config(o);
      if (o.axis == "beta") {
        cfg.loss.beta = v;
      } else if (o.axis == "alpha0") {
        cfg.alpha0 = v;
      } else {
        cfg.rank = static_cast<std::size_t>(v);
      }
      RunReport rep = run_tta(ds, f, cfg, Method::petsa);
      std::ostringstream tag;
      tag << o.axis << fmt(v);
      const fs::path file = fs::path(o.out) / (ds.name + "_" + o.backbone + "_H" +
                                               std::to_string(H) + "_petsa_" + tag.str() + ".json");
      write_atomic(file, run_result_json(rep, o, ds, o.axis, v));
      table << o.axis << "\t" << fmt(v) << "\t" << H << "\t" << fmt(rep.mse) << "\t"
            << rep.adapt_params << "\n";
      std::printf("%s=%s H=%zu mse=%.6f params=%zu\n", o.axis.c_str(), fmt(v).c_str(), H, rep.mse,
                  rep.adapt_params);
    }
  }
  const fs::path file =
      fs::path(o.out) / (ds.name + "_" + o.backbone + "_sweep_" + o.axis + ".tsv");
  write_atomic(file, table.str());
  std::printf("sweep table: %s\n", file.string().c_str());
  return 0;
}

int cmd_report(const Opts& o) {
  if (!fs::is_directory(o.out)) throw DataError("no result directory '" + o.out + "'");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(o.out)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no result files in '" + o.out + "'");

  // (dataset, backbone) -> horizon -> method -> mse recomputed from windows
  std::map<std::pair<std::string, std::string>,
           std::map<std::size_t, std::map<std::string, double>>>
      grid;
  std::map<std::pair<std::string, std::string>,
           std::map<std::size_t, std::map<std::string, std::size_t>>>
      param_grid;

  for (const fs::path& file : files) {
    std::ifstream in(file);
    json j = json::parse(in);
    if (j.contains("sweep_axis")) continue;  // sweep points have their own table
    const auto& wins = j.at("windows").at("mse_cal");
    double acc = 0.0;
    for (const auto& v : wins) acc += v.get<double>();
    const double recomputed = acc / static_cast<double>(wins.size());
    const double stored = j.at("mse").get<double>();
    if (std::fabs(recomputed - stored) > 1e-10) {
      throw DataError(file.string() + ": stored mse " + fmt(stored) +
                      " does not match its own windows (" + fmt(recomputed) + ")");
    }
    const auto key = std::make_pair(j.at("dataset").get<std::string>(),
                                    j.at("backbone").get<std::string>());
    const auto H = j.at("horizon").get<std::size_t>();
    const auto method = j.at("method").get<std::string>();
    grid[key][H][method] = recomputed;
    param_grid[key][H][method] = j.at("adapt_params").get<std::size_t>();
  }

  for (const auto& [key, horizons] : grid) {
    std::vector<std::string> methods;
    for (const std::string m : {"frozen", "dense_mse", "petsa"}) {
      for (const auto& [H, cells] : horizons) {
        if (cells.count(m) && std::find(methods.begin(), methods.end(), m) == methods.end()) {
          methods.push_back(m);
        }
      }
    }
    std::ostringstream summary, params;
    summary << "horizon";
    for (const auto& m : methods) summary << "\t" << m;
    summary << "\n";
    params << "horizon\tmethod\tparams\tmemory_mb\n";
    for (const auto& [H, cells] : horizons) {
      summary << H;
      for (const auto& m : methods) {
        if (cells.count(m)) {
          summary << "\t" << fmt(cells.at(m));
        } else {
          summary << "\t" << "n/a";
        }
      }
      summary << "\n";
      for (const auto& m : methods) {
        if (!param_grid[key][H].count(m)) continue;
        const std::size_t count = param_grid[key][H][m];
        params << H << "\t" << m << "\t" << count << "\t"
               << fmt(static_cast<double>(count) * 8.0 / (1024.0 * 1024.0)) << "\n";
      }
    }
    const std::string stem = key.first + "_" + key.second;
    write_atomic(fs::path(o.out) / (stem + "_summary.tsv"), summary.str());
    write_atomic(fs::path(o.out) / (stem + "_params.tsv"), params.str());
    std::printf("%s %s\n%s", key.first.c_str(), key.second.c_str(), summary.str().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PETSA: parameter-efficient test-time adaptation for time-series forecasting"};
  app.require_subcommand(1);

  Opts o;
  if (const char* env = std::getenv("PETSA_DATA_ROOT")) o.data_root = env;

  CLI::App* train = app.add_subcommand("train", "fit a backbone per horizon and checkpoint it");
  CLI::App* adapt = app.add_subcommand("adapt", "run the adaptation methods over the test stream");
  CLI::App* sweep = app.add_subcommand("sweep", "ablation sweep over beta, rank, or alpha0");
  CLI::App* report = app.add_subcommand("report", "rebuild summary tables from result files");

  std::map<CLI::App*, Binder> binders;
  for (CLI::App* cmd : {train, adapt, sweep, report}) {
    cmd->add_option("--config", o.config_path, "flat key = value config file");
    binders.emplace(cmd, bind_all(cmd, o));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    if (!o.config_path.empty()) binders.at(cmd).apply(read_config(o.config_path));
    if (cmd == train) return cmd_train(o);
    if (cmd == adapt) return cmd_adapt(o);
    if (cmd == sweep) return cmd_sweep(o);
    return cmd_report(o);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
