// dagsurv command-line tool: generate, train, evaluate, predict, propcheck.
//
// Exit status: 0 success, 2 usage or configuration error, 3 data error
// (unreadable or malformed input), 4 internal error.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>

#include "dagsurv/checkpoint.hpp"
#include "dagsurv/infotheory.hpp"
#include "dagsurv/presets.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace dagsurv;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

// Bad inputs on disk, as opposed to bad flags.
class DataError : public Error {
 public:
  using Error::Error;
};

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string read_input(const std::string& path) {
  try {
    return io::read_file(path);
  } catch (const Error& e) {
    throw DataError(e.what());
  }
}

// ---- run manifest ----------------------------------------------------------

class Manifest {
 public:
  Manifest(std::string command, fs::path out_dir)
      : out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["config"] = json::object();
    doc_["seeds"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
  }

  json& config() { return doc_["config"]; }
  json& seeds() { return doc_["seeds"]; }
  json& results() { return doc_["results"]; }

  void input(const std::string& path, const std::string& bytes) {
    doc_["inputs"].push_back({{"path", path}, {"sha256", sha256_hex(bytes)}});
  }

  void write(const std::string& name, const std::string& bytes) {
    fs::path p = out_dir_ / name;
    io::write_file(p.string(), bytes);
    doc_["outputs"].push_back({{"path", p.string()}, {"sha256", sha256_hex(bytes)}});
  }

  void finish() {
    doc_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    io::write_file((out_dir_ / "manifest.json").string(), doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  fs::path out_dir_;
  std::chrono::steady_clock::time_point start_;
};

// ---- key=value config files ------------------------------------------------

struct ConfigFile {
  std::string path;
  std::map<std::string, std::pair<std::string, std::size_t>> values;  // key -> (value, line)
};

ConfigFile read_config(const std::string& path) {
  ConfigFile c{path, {}};
  const std::string text = read_input(path);
  auto ls = io::lines(text);
  for (std::size_t ln = 0; ln < ls.size(); ++ln) {
    auto line = io::trim(ls[ln]);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(path, ln + 1, "expected key=value");
    std::string key(io::trim(line.substr(0, eq)));
    std::string value(io::trim(line.substr(eq + 1)));
    if (key.empty() || value.empty()) throw ParseError(path, ln + 1, "expected key=value");
    if (c.values.count(key)) throw ParseError(path, ln + 1, "duplicate key '" + key + "'");
    c.values[key] = {value, ln + 1};
  }
  return c;
}

// Applies every key through `setters`; unknown keys are errors.
using Setter = std::function<void(const std::string& value, const std::string& file, std::size_t line)>;

void apply_config(const ConfigFile& c, const std::map<std::string, Setter>& setters) {
  for (const auto& [key, vl] : c.values) {
    auto it = setters.find(key);
    if (it == setters.end()) {
      std::string known;
      for (const auto& [k, _] : setters) known += (known.empty() ? "" : ", ") + k;
      throw ParseError(c.path, vl.second, "unknown key '" + key + "' (known: " + known + ")");
    }
    it->second(vl.first, c.path, vl.second);
  }
}

Setter set_int(int& dst) {
  return [&dst](const std::string& v, const std::string& f, std::size_t l) {
    dst = static_cast<int>(io::parse_int(v, f, l));
  };
}
Setter set_size(std::size_t& dst) {
  return [&dst](const std::string& v, const std::string& f, std::size_t l) {
    auto x = io::parse_int(v, f, l);
    if (x < 0) throw ParseError(f, l, "value must be >= 0");
    dst = static_cast<std::size_t>(x);
  };
}
Setter set_u64(std::uint64_t& dst) {
  return [&dst](const std::string& v, const std::string& f, std::size_t l) {
    auto x = io::parse_int(v, f, l);
    if (x < 0) throw ParseError(f, l, "seed must be >= 0");
    dst = static_cast<std::uint64_t>(x);
  };
}
Setter set_double(double& dst) {
  return [&dst](const std::string& v, const std::string& f, std::size_t l) {
    dst = io::parse_double(v, f, l);
  };
}
Setter set_bool(bool& dst) {
  return [&dst](const std::string& v, const std::string& f, std::size_t l) {
    if (v == "1" || v == "true")
      dst = true;
    else if (v == "0" || v == "false")
      dst = false;
    else
      throw ParseError(f, l, "expected true/false");
  };
}

NoiseScale parse_noise_scale(const std::string& s) {
  if (s == "variance") return NoiseScale::Variance;
  if (s == "sd") return NoiseScale::StdDev;
  throw ConfigError("noise scale must be 'variance' or 'sd', got '" + s + "'");
}
std::string to_string(NoiseScale n) { return n == NoiseScale::Variance ? "variance" : "sd"; }

CensorMode parse_censor_mode(const std::string& s) {
  if (s == "exact") return CensorMode::ExactFraction;
  if (s == "global") return CensorMode::GlobalUniform;
  throw ConfigError("censor mode must be 'exact' or 'global', got '" + s + "'");
}
std::string to_string(CensorMode m) { return m == CensorMode::ExactFraction ? "exact" : "global"; }

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw ConfigError("cannot create output directory '" + dir + "'");
  return p;
}

// ---- shared options ----------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->each([&c](const std::string&) {
    c.seed_given = true;
  });
  cmd->add_option("--config", c.config, "key=value configuration file");
  cmd->add_option("--out-dir", c.out_dir, "Directory for outputs (created if missing)");
}

// ---- generate ----------------------------------------------------------------

struct GenerateArgs {
  std::string preset = "synthetic-small";
  std::string adjacency;
  std::optional<std::uint64_t> dag_seed;
  std::string noise_scale = "variance";
  std::string censor_mode = "exact";
};

int cmd_generate(const Common& common, const GenerateArgs& args) {
  SyntheticPreset p = synthetic_preset(args.preset);
  SyntheticOptions opt;
  opt.dag_seed = args.dag_seed;
  opt.noise_kind = parse_noise_scale(args.noise_scale);
  opt.censor_mode = parse_censor_mode(args.censor_mode);
  std::uint64_t seed = common.seed;

  fs::path out = prepare_out_dir(common.out_dir);
  Manifest man("generate", out);
  if (!common.config.empty()) {
    auto cfg = read_config(common.config);
    man.input(common.config, read_input(common.config));
    std::string noise = to_string(opt.noise_kind), censor = to_string(opt.censor_mode);
    std::uint64_t dag_seed = opt.dag_seed.value_or(p.dag_seed);
    bool dag_seed_set = false;
    apply_config(cfg, {
        {"num_covariates", set_size(p.num_covariates)},
        {"expected_degree", set_double(p.expected_degree)},
        {"weight_low", set_double(p.weight_low)},
        {"weight_high", set_double(p.weight_high)},
        {"n_samples", set_size(p.n_samples)},
        {"scale_c", set_double(p.scale_c)},
        {"censor_fraction", set_double(p.censor_fraction)},
        {"noise_scale", [&](const std::string& v, auto&, auto) { noise = v; }},
        {"censor_mode", [&](const std::string& v, auto&, auto) { censor = v; }},
        {"dag_seed", [&](const std::string& v, const std::string& f, std::size_t l) {
           set_u64(dag_seed)(v, f, l);
           dag_seed_set = true;
         }},
        {"seed", [&](const std::string& v, const std::string& f, std::size_t l) {
           if (!common.seed_given) set_u64(seed)(v, f, l);
         }},
    });
    opt.noise_kind = parse_noise_scale(noise);
    opt.censor_mode = parse_censor_mode(censor);
    if (dag_seed_set && !args.dag_seed) opt.dag_seed = dag_seed;
  }

  Dag dag = Dag::empty(1);
  std::string dag_source;
  if (!args.adjacency.empty()) {
    const std::string text = read_input(args.adjacency);
    man.input(args.adjacency, text);
    dag = validate_dag(parse_adjacency_csv(text, args.adjacency));
    if (dag.num_nodes() < 2) throw DataError(args.adjacency + ": need at least 2 nodes");
    p.num_covariates = dag.num_nodes() - 1;
    dag_source = args.adjacency;
  } else {
    const std::uint64_t ds = opt.dag_seed.value_or(p.dag_seed);
    dag = sample_preset_dag(p, ds);
    dag_source = "erdos-renyi seed " + std::to_string(ds);
    man.seeds()["dag"] = ds;
  }

  SyntheticData syn = make_synthetic(p, dag, seed, opt);
  for (const auto& w : syn.warnings) std::cerr << "warning: " << w << "\n";

  // The dataset file keeps continuous times; binning happens at training.
  man.write("dataset.csv", format_dataset_csv(syn.data));
  man.write("adjacency.csv", format_adjacency_csv(syn.dag.adjacency()));

  man.config() = {{"preset", p.name},
                  {"num_covariates", p.num_covariates},
                  {"expected_degree", p.expected_degree},
                  {"weight_low", p.weight_low},
                  {"weight_high", p.weight_high},
                  {"n_samples", p.n_samples},
                  {"scale_c", p.scale_c},
                  {"censor_fraction", p.censor_fraction},
                  {"censor_mode", to_string(opt.censor_mode)},
                  {"noise_scale", to_string(opt.noise_kind)},
                  {"dag", dag_source}};
  man.seeds()["generation"] = seed;
  man.seeds()["censoring"] = seed + 2;
  man.results() = {{"rows", syn.data.size()},
                   {"edges", syn.dag.num_edges()},
                   {"censored_fraction", syn.data.censored_fraction()},
                   {"max_time", syn.data.grid.max_time},
                   {"horizon", syn.data.horizon()},
                   {"warnings", syn.warnings}};
  man.finish();
  std::cout << "wrote " << syn.data.size() << " rows to " << (out / "dataset.csv").string()
            << "\n";
  return 0;
}

// ---- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string adjacency;
  std::string preset = "synthetic-small";
  bool zero_dag = false;
  int bins = 0;
  int eval_latent_samples = 32;
};

int cmd_train(const Common& common, const TrainArgs& args) {
  const TrainPreset& tp = train_preset(args.preset);
  ModelConfig mc = tp.model;
  TrainConfig tc;
  tc.lr = tp.lr;
  tc.seed = common.seed;
  int bins = args.bins;

  fs::path out = prepare_out_dir(common.out_dir);
  Manifest man("train", out);
  if (!common.config.empty()) {
    auto cfg = read_config(common.config);
    man.input(common.config, read_input(common.config));
    apply_config(cfg, {
        {"lr", set_double(tc.lr)},
        {"batch_size", set_size(tc.batch_size)},
        {"epochs", set_int(tc.epochs)},
        {"patience", set_int(tc.patience)},
        {"min_epochs", set_int(tc.min_epochs)},
        {"kl_weight", set_double(tc.kl_weight)},
        {"val_latent_samples", set_int(tc.val_latent_samples)},
        {"standardize", set_bool(tc.standardize)},
        {"encoder_layers", set_int(mc.encoder_layers)},
        {"encoder_hidden", set_int(mc.encoder_hidden)},
        {"decoder_layers", set_int(mc.decoder_layers)},
        {"decoder_hidden", set_int(mc.decoder_hidden)},
        {"mixer_layers", set_int(mc.mixer_layers)},
        {"mixer_hidden", set_int(mc.mixer_hidden)},
        {"bins", [&](const std::string& v, const std::string& f, std::size_t l) {
           if (args.bins == 0) bins = static_cast<int>(io::parse_int(v, f, l));
         }},
        {"activation", [&](const std::string& v, auto&, auto) { mc.activation = parse_activation(v); }},
        {"seed", [&](const std::string& v, const std::string& f, std::size_t l) {
           if (!common.seed_given) set_u64(tc.seed)(v, f, l);
         }},
    });
  }
  tc.check();
  const std::uint64_t seed = tc.seed;

  const std::string data_text = read_input(args.data);
  man.input(args.data, data_text);
  SurvivalDataset ds = parse_dataset_csv(data_text, args.data);
  const std::string adj_text = read_input(args.adjacency);
  man.input(args.adjacency, adj_text);
  Dag dag = validate_dag(parse_adjacency_csv(adj_text, args.adjacency));
  if (dag.num_nodes() != ds.num_covariates() + 1)
    throw DataError(args.adjacency + ": adjacency has " + std::to_string(dag.num_nodes()) +
                    " nodes but the dataset has " + std::to_string(ds.num_covariates()) +
                    " covariates plus time");
  if (args.zero_dag) dag = dag.zeroed();

  const int horizon = bins > 0 ? bins : default_horizon(ds);
  ds = discretize(std::move(ds), horizon);
  // Split, initialization and optimization each get their own seed.
  auto sp = split(ds, seed + 3);
  DagSurvModel model(dag, horizon, mc, seed + 4);
  tc.seed = seed + 5;
  TrainResult res = train(model, sp.train, sp.val, tc);
  const double test_ctd = evaluate_ctd(model, sp.test, args.eval_latent_samples, seed + 6);

  man.write("model.ckpt", format_checkpoint(model));
  man.write("history.csv", format_history_csv(res));
  man.write("test.csv", format_dataset_csv(sp.test));

  man.config() = {{"preset", tp.name},
                  {"lr", tc.lr},
                  {"batch_size", tc.batch_size},
                  {"epochs", tc.epochs},
                  {"patience", tc.patience},
                  {"min_epochs", tc.min_epochs},
                  {"kl_weight", tc.kl_weight},
                  {"val_latent_samples", tc.val_latent_samples},
                  {"standardize", tc.standardize},
                  {"encoder_layers", mc.encoder_layers},
                  {"encoder_hidden", mc.encoder_hidden},
                  {"decoder_layers", mc.decoder_layers},
                  {"decoder_hidden", mc.decoder_hidden},
                  {"mixer_layers", mc.mixer_layers},
                  {"mixer_hidden", mc.mixer_hidden},
                  {"activation", to_string(mc.activation)},
                  {"zero_dag", args.zero_dag},
                  {"bins", horizon},
                  {"eval_latent_samples", args.eval_latent_samples}};
  man.seeds() = {{"seed", seed}, {"split", seed + 3}, {"init", seed + 4}, {"train", seed + 5},
                 {"test_prediction", seed + 6}};
  man.results() = {{"train_rows", sp.train.size()},
                   {"val_rows", sp.val.size()},
                   {"test_rows", sp.test.size()},
                   {"epochs_run", res.history.size()},
                   {"best_epoch", res.best_epoch},
                   {"best_val_ctd", res.best_epoch >= 0 ? json(res.best_val_ctd) : json(nullptr)},
                   {"test_ctd", test_ctd}};
  man.finish();
  std::cout << "epochs " << res.history.size() << ", best epoch " << res.best_epoch
            << ", test C_td " << io::format_double(test_ctd) << "\n";
  return 0;
}

// ---- evaluate / predict -------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string data;
  std::size_t b = 1000;
  int latent_samples = 32;
  std::string output = "survival";
};

std::pair<DagSurvModel, SurvivalDataset> load_model_and_data(Manifest& man, const EvalArgs& args) {
  const std::string ck = read_input(args.model);
  man.input(args.model, ck);
  DagSurvModel model = parse_checkpoint(ck, args.model);
  const std::string text = read_input(args.data);
  man.input(args.data, text);
  SurvivalDataset ds = parse_dataset_csv(text, args.data);
  if (ds.num_covariates() != model.num_covariates())
    throw DataError(args.data + ": dataset has " + std::to_string(ds.num_covariates()) +
                    " covariates, model expects " + std::to_string(model.num_covariates()));
  const TimeGrid grid = model.grid();
  return {std::move(model), apply_grid(std::move(ds), grid)};
}

int cmd_evaluate(const Common& common, EvalArgs args) {
  fs::path out = prepare_out_dir(common.out_dir);
  Manifest man("evaluate", out);
  std::uint64_t seed = common.seed;
  if (!common.config.empty()) {
    auto cfg = read_config(common.config);
    man.input(common.config, read_input(common.config));
    apply_config(cfg, {{"b", set_size(args.b)},
                       {"latent_samples", set_int(args.latent_samples)},
                       {"seed", [&](const std::string& v, const std::string& f, std::size_t l) {
                          if (!common.seed_given) set_u64(seed)(v, f, l);
                        }}});
  }
  auto [model, ds] = load_model_and_data(man, args);
  Matrix cdf = cdf_rows(predict_pmf(model, ds.covariates, args.latent_samples, seed));
  CtdReport r = bootstrap_ctd(cdf, ds.time_bins, ds.events, {args.b, seed + 1});
  man.write("report.csv", format_ctd_report_csv(r));
  man.config() = {{"b", args.b}, {"latent_samples", args.latent_samples}};
  man.seeds() = {{"prediction", seed}, {"bootstrap", seed + 1}};
  man.results() = {{"point_estimate", r.point_estimate},
                   {"median", r.median},
                   {"iqr", r.iqr},
                   {"notch_low", r.notch_low},
                   {"notch_high", r.notch_high}};
  man.finish();
  std::cout << "C_td " << io::format_double(r.point_estimate) << " (median "
            << io::format_double(r.median) << ", notch [" << io::format_double(r.notch_low)
            << ", " << io::format_double(r.notch_high) << "], b = " << r.b << ")\n";
  return 0;
}

int cmd_predict(const Common& common, EvalArgs args) {
  fs::path out = prepare_out_dir(common.out_dir);
  Manifest man("predict", out);
  std::uint64_t seed = common.seed;
  if (!common.config.empty()) {
    auto cfg = read_config(common.config);
    man.input(common.config, read_input(common.config));
    apply_config(cfg, {{"latent_samples", set_int(args.latent_samples)},
                       {"output", [&](const std::string& v, auto&, auto) { args.output = v; }},
                       {"seed", [&](const std::string& v, const std::string& f, std::size_t l) {
                          if (!common.seed_given) set_u64(seed)(v, f, l);
                        }}});
  }
  if (args.output != "survival" && args.output != "cdf" && args.output != "pmf")
    throw ConfigError("output must be survival, cdf or pmf");
  auto [model, ds] = load_model_and_data(man, args);
  Matrix pmf = predict_pmf(model, ds.covariates, args.latent_samples, seed);
  Matrix values = args.output == "pmf" ? pmf : cdf_rows(pmf);
  if (args.output == "survival") values = (1.0 - values.array()).matrix();

  const char* prefix = args.output == "survival" ? "S" : args.output == "cdf" ? "F" : "p";
  std::string text = "row";
  for (Eigen::Index k = 0; k < values.cols(); ++k) text += "," + std::string(prefix) + std::to_string(k);
  text += '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    text += std::to_string(r);
    for (Eigen::Index k = 0; k < values.cols(); ++k) text += "," + io::format_double(values(r, k));
    text += '\n';
  }
  man.write("predictions.csv", text);
  man.config() = {{"latent_samples", args.latent_samples}, {"output", args.output}};
  man.seeds() = {{"prediction", seed}};
  man.results() = {{"rows", values.rows()}, {"bins", values.cols()}};
  man.finish();
  std::cout << "wrote " << values.rows() << " predictions\n";
  return 0;
}

// ---- propcheck -----------------------------------------------------------------

struct PropArgs {
  std::vector<std::string> nets;
  int random = 0;
  std::size_t nodes = 4;
  double degree = 1.5;
  int max_card = 3;
  bool vacuous = false;
};

int cmd_propcheck(const Common& common, PropArgs args) {
  fs::path out = prepare_out_dir(common.out_dir);
  Manifest man("propcheck", out);
  std::uint64_t seed = common.seed;
  if (!common.config.empty()) {
    auto cfg = read_config(common.config);
    man.input(common.config, read_input(common.config));
    apply_config(cfg, {{"random", set_int(args.random)},
                       {"nodes", set_size(args.nodes)},
                       {"expected_degree", set_double(args.degree)},
                       {"max_card", set_int(args.max_card)},
                       {"vacuous", set_bool(args.vacuous)},
                       {"seed", [&](const std::string& v, const std::string& f, std::size_t l) {
                          if (!common.seed_given) set_u64(seed)(v, f, l);
                        }}});
  }
  if (args.nets.empty() && args.random <= 0)
    throw ConfigError("propcheck needs --net files or --random N");

  std::string text = "source,knows_dag,joint_entropy,marginal_sum,gap,dependent\n";
  int violations = 0;
  auto row = [&](const std::string& source, const DiscreteBayesNet& net) {
    EntropyGap g = entropy_gap(net);
    const bool dep = has_dependence(net);
    text += source + ',' + (net.knows_dag ? "1" : "0") + ',' + io::format_double(g.joint_entropy) +
            ',' + io::format_double(g.marginal_sum) + ',' + io::format_double(g.gap) + ',' +
            (dep ? "1" : "0") + '\n';
    if (g.gap < -1e-9) ++violations;
  };
  for (const auto& path : args.nets) {
    const std::string body = read_input(path);
    man.input(path, body);
    row(path, parse_net(body, path));
  }
  for (int k = 0; k < args.random; ++k) {
    RandomNetConfig rc;
    rc.num_nodes = args.nodes;
    rc.expected_degree = args.degree;
    rc.max_card = args.max_card;
    rc.vacuous = args.vacuous;
    rc.seed = seed + static_cast<std::uint64_t>(k);
    row("random:" + std::to_string(rc.seed), random_net(rc));
  }
  man.write("gaps.csv", text);
  man.config() = {{"nets", args.nets},         {"random", args.random},
                  {"nodes", args.nodes},       {"expected_degree", args.degree},
                  {"max_card", args.max_card}, {"vacuous", args.vacuous}};
  man.seeds() = {{"random_nets", seed}};
  man.results() = {{"rows", args.nets.size() + static_cast<std::size_t>(args.random)},
                   {"subadditivity_violations", violations}};
  man.finish();
  std::cout << text;
  return violations == 0 ? 0 : kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DAG-structured survival modelling toolkit"};
  app.require_subcommand(1);

  Common common;
  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic survival dataset");
  add_common(g, common);
  g->add_option("--preset", gen.preset, "synthetic-small or synthetic-large");
  g->add_option("--adjacency", gen.adjacency, "Use this DAG (CSV) instead of the preset's");
  g->add_option("--dag-seed", gen.dag_seed, "Sample a fresh DAG with this seed");
  g->add_option("--noise-scale", gen.noise_scale, "Read the time noise scale as 'variance' or 'sd'");
  g->add_option("--censor-mode", gen.censor_mode, "'exact' fraction or 'global' uniform draw");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on a dataset and DAG");
  add_common(t, common);
  t->add_option("--data", tr.data, "Dataset CSV")->required();
  t->add_option("--adjacency", tr.adjacency, "Adjacency CSV")->required();
  t->add_option("--preset", tr.preset, "synthetic-small, synthetic-large, metabric or gbsg");
  t->add_flag("--zero-dag", tr.zero_dag, "Train with A = 0 (plain CVAE ablation)");
  t->add_option("--bins", tr.bins, "Number of time bins M (default: ceil of the max time)");
  t->add_option("--latent-samples", tr.eval_latent_samples, "Latent draws for the test C_td");

  EvalArgs ev;
  auto* e = app.add_subcommand("evaluate", "Bootstrap C_td of a trained model");
  add_common(e, common);
  e->add_option("--model", ev.model, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Dataset CSV")->required();
  e->add_option("-b,--bootstrap", ev.b, "Bootstrap resamples");
  e->add_option("--latent-samples", ev.latent_samples, "Latent draws averaged per prediction");

  EvalArgs pr;
  auto* p = app.add_subcommand("predict", "Per-instance survival curves");
  add_common(p, common);
  p->add_option("--model", pr.model, "Checkpoint file")->required();
  p->add_option("--data", pr.data, "Dataset CSV")->required();
  p->add_option("--latent-samples", pr.latent_samples, "Latent draws averaged per prediction");
  p->add_option("--output", pr.output, "survival, cdf or pmf");

  PropArgs pa;
  auto* pc = app.add_subcommand("propcheck", "Entropy gap of discrete DAG-factored nets");
  add_common(pc, common);
  pc->add_option("--net", pa.nets, "Net specification file (repeatable)");
  pc->add_option("--random", pa.random, "Number of random nets");
  pc->add_option("--nodes", pa.nodes, "Nodes per random net");
  pc->add_option("--expected-degree", pa.degree, "Expected degree of random nets");
  pc->add_option("--max-card", pa.max_card, "Largest cardinality in random nets");
  pc->add_flag("--vacuous", pa.vacuous, "Random nets whose CPTs ignore their parents");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return cmd_generate(common, gen);
    if (*t) return cmd_train(common, tr);
    if (*e) return cmd_evaluate(common, ev);
    if (*p) return cmd_predict(common, pr);
    if (*pc) return cmd_propcheck(common, pa);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const Error& err) {
    // Everything else raised by the library concerns the input data.
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
