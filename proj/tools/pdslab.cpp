// pdslab command-line front end.
//
//   pdslab gen-mdp  --kind lowrank --states 20 --actions 4 --dim 6 --seed 3 --out mdp.json
//   pdslab sample   --mdp mdp.json --n 1000 --quality medium --unlabeled --seed 1 --out d1.jsonl
//   pdslab run      --config exp.json [--out results.csv]
//   pdslab relabel  --in d1.jsonl --out d1_rl.jsonl --model ens.json --k auto
//   pdslab bounds   --d 4,8 --n0 1000 --n1 0,10000 --gamma 0.99 --format md
//   pdslab table    --in results.csv --group-by n1 --format md
//
// Exit codes: 0 ok, 2 validation, 3 runtime.

#include <cstdint>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pdslab/datagen.hpp"
#include "pdslab/ensemble.hpp"
#include "pdslab/experiment.hpp"
#include "pdslab/linmdp.hpp"
#include "pdslab/pipeline.hpp"
#include "pdslab/theory.hpp"
#include "pdslab/util.hpp"

namespace {

using nlohmann::json;
using namespace pdslab;

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kRuntime = 3;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + " is not valid JSON: " + e.what());
  }
}

// stdout when path is empty
void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void check_format(const std::string& f) {
  if (f != "csv" && f != "md") throw ValidationError("--format must be csv or md");
}

// ---- gen-mdp

struct GenMdpArgs {
  std::string config;
  std::string kind = "tabular";
  int states = 5;
  int actions = 3;
  int dim = 0;
  int grid = 0;
  double gamma = 0.9;
  double r_max = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_mdp(const GenMdpArgs& a) {
  MdpSpec spec;
  std::uint64_t seed = a.seed;
  if (!a.config.empty()) {
    const auto cfg = load_config(a.config);
    spec = cfg.grid.mdp;
    if (!spec.seed) seed = cfg.grid.seeds.front();
  } else {
    spec.kind = a.kind;
    spec.num_states = a.kind == "adversarial" ? 1 : a.states;
    spec.num_actions = a.actions;
    spec.dim = a.dim;
    spec.gamma = a.gamma;
    spec.r_max = a.r_max;
    spec.seed = a.seed;
  }
  spec.validate();
  if (a.grid > 0) {
    if (spec.kind != "tabular") throw ValidationError("--grid applies to tabular MDPs only");
    const LinearMdp mdp = make_grid_tabular_mdp(spec.num_states, spec.num_actions, a.grid, spec.gamma,
                                                spec.r_max, spec.seed.value_or(seed));
    write_text(a.out, to_json(mdp).dump() + "\n");
    return kOk;
  }
  const LinearMdp mdp = build_mdp(spec, seed);
  write_text(a.out, to_json(mdp).dump() + "\n");
  if (!a.out.empty()) std::cerr << "wrote " << a.out << " (hash " << mdp_hash(mdp) << ")\n";
  return kOk;
}

// ---- sample

struct SampleArgs {
  std::string mdp;
  std::size_t n = 1000;
  std::string quality = "random";
  bool unlabeled = false;
  std::size_t horizon_reset = 100;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_sample(const SampleArgs& a) {
  const LinearMdp mdp = mdp_from_json(read_json_file(a.mdp));
  const Quality q = parse_quality(a.quality);
  if (a.n == 0) throw ValidationError("--n must be positive");
  if (a.horizon_reset == 0) throw ValidationError("--horizon-reset must be positive");
  if (a.noise < 0.0) throw ValidationError("--noise must be nonnegative");
  const OptimalSolution opt = solve_optimal(mdp);
  OfflineDataset data = sample_dataset(mdp, behavior_policy(q, opt.policy), a.n, a.horizon_reset,
                                       !a.unlabeled, a.seed, a.noise);
  data.source_tag = a.quality;
  write_jsonl(a.out, data);
  write_dataset_header(a.out, mdp, data, a.seed);
  std::cerr << "wrote " << data.size() << " transitions to " << a.out << '\n';
  return kOk;
}

// ---- run

int cmd_run(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed) {
  return run_config(config, std::cerr, 0, out, seed);
}

// ---- relabel

struct RelabelArgs {
  std::string in;
  std::string out;
  std::string model;
  std::string k = "auto";
  double a = 25.0;
  int L = 10;
  std::string labeled;
  std::string mdp;
  double nu = 1.0;
  std::string estimator = "min";
  std::uint64_t seed = 0;
};

int cmd_relabel(const RelabelArgs& a) {
  std::optional<double> k_override;
  if (a.k != "auto") {
    try {
      std::size_t used = 0;
      const double k = std::stod(a.k, &used);
      if (used != a.k.size()) throw std::invalid_argument(a.k);
      k_override = k;
    } catch (const std::exception&) {
      throw ValidationError("--k must be 'auto' or a number (got '" + a.k + "')");
    }
    if (!(*k_override >= 0.0)) throw ValidationError("--k must be nonnegative");
  }
  if (a.estimator != "min" && a.estimator != "mean")
    throw ValidationError("--estimator must be min or mean");
  if (a.a <= 0.0) throw ValidationError("--a must be positive");

  EnsembleRewardModel model;
  if (!a.labeled.empty()) {
    if (a.mdp.empty()) throw ValidationError("--labeled needs --mdp for the feature table");
    const LinearMdp mdp = mdp_from_json(read_json_file(a.mdp));
    const OfflineDataset labeled = read_jsonl(a.labeled);
    model = fit_ensemble(labeled, mdp.features(), a.L, a.nu, a.seed);
    model.auto_a = a.a;
    if (a.estimator == "mean") model.estimator = EnsembleEstimator::MeanMinusKSigma;
    if (!a.model.empty()) write_text(a.model, to_json(model).dump() + "\n");
  } else {
    if (a.model.empty()) throw ValidationError("relabel needs --model, or --labeled and --mdp to fit one");
    model = ensemble_from_json(read_json_file(a.model));
  }
  const RelabelSummary s = relabel_file(a.in, a.out, model, k_override);
  json summary = {{"count", s.count},   {"passthrough", s.passthrough},
                  {"mean", s.mean},     {"min", s.min},
                  {"max", s.max},       {"k", std::isinf(s.k) ? json("inf") : json(s.k)}};
  std::cout << summary.dump() << '\n';
  return kOk;
}

// ---- bounds

struct BoundsArgs {
  std::string config;
  std::vector<int> d{4};
  std::vector<std::size_t> n0{1000};
  std::vector<std::size_t> n1{0};
  std::vector<double> gamma{0.99};
  double c0 = 0.5;
  double c1 = 0.5;
  double r_max = 1.0;
  double delta = 0.1;
  double c = 1.0;
  std::string format = "csv";
  std::string out;
};

template <typename T>
std::vector<T> json_list(const json& j, const char* key, std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  try {
    return v.is_array() ? v.get<std::vector<T>>() : std::vector<T>{v.get<T>()};
  } catch (const json::exception&) {
    throw ValidationError(std::string("bounds config field '") + key + "' has the wrong type");
  }
}

std::string render_bounds(const std::vector<BoundInputs>& rows, const std::string& format) {
  static const std::vector<std::string> cols = {"d",     "n0",           "n1",          "c0",
                                                "c1",    "gamma",        "c",           "offline_term",
                                                "reward_term", "total", "sbr_exact", "sbr_approx"};
  std::ostringstream os;
  const bool md = format == "md";
  const char* sep = md ? " | " : ",";
  if (md) os << "| ";
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? sep : "") << cols[i];
  if (md) {
    os << " |\n|";
    for (std::size_t i = 0; i < cols.size(); ++i) os << "---|";
  }
  os << '\n';
  for (const auto& in : rows) {
    const BoundTerms b = pds_bound(in);
    const SbrValue s = sbr(in);
    const std::vector<std::string> cells = {
        std::to_string(in.d),       std::to_string(in.n0),          std::to_string(in.n1),
        format_double(in.c0_dagger), format_double(in.c1_dagger),    format_double(in.gamma),
        format_double(in.c),         format_double(b.offline_term),  format_double(b.reward_term),
        format_double(b.total),      format_double(s.exact),         format_double(s.approx)};
    if (md) os << "| ";
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? sep : "") << cells[i];
    os << (md ? " |\n" : "\n");
  }
  return os.str();
}

int cmd_bounds(BoundsArgs a) {
  check_format(a.format);
  if (!a.config.empty()) {
    const json j = read_json_file(a.config);
    if (!j.is_object()) throw ValidationError("bounds config must be an object");
    for (const auto& [key, _] : j.items()) {
      static const std::vector<std::string> known = {"d", "n0", "n1", "gamma", "c0", "c1",
                                                     "r_max", "delta", "c"};
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw ValidationError("unknown field '" + key + "'");
    }
    a.d = json_list<int>(j, "d", a.d);
    a.n0 = json_list<std::size_t>(j, "n0", a.n0);
    a.n1 = json_list<std::size_t>(j, "n1", a.n1);
    a.gamma = json_list<double>(j, "gamma", a.gamma);
    a.c0 = j.value("c0", a.c0);
    a.c1 = j.value("c1", a.c1);
    a.r_max = j.value("r_max", a.r_max);
    a.delta = j.value("delta", a.delta);
    a.c = j.value("c", a.c);
  }
  std::vector<BoundInputs> rows;
  for (int d : a.d)
    for (double g : a.gamma)
      for (auto n0 : a.n0)
        for (auto n1 : a.n1) {
          BoundInputs in;
          in.d = d;
          in.n0 = n0;
          in.n1 = n1;
          in.gamma = g;
          in.c0_dagger = a.c0;
          in.c1_dagger = a.c1;
          in.r_max = a.r_max;
          in.delta = a.delta;
          in.c = a.c;
          try {
            in.validate();
          } catch (const ParameterError& e) {
            throw ValidationError(e.what());
          }
          rows.push_back(in);
        }
  write_text(a.out, render_bounds(rows, a.format));
  return kOk;
}

// ---- table

int cmd_table(const std::string& in, const std::string& group_by, const std::string& format,
              const std::string& out) {
  check_format(format);
  write_text(out, emit_table(in, group_by, format));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdslab: provable data sharing lab for offline RL on finite linear MDPs"};
  app.require_subcommand(1);

  GenMdpArgs gen;
  auto* g = app.add_subcommand("gen-mdp", "generate a linear MDP as JSON");
  g->add_option("--config", gen.config, "take the mdp section (and first seed) of an experiment config");
  g->add_option("--kind", gen.kind, "tabular | lowrank | adversarial");
  g->add_option("--states", gen.states);
  g->add_option("--actions", gen.actions);
  g->add_option("--dim", gen.dim, "feature dimension (lowrank, adversarial)");
  g->add_option("--grid", gen.grid, "tabular only: transition probabilities on a 1/grid lattice");
  g->add_option("--gamma", gen.gamma);
  g->add_option("--r-max", gen.r_max);
  g->add_option("--seed", gen.seed);
  g->add_option("--out", gen.out, "output path (stdout if omitted)");

  SampleArgs smp;
  auto* s = app.add_subcommand("sample", "sample an offline dataset to JSONL");
  s->add_option("--mdp", smp.mdp, "MDP JSON from gen-mdp")->required();
  s->add_option("--n", smp.n, "number of transitions");
  s->add_option("--quality", smp.quality, "expert | medium | random");
  s->add_flag("--unlabeled", smp.unlabeled, "write null rewards");
  s->add_option("--horizon-reset", smp.horizon_reset);
  s->add_option("--noise", smp.noise, "uniform reward noise half-width");
  s->add_option("--seed", smp.seed);
  s->add_option("--out", smp.out)->required();

  std::string run_config_path, run_out;
  auto* r = app.add_subcommand("run", "run an experiment config");
  r->add_option("--config", run_config_path)->required();
  r->add_option("--out", run_out, "override the config's output CSV");
  std::optional<std::uint64_t> run_seed;
  r->add_option("--seed", run_seed, "run this single seed instead of the config's list");

  RelabelArgs rl;
  auto* l = app.add_subcommand("relabel", "fill reward-free JSONL records with ensemble-pessimistic rewards");
  l->add_option("--in", rl.in)->required();
  l->add_option("--out", rl.out)->required();
  l->add_option("--model", rl.model, "ensemble JSON (read, or written when fitting)");
  l->add_option("--k", rl.k, "auto or a nonnegative number");
  l->add_option("--a", rl.a, "auto-k scale");
  l->add_option("--L", rl.L, "ensemble size when fitting");
  l->add_option("--labeled", rl.labeled, "labeled JSONL to fit the ensemble on");
  l->add_option("--mdp", rl.mdp, "MDP JSON providing the feature table");
  l->add_option("--nu", rl.nu, "ridge regularizer when fitting");
  l->add_option("--estimator", rl.estimator, "min | mean");
  l->add_option("--seed", rl.seed);

  BoundsArgs bd;
  auto* b = app.add_subcommand("bounds", "tabulate the suboptimality bound and sharing ratio");
  b->add_option("--config", bd.config, "JSON with any of d,n0,n1,gamma,c0,c1,r_max,delta,c");
  b->add_option("--d", bd.d)->delimiter(',');
  b->add_option("--n0", bd.n0)->delimiter(',');
  b->add_option("--n1", bd.n1)->delimiter(',');
  b->add_option("--gamma", bd.gamma)->delimiter(',');
  b->add_option("--c0", bd.c0);
  b->add_option("--c1", bd.c1);
  b->add_option("--r-max", bd.r_max);
  b->add_option("--delta", bd.delta);
  b->add_option("--c", bd.c);
  b->add_option("--format", bd.format, "csv | md");
  b->add_option("--out", bd.out);

  std::string tbl_in, tbl_group = "n1", tbl_format = "md", tbl_out;
  auto* t = app.add_subcommand("table", "mean/std table from a results CSV");
  t->add_option("--in,--config", tbl_in, "results CSV")->required();
  t->add_option("--group-by", tbl_group);
  t->add_option("--format", tbl_format, "csv | md");
  t->add_option("--out", tbl_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*g) return cmd_gen_mdp(gen);
    if (*s) return cmd_sample(smp);
    if (*r) return cmd_run(run_config_path, run_out, run_seed);
    if (*l) return cmd_relabel(rl);
    if (*b) return cmd_bounds(bd);
    if (*t) return cmd_table(tbl_in, tbl_group, tbl_format, tbl_out);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
