#include "pdslab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "pdslab/util.hpp"

namespace pdslab {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw ValidationError("unknown field '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("field '" + where + "." + key + "' has the wrong type");
  }
}

// Scalar or array -> vector.
template <typename T>
std::vector<T> get_list(const json& obj, const char* key, const std::string& where,
                        std::vector<T> fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  try {
    if (v.is_array()) return v.get<std::vector<T>>();
    return {v.get<T>()};
  } catch (const json::exception&) {
    throw ValidationError("field '" + where + "." + key + "' has the wrong type");
  }
}

std::vector<Quality> get_qualities(const json& obj, const char* key, std::vector<Quality> fallback) {
  const auto names = get_list<std::string>(obj, key, "dataset", {});
  if (!obj.contains(key)) return fallback;
  std::vector<Quality> out;
  for (const auto& n : names) out.push_back(parse_quality(n));
  return out;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  reject_unknown(j, "", {"version", "mdp", "dataset", "methods", "reward", "pevi", "seeds", "output"});
  ExperimentConfig cfg;
  if (!j.contains("version")) throw ValidationError("missing field 'version'");
  cfg.version = get_as<int>(j, "version", "", 0);
  if (cfg.version != kConfigVersion)
    throw ValidationError("unsupported config version " + std::to_string(cfg.version));
  auto& g = cfg.grid;

  if (!j.contains("mdp")) throw ValidationError("missing field 'mdp'");
  const json& m = j.at("mdp");
  reject_unknown(m, "mdp", {"kind", "num_states", "num_actions", "dim", "gamma", "r_max", "seed"});
  g.mdp.kind = get_as<std::string>(m, "kind", "mdp", "tabular");
  g.mdp.num_states = get_as<int>(m, "num_states", "mdp", g.mdp.num_states);
  g.mdp.num_actions = get_as<int>(m, "num_actions", "mdp", g.mdp.num_actions);
  g.mdp.dim = get_as<int>(m, "dim", "mdp", 0);
  g.mdp.gamma = get_as<double>(m, "gamma", "mdp", 0.9);
  g.mdp.r_max = get_as<double>(m, "r_max", "mdp", 1.0);
  if (m.contains("seed") && !m.at("seed").is_null())
    g.mdp.seed = get_as<std::uint64_t>(m, "seed", "mdp", 0);
  if (g.mdp.kind == "adversarial") g.mdp.num_states = 1;
  g.mdp.validate();

  const json ds = j.value("dataset", json::object());
  reject_unknown(ds, "dataset", {"n0", "n1", "labeled_quality", "unlabeled_quality", "noise", "horizon_reset"});
  g.n0s = get_list<std::size_t>(ds, "n0", "dataset", {200});
  g.n1s = get_list<std::size_t>(ds, "n1", "dataset", {0});
  g.labeled_qualities = get_qualities(ds, "labeled_quality", {Quality::Random});
  g.unlabeled_qualities = get_qualities(ds, "unlabeled_quality", {});
  g.noise = get_as<double>(ds, "noise", "dataset", 0.1);
  g.horizon_reset = get_as<std::size_t>(ds, "horizon_reset", "dataset", 100);
  if (g.n0s.empty() || g.n1s.empty()) throw ValidationError("dataset.n0 and dataset.n1 must be nonempty");
  if (std::any_of(g.n0s.begin(), g.n0s.end(), [](std::size_t n) { return n == 0; }))
    throw ValidationError("dataset.n0 entries must be positive");
  if (g.labeled_qualities.empty()) throw ValidationError("dataset.labeled_quality must be nonempty");
  const bool any_unlabeled = std::any_of(g.n1s.begin(), g.n1s.end(), [](std::size_t n) { return n > 0; });
  if (any_unlabeled && g.unlabeled_qualities.empty())
    throw ValidationError("dataset.n1 > 0 requires dataset.unlabeled_quality");
  if (g.unlabeled_qualities.empty()) g.unlabeled_qualities = {Quality::Random};
  if (!(g.noise >= 0.0)) throw ValidationError("dataset.noise must be nonnegative");
  if (g.horizon_reset < 1) throw ValidationError("dataset.horizon_reset must be positive");

  if (!j.contains("methods")) throw ValidationError("missing field 'methods'");
  g.methods.clear();
  for (const auto& name : get_list<std::string>(j, "methods", "", {})) g.methods.push_back(parse_method(name));
  if (g.methods.empty()) throw ValidationError("methods must be nonempty");
  if (std::set<MethodId>(g.methods.begin(), g.methods.end()).size() != g.methods.size())
    throw ValidationError("methods contains duplicates");

  const json rw = j.value("reward", json::object());
  reject_unknown(rw, "reward", {"nu", "delta", "alpha", "strict"});
  g.reward.nu = get_as<double>(rw, "nu", "reward", 1.0);
  g.reward.delta = get_as<double>(rw, "delta", "reward", 0.1);
  g.reward.strict = get_as<bool>(rw, "strict", "reward", false);
  if (rw.contains("alpha")) {
    if (rw["alpha"].is_string()) {
      g.reward.alpha_preset = parse_alpha_preset(rw["alpha"].get<std::string>());
      if (g.reward.alpha_preset == AlphaPreset::Raw)
        throw ValidationError("reward.alpha: give a number for a raw radius");
    } else if (rw["alpha"].is_number()) {
      g.reward.alpha_preset = AlphaPreset::Raw;
      g.reward.alpha_raw = rw["alpha"].get<double>();
      if (!(g.reward.alpha_raw >= 0.0)) throw ValidationError("reward.alpha must be nonnegative");
    } else {
      throw ValidationError("field 'reward.alpha' has the wrong type");
    }
  }
  if (!(g.reward.nu > 0.0)) throw ValidationError("reward.nu must be positive");
  if (!(g.reward.delta > 0.0 && g.reward.delta < 1.0)) throw ValidationError("reward.delta must lie in (0,1)");

  const json pv = j.value("pevi", json::object());
  reject_unknown(pv, "pevi", {"lambda", "beta", "c", "delta", "tol", "max_sweeps"});
  g.pevi.lambda = get_as<double>(pv, "lambda", "pevi", 1.0);
  g.pevi.c = get_as<double>(pv, "c", "pevi", 1.0);
  g.pevi.delta = get_as<double>(pv, "delta", "pevi", 0.1);
  g.pevi.tol = get_as<double>(pv, "tol", "pevi", 0.0);
  g.pevi.max_sweeps = get_as<int>(pv, "max_sweeps", "pevi", 0);
  if (pv.contains("beta")) {
    if (pv["beta"].is_string()) {
      if (pv["beta"].get<std::string>() != "theorem")
        throw ValidationError("unknown beta preset '" + pv["beta"].get<std::string>() + "'");
      g.pevi.beta_preset = BetaPreset::Theorem;
    } else if (pv["beta"].is_number()) {
      g.pevi.beta_preset = BetaPreset::Raw;
      g.pevi.beta_raw = pv["beta"].get<double>();
      if (!(g.pevi.beta_raw >= 0.0)) throw ValidationError("pevi.beta must be nonnegative");
    } else {
      throw ValidationError("field 'pevi.beta' has the wrong type");
    }
  }
  if (!(g.pevi.lambda > 0.0)) throw ValidationError("pevi.lambda must be positive");
  if (!(g.pevi.c > 0.0)) throw ValidationError("pevi.c must be positive");
  if (!(g.pevi.delta > 0.0 && g.pevi.delta < 1.0)) throw ValidationError("pevi.delta must lie in (0,1)");
  if (g.pevi.tol < 0.0 || g.pevi.max_sweeps < 0) throw ValidationError("pevi.tol and pevi.max_sweeps must be >= 0");

  if (!j.contains("seeds")) throw ValidationError("missing field 'seeds'");
  g.seeds = get_list<std::uint64_t>(j, "seeds", "", {});
  if (g.seeds.empty()) throw ValidationError("seeds must be nonempty");
  if (std::set<std::uint64_t>(g.seeds.begin(), g.seeds.end()).size() != g.seeds.size())
    throw ValidationError("seeds must be distinct");

  cfg.output = get_as<std::string>(j, "output", "", "results.csv");
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  const auto& g = cfg.grid;
  json j;
  j["version"] = cfg.version;
  json m;
  m["kind"] = g.mdp.kind;
  m["num_states"] = g.mdp.num_states;
  m["num_actions"] = g.mdp.num_actions;
  m["dim"] = g.mdp.dim;
  m["gamma"] = g.mdp.gamma;
  m["r_max"] = g.mdp.r_max;
  m["seed"] = g.mdp.seed ? json(*g.mdp.seed) : json(nullptr);
  j["mdp"] = m;
  json ds;
  ds["n0"] = g.n0s;
  ds["n1"] = g.n1s;
  json lq = json::array(), uq = json::array();
  for (auto q : g.labeled_qualities) lq.push_back(std::string(quality_name(q)));
  for (auto q : g.unlabeled_qualities) uq.push_back(std::string(quality_name(q)));
  ds["labeled_quality"] = lq;
  ds["unlabeled_quality"] = uq;
  ds["noise"] = g.noise;
  ds["horizon_reset"] = g.horizon_reset;
  j["dataset"] = ds;
  json methods = json::array();
  for (auto mth : g.methods) methods.push_back(std::string(method_name(mth)));
  j["methods"] = methods;
  json rw;
  rw["nu"] = g.reward.nu;
  rw["delta"] = g.reward.delta;
  rw["strict"] = g.reward.strict;
  switch (g.reward.alpha_preset) {
    case AlphaPreset::Lemma: rw["alpha"] = "lemma"; break;
    case AlphaPreset::Theorem: rw["alpha"] = "theorem"; break;
    case AlphaPreset::Raw: rw["alpha"] = g.reward.alpha_raw; break;
  }
  j["reward"] = rw;
  json pv;
  pv["lambda"] = g.pevi.lambda;
  if (g.pevi.beta_preset == BetaPreset::Theorem) pv["beta"] = "theorem";
  else pv["beta"] = g.pevi.beta_raw;
  pv["c"] = g.pevi.c;
  pv["delta"] = g.pevi.delta;
  pv["tol"] = g.pevi.tol;
  pv["max_sweeps"] = g.pevi.max_sweeps;
  j["pevi"] = pv;
  j["seeds"] = g.seeds;
  j["output"] = cfg.output;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

std::string summary_path_for(const std::string& csv_path) {
  const auto dot = csv_path.rfind('.');
  const auto slash = csv_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return csv_path + ".md";
  return csv_path.substr(0, dot) + ".md";
}

int run_config(const std::string& path, std::ostream& log, int threads,
               const std::string& output_override, std::optional<std::uint64_t> seed_override) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const std::exception& e) {
    log << "validation error: " << e.what() << '\n';
    return 2;
  }
  if (!output_override.empty()) cfg.output = output_override;
  if (seed_override) cfg.grid.seeds = {*seed_override};
  try {
    const auto results = sweep(cfg.grid, threads);
    {
      std::ofstream csv(cfg.output, std::ios::binary | std::ios::trunc);
      if (!csv) throw std::runtime_error("cannot write " + cfg.output);
      write_results_csv(csv, results);
    }
    std::size_t failed = 0;
    for (const auto& r : results) {
      if (r.ok()) continue;
      ++failed;
      log << "cell failed: method=" << method_name(r.method) << " n0=" << r.n0 << " n1=" << r.n1
          << " seed=" << r.seed << ": " << r.error << '\n';
    }
    if (failed < results.size()) {
      std::ofstream md(summary_path_for(cfg.output), std::ios::trunc);
      md << emit_table(cfg.output, "n1", "md");
    }
    if (failed > 0) return 3;
    return 0;
  } catch (const std::exception& e) {
    log << "runtime error: " << e.what() << '\n';
    return 3;
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_commas(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size())
        throw ValidationError("csv row " + std::to_string(t.rows.size() + 2) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return parse_csv(in);
}

TableSummary summarize(const CsvTable& table, const std::string& group_by,
                       const std::string& value_column) {
  std::vector<std::string> missing;
  for (const auto& name : {std::string("method"), group_by, value_column})
    if (std::find(table.header.begin(), table.header.end(), name) == table.header.end())
      missing.push_back(name);
  if (!missing.empty()) {
    std::string msg = "csv is missing columns:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }
  const std::size_t mcol = table.column("method");
  const std::size_t gcol = table.column(group_by);
  const std::size_t vcol = table.column(value_column);

  TableSummary s;
  s.group_by = group_by;
  s.value_column = value_column;
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  std::set<std::string> groups;
  for (const auto& row : table.rows) {
    if (std::find(s.methods.begin(), s.methods.end(), row[mcol]) == s.methods.end())
      s.methods.push_back(row[mcol]);
    groups.insert(row[gcol]);
    values[{row[gcol], row[mcol]}].push_back(std::stod(row[vcol]));
  }
  s.groups.assign(groups.begin(), groups.end());
  std::stable_sort(s.groups.begin(), s.groups.end(), [](const std::string& a, const std::string& b) {
    char* ea = nullptr;
    char* eb = nullptr;
    const double x = std::strtod(a.c_str(), &ea);
    const double y = std::strtod(b.c_str(), &eb);
    if (*ea == '\0' && *eb == '\0' && !a.empty() && !b.empty()) return x < y;
    return a < b;
  });
  for (const auto& [key, vs] : values) {
    GroupStats st;
    st.count = vs.size();
    double sum = 0.0;
    for (double v : vs) sum += v;
    st.mean = sum / static_cast<double>(vs.size());
    if (vs.size() > 1) {
      double ss = 0.0;
      for (double v : vs) ss += (v - st.mean) * (v - st.mean);
      st.std = std::sqrt(ss / static_cast<double>(vs.size() - 1));
    }
    s.cells[key] = st;
  }
  return s;
}

std::vector<std::string> bolded_methods(const TableSummary& s, const std::string& group) {
  const GroupStats* best = nullptr;
  std::string best_name;
  for (const auto& m : s.methods) {
    if (m == method_name(MethodId::Oracle)) continue;
    const auto it = s.cells.find({group, m});
    if (it == s.cells.end()) continue;
    if (best == nullptr || it->second.mean < best->mean) {
      best = &it->second;
      best_name = m;
    }
  }
  std::vector<std::string> out;
  if (best == nullptr) return out;
  for (const auto& m : s.methods) {
    if (m == method_name(MethodId::Oracle)) continue;
    const auto it = s.cells.find({group, m});
    if (it == s.cells.end()) continue;
    const auto& st = it->second;
    const double dof = static_cast<double>(best->count + st.count) - 2.0;
    const double pooled =
        dof > 0.0 ? std::sqrt(((best->count - 1.0) * best->std * best->std +
                               (st.count - 1.0) * st.std * st.std) / dof)
                  : 0.0;
    if (m == best_name || st.mean <= best->mean + pooled) out.push_back(m);
  }
  return out;
}

std::string render_markdown(const TableSummary& s) {
  std::ostringstream os;
  os << "| " << s.group_by << " |";
  for (const auto& m : s.methods) os << ' ' << m << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < s.methods.size(); ++i) os << "---|";
  os << '\n';
  char buf[96];
  for (const auto& g : s.groups) {
    const auto bold = bolded_methods(s, g);
    os << "| " << g << " |";
    for (const auto& m : s.methods) {
      const auto it = s.cells.find({g, m});
      if (it == s.cells.end()) {
        os << " - |";
        continue;
      }
      std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", it->second.mean, it->second.std);
      const bool b = std::find(bold.begin(), bold.end(), m) != bold.end();
      os << ' ' << (b ? "**" : "") << buf << (b ? "**" : "") << " |";
    }
    os << '\n';
  }
  return os.str();
}

std::string render_summary_csv(const TableSummary& s) {
  std::ostringstream os;
  os << s.group_by << ",method,mean,std,count\n";
  for (const auto& g : s.groups)
    for (const auto& m : s.methods) {
      const auto it = s.cells.find({g, m});
      if (it == s.cells.end()) continue;
      os << g << ',' << m << ',' << format_double(it->second.mean) << ','
         << format_double(it->second.std) << ',' << it->second.count << '\n';
    }
  return os.str();
}

std::string emit_table(const std::string& csv_path, const std::string& group_by,
                       const std::string& format) {
  const auto table = read_csv(csv_path);
  std::vector<std::string> missing;
  for (auto col : {"method", "n0", "n1", "c0", "c1", "gamma", "d", "seed", "subopt_mean",
                   "subopt_max", "vhat_start", "wall_ms"})
    if (std::find(table.header.begin(), table.header.end(), col) == table.header.end())
      missing.emplace_back(col);
  if (!missing.empty()) {
    std::string msg = "csv schema mismatch, missing columns:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }
  const auto s = summarize(table, group_by);
  if (format == "md") return render_markdown(s);
  if (format == "csv") return render_summary_csv(s);
  throw ValidationError("unknown table format '" + format + "'");
}

}  // namespace pdslab
