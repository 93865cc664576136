#include "hgd/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "hgd/config.hpp"
#include "hgd/error.hpp"

namespace hgd {
namespace {

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"game",
       {"kind", "mu", "beta", "players", "capacity", "stay", "crowded", "good", "convention"}},
      {"map", {"spec", "seed", "weights"}},
      {"algorithm", {"name", "names"}},
      {"schedule", {"kind", "gamma"}},
      {"noise", {"sigma", "seed"}},
      {"init", {"range", "seed", "x"}},
      {"run", {"max_iters", "stop_tol", "record_every", "phgf_dt", "seeds", "test_point"}},
  };
  return keys;
}

std::string_view to_string(ElFarolConvention c) {
  return c == ElFarolConvention::Cost ? "cost" : "payoff";
}

ElFarolConvention convention_from_string(const ConfigValue& v) {
  if (v.as_string() == "cost") return ElFarolConvention::Cost;
  if (v.as_string() == "payoff") return ElFarolConvention::Payoff;
  throw ParseError("line " + std::to_string(v.line) + ": convention must be \"cost\" or \"payoff\"");
}

template <typename Fn>
auto with_line(const ConfigValue& v, Fn fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError("line " + std::to_string(v.line) + ": " + e.what());
  }
}

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

Regression regress(const std::vector<double>& x, const std::vector<double>& y) {
  Regression r;
  const std::size_t m = x.size();
  if (m < 2) return r;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = y[i] - (r.intercept + r.slope * x[i]);
    ss_res += e * e;
  }
  r.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
  return r;
}

RateFit make_fit(FitModel model, const std::vector<double>& x, const std::vector<double>& y) {
  const Regression r = regress(x, y);
  return RateFit{model, r.slope, r.intercept, r.r_squared, x.size()};
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + p.string() + "' for writing");
  return os;
}

void close_out(std::ofstream& os, const std::filesystem::path& p) {
  os.close();
  if (!os) throw IoError("failed writing '" + p.string() + "'");
}

struct Job {
  Algorithm algorithm;
  std::uint64_t seed;
};

std::vector<Job> expand_jobs(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const std::vector<std::uint64_t>& seeds = opts.seeds ? *opts.seeds : cfg.seeds;
  if (seeds.empty()) throw ValidationError("seed list is empty");
  std::vector<Job> jobs;
  for (Algorithm a : cfg.algorithms)
    for (std::uint64_t s : seeds) jobs.push_back({a, s});
  return jobs;
}

std::vector<TrajectoryRecord> run_jobs(const ExperimentConfig& cfg, const CommandOptions& opts,
                                       const std::vector<Job>& jobs) {
  std::vector<TrajectoryRecord> out(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t k) {
    RunSetup setup = make_setup(cfg, jobs[k].algorithm, jobs[k].seed, opts.config_dir);
    setup.run.timing = opts.timing;
    out[k] = run(setup.run, setup.game, setup.maps, std::move(setup.x0), setup.z_hat);
  });
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_csv_number(const std::string& s, const std::string& where) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(where + ": malformed number '" + s + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  game.validate();
  schedule.validate();
  noise.validate();
  if (algorithms.empty()) throw ValidationError("at least one algorithm is required");
  if (record_every == 0) throw ValidationError("record_every must be >= 1");
  if (seeds.empty()) throw ValidationError("seeds must be non-empty");
  if (!(init_range > 0.0) || !std::isfinite(init_range)) {
    throw ValidationError("init range must be positive");
  }
  if (!(stop_tol >= 0.0)) throw ValidationError("stop_tol must be >= 0");
  if (!(phgf_dt > 0.0) || !std::isfinite(phgf_dt)) throw ValidationError("phgf_dt must be > 0");
  if (test_point != "anchor" && test_point != "z_star") {
    throw ValidationError("test_point must be \"anchor\" or \"z_star\"");
  }
  const HiddenGame g(game);
  if (map_weights.empty()) {
    const ArchSpec arch = arch_for(map_spec);
    const std::size_t out_dim = activation_output_dim(arch.head, arch.pre_head_dim);
    for (std::size_t d : g.latent_dims()) {
      if (d != out_dim) {
        throw ValidationError("map spec " + std::string(to_string(map_spec)) +
                              " does not produce the game's latent dimension");
      }
    }
    for (Algorithm a : algorithms) {
      if (a == Algorithm::NHGD && (arch.input_dim != 1 || out_dim != 1)) {
        throw ValidationError("NHGD needs one-dimensional controls and latents");
      }
    }
    if (init_x) {
      if (init_x->size() != g.n_players()) throw ValidationError("init x: player count");
      for (const Vector& xi : *init_x)
        if (xi.size() != arch.input_dim) throw ValidationError("init x: control dimension");
    }
  }
}

ExperimentConfig parse_config(std::string_view text) {
  const ConfigDocument doc = parse_config_document(text);
  for (const auto& [name, sec] : doc.sections) {
    const auto it = allowed_keys().find(name);
    if (it == allowed_keys().end()) {
      throw ParseError("line " + std::to_string(sec.line) + ": unknown section [" + name + "]");
    }
    for (const auto& [key, val] : sec.entries) {
      if (!it->second.count(key)) {
        throw ParseError("line " + std::to_string(val.line) + ": unknown key '" + key +
                         "' in [" + name + "]");
      }
    }
  }
  auto get = [&](const char* sec, const char* key) -> const ConfigValue* {
    const auto s = doc.sections.find(sec);
    if (s == doc.sections.end()) return nullptr;
    const auto k = s->second.entries.find(key);
    return k == s->second.entries.end() ? nullptr : &k->second;
  };

  ExperimentConfig cfg;
  GameKind kind = GameKind::MatchingPennies;
  if (const ConfigValue* v = get("game", "kind")) {
    kind = with_line(*v, [&] { return game_kind_from_string(v->as_string()); });
  }
  cfg.game = GameParams::defaults(kind);
  cfg.map_spec = default_map_kind(kind);
  if (const ConfigValue* v = get("game", "mu")) cfg.game.mu = v->as_real();
  if (const ConfigValue* v = get("game", "beta")) cfg.game.beta = v->as_real();
  if (const ConfigValue* v = get("game", "players")) cfg.game.players = v->as_count();
  if (const ConfigValue* v = get("game", "capacity")) cfg.game.capacity = v->as_count();
  if (const ConfigValue* v = get("game", "stay")) cfg.game.stay = v->as_real();
  if (const ConfigValue* v = get("game", "crowded")) cfg.game.crowded = v->as_real();
  if (const ConfigValue* v = get("game", "good")) cfg.game.good = v->as_real();
  if (const ConfigValue* v = get("game", "convention")) cfg.game.convention = convention_from_string(*v);

  if (const ConfigValue* v = get("map", "spec")) {
    cfg.map_spec = with_line(*v, [&] { return map_kind_from_string(v->as_string()); });
  }
  if (const ConfigValue* v = get("map", "seed")) cfg.map_seed = v->as_count();
  if (const ConfigValue* v = get("map", "weights")) cfg.map_weights = v->as_string();

  const ConfigValue* name = get("algorithm", "name");
  const ConfigValue* names = get("algorithm", "names");
  if (name && names) {
    throw ParseError("line " + std::to_string(names->line) +
                     ": give either 'name' or 'names' in [algorithm], not both");
  }
  if (name) {
    cfg.algorithms = {with_line(*name, [&] { return algorithm_from_string(name->as_string()); })};
  }
  if (names) {
    cfg.algorithms.clear();
    for (const ConfigValue& n : names->as_array()) {
      cfg.algorithms.push_back(with_line(n, [&] { return algorithm_from_string(n.as_string()); }));
    }
  }

  if (const ConfigValue* v = get("schedule", "kind")) {
    cfg.schedule.kind = with_line(*v, [&] { return schedule_kind_from_string(v->as_string()); });
  }
  if (const ConfigValue* v = get("schedule", "gamma")) cfg.schedule.gamma = v->as_real();
  if (const ConfigValue* v = get("noise", "sigma")) cfg.noise.sigma = v->as_real();
  if (const ConfigValue* v = get("noise", "seed")) cfg.noise.seed = v->as_count();
  if (const ConfigValue* v = get("init", "range")) cfg.init_range = v->as_real();
  if (const ConfigValue* v = get("init", "seed")) cfg.init_seed = v->as_count();
  if (const ConfigValue* v = get("init", "x")) {
    Profile x;
    for (const ConfigValue& player : v->as_array()) {
      Vector xi;
      for (const ConfigValue& e : player.as_array()) xi.push_back(e.as_real());
      x.push_back(std::move(xi));
    }
    cfg.init_x = std::move(x);
  }
  if (const ConfigValue* v = get("run", "max_iters")) cfg.max_iters = v->as_count();
  if (const ConfigValue* v = get("run", "stop_tol")) cfg.stop_tol = v->as_real();
  if (const ConfigValue* v = get("run", "record_every")) cfg.record_every = v->as_count();
  if (const ConfigValue* v = get("run", "phgf_dt")) cfg.phgf_dt = v->as_real();
  if (const ConfigValue* v = get("run", "test_point")) cfg.test_point = v->as_string();
  if (const ConfigValue* v = get("run", "seeds")) {
    cfg.seeds.clear();
    for (const ConfigValue& s : v->as_array()) cfg.seeds.push_back(s.as_count());
  }
  cfg.validate();
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const GameParams& g = cfg.game;
  os << "[game]\n"
     << "kind = \"" << to_string(g.kind) << "\"\n"
     << "mu = " << format_real(g.mu) << "\n"
     << "beta = " << format_real(g.beta) << "\n"
     << "players = " << g.players << "\n"
     << "capacity = " << g.capacity << "\n"
     << "stay = " << format_real(g.stay) << "\n"
     << "crowded = " << format_real(g.crowded) << "\n"
     << "good = " << format_real(g.good) << "\n"
     << "convention = \"" << to_string(g.convention) << "\"\n\n";
  os << "[map]\n"
     << "spec = \"" << to_string(cfg.map_spec) << "\"\n"
     << "seed = " << cfg.map_seed << "\n";
  if (!cfg.map_weights.empty()) os << "weights = \"" << cfg.map_weights << "\"\n";
  os << "\n[algorithm]\nnames = [";
  for (std::size_t i = 0; i < cfg.algorithms.size(); ++i) {
    os << (i ? ", " : "") << '"' << to_string(cfg.algorithms[i]) << '"';
  }
  os << "]\n\n[schedule]\n"
     << "kind = \"" << to_string(cfg.schedule.kind) << "\"\n"
     << "gamma = " << format_real(cfg.schedule.gamma) << "\n\n"
     << "[noise]\n"
     << "sigma = " << format_real(cfg.noise.sigma) << "\n"
     << "seed = " << cfg.noise.seed << "\n\n"
     << "[init]\n"
     << "range = " << format_real(cfg.init_range) << "\n"
     << "seed = " << cfg.init_seed << "\n";
  if (cfg.init_x) {
    os << "x = [";
    for (std::size_t i = 0; i < cfg.init_x->size(); ++i) {
      os << (i ? ", " : "") << "[";
      const Vector& xi = (*cfg.init_x)[i];
      for (std::size_t c = 0; c < xi.size(); ++c) os << (c ? ", " : "") << format_real(xi[c]);
      os << "]";
    }
    os << "]\n";
  }
  os << "\n[run]\n"
     << "max_iters = " << cfg.max_iters << "\n"
     << "stop_tol = " << format_real(cfg.stop_tol) << "\n"
     << "record_every = " << cfg.record_every << "\n"
     << "phgf_dt = " << format_real(cfg.phgf_dt) << "\n"
     << "test_point = \"" << cfg.test_point << "\"\n"
     << "seeds = [";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) os << (i ? ", " : "") << cfg.seeds[i];
  os << "]\n";
  return os.str();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read config '" + path.string() + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

RunSetup make_setup(const ExperimentConfig& cfg, Algorithm algorithm, std::uint64_t seed,
                    const std::filesystem::path& base_dir) {
  HiddenGame game(cfg.game);
  ProductRepMap maps;
  if (cfg.map_weights.empty()) {
    maps = sample_product_map(arch_for(cfg.map_spec), game.n_players(),
                              make_rng(cfg.map_seed, {seed, 1})());
  } else {
    std::filesystem::path p = cfg.map_weights;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    std::ifstream is(p);
    if (!is) throw IoError("cannot read map weights '" + p.string() + "'");
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(p.string() + ": " + e.what());
    }
    maps = product_map_from_json(j);
    if (maps.output_dims() != game.latent_dims()) {
      throw ValidationError("map weights do not match the game's latent dimensions");
    }
  }
  Profile x0 = cfg.init_x ? *cfg.init_x
                          : sample_init(maps, cfg.init_range, make_rng(cfg.init_seed, {seed, 2})());
  if (x0.size() != maps.n_players()) throw ValidationError("init x: player count");
  for (std::size_t i = 0; i < x0.size(); ++i)
    if (x0[i].size() != maps.player(i).input_dim()) {
      throw ValidationError("init x: control dimension");
    }
  RunConfig rc;
  rc.algorithm = algorithm;
  rc.schedule = cfg.schedule;
  rc.noise = {cfg.noise.sigma, make_rng(cfg.noise.seed, {seed, 3})()};
  rc.max_iters = cfg.max_iters;
  rc.stop_tol = cfg.stop_tol;
  rc.record_every = cfg.record_every;
  rc.phgf_dt = cfg.phgf_dt;
  Profile z_hat = cfg.test_point == "z_star" ? game.z_star() : game.anchor();
  return RunSetup{std::move(game), std::move(maps), std::move(x0), std::move(z_hat), rc};
}

std::string_view to_string(FitModel m) {
  switch (m) {
    case FitModel::Geometric: return "geometric";
    case FitModel::Harmonic: return "harmonic";
    case FitModel::SqrtLog: return "sqrtlog";
  }
  return "?";
}

RateFit fit_geometric(std::span<const std::size_t> n, std::span<const double> err,
                      double burn_in_frac, double stop_floor) {
  std::vector<double> x, y;
  if (n.empty()) return make_fit(FitModel::Geometric, x, y);
  const double start = burn_in_frac * static_cast<double>(n.back());
  for (std::size_t k = 0; k < n.size(); ++k) {
    if (err[k] <= stop_floor) break;
    if (static_cast<double>(n[k]) < start || !(err[k] > 1e-14) || !std::isfinite(err[k])) continue;
    x.push_back(static_cast<double>(n[k]));
    y.push_back(std::log(err[k]));
  }
  return make_fit(FitModel::Geometric, x, y);
}

RateFit fit_harmonic(std::span<const std::size_t> n, std::span<const double> err) {
  std::vector<double> x, y;
  if (n.empty()) return make_fit(FitModel::Harmonic, x, y);
  const double start = 0.5 * static_cast<double>(n.back());
  for (std::size_t k = 0; k < n.size(); ++k) {
    if (n[k] == 0 || static_cast<double>(n[k]) < start) continue;
    if (!(err[k] > 1e-14) || !std::isfinite(err[k])) continue;
    const double nn = static_cast<double>(n[k]);
    x.push_back(std::log(nn));
    y.push_back(std::log(nn * err[k]));
  }
  return make_fit(FitModel::Harmonic, x, y);
}

RateFit fit_sqrtlog(std::span<const std::size_t> n, std::span<const double> gap) {
  std::vector<double> x, y;
  for (std::size_t k = 0; k < n.size(); ++k) {
    if (n[k] < 3 || !(gap[k] > 1e-14) || !std::isfinite(gap[k])) continue;
    const double nn = static_cast<double>(n[k]);
    x.push_back(std::log(nn));
    y.push_back(std::log(gap[k] * std::sqrt(nn) / std::log(nn)));
  }
  return make_fit(FitModel::SqrtLog, x, y);
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw ValidationError("percentile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || lo == hi) return v[lo];
  if (std::isinf(v[hi])) return v[hi];
  return v[lo] + frac * (v[hi] - v[lo]);
}

std::string csv_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
  os << "n,gamma,err,energy,tgap_latent,tgap_control,walltime_us,status\n";
  for (std::size_t k = 0; k < rec.rows.size(); ++k) {
    const TrajectoryRow& r = rec.rows[k];
    const bool last = k + 1 == rec.rows.size();
    os << r.n << ',' << csv_real(r.gamma) << ',' << csv_real(r.err) << ','
       << csv_real(r.energy) << ',' << csv_real(r.tgap_latent) << ','
       << csv_real(r.tgap_control) << ',' << csv_real(r.walltime_us) << ','
       << (last ? to_string(rec.status) : std::string_view("ok")) << '\n';
  }
}

std::string trajectory_file_name(const ExperimentConfig& cfg, Algorithm a, std::uint64_t seed) {
  return std::string(to_string(cfg.game.kind)) + "_" + std::string(to_string(a)) + "_seed" +
         std::to_string(seed) + ".csv";
}

int cmd_run(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const std::vector<Job> jobs = expand_jobs(cfg, opts);
  const std::vector<TrajectoryRecord> recs = run_jobs(cfg, opts, jobs);
  ensure_dir(opts.out_dir);
  std::set<std::uint64_t> map_written;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const std::filesystem::path p =
        opts.out_dir / trajectory_file_name(cfg, jobs[k].algorithm, jobs[k].seed);
    std::ofstream os = open_out(p);
    write_trajectory_csv(os, recs[k]);
    close_out(os, p);
    if (map_written.insert(jobs[k].seed).second) {
      const RunSetup setup = make_setup(cfg, jobs[k].algorithm, jobs[k].seed, opts.config_dir);
      const std::filesystem::path mp =
          opts.out_dir / (std::string(to_string(cfg.game.kind)) + "_seed" +
                          std::to_string(jobs[k].seed) + "_map.json");
      std::ofstream ms = open_out(mp);
      ms << product_map_to_json(setup.maps, cfg.map_spec, jobs[k].seed).dump(2) << '\n';
      close_out(ms, mp);
    }
    if (!opts.quiet) {
      const TrajectoryRow& last = recs[k].rows.back();
      log << to_string(jobs[k].algorithm) << " seed " << jobs[k].seed << ": n=" << last.n
          << " err=" << csv_real(last.err) << " status=" << to_string(recs[k].status);
      if (!recs[k].message.empty()) log << " (" << recs[k].message << ")";
      log << " -> " << p.string() << '\n';
    }
  }
  return 0;
}

int cmd_bench(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const std::vector<Job> jobs = expand_jobs(cfg, opts);
  const std::vector<TrajectoryRecord> recs = run_jobs(cfg, opts, jobs);
  ensure_dir(opts.out_dir);
  const std::string game = std::string(to_string(cfg.game.kind));
  const std::filesystem::path summary_path = opts.out_dir / (game + "_bench_summary.csv");
  const std::filesystem::path fits_path = opts.out_dir / (game + "_bench_fits.csv");
  std::ofstream summary = open_out(summary_path);
  std::ofstream fits = open_out(fits_path);
  summary << "algorithm,n,median_err,p10_err,p90_err,runs\n";
  fits << "algorithm,model,slope,level,r_squared,rows_used\n";

  for (Algorithm a : cfg.algorithms) {
    std::vector<const TrajectoryRecord*> mine;
    for (std::size_t k = 0; k < jobs.size(); ++k)
      if (jobs[k].algorithm == a) mine.push_back(&recs[k]);
    std::set<std::size_t> grid;
    for (const TrajectoryRecord* r : mine)
      for (const TrajectoryRow& row : r->rows) grid.insert(row.n);

    std::vector<std::size_t> ns;
    std::vector<double> medians;
    std::vector<std::size_t> cursor(mine.size(), 0);
    for (std::size_t n : grid) {
      std::vector<double> vals;
      for (std::size_t j = 0; j < mine.size(); ++j) {
        const std::vector<TrajectoryRow>& rows = mine[j]->rows;
        while (cursor[j] + 1 < rows.size() && rows[cursor[j] + 1].n <= n) ++cursor[j];
        const bool ended = n > rows.back().n;
        const bool broken = mine[j]->status == RunStatus::NonFinite ||
                            mine[j]->status == RunStatus::Failed;
        vals.push_back(ended && broken ? std::numeric_limits<double>::infinity()
                                       : rows[cursor[j]].err);
      }
      const double med = percentile(vals, 50.0);
      summary << to_string(a) << ',' << n << ',' << csv_real(med) << ','
              << csv_real(percentile(vals, 10.0)) << ',' << csv_real(percentile(vals, 90.0))
              << ',' << vals.size() << '\n';
      ns.push_back(n);
      medians.push_back(med);
    }
    for (const RateFit& f : {fit_geometric(ns, medians), fit_harmonic(ns, medians)}) {
      fits << to_string(a) << ',' << to_string(f.model) << ',' << csv_real(f.slope) << ','
           << csv_real(f.level) << ',' << csv_real(f.r_squared) << ',' << f.rows_used << '\n';
      if (!opts.quiet) {
        log << to_string(a) << ' ' << to_string(f.model) << " fit: slope=" << csv_real(f.slope)
            << " r2=" << csv_real(f.r_squared) << " rows=" << f.rows_used << '\n';
      }
    }
    if (!opts.quiet && !medians.empty()) {
      log << to_string(a) << " median final err=" << csv_real(medians.back()) << '\n';
    }
  }
  close_out(summary, summary_path);
  close_out(fits, fits_path);
  if (!opts.quiet) log << "wrote " << summary_path.string() << " and " << fits_path.string() << '\n';
  return 0;
}

TrajectoryCsv read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read '" + path.string() + "'");
  TrajectoryCsv csv;
  csv.source = path.filename().string();
  static const std::regex name_re(R"(^.*_([A-Za-z]+)_seed([0-9]+)\.csv$)");
  std::smatch m;
  if (std::regex_match(csv.source, m, name_re)) {
    csv.algorithm = m[1];
    csv.seed = std::stoll(m[2]);
  } else {
    csv.algorithm = "unknown";
  }
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path.string() + ": empty file");
  csv.columns = split_csv_line(line);
  if (std::find(csv.columns.begin(), csv.columns.end(), "n") == csv.columns.end()) {
    throw ParseError(path.string() + ": header has no 'n' column");
  }
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != csv.columns.size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(csv.columns.size()) + " fields");
    }
    csv.rows.push_back(std::move(fields));
  }
  return csv;
}

int cmd_plot_data(std::span<const std::filesystem::path> inputs,
                  const std::filesystem::path& out, std::ostream& log) {
  if (inputs.empty()) throw ValidationError("plot-data needs at least one input CSV");
  static const std::vector<std::string> kMetrics{"err", "energy", "tgap_latent", "tgap_control"};
  std::vector<TrajectoryCsv> csvs;
  for (const auto& p : inputs) csvs.push_back(read_trajectory_csv(p));
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  std::ofstream os = open_out(out);
  os << "source,algorithm,seed,n,metric,value,log10_value\n";
  std::size_t written = 0;
  for (const TrajectoryCsv& csv : csvs) {
    const auto col = [&](const std::string& name) -> std::ptrdiff_t {
      const auto it = std::find(csv.columns.begin(), csv.columns.end(), name);
      return it == csv.columns.end() ? -1 : it - csv.columns.begin();
    };
    const std::ptrdiff_t n_col = col("n");
    std::vector<std::pair<std::string, std::ptrdiff_t>> metrics;
    for (const std::string& name : kMetrics)
      if (col(name) >= 0) metrics.emplace_back(name, col(name));
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
      const std::string where = csv.source + " row " + std::to_string(r + 1);
      const double n = parse_csv_number(csv.rows[r][n_col], where);
      if (!(n >= 0.0) || n != std::floor(n)) throw ParseError(where + ": n must be a count");
      for (const auto& [name, idx] : metrics) {
        const double v = parse_csv_number(csv.rows[r][idx], where);
        const double lg = std::isnan(v) ? v : std::log10(std::max(v, 1e-14));
        os << csv.source << ',' << csv.algorithm << ',' << csv.seed << ','
           << static_cast<std::uint64_t>(n) << ',' << name << ',' << csv_real(v) << ','
           << csv_real(lg) << '\n';
        ++written;
      }
    }
  }
  close_out(os, out);
  log << "wrote " << written << " rows to " << out.string() << '\n';
  return 0;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      std::size_t k;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= count || first_error) return;
        k = next++;
      }
      try {
        body(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hgd
