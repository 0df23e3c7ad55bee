// tvisvar command-line interface.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tvisvar/tvisvar.hpp"
#include "tvisvar/testing/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace tvisvar;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Deterministic column names declared in [model], read before N is known.
std::vector<std::string> scan_deterministic(const std::string& text) {
  std::istringstream in(text);
  std::string line, section;
  while (std::getline(in, line)) {
    const auto hash = line.find_first_of("#;");
    line = config::detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = config::detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (section == "model" && eq != std::string::npos && config::detail::trim(line.substr(0, eq)) == "deterministic")
      return config::detail::split(config::detail::trim(line.substr(eq + 1)), ',');
  }
  return {};
}

struct Inputs {
  ModelConfig cfg;
  Dataset data;
};

/// Config plus data; N defaults to the number of non-deterministic columns.
Inputs load_inputs(const std::string& config_path, const std::string& data_path) {
  const std::string text = read_text(config_path);
  const auto det = scan_deterministic(text);
  const auto table = CsvTable::read_file(data_path);
  require(table.header.size() > det.size(), "data file has no series columns");
  Inputs in;
  in.cfg = config::parse_config_string(text, table.header.size() - det.size());
  in.data = load_dataset_file(data_path, in.cfg.transforms, in.cfg.p, in.cfg.deterministic_columns);
  require(in.data.N() == in.cfg.N, "config N = " + std::to_string(in.cfg.N) + " but the data have " +
                                        std::to_string(in.data.N()) + " series");
  return in;
}

struct LoadedStore {
  DrawStore store;
  ModelConfig cfg;
};

/// Pools every chain under `dir` and recovers the configuration from the
/// manifest. A user-supplied config must match the recorded digest unless
/// `force` is set.
LoadedStore load_pooled(const std::string& dir, const std::string& config_path, bool force) {
  LoadedStore out;
  out.store = pool_stores(load_run(dir));
  out.cfg = config::parse_config_string(out.store.meta.config_text);
  if (!config_path.empty()) {
    ModelConfig given = config::load_config_file(config_path, out.store.meta.N);
    if (config::config_digest(given) != out.store.meta.config_digest) {
      std::cerr << "warning: config '" << config_path << "' differs from the one recorded in the store (digest "
                << config::config_digest(given) << " vs " << out.store.meta.config_digest << ")\n";
      if (!force) throw ValidationError("config digest mismatch; pass --force-config to use the given config");
      out.cfg = given;
    }
  }
  return out;
}

DrawStore normalized(const DrawStore& store, const std::string& policy) {
  auto res = analytics::normalize_draws(store, analytics::parse_policy(policy));
  if (res.skipped_flips > 0)
    std::cerr << "note: " << res.skipped_flips << " row flips skipped (zero diagonal element)\n";
  return std::move(res.store);
}

std::ofstream open_out(const std::string& path) {
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  return out;
}

std::vector<std::size_t> parse_list(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& part : config::detail::split(s, ',')) {
    const auto v = config::detail::to_unsigned(config::detail::trim(part), what, 0);
    out.push_back(static_cast<std::size_t>(v));
  }
  require(!out.empty(), "empty " + what + " list");
  return out;
}

std::size_t variable_index(const std::vector<std::string>& names, const std::string& v) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == v) return i;
  const auto k = config::detail::to_unsigned(v, "variable", 0);
  require(k >= 1 && k <= names.size(), "variable '" + v + "' not found");
  return static_cast<std::size_t>(k - 1);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov-switching structural VAR with time-varying identification"};
  app.require_subcommand(1);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "simulate data from a truth specification");
  std::string truth_path, sim_out, latent_out;
  std::size_t sim_T = 500, sim_burn = 100;
  std::uint64_t sim_seed = 1;
  sim_cmd->add_option("--truth", truth_path, "truth JSON")->required();
  sim_cmd->add_option("--T", sim_T, "effective sample length");
  sim_cmd->add_option("--burn", sim_burn, "discarded initial periods");
  sim_cmd->add_option("--seed", sim_seed);
  sim_cmd->add_option("--out", sim_out, "data CSV")->required();
  sim_cmd->add_option("--latent", latent_out, "latent record CSV");

  // estimate
  auto* est_cmd = app.add_subcommand("estimate", "run the Gibbs sampler");
  std::string est_data, est_config, est_out;
  std::optional<std::size_t> est_draws, est_burnin, est_thin, est_chains;
  std::optional<std::uint64_t> est_seed;
  std::size_t est_threads = 0;
  bool est_latent = false, est_progress = false;
  est_cmd->add_option("--data", est_data)->required();
  est_cmd->add_option("--config", est_config)->required();
  est_cmd->add_option("--out", est_out, "store directory")->required();
  est_cmd->add_option("--draws", est_draws);
  est_cmd->add_option("--burnin", est_burnin);
  est_cmd->add_option("--thin", est_thin);
  est_cmd->add_option("--seed", est_seed);
  est_cmd->add_option("--chains", est_chains);
  est_cmd->add_option("--threads", est_threads, "worker threads (0 = hardware)");
  est_cmd->add_flag("--store-latent", est_latent, "store full h and mixture paths");
  est_cmd->add_flag("--progress", est_progress);

  // analyze
  auto* an_cmd = app.add_subcommand("analyze", "posterior tables from a draw store");
  an_cmd->require_subcommand(1);
  std::string an_store, an_out, an_config, an_policy = "none";
  bool an_force = false;
  auto common = [&](CLI::App* c) {
    c->add_option("--store", an_store)->required();
    c->add_option("--out", an_out)->required();
    c->add_option("--config", an_config, "check against this config");
    c->add_flag("--force-config", an_force, "use --config even when its digest differs");
    c->add_option("--normalize", an_policy, "none|sign-diag|labels");
  };
  auto* tvi_cmd = an_cmd->add_subcommand("tvi", "pattern indicator probabilities");
  common(tvi_cmd);
  auto* reg_cmd = an_cmd->add_subcommand("regimes", "regime probabilities");
  common(reg_cmd);
  auto* irf_cmd = an_cmd->add_subcommand("irf", "impulse responses");
  common(irf_cmd);
  std::string irf_norm;
  std::size_t irf_shock = 1;
  double irf_value = 1.0, irf_mass = 0.68;
  std::size_t irf_H = 60, irf_regime = 0;
  bool irf_cumulate = false;
  irf_cmd->add_option("--shock", irf_shock, "structural shock (1-based)");
  irf_cmd->add_option("--normalize-on", irf_norm, "variable fixed at --value on impact");
  irf_cmd->add_option("--value", irf_value);
  irf_cmd->add_option("--horizon", irf_H);
  irf_cmd->add_option("--regime", irf_regime, "1-based regime, 0 = all");
  irf_cmd->add_option("--mass", irf_mass, "interval mass");
  irf_cmd->add_flag("--cumulate", irf_cumulate);
  auto* sddr_cmd = an_cmd->add_subcommand("sddr", "Savage-Dickey ratios for within-regime homoskedasticity");
  common(sddr_cmd);
  auto* mom_cmd = an_cmd->add_subcommand("moments", "regime-specific data moments");
  common(mom_cmd);
  std::string mom_data;
  bool mom_weighted = false;
  mom_cmd->add_option("--data", mom_data)->required();
  mom_cmd->add_flag("--weighted", mom_weighted, "probability-weighted instead of hard assignment");

  // forecast
  auto* fc_cmd = app.add_subcommand("forecast", "predictive summaries or rolling-origin evaluation");
  std::string fc_data, fc_store, fc_out, fc_summary, fc_origins, fc_horizons = "1", fc_vars;
  std::vector<std::string> fc_models;
  std::size_t fc_draws = 0, fc_burnin = 0, fc_threads = 1;
  std::uint64_t fc_seed = 1;
  fc_cmd->add_option("--data", fc_data)->required();
  fc_cmd->add_option("--store", fc_store, "summarize the predictive of an existing store");
  fc_cmd->add_option("--model", fc_models, "name=config (repeatable, first is the benchmark)");
  fc_cmd->add_option("--origins", fc_origins, "first:last date range or comma list of dates");
  fc_cmd->add_option("--horizons", fc_horizons, "comma list");
  fc_cmd->add_option("--variables", fc_vars, "comma list for marginal scores (default joint)");
  fc_cmd->add_option("--draws", fc_draws, "draws per origin (overrides configs)");
  fc_cmd->add_option("--burnin", fc_burnin, "burn-in per origin with --draws");
  fc_cmd->add_option("--threads", fc_threads);
  fc_cmd->add_option("--seed", fc_seed);
  fc_cmd->add_option("--out", fc_out)->required();
  fc_cmd->add_option("--summary", fc_summary, "per-model summary CSV");

  // selfcheck
  auto* sc_cmd = app.add_subcommand("selfcheck", "run the oracle suite");
  bool sc_fast = false;
  sc_cmd->add_flag("--fast", sc_fast);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim_cmd) {
      const auto truth = sim::load_truth_file(truth_path);
      Rng rng(sim_seed);
      const auto s = sim::generate_dgp(truth, sim_T, rng, sim_burn);
      if (s.explosive)
        std::cerr << "warning: explosive truth (spectral radius " << s.spectral_radius << ")\n";
      auto out = open_out(sim_out);
      write_dataset_csv(out, s.series, s.data.names, monthly_dates(2000, 1, static_cast<std::size_t>(s.series.rows())));
      if (!latent_out.empty()) {
        auto lat = open_out(latent_out);
        sim::write_latent_csv(lat, s);
      }
      return 0;
    }

    if (*est_cmd) {
      auto in = load_inputs(est_config, est_data);
      auto& c = in.cfg.chain;
      if (est_draws) c.draws = *est_draws;
      if (est_burnin) c.burnin = *est_burnin;
      if (est_thin) c.thin = *est_thin;
      if (est_seed) c.seed = *est_seed;
      if (est_chains) c.chains = *est_chains;
      in.cfg.validate();
      RunOptions opts;
      opts.latent_paths = est_latent;
      if (est_progress) {
        opts.progress = [](std::size_t chain, std::size_t sweep, std::size_t total) {
          if (sweep % 1000 == 0 || sweep == total)
            std::cerr << "chain " << chain << ": " << sweep << "/" << total << "\n";
        };
      }
      const auto stores = run_chains(in.cfg, in.data, est_threads, opts);
      if (stores.size() == 1) {
        persist_store(stores.front(), est_out);
      } else {
        for (std::size_t i = 0; i < stores.size(); ++i) persist_store(stores[i], chain_dir(est_out, i));
      }
      std::size_t total = 0;
      for (const auto& s : stores) total += s.draws();
      std::cerr << "stored " << total << " draws in " << est_out << "\n";
      return 0;
    }

    if (*an_cmd) {
      const auto loaded = load_pooled(an_store, an_config, an_force);
      const DrawStore store = normalized(loaded.store, an_policy);
      auto out = open_out(an_out);
      if (*tvi_cmd) {
        analytics::write_tvi_csv(out, store);
        if (store.meta.M > 1)
          std::cerr << "probability of a pattern change across regimes: "
                    << analytics::joint_tvi_change_probability(store) << "\n";
      } else if (*reg_cmd) {
        analytics::write_regimes_csv(out, analytics::regime_probabilities(store), store.meta.dates);
      } else if (*irf_cmd) {
        analytics::IrfSpec spec;
        spec.horizon = irf_H;
        require(irf_shock >= 1 && irf_shock <= store.meta.N, "--shock must lie in 1..N");
        spec.shock = irf_shock - 1;
        if (!irf_norm.empty()) spec.normalize_on = variable_index(store.meta.names, irf_norm);
        spec.value = irf_value;
        spec.cumulate = irf_cumulate;
        std::vector<std::vector<std::vector<analytics::Summary>>> by_regime;
        for (std::size_t m = 0; m < store.meta.M; ++m) {
          if (irf_regime != 0 && m + 1 != irf_regime) {
            by_regime.emplace_back();
            continue;
          }
          by_regime.push_back(analytics::summarize_pointwise(analytics::irf_draws(store, m, spec), irf_mass));
        }
        analytics::write_irf_csv(out, by_regime, store.meta.names);
      } else if (*sddr_cmd) {
        require(!loaded.cfg.homoskedastic, "homoskedastic runs carry no omega records");
        std::vector<analytics::SddrRow> rows;
        for (std::size_t n = 0; n < store.meta.N; ++n)
          for (std::size_t m = 0; m < store.meta.M; ++m)
            rows.push_back({n, m, analytics::heteroskedasticity_sddr(store, n, m, loaded.cfg.priors.omega_shape,
                                                                     loaded.cfg.priors.omega_scale)});
        analytics::write_sddr_csv(out, rows);
      } else if (*mom_cmd) {
        const auto& cfg = loaded.cfg;
        const Dataset data = load_dataset_file(mom_data, cfg.transforms, cfg.p, cfg.deterministic_columns);
        require(data.T() == store.meta.T, "data have " + std::to_string(data.T()) +
                                              " effective observations but the store has " +
                                              std::to_string(store.meta.T));
        const auto moments = analytics::regime_moments(
            data.y, analytics::regime_probabilities(store),
            mom_weighted ? analytics::Assignment::Weighted : analytics::Assignment::Hard);
        analytics::write_moments_csv(out, moments, data.names);
      }
      return 0;
    }

    if (*fc_cmd) {
      const auto horizons = parse_list(fc_horizons, "horizon");
      if (!fc_store.empty()) {
        const auto loaded = load_pooled(fc_store, "", false);
        const auto& cfg = loaded.cfg;
        const Dataset data = load_dataset_file(fc_data, cfg.transforms, cfg.p, cfg.deterministic_columns);
        require(data.T() == loaded.store.meta.T, "data do not match the estimation sample of the store");
        const std::size_t H = *std::max_element(horizons.begin(), horizons.end());
        Rng rng(fc_seed);
        std::vector<MatrixXd> paths;
        for (std::size_t i = 0; i < loaded.store.draws(); ++i)
          paths.push_back(forecast::predictive_draws(loaded.store.state(i), data, H, rng));
        const auto summ = analytics::summarize_pointwise(paths);
        auto out = open_out(fc_out);
        out.precision(10);
        out << "horizon,variable,mean,median,lower,upper\n";
        for (auto h : horizons)
          for (std::size_t j = 0; j < data.N(); ++j) {
            const auto& s = summ[h - 1][j];
            out << h << ',' << data.names[j] << ',' << s.mean << ',' << s.median << ',' << s.lower << ','
                << s.upper << '\n';
          }
        return 0;
      }
      require(!fc_models.empty(), "give --store or at least one --model name=config");
      require(!fc_origins.empty(), "rolling evaluation needs --origins");
      std::vector<forecast::ModelSpec> models;
      Dataset data;
      for (const auto& spec : fc_models) {
        const auto eq = spec.find('=');
        require(eq != std::string::npos, "--model expects name=config");
        auto in = load_inputs(spec.substr(eq + 1), fc_data);
        if (models.empty()) data = in.data;
        require(in.data.T() == data.T() && in.data.y == data.y, "models must share the transformed data");
        models.push_back({spec.substr(0, eq), in.cfg});
      }
      std::vector<std::size_t> origins;
      if (fc_origins.find(':') != std::string::npos) {
        const auto c = fc_origins.find(':');
        origins = forecast::origins_in_range(data, fc_origins.substr(0, c), fc_origins.substr(c + 1));
      } else {
        for (const auto& d : config::detail::split(fc_origins, ','))
          origins.push_back(forecast::origins_in_range(data, config::detail::trim(d), config::detail::trim(d)).front());
      }
      forecast::EvaluationOptions opts;
      opts.horizons = horizons;
      if (!fc_vars.empty())
        for (const auto& v : config::detail::split(fc_vars, ',')) opts.variables.push_back(variable_index(data.names, config::detail::trim(v)));
      opts.draws = fc_draws;
      opts.burnin = fc_burnin;
      opts.seed = fc_seed;
      opts.threads = fc_threads;
      const auto report = forecast::rolling_evaluation(models, data, origins, opts);
      auto out = open_out(fc_out);
      forecast::write_report_csv(out, report);
      if (!fc_summary.empty()) {
        auto sum = open_out(fc_summary);
        forecast::write_summary_csv(sum, report);
      }
      return 0;
    }

    if (*sc_cmd) return oracle::run_selfcheck(sc_fast, std::cout) ? 0 : 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
