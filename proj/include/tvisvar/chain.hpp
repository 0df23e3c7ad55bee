#pragma once

// Chain drivers: burn-in, thinning and storage, and concurrent independent
// chains with one random stream each.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <thread>
#include <vector>

#include "tvisvar/config_io.hpp"
#include "tvisvar/draw_store.hpp"
#include "tvisvar/gibbs.hpp"

namespace tvisvar {

struct RunOptions {
  bool latent_paths = false;  // store full h and mixture paths per draw
  std::function<void(std::size_t chain, std::size_t sweep, std::size_t total)> progress;
};

inline StoreMeta store_meta(const ModelConfig& cfg, const Dataset& data, std::size_t chain,
                            bool latent_paths) {
  StoreMeta m;
  m.N = cfg.N;
  m.p = cfg.p;
  m.d_dim = cfg.d_dim;
  m.M = cfg.M;
  m.T = data.T();
  for (std::size_t n = 0; n < cfg.N; ++n) {
    m.K.push_back(cfg.patterns.K(n));
    for (const auto& pat : cfg.patterns.equations[n])
      m.pattern_codes.push_back(std::to_string(n + 1) + ":" + pat.label + ":" + pat.code(cfg.N));
  }
  m.seed = cfg.chain.seed;
  m.chain = chain;
  m.config_digest = config::config_digest(cfg);
  m.config_text = config::config_text(cfg);
  m.names = data.names;
  m.dates = data.dates;
  m.latent_paths = latent_paths;
  return m;
}

/// One chain with stream `chain` of the configured seed. With prior_only the
/// data are replaced by an empty sample.
inline DrawStore run_chain(const ModelConfig& cfg, const Dataset& data, std::size_t chain = 0,
                           const RunOptions& opts = {}) {
  cfg.validate();
  const Dataset sample = cfg.prior_only ? gibbs::empty_dataset(cfg.N, cfg.p, cfg.d_dim) : data;
  gibbs::check_dataset(cfg, sample);
  Rng rng = Rng::for_stream(cfg.chain.seed, chain);
  gibbs::SamplerContext ctx(cfg);
  ParameterState st = gibbs::initialize_state(cfg, sample, rng);
  DrawStore store(store_meta(cfg, sample, chain, opts.latent_paths));
  const std::size_t total = cfg.chain.burnin + cfg.chain.draws;
  for (std::size_t it = 0; it < total; ++it) {
    gibbs::gibbs_sweep(st, sample, ctx, rng);
    if (it >= cfg.chain.burnin && (it - cfg.chain.burnin + 1) % cfg.chain.thin == 0) store.append(st);
    if (opts.progress) opts.progress(chain, it + 1, total);
  }
  return store;
}

/// cfg.chain.chains independent chains on up to `threads` workers; the result
/// does not depend on `threads`.
inline std::vector<DrawStore> run_chains(const ModelConfig& cfg, const Dataset& data,
                                         std::size_t threads = 0, const RunOptions& opts = {}) {
  const std::size_t n = cfg.chain.chains;
  if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  std::vector<DrawStore> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < n; c = next++) {
      try {
        out[c] = run_chain(cfg, data, c, opts);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline std::filesystem::path chain_dir(const std::filesystem::path& run, std::size_t chain) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "chain_%03zu", chain);
  return run / buf;
}

}  // namespace tvisvar
