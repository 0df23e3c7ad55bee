#pragma once

// Thinned sequence of parameter snapshots. Each block is a flat array of
// doubles in draw-major order; on disk a chain is one directory holding
// manifest.json and one little-endian <block>.f64 file per block.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tvisvar/config_io.hpp"
#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"

namespace tvisvar {

static_assert(std::endian::native == std::endian::little, "store files are written in native order");

inline constexpr int kStoreVersion = 1;

struct StoreMeta {
  int version = kStoreVersion;
  std::size_t N = 0, p = 1, d_dim = 1, M = 1, T = 0;
  std::vector<std::size_t> K;  // patterns per equation
  std::vector<std::string> pattern_codes;  // "equation:label:code"
  std::uint64_t seed = 0;
  std::size_t chain = 0;
  std::string config_digest;
  std::string config_text;
  std::vector<std::string> names;
  std::vector<std::string> dates;
  bool latent_paths = false;

  std::size_t k() const { return N * p + d_dim; }
};

struct Block {
  std::vector<std::size_t> shape;  // per-draw shape
  std::vector<double> data;

  std::size_t per_draw() const {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }
};

class DrawStore {
 public:
  StoreMeta meta;
  std::map<std::string, Block> blocks;

  DrawStore() = default;

  /// Empty store with the block layout implied by the model dimensions.
  DrawStore(StoreMeta m) : meta(std::move(m)) {
    const auto N = meta.N, M = meta.M, T = meta.T;
    declare("A", {N, meta.k()});
    declare("B", {M, N, N});
    declare("kappa", {N, M});
    declare("s", {T});
    declare("P", {M, M});
    declare("pi0", {M});
    declare("h_last", {N});
    declare("omega", {N, M});
    declare("rho", {N});
    declare("sigma2_omega", {N});
    declare("gamma_B", {N});
    declare("s_B", {N});
    declare("s_gamma_B", {1});
    declare("gamma_A", {N});
    declare("s_A", {N});
    declare("s_gamma_A", {1});
    declare("omega_post_mean", {N, M});
    declare("omega_post_var", {N, M});
    declare("log_likelihood", {1});
    if (meta.latent_paths) {
      declare("h", {N, T});
      declare("mixture", {N, T});
    }
  }

  std::size_t draws() const { return draws_; }

  bool has(const std::string& name) const { return blocks.count(name) > 0; }

  const Block& block(const std::string& name) const {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw StoreError("store has no block '" + name + "'");
    return it->second;
  }

  std::span<const double> view(const std::string& name, std::size_t draw) const {
    const auto& b = block(name);
    const auto n = b.per_draw();
    require(draw < draws_, "draw index out of range");
    return {b.data.data() + draw * n, n};
  }

  /// Row-major matrix view of a 2-D block (or slice `index` of a 3-D block).
  MatrixXd matrix(const std::string& name, std::size_t draw, std::size_t index = 0) const {
    const auto& b = block(name);
    const auto v = view(name, draw);
    const std::size_t rows = b.shape.size() == 3 ? b.shape[1] : b.shape[0];
    const std::size_t cols = b.shape.size() == 1 ? 1 : b.shape.back();
    const std::size_t offset = b.shape.size() == 3 ? index * rows * cols : 0;
    MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[offset + i * cols + j];
    return out;
  }

  void append(const ParameterState& st) {
    require(st.N() == meta.N && st.M() == meta.M && st.T() == meta.T,
            "state dimensions do not match the store");
    put_matrix("A", st.A);
    {
      auto& d = blocks.at("B").data;
      for (const auto& Bm : st.B) put_rows(d, Bm);
    }
    {
      auto& d = blocks.at("kappa").data;
      for (std::size_t n = 0; n < meta.N; ++n)
        for (std::size_t m = 0; m < meta.M; ++m) d.push_back(st.kappa[n][m]);
    }
    {
      auto& d = blocks.at("s").data;
      for (int v : st.s) d.push_back(v);
    }
    put_matrix("P", st.P);
    put_vector("pi0", st.pi0);
    {
      auto& d = blocks.at("h_last").data;
      for (Eigen::Index n = 0; n < st.h.rows(); ++n) d.push_back(st.h.cols() > 0 ? st.h(n, st.h.cols() - 1) : 0.0);
    }
    put_matrix("omega", st.omega);
    put_vector("rho", st.rho);
    put_vector("sigma2_omega", st.sigma2_omega);
    put_vector("gamma_B", st.shrink_B.gamma);
    put_vector("s_B", st.shrink_B.scale);
    blocks.at("s_gamma_B").data.push_back(st.shrink_B.global_scale);
    put_vector("gamma_A", st.shrink_A.gamma);
    put_vector("s_A", st.shrink_A.scale);
    blocks.at("s_gamma_A").data.push_back(st.shrink_A.global_scale);
    put_matrix("omega_post_mean", st.omega_post_mean);
    put_matrix("omega_post_var", st.omega_post_var);
    blocks.at("log_likelihood").data.push_back(st.log_likelihood);
    if (meta.latent_paths) {
      put_matrix("h", st.h);
      put_matrix("mixture", st.mixture.cast<double>());
    }
    ++draws_;
  }

  /// Reconstructs draw i. Without stored latent paths `h` holds only the last
  /// period (N x 1) and `mixture` is empty.
  ParameterState state(std::size_t i) const {
    require(i < draws_, "draw index out of range");
    ParameterState st;
    st.A = matrix("A", i);
    for (std::size_t m = 0; m < meta.M; ++m) st.B.push_back(matrix("B", i, m));
    const MatrixXd kappa = matrix("kappa", i);
    st.kappa.assign(meta.N, std::vector<int>(meta.M));
    for (std::size_t n = 0; n < meta.N; ++n)
      for (std::size_t m = 0; m < meta.M; ++m)
        st.kappa[n][m] = static_cast<int>(kappa(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)));
    const auto sv = view("s", i);
    st.s.assign(sv.size(), 0);
    for (std::size_t t = 0; t < sv.size(); ++t) st.s[t] = static_cast<int>(sv[t]);
    st.P = matrix("P", i);
    st.pi0 = matrix("pi0", i).col(0);
    if (meta.latent_paths) {
      st.h = matrix("h", i);
      st.mixture = matrix("mixture", i).cast<int>();
    } else {
      st.h = matrix("h_last", i);
    }
    st.omega = matrix("omega", i);
    st.rho = matrix("rho", i).col(0);
    st.sigma2_omega = matrix("sigma2_omega", i).col(0);
    st.shrink_B = {matrix("gamma_B", i).col(0), matrix("s_B", i).col(0), view("s_gamma_B", i)[0]};
    st.shrink_A = {matrix("gamma_A", i).col(0), matrix("s_A", i).col(0), view("s_gamma_A", i)[0]};
    st.omega_post_mean = matrix("omega_post_mean", i);
    st.omega_post_var = matrix("omega_post_var", i);
    st.log_likelihood = view("log_likelihood", i)[0];
    return st;
  }

  /// Last-period log-volatilities of draw i.
  VectorXd h_last(std::size_t i) const { return matrix("h_last", i).col(0); }

  /// Internal use by loaders and normalizers.
  void set_draws(std::size_t n) { draws_ = n; }

 private:
  std::size_t draws_ = 0;

  void declare(const std::string& name, std::vector<std::size_t> shape) {
    blocks[name] = Block{std::move(shape), {}};
  }
  static void put_rows(std::vector<double>& d, const MatrixXd& X) {
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index j = 0; j < X.cols(); ++j) d.push_back(X(i, j));
  }
  void put_matrix(const std::string& name, const MatrixXd& X) {
    auto& b = blocks.at(name);
    require(static_cast<std::size_t>(X.size()) == b.per_draw(), "block '" + name + "' has the wrong size");
    put_rows(b.data, X);
  }
  void put_vector(const std::string& name, const VectorXd& v) { put_matrix(name, MatrixXd(v)); }
};

/// Concatenates chains with identical layouts.
inline DrawStore pool_stores(const std::vector<DrawStore>& stores) {
  require(!stores.empty(), "no stores to pool");
  DrawStore out = stores.front();
  for (std::size_t c = 1; c < stores.size(); ++c) {
    const auto& s = stores[c];
    require(s.meta.N == out.meta.N && s.meta.M == out.meta.M && s.meta.T == out.meta.T &&
                s.meta.K == out.meta.K && s.meta.latent_paths == out.meta.latent_paths,
            "stores have different layouts");
    for (auto& [name, b] : out.blocks) {
      const auto& src = s.block(name).data;
      b.data.insert(b.data.end(), src.begin(), src.end());
    }
    out.set_draws(out.draws() + s.draws());
  }
  return out;
}

inline std::string block_digest(const Block& b) {
  return config::hex_digest(config::fnv1a(b.data.data(), b.data.size() * sizeof(double)));
}

inline void persist_store(const DrawStore& store, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StoreError("cannot create store directory '" + dir.string() + "': " + ec.message());
  nlohmann::ordered_json man;
  const auto& m = store.meta;
  man["format"] = "tvisvar-draws";
  man["version"] = m.version;
  man["N"] = m.N;
  man["p"] = m.p;
  man["d_dim"] = m.d_dim;
  man["M"] = m.M;
  man["T"] = m.T;
  man["K"] = m.K;
  man["patterns"] = m.pattern_codes;
  man["seed"] = m.seed;
  man["chain"] = m.chain;
  man["draws"] = store.draws();
  man["config_digest"] = m.config_digest;
  man["config"] = m.config_text;
  man["names"] = m.names;
  man["dates"] = m.dates;
  man["latent_paths"] = m.latent_paths;
  auto& blocks = man["blocks"];
  blocks = nlohmann::ordered_json::object();
  for (const auto& [name, b] : store.blocks) {
    const auto file = name + ".f64";
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write '" + (dir / file).string() + "'");
    out.write(reinterpret_cast<const char*>(b.data.data()),
              static_cast<std::streamsize>(b.data.size() * sizeof(double)));
    if (!out) throw StoreError("write failed for '" + (dir / file).string() + "'");
    blocks[name] = {{"file", file}, {"shape", b.shape}, {"values", b.data.size()},
                    {"fnv1a", block_digest(b)}};
  }
  std::ofstream mf(dir / "manifest.json", std::ios::trunc);
  if (!mf) throw StoreError("cannot write manifest in '" + dir.string() + "'");
  mf << man.dump(2) << '\n';
  if (!mf) throw StoreError("manifest write failed in '" + dir.string() + "'");
}

inline DrawStore load_store(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw StoreError("no manifest.json in '" + dir.string() + "'");
  nlohmann::json man;
  try {
    man = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("manifest in '" + dir.string() + "' is not valid JSON: " + e.what());
  }
  try {
    if (man.value("format", "") != "tvisvar-draws")
      throw CorruptionError("'" + dir.string() + "' is not a draw store");
    const int version = man.at("version").get<int>();
    if (version != kStoreVersion)
      throw VersionError("store version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kStoreVersion) + ")");
    StoreMeta m;
    m.version = version;
    m.N = man.at("N");
    m.p = man.at("p");
    m.d_dim = man.at("d_dim");
    m.M = man.at("M");
    m.T = man.at("T");
    m.K = man.at("K").get<std::vector<std::size_t>>();
    m.pattern_codes = man.at("patterns").get<std::vector<std::string>>();
    m.seed = man.at("seed");
    m.chain = man.at("chain");
    m.config_digest = man.at("config_digest");
    m.config_text = man.at("config");
    m.names = man.at("names").get<std::vector<std::string>>();
    m.dates = man.at("dates").get<std::vector<std::string>>();
    m.latent_paths = man.at("latent_paths");
    const std::size_t draws = man.at("draws");
    DrawStore store(m);
    const auto& blocks = man.at("blocks");
    for (auto& [name, b] : store.blocks) {
      if (!blocks.contains(name)) throw CorruptionError("manifest lacks block '" + name + "'");
      const auto& entry = blocks.at(name);
      if (entry.at("shape").get<std::vector<std::size_t>>() != b.shape)
        throw CorruptionError("block '" + name + "' has an unexpected shape");
      const std::size_t values = entry.at("values");
      if (values != draws * b.per_draw())
        throw CorruptionError("block '" + name + "' size disagrees with the draw count");
      const auto path = dir / entry.at("file").get<std::string>();
      std::ifstream in(path, std::ios::binary);
      if (!in) throw CorruptionError("missing block file '" + path.string() + "'");
      std::error_code ec;
      const auto bytes = std::filesystem::file_size(path, ec);
      if (ec || bytes != values * sizeof(double))
        throw CorruptionError("block file '" + path.string() + "' is truncated or oversized");
      b.data.resize(values);
      in.read(reinterpret_cast<char*>(b.data.data()), static_cast<std::streamsize>(bytes));
      if (!in) throw CorruptionError("cannot read '" + path.string() + "'");
      if (block_digest(b) != entry.at("fnv1a").get<std::string>())
        throw CorruptionError("digest mismatch in block '" + name + "'");
    }
    store.set_draws(draws);
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("manifest in '" + dir.string() + "' is incomplete: " + e.what());
  }
}

/// Loads a single chain directory or every chain_* subdirectory of a run.
inline std::vector<DrawStore> load_run(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (fs::exists(dir / "manifest.json")) return {load_store(dir)};
  std::vector<fs::path> chains;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && fs::exists(e.path() / "manifest.json")) chains.push_back(e.path());
  if (chains.empty()) throw StoreError("no draw store found under '" + dir.string() + "'");
  std::sort(chains.begin(), chains.end());
  std::vector<DrawStore> out;
  for (const auto& c : chains) out.push_back(load_store(c));
  return out;
}

}  // namespace tvisvar
