#pragma once

// Domain types shared by the samplers and analytics: the observation set with
// its lagged design, exclusion-restriction patterns, model configuration and
// one point of the posterior sampling space.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tvisvar/errors.hpp"

namespace tvisvar {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Column transforms
// ---------------------------------------------------------------------------

struct Transform {
  enum class Kind { None, Log, LogDiff };
  Kind kind = Kind::None;
  bool times100 = false;

  bool differences() const { return kind == Kind::LogDiff; }

  /// Accepts none | log | logdiff, each optionally suffixed with 100
  /// (log100, logdiff100) for percentage units.
  static Transform parse(std::string_view text) {
    Transform t;
    std::string s(text);
    if (s.size() > 3 && s.substr(s.size() - 3) == "100") {
      t.times100 = true;
      s.resize(s.size() - 3);
    }
    if (s == "none" || s.empty()) {
      t.kind = Kind::None;
    } else if (s == "log") {
      t.kind = Kind::Log;
    } else if (s == "logdiff" || s == "log-difference" || s == "dlog") {
      t.kind = Kind::LogDiff;
    } else {
      throw ValidationError("unknown transform '" + std::string(text) + "'");
    }
    return t;
  }

  std::string str() const {
    std::string base = kind == Kind::None ? "none" : kind == Kind::Log ? "log" : "logdiff";
    return times100 ? base + "100" : base;
  }
};

/// Applies per-column transforms to a raw level table. If any column is
/// differenced the first row is dropped for every column so rows stay aligned.
inline MatrixXd apply_transforms(const MatrixXd& raw, const std::vector<Transform>& transforms) {
  require(static_cast<Eigen::Index>(transforms.size()) == raw.cols(),
          "one transform per column required");
  const bool any_diff = std::any_of(transforms.begin(), transforms.end(),
                                    [](const Transform& t) { return t.differences(); });
  const Eigen::Index offset = any_diff ? 1 : 0;
  if (raw.rows() <= offset) throw InsufficientDataError("not enough rows to difference");
  MatrixXd out(raw.rows() - offset, raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const Transform& t = transforms[static_cast<std::size_t>(j)];
    const double scale = t.times100 ? 100.0 : 1.0;
    for (Eigen::Index i = offset; i < raw.rows(); ++i) {
      const double v = raw(i, j);
      double r = v;
      if (t.kind != Transform::Kind::None) {
        if (!(v > 0.0)) {
          throw ParseError("log transform of nonpositive value", static_cast<std::size_t>(i + 2),
                           static_cast<std::size_t>(j + 2));
        }
        if (t.kind == Transform::Kind::Log) {
          r = std::log(v);
        } else {
          const double prev = raw(i - 1, j);
          if (!(prev > 0.0)) {
            throw ParseError("log transform of nonpositive value",
                             static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 2));
          }
          r = std::log(v) - std::log(prev);
        }
      }
      out(i - offset, j) = scale * r;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Observations in transformed units with the lagged design. Row t of `x` is
/// (y_{t-1}, ..., y_{t-p}, d_t); the first p rows of the input series are
/// presample and do not appear in `y`.
struct Dataset {
  MatrixXd y;  // T x N
  MatrixXd d;  // T x d_dim
  MatrixXd x;  // T x (N p + d_dim)
  std::vector<std::string> names;
  std::vector<std::string> dates;  // effective-sample dates, may be empty
  std::size_t p = 1;

  std::size_t N() const { return static_cast<std::size_t>(y.cols()); }
  std::size_t T() const { return static_cast<std::size_t>(y.rows()); }
  std::size_t d_dim() const { return static_cast<std::size_t>(d.cols()); }
  std::size_t k() const { return static_cast<std::size_t>(x.cols()); }

  /// Builds the lag design from a full series (presample included).
  /// `deterministic` has one row per series row; pass an empty matrix for the
  /// default intercept column.
  static Dataset from_series(const MatrixXd& series, std::size_t p,
                             MatrixXd deterministic = MatrixXd(),
                             std::vector<std::string> names = {},
                             std::vector<std::string> series_dates = {}) {
    require(p >= 1, "lag order must be at least 1");
    const auto rows = series.rows();
    const auto N = series.cols();
    const auto lag = static_cast<Eigen::Index>(p);
    if (deterministic.size() == 0) deterministic = MatrixXd::Ones(rows, 1);
    require(deterministic.rows() == rows, "deterministic terms must match series length");
    if (rows <= lag) throw InsufficientDataError("series shorter than the lag order");
    Dataset ds;
    ds.p = p;
    const auto T = rows - lag;
    ds.y = series.bottomRows(T);
    ds.d = deterministic.bottomRows(T);
    ds.x.resize(T, N * lag + deterministic.cols());
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto row = t + lag;
      for (Eigen::Index l = 1; l <= lag; ++l) {
        ds.x.block(t, (l - 1) * N, 1, N) = series.row(row - l);
      }
      ds.x.block(t, N * lag, 1, deterministic.cols()) = deterministic.row(row);
    }
    if (names.empty()) {
      for (Eigen::Index j = 0; j < N; ++j) names.push_back("y" + std::to_string(j + 1));
    }
    ds.names = std::move(names);
    if (!series_dates.empty()) {
      require(static_cast<Eigen::Index>(series_dates.size()) == rows, "one date per row");
      ds.dates.assign(series_dates.begin() + lag, series_dates.end());
    }
    return ds;
  }

  /// Enforces the ingestion invariants: finite entries and T > N p + d_dim.
  void validate() const {
    if (!y.allFinite() || !x.allFinite()) throw ValidationError("dataset has non-finite entries");
    if (T() <= N() * p + d_dim()) {
      throw InsufficientDataError("need more than N*p + d_dim = " + std::to_string(N() * p + d_dim()) +
                                  " effective observations, have " + std::to_string(T()));
    }
  }

  /// First `T_head` effective observations.
  Dataset head(std::size_t T_head) const {
    require(T_head <= T(), "head longer than dataset");
    Dataset out = *this;
    const auto n = static_cast<Eigen::Index>(T_head);
    out.y = y.topRows(n);
    out.d = d.topRows(n);
    out.x = x.topRows(n);
    if (!dates.empty()) out.dates.assign(dates.begin(), dates.begin() + n);
    return out;
  }

  /// Design vector for the period after the sample end, given future values
  /// of y appended in `future` (rows T, T+1, ...).
  VectorXd next_design(const MatrixXd& future, std::size_t step,
                       const VectorXd& deterministic) const {
    const auto Nn = static_cast<Eigen::Index>(N());
    const auto lag = static_cast<Eigen::Index>(p);
    VectorXd xn(Nn * lag + deterministic.size());
    for (Eigen::Index l = 1; l <= lag; ++l) {
      const auto idx = static_cast<Eigen::Index>(step) - l;  // index into future
      if (idx >= 0) {
        xn.segment((l - 1) * Nn, Nn) = future.row(idx).transpose();
      } else {
        // -1 is the last sample row y_{T-1}; earlier lags come from x's last row
        const auto back = -idx;  // 1 -> last observation
        if (back == 1) {
          xn.segment((l - 1) * Nn, Nn) = y.row(y.rows() - 1).transpose();
        } else {
          xn.segment((l - 1) * Nn, Nn) =
              x.row(x.rows() - 1).segment((back - 2) * Nn, Nn).transpose();
        }
      }
    }
    xn.tail(deterministic.size()) = deterministic;
    return xn;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  for (auto& s : cells) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace detail

/// Raw CSV table: header, ISO dates in the first column, numeric columns.
struct CsvTable {
  std::vector<std::string> header;  // without the date column
  std::vector<std::string> dates;
  MatrixXd values;

  static CsvTable read(std::istream& in) {
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV input");
    auto head = detail::split_csv_line(line);
    if (head.size() < 2) throw ParseError("CSV needs a date column and at least one series", 1, 1);
    table.header.assign(head.begin() + 1, head.end());
    std::vector<std::vector<double>> rows;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
      ++row_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto cells = detail::split_csv_line(line);
      if (cells.size() != head.size()) {
        throw ParseError("expected " + std::to_string(head.size()) + " cells, found " +
                             std::to_string(cells.size()),
                         row_no, cells.size());
      }
      table.dates.push_back(cells[0]);
      std::vector<double> vals(cells.size() - 1);
      for (std::size_t j = 1; j < cells.size(); ++j) {
        if (!detail::parse_double(cells[j], vals[j - 1]) || !std::isfinite(vals[j - 1])) {
          throw ParseError("non-numeric cell '" + cells[j] + "'", row_no, j + 1);
        }
      }
      rows.push_back(std::move(vals));
    }
    table.values.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j)
        table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return table;
  }

  static CsvTable read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open data file '" + path + "'");
    return read(in);
  }

  Eigen::Index column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("no column named '" + name + "'");
    return static_cast<Eigen::Index>(it - header.begin());
  }
};

/// Loads a CSV table, applies the column transforms and builds the lag design.
/// `transforms` is keyed by column name; unlisted columns are left untouched.
/// Columns named in `deterministic_columns` become deterministic terms next
/// to the intercept instead of modelled series.
inline Dataset load_dataset(std::istream& in, const std::map<std::string, Transform>& transforms,
                            std::size_t p,
                            const std::vector<std::string>& deterministic_columns = {}) {
  CsvTable table = CsvTable::read(in);
  std::vector<Eigen::Index> series_cols, det_cols;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    const auto& name = table.header[j];
    if (std::find(deterministic_columns.begin(), deterministic_columns.end(), name) !=
        deterministic_columns.end()) {
      det_cols.push_back(static_cast<Eigen::Index>(j));
    } else {
      series_cols.push_back(static_cast<Eigen::Index>(j));
      names.push_back(name);
    }
  }
  for (const auto& [name, t] : transforms) table.column(name);  // unknown names are errors
  if (series_cols.empty()) throw ValidationError("no series columns in data");

  MatrixXd raw(table.values.rows(), static_cast<Eigen::Index>(series_cols.size()));
  std::vector<Transform> ts;
  for (std::size_t j = 0; j < series_cols.size(); ++j) {
    raw.col(static_cast<Eigen::Index>(j)) = table.values.col(series_cols[j]);
    auto it = transforms.find(names[j]);
    ts.push_back(it == transforms.end() ? Transform{} : it->second);
  }
  MatrixXd series = apply_transforms(raw, ts);
  const auto dropped = raw.rows() - series.rows();
  MatrixXd det(series.rows(), 1 + static_cast<Eigen::Index>(det_cols.size()));
  det.col(0).setOnes();
  for (std::size_t j = 0; j < det_cols.size(); ++j)
    det.col(static_cast<Eigen::Index>(j + 1)) = table.values.col(det_cols[j]).bottomRows(series.rows());
  std::vector<std::string> dates(table.dates.begin() + dropped, table.dates.end());
  if (series.rows() <= static_cast<Eigen::Index>(p)) {
    throw InsufficientDataError("not enough rows for " + std::to_string(p) + " lags");
  }
  Dataset ds = Dataset::from_series(series, p, det, names, dates);
  ds.validate();
  return ds;
}

inline Dataset load_dataset_file(const std::string& path,
                                 const std::map<std::string, Transform>& transforms, std::size_t p,
                                 const std::vector<std::string>& deterministic_columns = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file '" + path + "'");
  return load_dataset(in, transforms, p, deterministic_columns);
}

/// Writes y (and extra deterministic columns) in the format load_dataset reads.
inline void write_dataset_csv(std::ostream& out, const MatrixXd& series,
                              const std::vector<std::string>& names,
                              const std::vector<std::string>& dates) {
  out << "date";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  out.precision(17);
  for (Eigen::Index t = 0; t < series.rows(); ++t) {
    out << dates[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < series.cols(); ++j) out << ',' << series(t, j);
    out << '\n';
  }
}

/// Monthly ISO dates starting at year-month.
inline std::vector<std::string> monthly_dates(int year, int month, std::size_t count) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-01", year, month);
    out.emplace_back(buf);
    if (++month > 12) {
      month = 1;
      ++year;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Restriction patterns
// ---------------------------------------------------------------------------

/// One exclusion-restriction pattern for a structural row: V places the free
/// coefficients b (length r) into the row, [B]_n. = b V.
struct Pattern {
  std::string label;
  std::vector<int> free_columns;  // ascending
  MatrixXd V;                     // r x N selection matrix

  std::size_t r() const { return free_columns.size(); }

  bool restricts(int column) const {
    return !std::binary_search(free_columns.begin(), free_columns.end(), column);
  }

  /// "*" for free positions and "0" for exclusions.
  std::string code(std::size_t N) const {
    std::string s(N, '0');
    for (int c : free_columns) s[static_cast<std::size_t>(c)] = '*';
    return s;
  }

  static Pattern from_code(std::string_view code, std::string label = {}) {
    Pattern pat;
    pat.label = label.empty() ? std::string(code) : std::move(label);
    for (std::size_t i = 0; i < code.size(); ++i) {
      if (code[i] == '*') {
        pat.free_columns.push_back(static_cast<int>(i));
      } else if (code[i] != '0') {
        throw ValidationError("pattern '" + std::string(code) + "' must use only '*' and '0'");
      }
    }
    if (pat.free_columns.empty()) {
      throw ValidationError("pattern '" + std::string(code) + "' restricts every element");
    }
    const auto r = static_cast<Eigen::Index>(pat.free_columns.size());
    pat.V = MatrixXd::Zero(r, static_cast<Eigen::Index>(code.size()));
    for (Eigen::Index i = 0; i < r; ++i) pat.V(i, pat.free_columns[static_cast<std::size_t>(i)]) = 1.0;
    return pat;
  }
};

/// Patterns for every equation. Equations with a single pattern are the
/// fixed (non-TVI) rows; they go through the same code path with K = 1.
struct PatternSet {
  std::size_t N = 0;
  std::vector<std::vector<Pattern>> equations;

  std::size_t K(std::size_t n) const { return equations[n].size(); }
  bool is_tvi(std::size_t n) const { return equations[n].size() > 1; }
  const Pattern& at(std::size_t n, std::size_t k) const { return equations[n][k]; }

  std::vector<std::size_t> tvi_equations() const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < N; ++n)
      if (is_tvi(n)) out.push_back(n);
    return out;
  }

  /// Number of patterns of equation n that restrict column i to zero.
  std::size_t count_restricting(std::size_t n, int column) const {
    std::size_t c = 0;
    for (const auto& p : equations[n]) c += p.restricts(column) ? 1 : 0;
    return c;
  }
};

/// Declaration of the patterns for one equation: (label, code) pairs.
using PatternDeclaration = std::vector<std::pair<std::string, std::string>>;

enum class DefaultRows { LowerTriangular, Unrestricted };

inline std::string default_row_code(std::size_t N, std::size_t n, DefaultRows rows) {
  std::string code(N, '0');
  for (std::size_t i = 0; i < N; ++i)
    if (rows == DefaultRows::Unrestricted || i <= n) code[i] = '*';
  return code;
}

/// Builds selection matrices from declared patterns. Equations missing from
/// `declared` receive one default pattern (lower-triangular unless stated).
inline PatternSet build_pattern_set(std::size_t N,
                                    const std::map<std::size_t, PatternDeclaration>& declared,
                                    DefaultRows default_rows = DefaultRows::LowerTriangular) {
  require(N >= 1, "pattern set needs N >= 1");
  PatternSet set;
  set.N = N;
  set.equations.resize(N);
  for (const auto& [n, decl] : declared) {
    require(n < N, "pattern declared for equation " + std::to_string(n + 1) + " but N = " +
                       std::to_string(N));
    require(!decl.empty(), "equation " + std::to_string(n + 1) + " declares no patterns");
  }
  for (std::size_t n = 0; n < N; ++n) {
    auto it = declared.find(n);
    if (it == declared.end()) {
      const auto code = default_row_code(N, n, default_rows);
      set.equations[n].push_back(Pattern::from_code(code, code));
      continue;
    }
    std::set<std::string> labels, codes;
    for (const auto& [label, code] : it->second) {
      require(code.size() == N, "pattern '" + code + "' has length " + std::to_string(code.size()) +
                                    ", expected " + std::to_string(N));
      Pattern pat = Pattern::from_code(code, label);
      require(codes.insert(pat.code(N)).second,
              "duplicate pattern '" + code + "' in equation " + std::to_string(n + 1));
      require(labels.insert(pat.label).second,
              "duplicate pattern label '" + pat.label + "' in equation " + std::to_string(n + 1));
      set.equations[n].push_back(std::move(pat));
    }
  }
  return set;
}

/// Places b at the selected columns: returns b V.
inline RowVectorXd apply_pattern(const VectorXd& b, const MatrixXd& V) {
  if (b.size() == 0 || b.size() != V.rows()) {
    throw ValidationError("free-coefficient length " + std::to_string(b.size()) +
                          " does not match selection rows " + std::to_string(V.rows()));
  }
  return b.transpose() * V;
}

/// Inverse of apply_pattern on the selected columns: returns V row'.
inline VectorXd extract_free(const RowVectorXd& row, const MatrixXd& V) {
  require(row.size() == V.cols(), "row length does not match selection columns");
  return V * row.transpose();
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Shapes and scales of the three-level shrinkage hierarchy
/// gamma | s ~ IG2(s, nu), s | s_gamma ~ G(s_gamma, nu_gamma), s_gamma ~ IG2(s_s, nu_s).
struct ShrinkageHyper {
  double nu = 10.0;
  double nu_gamma = 10.0;
  double s_s = 100.0;
  double nu_s = 1.0;
};

struct PriorConfig {
  ShrinkageHyper B{10.0, 10.0, 100.0, 1.0};
  ShrinkageHyper A{10.0, 10.0, 10.0, 10.0};
  double d_m = 11.0;         // extra Dirichlet weight on staying in the regime
  double omega_shape = 1.0;  // sigma2_omega ~ Gamma(shape, scale)
  double omega_scale = 1.0;
};

struct ChainConfig {
  std::size_t draws = 10000;
  std::size_t burnin = 5000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  std::size_t chains = 1;
};

struct ModelConfig {
  std::size_t N = 0;
  std::size_t p = 1;
  std::size_t d_dim = 1;
  std::size_t M = 2;
  PatternSet patterns;
  PriorConfig priors;
  ChainConfig chain;
  std::map<std::string, Transform> transforms;
  std::vector<std::string> deterministic_columns;
  bool homoskedastic = false;  // omega fixed at zero, SV block skipped
  bool prior_only = false;     // likelihood switched off

  std::size_t k() const { return N * p + d_dim; }

  void validate() const {
    require(N >= 1, "N must be positive");
    require(p >= 1, "p must be positive");
    require(d_dim >= 1, "d_dim must be positive");
    require(M >= 1, "M must be at least 1");
    require(patterns.N == N, "pattern set dimension does not match N");
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    for (const auto* h : {&priors.B, &priors.A}) {
      require(positive(h->nu) && positive(h->nu_gamma) && positive(h->s_s) && positive(h->nu_s),
              "shrinkage hyperparameters must be strictly positive");
    }
    require(priors.d_m >= 0.0 && std::isfinite(priors.d_m), "d_m must be nonnegative");
    require(positive(priors.omega_shape) && positive(priors.omega_scale),
            "omega prior shape and scale must be strictly positive");
    require(chain.draws > 0, "draws must be positive");
    require(chain.thin > 0, "thin must be positive");
    require(chain.chains > 0, "chains must be positive");
  }
};

/// Config with the default hyperparameters and lower-triangular fixed rows.
inline ModelConfig default_config(std::size_t N, std::size_t p, std::size_t M,
                                  const std::map<std::size_t, PatternDeclaration>& declared = {}) {
  ModelConfig cfg;
  cfg.N = N;
  cfg.p = p;
  cfg.M = M;
  cfg.patterns = build_pattern_set(N, declared);
  return cfg;
}

// ---------------------------------------------------------------------------
// Parameter state
// ---------------------------------------------------------------------------

/// gamma[n] equation variances, scale[n] their IG2 scales, global_scale the
/// shared scale of the scales.
struct ShrinkageState {
  VectorXd gamma;
  VectorXd scale;
  double global_scale = 1.0;
};

/// One complete point of the sampling space.
struct ParameterState {
  MatrixXd A;                              // N x k
  std::vector<MatrixXd> B;                 // M matrices N x N
  std::vector<std::vector<int>> kappa;     // [equation][regime], 0-based pattern
  std::vector<int> s;                      // T, 0-based regimes
  MatrixXd P;                              // M x M
  VectorXd pi0;                            // M
  MatrixXd h;                              // N x T
  MatrixXd omega;                          // N x M
  VectorXd rho;                            // N
  VectorXd sigma2_omega;                   // N
  MatrixXi mixture;                        // N x T, 0..9
  ShrinkageState shrink_B;
  ShrinkageState shrink_A;
  MatrixXd omega_post_mean;                // N x M, conditional moments of omega
  MatrixXd omega_post_var;                 // N x M
  double log_likelihood = 0.0;             // log p(Y | parameters), regimes integrated

  std::size_t N() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t M() const { return B.size(); }
  std::size_t T() const { return s.size(); }

  /// Free coefficients of row n in regime m under the current pattern.
  VectorXd free_coefficients(const PatternSet& patterns, std::size_t n, std::size_t m) const {
    const auto& V = patterns.at(n, static_cast<std::size_t>(kappa[n][m])).V;
    return extract_free(B[m].row(static_cast<Eigen::Index>(n)), V);
  }
};

/// Throws ValidationError naming the first violated invariant.
inline void check_invariants(const ParameterState& st, const PatternSet& patterns) {
  const auto M = static_cast<Eigen::Index>(st.M());
  const auto N = static_cast<Eigen::Index>(st.N());
  require(M >= 1, "state has no regimes");
  require(st.P.rows() == M && st.P.cols() == M, "P has wrong shape");
  for (Eigen::Index m = 0; m < M; ++m) {
    require((st.P.row(m).array() >= 0.0).all(), "P has negative entries");
    require(std::abs(st.P.row(m).sum() - 1.0) <= 1e-12, "P row does not sum to one");
  }
  require(st.pi0.size() == M && std::abs(st.pi0.sum() - 1.0) <= 1e-12, "pi0 invalid");
  require((st.rho.array().abs() < 1.0).all(), "|rho| must be below one");
  require((st.sigma2_omega.array() > 0.0).all(), "sigma2_omega must be positive");
  for (const auto* sh : {&st.shrink_B, &st.shrink_A}) {
    require((sh->gamma.array() > 0.0).all() && (sh->scale.array() > 0.0).all() &&
                sh->global_scale > 0.0,
            "shrinkage states must be positive");
  }
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index m = 0; m < M; ++m) {
      const int k = st.kappa[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)];
      require(k >= 0 && static_cast<std::size_t>(k) < patterns.K(static_cast<std::size_t>(n)),
              "kappa out of range");
      const auto& pat = patterns.at(static_cast<std::size_t>(n), static_cast<std::size_t>(k));
      for (Eigen::Index i = 0; i < N; ++i) {
        if (pat.restricts(static_cast<int>(i))) {
          require(st.B[static_cast<std::size_t>(m)](n, i) == 0.0,
                  "B has a nonzero at a restricted position");
        }
      }
    }
  }
  for (int sv : st.s) require(sv >= 0 && sv < M, "regime index out of range");
  require(st.h.cols() == static_cast<Eigen::Index>(st.T()), "h has wrong length");
  if (st.mixture.size() > 0) {
    require((st.mixture.array() >= 0).all() && (st.mixture.array() <= 9).all(),
            "mixture indicator out of range");
  }
}

}  // namespace tvisvar
