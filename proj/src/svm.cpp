#include "leakdet/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "leakdet/error.hpp"
#include "leakdet/io.hpp"

namespace leakdet {

namespace {

constexpr double kTau = 1e-12;
constexpr std::string_view kMagic = "LEAKDET-SVM";
constexpr int kFormatVersion = 1;

}  // namespace

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d)
    : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != rows * cols) fail(ErrorKind::validation, "matrix data size mismatch");
}

KernelKind parse_kernel(std::string_view name) {
  if (name == "linear") return KernelKind::linear;
  if (name == "rbf") return KernelKind::rbf;
  fail(ErrorKind::config, "unknown kernel '" + std::string(name) + "'");
}

std::string_view kernel_name(KernelKind k) noexcept {
  return k == KernelKind::linear ? "linear" : "rbf";
}

void KernelSpec::validate() const {
  if (kind == KernelKind::rbf && !(gamma > 0.0 && std::isfinite(gamma))) {
    fail(ErrorKind::config, "rbf gamma must be positive");
  }
}

double KernelSpec::operator()(std::span<const double> a, std::span<const double> b) const {
  double acc = 0.0;
  if (kind == KernelKind::linear) {
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
    return acc;
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return std::exp(-gamma * acc);
}

Matrix gram_matrix(const Matrix& x, const KernelSpec& kernel) {
  const std::size_t n = x.rows;
  Matrix k(n, n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = i; j < n; ++j) k(i, j) = kernel(x.row(i), x.row(j));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) k(i, j) = k(j, i);
  }
  return k;
}

Matrix gram_matrix_serial(const Matrix& x, const KernelSpec& kernel) {
  const std::size_t n = x.rows;
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      k(i, j) = kernel(x.row(i), x.row(j));
      k(j, i) = k(i, j);
    }
  }
  return k;
}

void Standardizer::apply_row(std::span<const double> in, std::span<double> out) const {
  if (in.size() != mean.size()) fail(ErrorKind::validation, "feature arity mismatch");
  for (std::size_t j = 0; j < in.size(); ++j) {
    out[j] = std[j] > 0.0 ? (in[j] - mean[j]) / std[j] : 0.0;
  }
}

Matrix Standardizer::apply(const Matrix& x) const {
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) apply_row(x.row(i), out.row(i));
  return out;
}

std::uint64_t Standardizer::fingerprint() const {
  return io::fingerprint(std, io::fingerprint(mean));
}

Standardizer fit_standardizer(const Matrix& x) {
  if (x.rows == 0) fail(ErrorKind::validation, "cannot fit a standardizer on zero rows");
  Standardizer s;
  s.mean.assign(x.cols, 0.0);
  s.std.assign(x.cols, 0.0);
  const double n = static_cast<double>(x.rows);
  for (std::size_t j = 0; j < x.cols; ++j) {
    double m = 0.0;
    bool constant = true;
    for (std::size_t i = 0; i < x.rows; ++i) {
      m += x(i, j);
      constant = constant && x(i, j) == x(0, j);
    }
    m /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) ss += (x(i, j) - m) * (x(i, j) - m);
    s.mean[j] = m;
    s.std[j] = constant ? 0.0 : std::sqrt(ss / n);
  }
  return s;
}

DualSolution smo_solve(const Matrix& gram, std::span<const int> y, double C,
                       const SolverOptions& opts) {
  const std::size_t n = y.size();
  if (gram.rows != n || gram.cols != n) fail(ErrorKind::validation, "gram matrix size mismatch");
  if (!(C > 0.0)) fail(ErrorKind::config, "C must be positive");

  DualSolution sol;
  auto& alpha = sol.alpha;
  alpha.assign(n, 0.0);
  // G = Q alpha - 1 with Q_ij = y_i y_j K_ij.
  std::vector<double> grad(n, -1.0);
  auto in_up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < C : alpha[t] > 0.0; };
  auto in_low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < C; };

  while (sol.iterations < opts.max_iterations) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * grad[t] >= gmax) {
        gmax = -y[t] * grad[t];
        i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t j = n;
    double best = std::numeric_limits<double>::infinity();
    if (i < n) {
      for (std::size_t t = 0; t < n; ++t) {
        if (!in_low(t)) continue;
        const double yg = y[t] * grad[t];
        gmax2 = std::max(gmax2, yg);
        const double diff = gmax + yg;
        if (diff > 0.0) {
          double quad = gram(i, i) + gram(t, t) - 2.0 * gram(i, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best) {
            best = obj;
            j = t;
          }
        }
      }
    }
    if (i == n || j == n || gmax + gmax2 < opts.tol) {
      sol.converged = true;
      break;
    }
    ++sol.iterations;

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    double quad = gram(i, i) + gram(j, j) - 2.0 * gram(i, j);
    if (quad <= 0.0) quad = kTau;
    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double di = (alpha[i] - old_i) * y[i];
    const double dj = (alpha[j] - old_j) * y[j];
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (gram(t, i) * di + gram(t, j) * dj);
    }
  }

  // Bias from free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  sol.bias = -rho;

  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (1.0 - grad[t]);
  sol.dual_objective = 0.5 * obj;
  return sol;
}

std::vector<double> SvmModel::primal_weights() const {
  if (kernel.kind != KernelKind::linear) fail(ErrorKind::config, "primal weights need a linear kernel");
  std::vector<double> w(support_vectors.cols, 0.0);
  for (std::size_t i = 0; i < support_vectors.rows; ++i) {
    auto sv = support_vectors.row(i);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += dual_coefs[i] * sv[k];
  }
  return w;
}

SvmModel train(const Matrix& x, std::span<const std::uint8_t> y, const TrainOptions& opts,
               std::vector<std::string> feature_order) {
  opts.kernel.validate();
  if (!(opts.C > 0.0)) fail(ErrorKind::config, "C must be positive");
  if (x.rows != y.size()) fail(ErrorKind::validation, "feature/label row mismatch");
  if (x.rows == 0) fail(ErrorKind::validation, "empty training set");
  for (double v : x.data) {
    if (!std::isfinite(v)) fail(ErrorKind::validation, "non-finite feature value");
  }
  std::vector<int> sign(y.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sign[i] = y[i] ? 1 : -1;
    positives += y[i] ? 1 : 0;
  }
  if (positives == 0 || positives == y.size()) {
    fail(ErrorKind::validation, "training labels contain a single class");
  }
  if (!feature_order.empty() && feature_order.size() != x.cols) {
    fail(ErrorKind::validation, "feature name count does not match columns");
  }

  SvmModel model;
  model.kernel = opts.kernel;
  model.C = opts.C;
  model.standardizer = fit_standardizer(x);
  model.feature_order = std::move(feature_order);
  const Matrix xs = model.standardizer.apply(x);
  const DualSolution sol = smo_solve(gram_matrix(xs, opts.kernel), sign, opts.C, opts.solver);
  model.bias = sol.bias;
  model.converged = sol.converged;
  model.iterations = sol.iterations;
  std::vector<double> sv_data;
  for (std::size_t i = 0; i < xs.rows; ++i) {
    if (sol.alpha[i] <= 0.0) continue;
    model.dual_coefs.push_back(sol.alpha[i] * sign[i]);
    auto r = xs.row(i);
    sv_data.insert(sv_data.end(), r.begin(), r.end());
  }
  model.support_vectors = Matrix(model.dual_coefs.size(), xs.cols, std::move(sv_data));
  return model;
}

double decision_function(const SvmModel& model, std::span<const double> x_raw) {
  if (x_raw.size() != model.standardizer.mean.size()) {
    fail(ErrorKind::validation, "input has " + std::to_string(x_raw.size()) +
                                    " features, model expects " +
                                    std::to_string(model.standardizer.mean.size()));
  }
  std::vector<double> z(x_raw.size());
  model.standardizer.apply_row(x_raw, z);
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.rows; ++i) {
    f += model.dual_coefs[i] * model.kernel(model.support_vectors.row(i), z);
  }
  return f;
}

std::uint8_t predict(const SvmModel& model, std::span<const double> x_raw) {
  return decision_function(model, x_raw) > 0.0 ? 1 : 0;
}

std::vector<std::uint8_t> predict_all(const SvmModel& model, const Matrix& x_raw) {
  std::vector<std::uint8_t> out(x_raw.rows);
  for (std::size_t i = 0; i < x_raw.rows; ++i) out[i] = predict(model, x_raw.row(i));
  return out;
}

namespace {

std::string hex_list(std::span<const double> v) {
  std::string out;
  for (double d : v) out += " " + io::format_hex(d);
  return out;
}

template <typename T>
std::string int_list(const T& v) {
  std::string out;
  for (auto d : v) out += " " + std::to_string(d);
  return out;
}

// Splits "key rest..." lines into a key -> tokens map, keeping sv rows in order.
struct ParsedModel {
  std::map<std::string, std::vector<std::string>> fields;
  std::vector<std::vector<std::string>> sv_rows;
};

std::vector<std::string> tokens_of(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream ss{std::string(line)};
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

const std::vector<std::string>& field(const ParsedModel& p, const std::string& key) {
  auto it = p.fields.find(key);
  if (it == p.fields.end()) fail(ErrorKind::format, "model file missing '" + key + "'");
  return it->second;
}

const std::string& scalar(const ParsedModel& p, const std::string& key) {
  const auto& v = field(p, key);
  if (v.size() != 1) fail(ErrorKind::format, "model field '" + key + "' expects one value");
  return v.front();
}

double hex_scalar(const ParsedModel& p, const std::string& key) {
  return io::parse_double(scalar(p, key));
}

std::size_t size_scalar(const ParsedModel& p, const std::string& key) {
  try {
    return static_cast<std::size_t>(std::stoull(scalar(p, key)));
  } catch (const std::logic_error&) {
    fail(ErrorKind::format, "model field '" + key + "' is not an integer");
  }
}

std::vector<double> hex_vector(const std::vector<std::string>& toks, std::size_t expected,
                               const std::string& key) {
  if (toks.size() != expected) fail(ErrorKind::format, "model field '" + key + "' has wrong length");
  std::vector<double> out;
  for (const auto& t : toks) out.push_back(io::parse_double(t));
  return out;
}

template <std::size_t N>
std::array<std::size_t, N> size_array(const ParsedModel& p, const std::string& key) {
  const auto& toks = field(p, key);
  if (toks.size() != N) fail(ErrorKind::format, "model field '" + key + "' has wrong length");
  std::array<std::size_t, N> out{};
  try {
    for (std::size_t i = 0; i < N; ++i) out[i] = static_cast<std::size_t>(std::stoull(toks[i]));
  } catch (const std::logic_error&) {
    fail(ErrorKind::format, "model field '" + key + "' is not an integer list");
  }
  return out;
}

}  // namespace

std::string format_model(const SvmModel& model) {
  const std::size_t dim = model.standardizer.mean.size();
  std::string out;
  out += std::string(kMagic) + " " + std::to_string(kFormatVersion) + "\n";
  out += "kernel " + std::string(kernel_name(model.kernel.kind)) + "\n";
  out += "gamma " + io::format_hex(model.kernel.gamma) + "\n";
  out += "C " + io::format_hex(model.C) + "\n";
  out += "bias " + io::format_hex(model.bias) + "\n";
  out += "converged " + std::to_string(model.converged ? 1 : 0) + "\n";
  out += "iterations " + std::to_string(model.iterations) + "\n";
  out += "dim " + std::to_string(dim) + "\n";
  out += "n_sv " + std::to_string(model.support_vectors.rows) + "\n";
  out += "features";
  for (const auto& f : model.feature_order) out += " " + f;
  out += "\n";
  out += "standardizer_mean" + hex_list(model.standardizer.mean) + "\n";
  out += "standardizer_std" + hex_list(model.standardizer.std) + "\n";
  if (model.meta) {
    const auto& m = *model.meta;
    out += "meta 1\n";
    out += "meta.granularity_hz " + std::to_string(m.banding.granularity_hz) + "\n";
    out += "meta.metric " + std::string(metric_name(m.banding.metric)) + "\n";
    out += "meta.max_freq_hz " + io::format_hex(m.max_freq_hz) + "\n";
    out += "meta.band_pair" +
           hex_list(std::vector<double>{m.pair.first.lo_hz, m.pair.first.hi_hz, m.pair.second.lo_hz,
                                        m.pair.second.hi_hz}) +
           "\n";
    out += "meta.band_pair_name " + m.pair.name() + "\n";
    out += "meta.window_s " + std::to_string(m.window.window_s) + "\n";
    out += "meta.overlap_s " + std::to_string(m.window.overlap_s) + "\n";
    out += "meta.autocorr_lags" + int_list(m.features.autocorr_lags) + "\n";
    out += "meta.pct_lags" + int_list(m.features.pct_lags) + "\n";
    out += "meta.entropy_quantiles" + hex_list(m.features.entropy_quantiles) + "\n";
    out += "meta.apen_m " + std::to_string(m.features.apen_m) + "\n";
    out += "meta.apen_r_factor " + io::format_hex(m.features.apen_r_factor) + "\n";
    out += "meta.n_edge_bands " + std::to_string(m.edges.bands.size()) + "\n";
    for (std::size_t b = 0; b < m.edges.bands.size(); ++b) {
      out += "meta.edge_band." + std::to_string(b) +
             hex_list(std::vector<double>{m.edges.bands[b].lo_hz, m.edges.bands[b].hi_hz}) + "\n";
      out += "meta.edges." + std::to_string(b) + hex_list(m.edges.edges[b]) + "\n";
    }
  } else {
    out += "meta 0\n";
  }
  for (std::size_t i = 0; i < model.support_vectors.rows; ++i) {
    out += "sv " + io::format_hex(model.dual_coefs[i]) + hex_list(model.support_vectors.row(i)) + "\n";
  }
  out += "end\n";
  return out;
}

SvmModel parse_model(std::string_view text) {
  ParsedModel p;
  bool header = false;
  bool ended = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    auto toks = tokens_of(line);
    if (toks.empty()) continue;
    if (!header) {
      if (toks.size() != 2 || toks[0] != kMagic) fail(ErrorKind::format, "not a leakdet model file");
      if (toks[1] != std::to_string(kFormatVersion)) {
        fail(ErrorKind::format, "unsupported model version " + toks[1]);
      }
      header = true;
      continue;
    }
    if (toks[0] == "end") {
      ended = true;
      break;
    }
    std::string key = toks[0];
    toks.erase(toks.begin());
    if (key == "sv") p.sv_rows.push_back(std::move(toks));
    else p.fields[key] = std::move(toks);
  }
  if (!header) fail(ErrorKind::format, "empty model file");
  if (!ended) fail(ErrorKind::format, "truncated model file");

  SvmModel m;
  m.kernel.kind = parse_kernel(scalar(p, "kernel"));
  m.kernel.gamma = hex_scalar(p, "gamma");
  m.C = hex_scalar(p, "C");
  m.bias = hex_scalar(p, "bias");
  m.converged = size_scalar(p, "converged") != 0;
  m.iterations = size_scalar(p, "iterations");
  const std::size_t dim = size_scalar(p, "dim");
  const std::size_t n_sv = size_scalar(p, "n_sv");
  m.feature_order = field(p, "features");
  if (!m.feature_order.empty() && m.feature_order.size() != dim) {
    fail(ErrorKind::format, "feature list length does not match dim");
  }
  m.standardizer.mean = hex_vector(field(p, "standardizer_mean"), dim, "standardizer_mean");
  m.standardizer.std = hex_vector(field(p, "standardizer_std"), dim, "standardizer_std");
  if (p.sv_rows.size() != n_sv) fail(ErrorKind::format, "support vector count mismatch");
  std::vector<double> sv;
  for (const auto& row : p.sv_rows) {
    auto vals = hex_vector(row, dim + 1, "sv");
    m.dual_coefs.push_back(vals[0]);
    sv.insert(sv.end(), vals.begin() + 1, vals.end());
  }
  m.support_vectors = Matrix(n_sv, dim, std::move(sv));

  if (scalar(p, "meta") == "1") {
    PipelineMeta meta;
    meta.banding.granularity_hz = static_cast<int>(size_scalar(p, "meta.granularity_hz"));
    meta.banding.metric = parse_metric(scalar(p, "meta.metric"));
    meta.max_freq_hz = hex_scalar(p, "meta.max_freq_hz");
    auto bp = hex_vector(field(p, "meta.band_pair"), 4, "meta.band_pair");
    meta.pair = normalize_pair({bp[0], bp[1]}, {bp[2], bp[3]});
    meta.window.window_s = size_scalar(p, "meta.window_s");
    meta.window.overlap_s = size_scalar(p, "meta.overlap_s");
    meta.features.autocorr_lags = size_array<5>(p, "meta.autocorr_lags");
    meta.features.pct_lags = size_array<3>(p, "meta.pct_lags");
    auto q = hex_vector(field(p, "meta.entropy_quantiles"), 4, "meta.entropy_quantiles");
    std::copy(q.begin(), q.end(), meta.features.entropy_quantiles.begin());
    meta.features.apen_m = size_scalar(p, "meta.apen_m");
    meta.features.apen_r_factor = hex_scalar(p, "meta.apen_r_factor");
    const std::size_t n_edge = size_scalar(p, "meta.n_edge_bands");
    for (std::size_t b = 0; b < n_edge; ++b) {
      auto eb = hex_vector(field(p, "meta.edge_band." + std::to_string(b)), 2, "meta.edge_band");
      const auto& etoks = field(p, "meta.edges." + std::to_string(b));
      meta.edges.bands.push_back({eb[0], eb[1]});
      meta.edges.edges.push_back(hex_vector(etoks, etoks.size(), "meta.edges"));
    }
    meta.banding.validate();
    meta.window.validate();
    meta.features.validate(meta.window);
    m.meta = std::move(meta);
  }
  m.kernel.validate();
  return m;
}

void save_model(const SvmModel& model, const std::filesystem::path& path) {
  io::write_atomic(path, format_model(model));
}

SvmModel load_model(const std::filesystem::path& path) {
  return parse_model(io::read_file(path));
}

}  // namespace leakdet
