#include "kdstr/modeling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>
#include <fftw3.h>

namespace kdstr {
namespace {

std::atomic<std::uint64_t> g_next_serial{1};
std::mutex g_fftw_mutex;

ModelArtifact blank(Technique t, const FitInput& in, int complexity) {
  ModelArtifact m;
  m.technique = t;
  m.complexity = complexity;
  m.num_features = in.num_features;
  m.num_predictors = in.num_predictors;
  m.serial = g_next_serial.fetch_add(1, std::memory_order_relaxed);
  return m;
}

double response_energy(const FitInput& in) {
  double e = 0.0;
  for (double v : in.responses) e += v * v;
  return e;
}

// ------------------------------------------------------------------- PLR

double plr_term(const std::vector<int>& exps, std::span<const double> z) {
  double v = 1.0;
  for (std::size_t d = 0; d < exps.size(); ++d)
    for (int p = 0; p < exps[d]; ++p) v *= z[d];
  return v;
}

std::vector<double> plr_eval(const ModelArtifact& m, const PlrPayload& p, std::span<const double> x) {
  const auto basis = monomials(m.num_predictors, p.degree);
  std::vector<double> z(m.num_predictors);
  for (int d = 0; d < m.num_predictors; ++d) z[d] = p.standardizer.apply(d, x[d]);
  std::vector<double> out(m.num_features, 0.0);
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const double term = plr_term(basis[j], z);
    for (int f = 0; f < m.num_features; ++f) out[f] += p.coefficients[f * basis.size() + j] * term;
  }
  return out;
}

Eigen::MatrixXd plr_design(const FitInput& in, const Standardizer& st, const std::vector<std::vector<int>>& basis) {
  const auto n = static_cast<Eigen::Index>(in.size());
  Eigen::MatrixXd a(n, static_cast<Eigen::Index>(basis.size()));
  std::vector<double> z(in.num_predictors);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto x = in.predictor(static_cast<std::size_t>(i));
    for (int d = 0; d < in.num_predictors; ++d) z[d] = st.apply(d, x[d]);
    for (std::size_t j = 0; j < basis.size(); ++j) a(i, static_cast<Eigen::Index>(j)) = plr_term(basis[j], z);
  }
  return a;
}

ModelArtifact fit_plr(const FitInput& in, int complexity) {
  ModelArtifact m = blank(Technique::PLR, in, complexity);
  PlrPayload p;
  p.standardizer = make_standardizer(in.bounds_lo, in.bounds_hi);
  const auto n = static_cast<std::int64_t>(in.size());
  // A single instance only supports the constant model.
  p.degree = n == 1 ? 0 : complexity - 1;
  const auto basis = monomials(in.num_predictors, p.degree);
  const auto nb = static_cast<Eigen::Index>(basis.size());

  const Eigen::MatrixXd a = plr_design(in, p.standardizer, basis);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(n), in.num_features);
  for (std::int64_t i = 0; i < n; ++i)
    for (int f = 0; f < in.num_features; ++f) y(i, f) = in.responses[i * in.num_features + f];

  // Minimum-norm least squares; rank deficiency is routine for small blocks.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  const Eigen::MatrixXd coef = cod.solve(y);
  p.coefficients.resize(static_cast<std::size_t>(in.num_features) * nb);
  for (int f = 0; f < in.num_features; ++f)
    for (Eigen::Index j = 0; j < nb; ++j) p.coefficients[f * nb + j] = coef(j, f);

  const double sse = (a * coef - y).squaredNorm();
  // Distinct points can always be interpolated at some degree, so the ladder
  // only ends once the design has full row rank or the fit is exact.
  m.saturated = n == 1 || cod.rank() >= n || sse <= 1e-24 * (1.0 + response_energy(in));
  m.payload = std::move(p);
  return m;
}

// ------------------------------------------------------------------- DCT

ModelArtifact fit_dct(const FitInput& in, int complexity) {
  const std::size_t n = in.size();
  if (static_cast<std::size_t>(complexity) > n)
    throw Error(ErrorCode::ComplexityExceedsData, "cannot keep " + std::to_string(complexity) +
                                                      " DCT coefficients of a length-" + std::to_string(n) +
                                                      " sequence");
  ModelArtifact m = blank(Technique::DCT, in, complexity);
  DctPayload p;
  bool all_exact = true;
  std::vector<double> seq(n);
  for (int f = 0; f < in.num_features; ++f) {
    for (std::size_t i = 0; i < n; ++i) seq[i] = in.responses[i * in.num_features + f];
    const auto spectrum = dct_ii(seq);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(spectrum[a]) > std::abs(spectrum[b]); });
    std::vector<int> kept(order.begin(), order.begin() + complexity);
    std::sort(kept.begin(), kept.end());
    DctSeries s;
    s.length = static_cast<int>(n);
    for (int idx : kept) {
      s.indices.push_back(idx);
      s.values.push_back(spectrum[idx]);
    }
    double scale = 0.0;
    for (double v : spectrum) scale = std::max(scale, std::abs(v));
    for (std::size_t r = static_cast<std::size_t>(complexity); r < n; ++r)
      if (std::abs(spectrum[order[r]]) > 1e-12 * scale) all_exact = false;
    p.features.push_back(std::move(s));
  }
  m.saturated = static_cast<std::size_t>(complexity) >= n || all_exact;
  m.payload = std::move(p);
  return m;
}

// ------------------------------------------------------------------- DTR

struct TreeBuilder {
  const FitInput& in;
  const Standardizer& st;
  int max_depth;
  std::vector<double> z;  // standardized predictors, n x k
  std::vector<DtrNode> nodes;
  bool depth_limited = false;

  double node_sse(const std::vector<std::size_t>& idx, std::vector<double>& mean) const {
    const int nf = in.num_features;
    mean.assign(nf, 0.0);
    for (auto i : idx)
      for (int f = 0; f < nf; ++f) mean[f] += in.responses[i * nf + f];
    for (auto& v : mean) v /= static_cast<double>(idx.size());
    double sse = 0.0;
    for (auto i : idx)
      for (int f = 0; f < nf; ++f) {
        const double r = in.responses[i * nf + f] - mean[f];
        sse += r * r;
      }
    return sse;
  }

  int build(std::vector<std::size_t> idx, int depth) {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    std::vector<double> mean;
    const double sse = node_sse(idx, mean);
    nodes[id].value = mean;
    if (idx.size() < 2 || sse <= 1e-24 * (1.0 + response_energy(in))) return id;

    const int k = in.num_predictors;
    const int nf = in.num_features;
    int best_dim = -1;
    double best_thr = 0.0;
    double best_sse = sse * (1.0 - 1e-12);
    std::vector<double> left_sum(nf), left_sq(nf), total_sum(nf, 0.0), total_sq(nf, 0.0);
    for (auto i : idx)
      for (int f = 0; f < nf; ++f) {
        const double v = in.responses[i * nf + f];
        total_sum[f] += v;
        total_sq[f] += v * v;
      }
    std::vector<std::size_t> sorted = idx;
    for (int dim = 0; dim < k; ++dim) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::size_t a, std::size_t b) { return z[a * k + dim] < z[b * k + dim]; });
      std::fill(left_sum.begin(), left_sum.end(), 0.0);
      std::fill(left_sq.begin(), left_sq.end(), 0.0);
      const double count = static_cast<double>(sorted.size());
      for (std::size_t pos = 0; pos + 1 < sorted.size(); ++pos) {
        const auto i = sorted[pos];
        for (int f = 0; f < nf; ++f) {
          const double v = in.responses[i * nf + f];
          left_sum[f] += v;
          left_sq[f] += v * v;
        }
        const double here = z[i * k + dim];
        const double next = z[sorted[pos + 1] * k + dim];
        if (!(next > here)) continue;
        const double nl = static_cast<double>(pos + 1);
        const double nr = count - nl;
        double split = 0.0;
        for (int f = 0; f < nf; ++f) {
          const double rs = total_sum[f] - left_sum[f];
          const double rq = total_sq[f] - left_sq[f];
          split += (left_sq[f] - left_sum[f] * left_sum[f] / nl) + (rq - rs * rs / nr);
        }
        if (split < best_sse) {
          best_sse = split;
          best_dim = dim;
          best_thr = 0.5 * (here + next);
        }
      }
    }
    if (best_dim < 0) return id;
    if (depth >= max_depth) {
      depth_limited = true;
      return id;
    }
    std::vector<std::size_t> left, right;
    for (auto i : idx) (z[i * k + best_dim] < best_thr ? left : right).push_back(i);
    nodes[id].dimension = best_dim;
    nodes[id].threshold = best_thr;
    nodes[id].value.clear();
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }
};

ModelArtifact fit_dtr(const FitInput& in, int complexity) {
  ModelArtifact m = blank(Technique::DTR, in, complexity);
  DtrPayload p;
  p.standardizer = make_standardizer(in.bounds_lo, in.bounds_hi);
  TreeBuilder b{in, p.standardizer, complexity, {}, {}, false};
  const std::size_t n = in.size();
  const int k = in.num_predictors;
  b.z.resize(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < k; ++d) b.z[i * k + d] = p.standardizer.apply(d, in.predictors[i * k + d]);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  b.build(std::move(all), 0);
  p.nodes = std::move(b.nodes);
  m.saturated = !b.depth_limited;
  m.payload = std::move(p);
  return m;
}

std::vector<double> dtr_eval(const DtrPayload& p, std::span<const double> x) {
  int node = 0;
  while (!p.nodes[node].is_leaf()) {
    const auto& nd = p.nodes[node];
    node = p.standardizer.apply(nd.dimension, x[nd.dimension]) < nd.threshold ? nd.left : nd.right;
  }
  return p.nodes[node].value;
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> region_bounds(const Dataset& d, const Region& r) {
  const int k = d.k();
  std::vector<double> lo(k, std::numeric_limits<double>::infinity());
  std::vector<double> hi(k, -std::numeric_limits<double>::infinity());
  lo[0] = d.times()[r.t_begin];
  hi[0] = d.times()[r.t_end];
  auto include = [&](int dim, double v) {
    lo[dim] = std::min(lo[dim], v);
    hi[dim] = std::max(hi[dim], v);
  };
  if (!r.outline.empty()) {
    for (const auto& p : r.outline) {
      include(1, p.x);
      if (k > 2) include(2, p.y);
    }
  } else {
    for (int s : r.sensors)
      for (int dim = 1; dim < k; ++dim) include(dim, d.coords(s)[dim - 1]);
  }
  return {lo, hi};
}

FitInput make_fit_input(const Dataset& d, std::span<const std::int64_t> instances, std::vector<double> bounds_lo,
                        std::vector<double> bounds_hi) {
  FitInput in;
  in.num_predictors = d.k();
  in.num_features = d.num_features();
  in.predictors.reserve(instances.size() * d.k());
  in.responses.reserve(instances.size() * d.num_features());
  for (auto idx : instances) {
    const auto key = d.key(idx);
    in.predictors.push_back(d.times()[key.timestep]);
    for (double c : d.coords(key.sensor)) in.predictors.push_back(c);
    for (double v : d.values(idx)) in.responses.push_back(v);
  }
  in.bounds_lo = std::move(bounds_lo);
  in.bounds_hi = std::move(bounds_hi);
  return in;
}

FitInput concatenate(std::span<const FitInput> inputs) {
  if (inputs.empty()) throw Error(ErrorCode::InvalidParams, "no inputs to concatenate");
  FitInput out;
  out.num_predictors = inputs.front().num_predictors;
  out.num_features = inputs.front().num_features;
  out.bounds_lo = inputs.front().bounds_lo;
  out.bounds_hi = inputs.front().bounds_hi;
  for (const auto& in : inputs) {
    out.predictors.insert(out.predictors.end(), in.predictors.begin(), in.predictors.end());
    out.responses.insert(out.responses.end(), in.responses.begin(), in.responses.end());
    for (int d = 0; d < out.num_predictors; ++d) {
      out.bounds_lo[d] = std::min(out.bounds_lo[d], in.bounds_lo[d]);
      out.bounds_hi[d] = std::max(out.bounds_hi[d], in.bounds_hi[d]);
    }
  }
  return out;
}

Standardizer make_standardizer(std::span<const double> lo, std::span<const double> hi) {
  Standardizer st;
  for (std::size_t d = 0; d < lo.size(); ++d) {
    st.center.push_back(0.5 * (lo[d] + hi[d]));
    const double half = 0.5 * (hi[d] - lo[d]);
    st.scale.push_back(half > 0.0 ? half : 1.0);
  }
  return st;
}

std::vector<std::vector<int>> monomials(int vars, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> e(vars, 0);
  // For each total degree, enumerate exponent vectors in descending lexicographic order.
  for (int total = 0; total <= degree; ++total) {
    auto rec = [&](auto&& self, int var, int remaining) -> void {
      if (var == vars - 1) {
        e[var] = remaining;
        out.push_back(e);
        return;
      }
      for (int p = remaining; p >= 0; --p) {
        e[var] = p;
        self(self, var + 1, remaining - p);
      }
    };
    if (vars == 0) {
      if (total == 0) out.push_back({});
      continue;
    }
    rec(rec, 0, total);
  }
  return out;
}

ModelArtifact fit(Technique technique, const FitInput& input, int complexity) {
  if (complexity < 1) throw Error(ErrorCode::InvalidParams, "complexity must be at least 1");
  if (input.size() == 0) throw Error(ErrorCode::InvalidParams, "cannot fit an empty input");
  switch (technique) {
    case Technique::PLR: return fit_plr(input, complexity);
    case Technique::DCT: return fit_dct(input, complexity);
    case Technique::DTR: return fit_dtr(input, complexity);
  }
  throw Error(ErrorCode::InvalidParams, "unknown technique");
}

ModelArtifact fit_cluster(Technique technique, std::span<const FitInput> inputs, int complexity) {
  if (inputs.size() == 1) return fit(technique, inputs.front(), complexity);
  return fit(technique, concatenate(inputs), complexity);
}

std::vector<double> predict(const ModelArtifact& m, std::span<const double> x, std::optional<std::size_t> position) {
  if (const auto* plr = std::get_if<PlrPayload>(&m.payload)) return plr_eval(m, *plr, x);
  if (const auto* dtr = std::get_if<DtrPayload>(&m.payload)) return dtr_eval(*dtr, x);
  const auto& dct = std::get<DctPayload>(m.payload);
  if (!position || dct.features.empty() || *position >= static_cast<std::size_t>(dct.features.front().length))
    throw Error(ErrorCode::OutsideModelDomain, "DCT models only reconstruct positions of their stored sequence");
  std::vector<double> out;
  for (const auto& s : dct.features) out.push_back(idct_at(s, *position));
  return out;
}

std::vector<double> predict_all(const ModelArtifact& m, const FitInput& input) {
  const std::size_t n = input.size();
  std::vector<double> out;
  out.reserve(n * m.num_features);
  if (const auto* dct = std::get_if<DctPayload>(&m.payload)) {
    out.assign(n * m.num_features, 0.0);
    for (std::size_t f = 0; f < dct->features.size(); ++f) {
      const auto& s = dct->features[f];
      if (static_cast<std::size_t>(s.length) != n)
        throw Error(ErrorCode::OutsideModelDomain, "input length differs from the DCT sequence length");
      const auto seq = idct(s);
      for (std::size_t i = 0; i < n; ++i) out[i * m.num_features + f] = seq[i];
    }
    return out;
  }
  if (const auto* plr = std::get_if<PlrPayload>(&m.payload)) {
    const auto basis = monomials(m.num_predictors, plr->degree);
    const Eigen::MatrixXd a = plr_design(input, plr->standardizer, basis);
    const auto nb = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd coef(nb, m.num_features);
    for (int f = 0; f < m.num_features; ++f)
      for (Eigen::Index j = 0; j < nb; ++j) coef(j, f) = plr->coefficients[f * nb + j];
    const Eigen::MatrixXd pred = a * coef;
    for (std::size_t i = 0; i < n; ++i)
      for (int f = 0; f < m.num_features; ++f) out.push_back(pred(static_cast<Eigen::Index>(i), f));
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = predict(m, input.predictor(i));
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::vector<double> dct_ii(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> in(x.begin(), x.end());
  std::vector<double> out(n);
  if (n == 0) return out;
  fftw_plan plan;
  {
    std::lock_guard lock(g_fftw_mutex);
    plan = fftw_plan_r2r_1d(n, in.data(), out.data(), FFTW_REDFT10, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(g_fftw_mutex);
    fftw_destroy_plan(plan);
  }
  // FFTW's REDFT10 is 2 * sum x_j cos(pi k (j + 1/2) / n); rescale to orthonormal.
  out[0] *= std::sqrt(1.0 / (4.0 * n));
  for (int k = 1; k < n; ++k) out[k] *= std::sqrt(1.0 / (2.0 * n));
  return out;
}

std::vector<double> idct(const DctSeries& s) {
  const int n = s.length;
  std::vector<double> in(n, 0.0);
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  // REDFT01 computes X0 + 2 * sum X_k cos(pi k (j + 1/2) / n).
  for (std::size_t j = 0; j < s.indices.size(); ++j) {
    const int k = s.indices[j];
    in[k] = k == 0 ? s.values[j] * std::sqrt(1.0 / n) : s.values[j] / std::sqrt(2.0 * n);
  }
  fftw_plan plan;
  {
    std::lock_guard lock(g_fftw_mutex);
    plan = fftw_plan_r2r_1d(n, in.data(), out.data(), FFTW_REDFT01, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(g_fftw_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

double idct_at(const DctSeries& s, std::size_t position) {
  const double n = s.length;
  double v = 0.0;
  for (std::size_t j = 0; j < s.indices.size(); ++j) {
    const int k = s.indices[j];
    const double norm = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    v += norm * s.values[j] * std::cos(std::numbers::pi * k * (static_cast<double>(position) + 0.5) / n);
  }
  return v;
}

}  // namespace kdstr
