#pragma once

// Feature-level fusion: concatenation, bilinear pooling, compact bilinear
// pooling (tensor sketch) and factorized bilinear coding, plus the pairwise
// and quadruple fusion protocols with missing-modality handling.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "dealerid/core.hpp"
#include "dealerid/embed.hpp"

namespace dealerid {

enum class Strategy { concat, bilinear, compact_bilinear, fbc };
enum class Protocol { post_level, homepage_level, text_source, image_source, quadruple };

[[nodiscard]] inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::concat: return "concat";
    case Strategy::bilinear: return "bilinear";
    case Strategy::compact_bilinear: return "compact_bilinear";
    case Strategy::fbc: return "fbc";
  }
  return "?";
}

[[nodiscard]] inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::post_level: return "post_level";
    case Protocol::homepage_level: return "homepage_level";
    case Protocol::text_source: return "text_source";
    case Protocol::image_source: return "image_source";
    case Protocol::quadruple: return "quadruple";
  }
  return "?";
}

[[nodiscard]] inline Strategy parse_strategy(const std::string& s) {
  for (auto v : {Strategy::concat, Strategy::bilinear, Strategy::compact_bilinear, Strategy::fbc})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown fusion strategy: " + s);
}

[[nodiscard]] inline Protocol parse_protocol(const std::string& s) {
  for (auto v : {Protocol::post_level, Protocol::homepage_level, Protocol::text_source,
                 Protocol::image_source, Protocol::quadruple})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown fusion protocol: " + s);
}

// ---------------------------------------------------------------------------
// Factorized bilinear coding dictionary

/// k atoms b_l = vec(U_l V_l^T) with U_l in R^{p x r}, V_l in R^{q x r}.
/// The Gram matrix of the vectorized atoms is precomputed on construction.
class FbcDictionary {
 public:
  static constexpr double kMaxCondition = 1e12;

  FbcDictionary(std::vector<Eigen::MatrixXd> u, std::vector<Eigen::MatrixXd> v, double lambda)
      : u_(std::move(u)), v_(std::move(v)), lambda_(lambda) {
    if (u_.empty() || u_.size() != v_.size())
      throw ConfigError("FBC dictionary needs k >= 1 matching U and V factors");
    if (!(lambda_ >= 0.0)) throw ConfigError("FBC lambda must be nonnegative");
    p_ = static_cast<std::size_t>(u_.front().rows());
    q_ = static_cast<std::size_t>(v_.front().rows());
    r_ = static_cast<std::size_t>(u_.front().cols());
    if (p_ == 0 || q_ == 0 || r_ == 0) throw ConfigError("FBC factors must be non-empty");
    for (std::size_t l = 0; l < u_.size(); ++l) {
      if (static_cast<std::size_t>(u_[l].rows()) != p_ || static_cast<std::size_t>(u_[l].cols()) != r_ ||
          static_cast<std::size_t>(v_[l].rows()) != q_ || static_cast<std::size_t>(v_[l].cols()) != r_)
        throw ConfigError("FBC atoms must share p, q and r");
    }
    const auto k = u_.size();
    u_cat_.resize(static_cast<Eigen::Index>(p_), static_cast<Eigen::Index>(r_ * k));
    v_cat_.resize(static_cast<Eigen::Index>(q_), static_cast<Eigen::Index>(r_ * k));
    for (std::size_t l = 0; l < k; ++l) {
      u_cat_.middleCols(static_cast<Eigen::Index>(l * r_), static_cast<Eigen::Index>(r_)) = u_[l];
      v_cat_.middleCols(static_cast<Eigen::Index>(l * r_), static_cast<Eigen::Index>(r_)) = v_[l];
    }
    // <b_l, b_m> = sum_{s,t} (u_ls . u_mt)(v_ls . v_mt) = P ((U^T U) o (V^T V)) P^T
    const Eigen::MatrixXd had = (u_cat_.transpose() * u_cat_).cwiseProduct(v_cat_.transpose() * v_cat_);
    gram_ = pool_rows(pool_rows(had).transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxCondition) throw DataError("degenerate dictionary");
    gram_ldlt_ = gram_.ldlt();
  }

  /// Entries i.i.d. uniform on [-1/sqrt(r), 1/sqrt(r)].
  static FbcDictionary random(std::size_t p, std::size_t q, std::size_t k, std::size_t r, double lambda,
                              std::uint64_t seed) {
    if (k == 0 || r == 0) throw ConfigError("FBC k and r must be >= 1");
    std::mt19937_64 rng(seed);
    const double a = 1.0 / std::sqrt(static_cast<double>(r));
    std::uniform_real_distribution<double> dist(-a, a);
    std::vector<Eigen::MatrixXd> u(k), v(k);
    for (std::size_t l = 0; l < k; ++l) {
      u[l].resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(r));
      v[l].resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(r));
      for (Eigen::Index c = 0; c < u[l].cols(); ++c)
        for (Eigen::Index i = 0; i < u[l].rows(); ++i) u[l](i, c) = dist(rng);
      for (Eigen::Index c = 0; c < v[l].cols(); ++c)
        for (Eigen::Index i = 0; i < v[l].rows(); ++i) v[l](i, c) = dist(rng);
    }
    return FbcDictionary(std::move(u), std::move(v), lambda);
  }

  [[nodiscard]] std::size_t k() const { return u_.size(); }
  [[nodiscard]] std::size_t r() const { return r_; }
  [[nodiscard]] std::size_t p() const { return p_; }
  [[nodiscard]] std::size_t q() const { return q_; }
  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] const Eigen::MatrixXd& u(std::size_t l) const { return u_.at(l); }
  [[nodiscard]] const Eigen::MatrixXd& v(std::size_t l) const { return v_.at(l); }
  [[nodiscard]] const Eigen::MatrixXd& gram() const { return gram_; }

  /// Rank-pooled correlations h_l = sum_s (U_l^(s) . x)(V_l^(s) . y) = <x y^T, U_l V_l^T>.
  [[nodiscard]] Eigen::VectorXd correlations(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    const Eigen::VectorXd prod = (u_cat_.transpose() * x).cwiseProduct(v_cat_.transpose() * y);
    return pool_rows(prod);
  }

  /// Gram-corrected code before shrinkage.
  [[nodiscard]] Eigen::VectorXd raw_code(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    return gram_ldlt_.solve(correlations(x, y));
  }

  /// Sparse code: sign(c') * max(|c'| - lambda/2, 0).
  [[nodiscard]] Eigen::VectorXd encode(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    if (static_cast<std::size_t>(x.size()) != p_ || static_cast<std::size_t>(y.size()) != q_)
      throw DataError("FBC input dims (" + std::to_string(x.size()) + ", " + std::to_string(y.size()) +
                      ") do not match dictionary (" + std::to_string(p_) + ", " + std::to_string(q_) + ")");
    Eigen::VectorXd c = raw_code(x, y);
    const double t = lambda_ / 2.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double mag = std::max(std::abs(c[i]) - t, 0.0);
      c[i] = mag == 0.0 ? 0.0 : std::copysign(mag, c[i]);
    }
    return c;
  }

  /// ||x y^T - sum_l c_l U_l V_l^T||_F^2 + lambda ||c||_1.
  [[nodiscard]] double objective(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& c) const {
    Eigen::MatrixXd resid = x * y.transpose();
    for (std::size_t l = 0; l < k(); ++l) resid -= c[static_cast<Eigen::Index>(l)] * u_[l] * v_[l].transpose();
    return resid.squaredNorm() + lambda_ * c.lpNorm<1>();
  }

  /// Writes the factors into a vector store: "fbc_meta" = [k, r, p, q, lambda],
  /// "fbc_u_<l>" / "fbc_v_<l>" column-major.
  void save(VectorStore& store) const {
    const std::vector<double> meta{static_cast<double>(k()), static_cast<double>(r_), static_cast<double>(p_),
                                   static_cast<double>(q_), lambda_};
    store.write("fbc_meta", meta);
    for (std::size_t l = 0; l < k(); ++l) {
      store.write("fbc_u_" + std::to_string(l), std::span<const double>(u_[l].data(), u_[l].size()));
      store.write("fbc_v_" + std::to_string(l), std::span<const double>(v_[l].data(), v_[l].size()));
    }
  }

  /// Store values are float32, so a loaded dictionary matches the saved one to float precision.
  static FbcDictionary load(const VectorStore& store) {
    const auto meta = store.read("fbc_meta");
    if (meta.size() != 5) throw DataError("fbc_meta must hold 5 values");
    const auto k = static_cast<std::size_t>(meta[0]);
    const auto r = static_cast<Eigen::Index>(meta[1]);
    const auto p = static_cast<Eigen::Index>(meta[2]);
    const auto q = static_cast<Eigen::Index>(meta[3]);
    std::vector<Eigen::MatrixXd> u(k), v(k);
    for (std::size_t l = 0; l < k; ++l) {
      const auto uu = store.read("fbc_u_" + std::to_string(l));
      const auto vv = store.read("fbc_v_" + std::to_string(l));
      if (static_cast<Eigen::Index>(uu.size()) != p * r || static_cast<Eigen::Index>(vv.size()) != q * r)
        throw DataError("fbc factor " + std::to_string(l) + " has the wrong size");
      u[l] = Eigen::Map<const Eigen::MatrixXd>(uu.data(), p, r);
      v[l] = Eigen::Map<const Eigen::MatrixXd>(vv.data(), q, r);
    }
    return FbcDictionary(std::move(u), std::move(v), meta[4]);
  }

 private:
  // P: sums each block of r consecutive rows into one row (k x rk binary pooling).
  [[nodiscard]] Eigen::MatrixXd pool_rows(const Eigen::MatrixXd& m) const {
    const auto k = static_cast<Eigen::Index>(u_.size());
    const auto r = static_cast<Eigen::Index>(r_);
    Eigen::MatrixXd out(k, m.cols());
    for (Eigen::Index l = 0; l < k; ++l) out.row(l) = m.middleRows(l * r, r).colwise().sum();
    return out;
  }

  std::vector<Eigen::MatrixXd> u_;
  std::vector<Eigen::MatrixXd> v_;
  double lambda_;
  std::size_t p_ = 0, q_ = 0, r_ = 0;
  Eigen::MatrixXd u_cat_;
  Eigen::MatrixXd v_cat_;
  Eigen::MatrixXd gram_;
  Eigen::LDLT<Eigen::MatrixXd> gram_ldlt_;
};

struct FbcParams {
  std::size_t k = 64;
  std::size_t r = 2;
  double lambda = 1e-3;
  std::uint64_t seed = 0;
};

struct FusionConfig {
  Strategy strategy = Strategy::concat;
  Protocol protocol = Protocol::quadruple;
  std::size_t sketch_dim = 1024;
  std::uint64_t sketch_seed = 0;
  bool bilinear_normalize = true;  // signed square root then L2
  FbcParams fbc;
};

struct FusedFeature {
  std::vector<double> values;
  FusionConfig provenance;
  PresenceMask mask_used;

  [[nodiscard]] std::size_t dim() const { return values.size(); }
};

/// Which of the two pair inputs are present.
struct PairPresence {
  bool first = true;
  bool second = true;
};

// ---------------------------------------------------------------------------
// Concatenation

[[nodiscard]] inline std::vector<double> concat_values(std::span<const FeatureVector* const> parts) {
  std::size_t total = 0;
  for (const auto* p : parts) total += p->dim();
  std::vector<double> out;
  out.reserve(total);
  for (const auto* p : parts) out.insert(out.end(), p->values.begin(), p->values.end());
  return out;
}

/// Order-preserving concatenation. Missing parts are expected to arrive as zero vectors.
[[nodiscard]] inline FusedFeature fuse_concat(std::span<const FeatureVector> parts, FusionConfig cfg = {}) {
  if (parts.size() < 2) throw DataError("concatenation needs at least two parts");
  std::vector<const FeatureVector*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  cfg.strategy = Strategy::concat;
  return FusedFeature{concat_values(ptrs), cfg, PresenceMask{}};
}

// ---------------------------------------------------------------------------
// Bilinear pooling

/// Flattened outer product x y^T, row-major, length p*q.
[[nodiscard]] inline std::vector<double> bilinear_raw(std::span<const double> x, std::span<const double> y) {
  std::vector<double> z(x.size() * y.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) z[i * y.size() + j] = x[i] * y[j];
  return z;
}

/// Signed square root followed by L2 normalization (zero vectors stay zero).
inline void signed_sqrt_l2(std::vector<double>& z) {
  double norm = 0.0;
  for (double& v : z) {
    v = std::copysign(std::sqrt(std::abs(v)), v);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& v : z) v /= norm;
}

namespace detail {

inline const FeatureVector* lone_present(const FeatureVector& x, const FeatureVector& y, PairPresence pr) {
  if (!pr.first && !pr.second) throw DataError("no modality present");
  if (pr.first && !pr.second) return &x;
  if (!pr.first && pr.second) return &y;
  return nullptr;
}

}  // namespace detail

/// Z = x y^T flattened. When exactly one input is missing the present vector is returned unchanged.
[[nodiscard]] inline FusedFeature fuse_bilinear(const FeatureVector& x, const FeatureVector& y,
                                                PairPresence presence = {}, bool normalize = true) {
  FusionConfig cfg;
  cfg.strategy = Strategy::bilinear;
  cfg.bilinear_normalize = normalize;
  if (const auto* lone = detail::lone_present(x, y, presence)) return FusedFeature{lone->values, cfg, {}};
  if (x.dim() == 0 || y.dim() == 0) throw DataError("bilinear inputs must be non-empty");
  auto z = bilinear_raw(x.values, y.values);
  if (normalize) signed_sqrt_l2(z);
  return FusedFeature{std::move(z), cfg, {}};
}

// ---------------------------------------------------------------------------
// Compact bilinear pooling (tensor sketch)

namespace detail {

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

struct FftPlans {
  fftw_plan forward;
  fftw_plan inverse;
};

/// One r2c/c2r plan pair per length, created under a lock (FFTW planning is
/// not thread-safe) and reused through the new-array execute interface.
inline FftPlans plans_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, FftPlans> cache;
  std::lock_guard lock(mu);
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  FftwBuffer real(sizeof(double) * n);
  FftwBuffer cplx(sizeof(fftw_complex) * (n / 2 + 1));
  const int len = static_cast<int>(n);
  FftPlans plans{
      fftw_plan_dft_r2c_1d(len, static_cast<double*>(real.ptr), static_cast<fftw_complex*>(cplx.ptr),
                           FFTW_ESTIMATE),
      fftw_plan_dft_c2r_1d(len, static_cast<fftw_complex*>(cplx.ptr), static_cast<double*>(real.ptr),
                           FFTW_ESTIMATE),
  };
  cache.emplace(n, plans);
  return plans;
}

}  // namespace detail

/// Tensor sketch of x (x) y: two seeded count sketches combined by circular
/// convolution, computed in the frequency domain.
class TensorSketch {
 public:
  TensorSketch(std::size_t input_dim, std::size_t sketch_dim, std::uint64_t seed)
      : input_dim_(input_dim), sketch_dim_(sketch_dim) {
    if (sketch_dim < 1) throw ConfigError("sketch_dim must be >= 1");
    if (input_dim < 1) throw ConfigError("tensor sketch input dim must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> bucket(0, sketch_dim - 1);
    std::bernoulli_distribution coin(0.5);
    for (auto* h : {&h1_, &h2_}) {
      h->resize(input_dim);
      for (auto& b : *h) b = bucket(rng);
    }
    for (auto* s : {&s1_, &s2_}) {
      s->resize(input_dim);
      for (auto& v : *s) v = coin(rng) ? 1.0 : -1.0;
    }
  }

  [[nodiscard]] std::size_t input_dim() const { return input_dim_; }
  [[nodiscard]] std::size_t sketch_dim() const { return sketch_dim_; }

  [[nodiscard]] std::vector<double> count_sketch(std::span<const double> x, int which) const {
    const auto& h = which == 0 ? h1_ : h2_;
    const auto& s = which == 0 ? s1_ : s2_;
    std::vector<double> out(sketch_dim_, 0.0);
    for (std::size_t i = 0; i < input_dim_; ++i) out[h[i]] += s[i] * x[i];
    return out;
  }

  [[nodiscard]] std::vector<double> sketch(std::span<const double> x, std::span<const double> y) const {
    if (x.size() != input_dim_ || y.size() != input_dim_)
      throw DataError("tensor sketch inputs must both have length " + std::to_string(input_dim_));
    const auto n = sketch_dim_;
    const auto nc = n / 2 + 1;
    const auto plans = detail::plans_for(n);
    detail::FftwBuffer rx(sizeof(double) * n), ry(sizeof(double) * n);
    detail::FftwBuffer fx(sizeof(fftw_complex) * nc), fy(sizeof(fftw_complex) * nc);
    auto* px = static_cast<double*>(rx.ptr);
    auto* py = static_cast<double*>(ry.ptr);
    const auto cx = count_sketch(x, 0);
    const auto cy = count_sketch(y, 1);
    std::copy(cx.begin(), cx.end(), px);
    std::copy(cy.begin(), cy.end(), py);
    auto* qx = static_cast<fftw_complex*>(fx.ptr);
    auto* qy = static_cast<fftw_complex*>(fy.ptr);
    fftw_execute_dft_r2c(plans.forward, px, qx);
    fftw_execute_dft_r2c(plans.forward, py, qy);
    for (std::size_t i = 0; i < nc; ++i) {
      const double re = qx[i][0] * qy[i][0] - qx[i][1] * qy[i][1];
      const double im = qx[i][0] * qy[i][1] + qx[i][1] * qy[i][0];
      qx[i][0] = re;
      qx[i][1] = im;
    }
    fftw_execute_dft_c2r(plans.inverse, qx, px);  // unnormalized
    std::vector<double> out(px, px + n);
    for (double& v : out) v /= static_cast<double>(n);
    return out;
  }

 private:
  std::size_t input_dim_;
  std::size_t sketch_dim_;
  std::vector<std::size_t> h1_, h2_;
  std::vector<double> s1_, s2_;
};

/// Zero-pads v to length n (n >= v.size()).
[[nodiscard]] inline std::vector<double> zero_pad(std::span<const double> v, std::size_t n) {
  std::vector<double> out(n, 0.0);
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

/// Compact bilinear pooling of an equal-length pair. Unequal inputs are
/// zero-padded to the longer length first. Single-missing tolerance as in fuse_bilinear.
[[nodiscard]] inline FusedFeature fuse_compact_bilinear(const FeatureVector& x, const FeatureVector& y,
                                                        std::size_t sketch_dim, std::uint64_t seed,
                                                        PairPresence presence = {}) {
  if (sketch_dim < 1) throw ConfigError("sketch_dim must be >= 1");
  FusionConfig cfg;
  cfg.strategy = Strategy::compact_bilinear;
  cfg.sketch_dim = sketch_dim;
  cfg.sketch_seed = seed;
  if (const auto* lone = detail::lone_present(x, y, presence)) return FusedFeature{lone->values, cfg, {}};
  const auto d = std::max(x.dim(), y.dim());
  const TensorSketch ts(d, sketch_dim, seed);
  return FusedFeature{ts.sketch(zero_pad(x.values, d), zero_pad(y.values, d)), cfg, {}};
}

// ---------------------------------------------------------------------------
// Factorized bilinear coding

[[nodiscard]] inline Eigen::VectorXd as_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

[[nodiscard]] inline FusedFeature fbc_encode(const FbcDictionary& dict, const FeatureVector& x,
                                             const FeatureVector& y, PairPresence presence = {}) {
  FusionConfig cfg;
  cfg.strategy = Strategy::fbc;
  cfg.fbc = FbcParams{dict.k(), dict.r(), dict.lambda(), 0};
  if (const auto* lone = detail::lone_present(x, y, presence)) return FusedFeature{lone->values, cfg, {}};
  const Eigen::VectorXd c = dict.encode(as_eigen(x.values), as_eigen(y.values));
  return FusedFeature{std::vector<double>(c.data(), c.data() + c.size()), cfg, {}};
}

// ---------------------------------------------------------------------------
// Protocols

/// The (first, second) pairs a protocol fuses, by source.
[[nodiscard]] inline std::vector<std::pair<Source, Source>> protocol_pairs(Protocol p) {
  switch (p) {
    case Protocol::post_level: return {{Source::post_image, Source::post_comment}};
    case Protocol::homepage_level: return {{Source::homepage_image, Source::homepage_bio}};
    case Protocol::text_source: return {{Source::post_comment, Source::homepage_bio}};
    case Protocol::image_source: return {{Source::post_image, Source::homepage_image}};
    case Protocol::quadruple:
      return {{Source::post_image, Source::post_comment}, {Source::homepage_image, Source::homepage_bio}};
  }
  return {};
}

[[nodiscard]] inline const FeatureVector& select(const RecordFeatures& f, Source s) {
  switch (s) {
    case Source::post_comment: return f.pc;
    case Source::post_image: return f.pi;
    case Source::homepage_bio: return f.hb;
    case Source::homepage_image: return f.hi;
  }
  return f.pc;
}

[[nodiscard]] inline bool present(const PresenceMask& m, Source s) {
  switch (s) {
    case Source::post_comment: return m.pc_present;
    case Source::post_image: return m.pi_present;
    case Source::homepage_bio: return m.hb_present;
    case Source::homepage_image: return m.hi_present;
  }
  return false;
}

/// True when every pair the protocol fuses keeps at least one element.
[[nodiscard]] inline bool protocol_accepts(Protocol p, const PresenceMask& m) {
  if (p == Protocol::quadruple) return validate_mask(m);
  for (const auto& [a, b] : protocol_pairs(p))
    if (!present(m, a) && !present(m, b)) return false;
  return true;
}

/// Fuses records under one configuration for given text/image dims. Holds
/// the precomputed sketch and dictionaries so repeated calls are cheap.
class Fuser {
 public:
  Fuser(FusionConfig cfg, std::size_t text_dim, std::size_t image_dim)
      : cfg_(cfg), text_dim_(text_dim), image_dim_(image_dim) {
    for (const auto& [a, b] : protocol_pairs(cfg_.protocol)) {
      const auto p = dim_of(a), q = dim_of(b);
      if (cfg_.strategy == Strategy::compact_bilinear && !sketch_) {
        if (cfg_.sketch_dim < 1) throw ConfigError("sketch_dim must be >= 1");
        sketch_ = std::make_shared<TensorSketch>(std::max(p, q), cfg_.sketch_dim, cfg_.sketch_seed);
      }
      if (cfg_.strategy == Strategy::fbc && !dicts_.contains({p, q}))
        dicts_.emplace(std::pair{p, q}, std::make_shared<FbcDictionary>(FbcDictionary::random(
                                            p, q, cfg_.fbc.k, cfg_.fbc.r, cfg_.fbc.lambda, cfg_.fbc.seed)));
    }
  }

  [[nodiscard]] const FusionConfig& config() const { return cfg_; }

  /// Output length of the fused pair block when both inputs are present.
  [[nodiscard]] std::size_t pair_fused_dim(std::size_t p, std::size_t q) const {
    switch (cfg_.strategy) {
      case Strategy::concat: return p + q;
      case Strategy::bilinear: return p * q;
      case Strategy::compact_bilinear: return cfg_.sketch_dim;
      case Strategy::fbc: return cfg_.fbc.k;
    }
    return 0;
  }

  /// Width of the fixed-layout feature fed to the classifier head.
  /// Non-concat pair slots are laid out as [fused | first passthrough | second passthrough]
  /// so single-missing outputs keep a fixed position.
  [[nodiscard]] std::size_t dim() const {
    std::size_t total = 0;
    for (const auto& [a, b] : protocol_pairs(cfg_.protocol)) {
      const auto p = dim_of(a), q = dim_of(b);
      total += cfg_.strategy == Strategy::concat ? p + q : pair_fused_dim(p, q) + p + q;
    }
    return total;
  }

  /// Stage-one fusion of one pair with single-missing tolerance.
  [[nodiscard]] FusedFeature fuse_pair(const FeatureVector& x, const FeatureVector& y, PairPresence pr) const {
    FusedFeature out;
    switch (cfg_.strategy) {
      case Strategy::concat: {
        if (!pr.first && !pr.second) throw DataError("no modality present");
        const FeatureVector* parts[] = {&x, &y};
        out = FusedFeature{concat_values(parts), cfg_, {}};
        break;
      }
      case Strategy::bilinear: out = fuse_bilinear(x, y, pr, cfg_.bilinear_normalize); break;
      case Strategy::compact_bilinear: {
        if (const auto* lone = detail::lone_present(x, y, pr)) {
          out.values = lone->values;
        } else {
          const auto d = sketch_->input_dim();
          out.values = sketch_->sketch(zero_pad(x.values, d), zero_pad(y.values, d));
        }
        break;
      }
      case Strategy::fbc: out = fbc_encode(*dicts_.at({x.dim(), y.dim()}), x, y, pr); break;
    }
    out.provenance = cfg_;
    return out;
  }

  /// Fixed-width feature for the classifier head.
  [[nodiscard]] std::vector<double> fixed_feature(const RecordFeatures& f) const {
    if (!protocol_accepts(cfg_.protocol, f.mask)) throw DataError("intolerable missing pattern");
    std::vector<double> out;
    out.reserve(dim());
    for (const auto& [a, b] : protocol_pairs(cfg_.protocol)) {
      const auto& x = select(f, a);
      const auto& y = select(f, b);
      const PairPresence pr{present(f.mask, a), present(f.mask, b)};
      check_dims(x, a);
      check_dims(y, b);
      if (cfg_.strategy == Strategy::concat) {
        out.insert(out.end(), x.values.begin(), x.values.end());
        out.insert(out.end(), y.values.begin(), y.values.end());
        continue;
      }
      const auto fused_dim = pair_fused_dim(x.dim(), y.dim());
      if (pr.first && pr.second) {
        auto fused = fuse_pair(x, y, pr).values;
        if (cfg_.strategy != Strategy::bilinear && cfg_.bilinear_normalize) signed_sqrt_l2(fused);
        out.insert(out.end(), fused.begin(), fused.end());
        out.insert(out.end(), x.dim() + y.dim(), 0.0);
      } else {
        out.insert(out.end(), fused_dim, 0.0);
        if (pr.first) out.insert(out.end(), x.values.begin(), x.values.end());
        else out.insert(out.end(), x.dim(), 0.0);
        if (pr.second) out.insert(out.end(), y.values.begin(), y.values.end());
        else out.insert(out.end(), y.dim(), 0.0);
      }
    }
    return out;
  }

 private:
  [[nodiscard]] std::size_t dim_of(Source s) const {
    return modality_of(s) == Modality::text ? text_dim_ : image_dim_;
  }

  void check_dims(const FeatureVector& v, Source s) const {
    if (v.dim() != dim_of(s))
      throw DataError(std::string("feature for ") + to_string(s) + " has dim " + std::to_string(v.dim()) +
                      ", expected " + std::to_string(dim_of(s)));
  }

  FusionConfig cfg_;
  std::size_t text_dim_;
  std::size_t image_dim_;
  std::shared_ptr<const TensorSketch> sketch_;
  std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const FbcDictionary>> dicts_;
};

/// Quadruple fusion. concat: (pi, pc, hi, hb) with zero imputation. Other
/// strategies: stage one fuses (pi, pc) and (hi, hb), each tolerating one
/// missing element by passing the present vector through; stage two
/// concatenates the stage-one outputs.
[[nodiscard]] inline FusedFeature fuse_quadruple(const FeatureVector& pc, const FeatureVector& pi,
                                                 const FeatureVector& hb, const FeatureVector& hi,
                                                 const PresenceMask& mask, FusionConfig cfg) {
  if (!validate_mask(mask)) throw DataError("intolerable missing pattern");
  cfg.protocol = Protocol::quadruple;
  if (cfg.strategy == Strategy::concat) {
    const FeatureVector* parts[] = {&pi, &pc, &hi, &hb};
    return FusedFeature{concat_values(parts), cfg, mask};
  }
  const Fuser fuser(cfg, pc.dim(), pi.dim());
  auto post = fuser.fuse_pair(pi, pc, {mask.pi_present, mask.pc_present}).values;
  const auto home = fuser.fuse_pair(hi, hb, {mask.hi_present, mask.hb_present}).values;
  post.insert(post.end(), home.begin(), home.end());
  return FusedFeature{std::move(post), cfg, mask};
}

}  // namespace dealerid
