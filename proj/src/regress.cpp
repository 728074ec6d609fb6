#include "morphrom/regress.hpp"

#include "morphrom/logging.hpp"
#include "morphrom/random.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace morphrom {

namespace {

constexpr double kSqrt5 = 2.2360679774997896;

/// Scaled pairwise distances r_ik and the Matern-5/2 correlation matrix for
/// standardized inputs and log length-scales.
struct KernelParts {
  Eigen::MatrixXd r;     ///< scaled distances
  Eigen::MatrixXd expo;  ///< exp(-sqrt5 r)
  Eigen::MatrixXd corr;  ///< Matern-5/2 correlation
};

KernelParts kernel_parts(const Eigen::MatrixXd& X, const Eigen::VectorXd& log_length) {
  const Eigen::Index n = X.rows();
  const Eigen::VectorXd inv_l2 = (-2.0 * log_length).array().exp();
  KernelParts parts;
  parts.r.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    parts.r(i, i) = 0.0;
    for (Eigen::Index k = i + 1; k < n; ++k) {
      const Eigen::VectorXd d = X.row(i) - X.row(k);
      const double r = std::sqrt((d.array().square() * inv_l2.array()).sum());
      parts.r(i, k) = r;
      parts.r(k, i) = r;
    }
  }
  parts.expo = (-kSqrt5 * parts.r).array().exp();
  parts.corr = (1.0 + kSqrt5 * parts.r.array() + (5.0 / 3.0) * parts.r.array().square()) *
               parts.expo.array();
  return parts;
}

double matern(double r) {
  return (1.0 + kSqrt5 * r + (5.0 / 3.0) * r * r) * std::exp(-kSqrt5 * r);
}

/// Negative log marginal likelihood and its gradient for one output, at
/// parameters z = [log length-scales..., log signal sd], with a fixed
/// relative jitter.  Returns false when the Cholesky fails.
bool evaluate_nll(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                  double jitter, double& nll, Eigen::VectorXd* grad) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::VectorXd log_length = z.head(p);
  const double s2 = std::exp(2.0 * z[p]);

  const KernelParts parts = kernel_parts(X, log_length);
  Eigen::MatrixXd K = s2 * parts.corr;
  K.diagonal().array() += s2 * jitter;

  const Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) return false;

  const Eigen::VectorXd alpha = llt.solve(y);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double lml = -0.5 * y.dot(alpha) - 0.5 * logdet -
                     0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  nll = -lml;

  if (grad != nullptr) {
    grad->resize(p + 1);
    const Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd A = alpha * alpha.transpose() - Kinv;
    // d lml / d log s = y' alpha - n (dK/dlog s = 2K).
    (*grad)[p] = -(y.dot(alpha) - static_cast<double>(n));
    const Eigen::VectorXd inv_l2 = (-2.0 * log_length).array().exp();
    for (Eigen::Index d = 0; d < p; ++d) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) {
          const double diff = X(i, d) - X(k, d);
          const double dK = s2 * (5.0 / 3.0) * (1.0 + kSqrt5 * parts.r(i, k)) *
                            parts.expo(i, k) * diff * diff * inv_l2[d];
          acc += A(i, k) * dK;
        }
      (*grad)[d] = -0.5 * acc;
    }
  }
  return true;
}

/// L-BFGS with Armijo backtracking on the negative log marginal likelihood.
/// The relative jitter ratchets upward on Cholesky failures and is returned.
struct OptimizeResult {
  Eigen::VectorXd z;
  double nll = std::numeric_limits<double>::infinity();
  double jitter = 0.0;
  bool ok = false;
};

OptimizeResult optimize_head(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             Eigen::VectorXd z, const GprConfig& config) {
  const Eigen::Index p = X.cols();
  auto clamp_params = [&](Eigen::VectorXd& v) {
    for (Eigen::Index d = 0; d < p; ++d) v[d] = std::clamp(v[d], -5.0, 8.0);
    v[p] = std::clamp(v[p], -6.0, 6.0);
  };
  clamp_params(z);

  OptimizeResult result;
  result.jitter = config.jitter_min;
  auto eval = [&](const Eigen::VectorXd& at, double& f, Eigen::VectorXd* g) {
    while (!evaluate_nll(X, y, at, result.jitter, f, g)) {
      if (result.jitter >= config.jitter_max) return false;
      result.jitter *= 10.0;
    }
    return true;
  };

  double f;
  Eigen::VectorXd g;
  if (!eval(z, f, &g)) return result;

  std::vector<Eigen::VectorXd> s_hist, y_hist;
  std::vector<double> rho_hist;
  const int memory = 8;

  for (int iter = 0; iter < config.max_opt_iterations; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() <= 1e-7 * std::max(1.0, std::abs(f))) break;

    // Two-loop recursion for the search direction.
    Eigen::VectorXd q = g;
    std::vector<double> a(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      a[static_cast<size_t>(i)] =
          rho_hist[static_cast<size_t>(i)] * s_hist[static_cast<size_t>(i)].dot(q);
      q -= a[static_cast<size_t>(i)] * y_hist[static_cast<size_t>(i)];
    }
    if (!s_hist.empty()) {
      const Eigen::VectorXd& sl = s_hist.back();
      const Eigen::VectorXd& yl = y_hist.back();
      q *= sl.dot(yl) / yl.dot(yl);
    }
    for (size_t i = 0; i < s_hist.size(); ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(q);
      q += (a[i] - b) * s_hist[i];
    }
    Eigen::VectorXd dir = -q;
    if (dir.dot(g) >= 0.0) dir = -g;  // fall back to steepest descent

    double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(1e-12, g.norm())) : 1.0;
    double f_new;
    Eigen::VectorXd z_new, g_new;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      z_new = z + step * dir;
      clamp_params(z_new);
      if (eval(z_new, f_new, nullptr) && f_new <= f + 1e-4 * (z_new - z).dot(g)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    if (!eval(z_new, f_new, &g_new)) break;

    const Eigen::VectorXd s_step = z_new - z;
    const Eigen::VectorXd y_step = g_new - g;
    const double sy = s_step.dot(y_step);
    if (sy > 1e-12 * s_step.norm() * y_step.norm()) {
      s_hist.push_back(s_step);
      y_hist.push_back(y_step);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
    z = z_new;
    f = f_new;
    g = g_new;
  }

  result.z = z;
  result.nll = f;
  result.ok = true;
  return result;
}

Eigen::VectorXd column_scale(const Eigen::MatrixXd& m, const Eigen::VectorXd& mean) {
  Eigen::VectorXd scale(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double var = (m.col(c).array() - mean[c]).square().mean();
    const double sd = std::sqrt(var);
    scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return scale;
}

}  // namespace

GprModel gpr_train(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const GprConfig& config) {
  if (X.rows() != Y.rows() || X.rows() == 0)
    throw std::invalid_argument("GPR needs matching, non-empty input/output rows");
  if (X.cols() == 0 || Y.cols() == 0)
    throw std::invalid_argument("GPR needs at least one input and one output dimension");

  GprModel model;
  model.inputs = X;
  model.input_mean = X.colwise().mean();
  model.input_scale = column_scale(X, model.input_mean);
  model.output_mean = Y.colwise().mean();
  model.output_scale = column_scale(Y, model.output_mean);

  if (X.rows() == 1) {
    model.constant = true;
    model.constant_value = Y.row(0);
    return model;
  }

  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::MatrixXd Xs = (X.rowwise() - model.input_mean.transpose());
  for (Eigen::Index c = 0; c < p; ++c) Xs.col(c) /= model.input_scale[c];

  std::mt19937_64 rng(config.seed);
  for (Eigen::Index out = 0; out < Y.cols(); ++out) {
    Eigen::VectorXd ys = (Y.col(out).array() - model.output_mean[out]) / model.output_scale[out];

    OptimizeResult best;
    for (int restart = 0; restart < std::max(1, config.restarts); ++restart) {
      Eigen::VectorXd z0 = Eigen::VectorXd::Zero(p + 1);
      if (restart > 0) {
        for (Eigen::Index d = 0; d < p; ++d) z0[d] = uniform(rng, -1.5, 1.5);
        z0[p] = uniform(rng, -1.0, 1.0);
      }
      const OptimizeResult r = optimize_head(Xs, ys, z0, config);
      if (r.ok && r.nll < best.nll) best = r;
    }
    if (!best.ok)
      throw std::runtime_error("GPR training failed: kernel matrix never factorized");

    GprModel::Head head;
    head.log_length = best.z.head(p);
    head.log_signal = best.z[p];
    head.jitter = best.jitter;

    const double s2 = std::exp(2.0 * head.log_signal);
    const KernelParts parts = kernel_parts(Xs, head.log_length);
    Eigen::MatrixXd K = s2 * parts.corr;
    K.diagonal().array() += s2 * head.jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    while (llt.info() != Eigen::Success && head.jitter < config.jitter_max) {
      head.jitter *= 10.0;
      K = s2 * parts.corr;
      K.diagonal().array() += s2 * head.jitter;
      llt.compute(K);
    }
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("GPR training failed: kernel matrix never factorized");
    head.chol = llt.matrixL();
    head.weights = llt.solve(ys);
    head.lml = -(0.5 * ys.dot(head.weights) +
                 llt.matrixLLT().diagonal().array().log().sum() +
                 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi));
    model.heads.push_back(std::move(head));
  }
  return model;
}

GprPrediction gpr_predict(const GprModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.input_dim())
    throw std::invalid_argument("GPR prediction input has the wrong dimension");

  GprPrediction pred;
  pred.mean.resize(model.output_dim());
  pred.variance.resize(model.output_dim());
  if (model.constant) {
    pred.mean = model.constant_value;
    pred.variance.setZero();
    return pred;
  }

  const Eigen::Index n = model.n_train();
  const Eigen::VectorXd xs = (x - model.input_mean).cwiseQuotient(model.input_scale);

  for (Eigen::Index out = 0; out < model.output_dim(); ++out) {
    const GprModel::Head& head = model.heads[static_cast<size_t>(out)];
    const double s2 = std::exp(2.0 * head.log_signal);
    const Eigen::VectorXd inv_l = (-head.log_length).array().exp();

    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd row = model.inputs.row(i);
      const Eigen::VectorXd ri =
          (row - model.input_mean).cwiseQuotient(model.input_scale);
      const double r = ((xs - ri).cwiseProduct(inv_l)).norm();
      k[i] = s2 * matern(r);
    }
    const double mean_std = k.dot(head.weights);
    const Eigen::VectorXd v =
        head.chol.triangularView<Eigen::Lower>().solve(k);
    const double var_std = std::max(0.0, s2 - v.squaredNorm());

    pred.mean[out] = mean_std * model.output_scale[out] + model.output_mean[out];
    pred.variance[out] = var_std * model.output_scale[out] * model.output_scale[out];
  }
  return pred;
}

double q2_score(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted) {
  if (truth.size() != predicted.size() || truth.size() == 0)
    throw std::invalid_argument("Q2 needs matching non-empty vectors");
  const double mean = truth.mean();
  const double denom = (truth.array() - mean).square().sum();
  if (!(denom > 0.0)) throw std::invalid_argument("Q2 is undefined for constant truth");
  const double num = (truth - predicted).squaredNorm();
  return 1.0 - num / denom;
}

double synthetic_scalar_oracle(const BoundaryPolyline& shape,
                               const std::vector<std::string>& tags, double v0, double theta0) {
  std::vector<int> wanted;
  for (const std::string& name : tags) wanted.push_back(tag_id(shape.tag_names, name));

  const Vec2 e(std::cos(theta0), std::sin(theta0));
  double integral = 0.0;
  bool any = false;
  for (const PolylineLoop& loop : shape.loops) {
    const bool selected = std::any_of(loop.segment_tags.begin(), loop.segment_tags.end(),
                                      [&](int t) {
                                        return std::find(wanted.begin(), wanted.end(), t) !=
                                               wanted.end();
                                      });
    if (!selected) continue;
    any = true;
    const double orient = loop_area(loop) > 0.0 ? 1.0 : -1.0;
    const size_t n = loop.points.size();
    for (size_t k = 0; k < n; ++k) {
      const Vec2 d = loop.points[(k + 1) % n] - loop.points[k];
      const double len = d.norm();
      const Vec2 normal = orient * Vec2(d.y(), -d.x()) / len;
      integral += len * std::max(0.0, normal.dot(e));
    }
  }
  if (!any) throw MeshError("scalar oracle found no loop with the requested tags");
  return v0 * v0 * integral;
}

Eigen::VectorXd shape_features(const Mesh2D& reference, const BoundaryIndex& target) {
  const BoundaryField field = vector_distance_field(target, reference, reference.vertices);
  Eigen::VectorXd f(2 * static_cast<Eigen::Index>(field.samples.size()));
  for (size_t s = 0; s < field.samples.size(); ++s) {
    f[2 * static_cast<Eigen::Index>(s)] = field.samples[s].displacement.x();
    f[2 * static_cast<Eigen::Index>(s) + 1] = field.samples[s].displacement.y();
  }
  return f;
}

Eigen::VectorXd feature_weights(const Mesh2D& reference) {
  // Sample keys in vector_distance_field order: sorted (vertex, tag).
  std::vector<std::pair<int, int>> keys;
  for (const BoundaryEdge& e : reference.boundary_edges) {
    keys.emplace_back(e.a, e.tag);
    keys.emplace_back(e.b, e.tag);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  Eigen::VectorXd w = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(keys.size()));
  for (size_t s = 0; s < keys.size(); ++s) {
    double lump = 0.0;
    for (const BoundaryEdge& e : reference.boundary_edges) {
      if (e.tag != keys[s].second || (e.a != keys[s].first && e.b != keys[s].first)) continue;
      lump += 0.5 * (reference.vertices[static_cast<size_t>(e.b)] -
                     reference.vertices[static_cast<size_t>(e.a)])
                        .norm();
    }
    w[2 * static_cast<Eigen::Index>(s)] = lump;
    w[2 * static_cast<Eigen::Index>(s) + 1] = lump;
  }
  return w;
}

PodBasis fit_feature_basis(const Eigen::MatrixXd& features, const Eigen::VectorXd& weights,
                           int q) {
  if (features.rows() != weights.size())
    throw std::invalid_argument("feature rows and weights must match");
  if (q < 1) throw std::invalid_argument("feature basis needs q >= 1");
  const Eigen::MatrixXd gram =
      features.transpose() * weights.asDiagonal() * features;
  PodBasis basis = pod_from_gram(features, gram);
  const int keep = std::min(q, basis.rank());
  basis.modes = basis.modes.leftCols(keep).eval();
  basis.coords = basis.coords.leftCols(keep).eval();
  return basis;
}

Eigen::VectorXd feature_coords(const PodBasis& basis, const Eigen::VectorXd& weights,
                               const Eigen::VectorXd& feature) {
  return basis.modes.transpose() * weights.asDiagonal() * feature;
}

}  // namespace morphrom
