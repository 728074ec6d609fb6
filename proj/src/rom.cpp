#include "morphrom/rom.hpp"

#include "morphrom/json_io.hpp"
#include "morphrom/logging.hpp"
#include "morphrom/serial.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace morphrom {

using nlohmann::json;

PodBasis snapshot_pod(const Eigen::MatrixXd& snapshots, const Eigen::SparseMatrix<double>& mass) {
  const Eigen::Index n2 = snapshots.rows();
  if (n2 != 2 * mass.rows() || mass.rows() != mass.cols())
    throw std::invalid_argument("snapshot_pod: snapshot rows must be twice the mass size");
  const Eigen::Index n = snapshots.cols();
  const Eigen::Index nv = mass.rows();

  // Split interleaved components so the Gram matrix is two sparse-dense
  // products instead of n^2 mass_dot calls.
  Eigen::MatrixXd x(nv, n), y(nv, n);
  for (Eigen::Index i = 0; i < nv; ++i) {
    x.row(i) = snapshots.row(2 * i);
    y.row(i) = snapshots.row(2 * i + 1);
  }
  Eigen::MatrixXd gram = x.transpose() * (mass * x) + y.transpose() * (mass * y);
  return pod_from_gram(snapshots, gram);
}

int select_r_geometric(const Mesh2D& reference, const PodBasis& pod,
                       const std::vector<BoundaryIndex>& targets, double delta_geo,
                       BoundarySampling sampling) {
  if (pod.rank() == 0) throw std::runtime_error("rank selection: empty basis");
  if (targets.size() != static_cast<size_t>(pod.coords.rows()))
    throw std::invalid_argument("rank selection: one target per snapshot required");

  double best_worst = std::numeric_limits<double>::infinity();
  for (int r = 1; r <= pod.rank(); ++r) {
    double worst = 0.0;
    bool positive = true;
    for (size_t i = 0; i < targets.size() && positive; ++i) {
      const Eigen::VectorXd u =
          pod.modes.leftCols(r) * pod.coords.row(static_cast<Eigen::Index>(i)).head(r).transpose();
      const std::vector<Vec2> positions = displace(reference.vertices, u);
      if (!all_areas_positive(reference, positions)) {
        positive = false;
        break;
      }
      worst = std::max(worst, delta2(targets[i], reference, positions, sampling));
    }
    if (positive) {
      best_worst = std::min(best_worst, worst);
      if (worst < delta_geo) {
        log::info("rank selection: r = " + std::to_string(r) + " of " +
                  std::to_string(pod.rank()) + ", worst training mismatch " +
                  format_double(worst));
        return r;
      }
    }
  }
  throw std::runtime_error(
      "rank selection: no truncation rank reaches the geometric tolerance " +
      format_double(delta_geo) + " (best worst-case mismatch " + format_double(best_worst) +
      "); refine the mesh or relax the tolerance");
}

ReducedMorphing realize(const ReducedModel& model, const Eigen::VectorXd& alpha) {
  if (alpha.size() != model.r)
    throw std::invalid_argument("realize: expected " + std::to_string(model.r) +
                                " coordinates, got " + std::to_string(alpha.size()));
  ReducedMorphing out;
  out.alpha = alpha;
  const Eigen::VectorXd u = model.pod.modes.leftCols(model.r) * alpha;
  out.positions = displace(model.reference.vertices, u);
  return out;
}

Eigen::VectorXd reduced_gradient(const ReducedModel& model, const BoundaryIndex& target,
                                 const Eigen::VectorXd& alpha) {
  const ReducedMorphing current = realize(model, alpha);
  const BoundaryField field = vector_distance_field(target, model.reference, current.positions);
  Eigen::VectorXd rhs = assemble_rhs_lines(model.reference, current.positions, field, model.config);
  if (model.config.beta1 != 0.0)
    rhs += assemble_rhs_points(model.reference, current.positions, target, model.config);
  return -(model.pod.modes.leftCols(model.r).transpose() * rhs);
}

Eigen::VectorXd online_iterate(const ReducedModel& model, const BoundaryIndex& target,
                               const Eigen::VectorXd& alpha) {
  return alpha - model.gamma_online * reduced_gradient(model, target, alpha);
}

Eigen::VectorXd predict_init(const ReducedModel& model, const BoundaryIndex& target) {
  const Eigen::VectorXd f = shape_features(model.reference, target);
  const Eigen::VectorXd theta = feature_coords(model.features, model.feature_weight, f);
  return gpr_predict(model.initializer, theta).mean;
}

OnlineReport online_solve(const ReducedModel& model, const BoundaryIndex& target,
                          const Eigen::VectorXd& alpha0) {
  OnlineReport report;
  report.alpha0 = alpha0;
  Eigen::VectorXd alpha = alpha0;
  double grad_norm = 0.0;

  for (int iter = 0;; ++iter) {
    const ReducedMorphing current = realize(model, alpha);
    const double d2 = delta2(target, model.reference, current.positions, model.config.sampling);
    if (!std::isfinite(d2)) throw std::runtime_error("online iteration diverged");

    if (d2 < model.delta_geo) {
      report.status = "converged";
      report.iterations = iter;
      report.final_delta2 = d2;
      report.gradient_norm = grad_norm;
      break;
    }
    if (iter >= model.max_online_iterations) {
      // The exit gradient separates "still descending, just capped" from
      // "stationary but geometrically wrong" (target outside the basis span).
      grad_norm = reduced_gradient(model, target, alpha).norm();
      report.status = grad_norm >= model.delta_grad ? "max_iter_gradient_large"
                                                    : "out_of_distribution";
      report.iterations = iter;
      report.final_delta2 = d2;
      report.gradient_norm = grad_norm;
      break;
    }

    const Eigen::VectorXd B = reduced_gradient(model, target, alpha);
    grad_norm = B.norm();
    alpha -= model.gamma_online * B;
    report.history.push_back({iter + 1, d2, grad_norm});
  }

  report.alpha = alpha;
  if (!all_areas_positive(model.reference, realize(model, alpha).positions))
    log::info("online solve: realized mesh has non-positive elements (status " + report.status +
              ")");
  log::info("online solve: " + report.status + " after " + std::to_string(report.iterations) +
            " iterations, mismatch " + format_double(report.final_delta2));
  return report;
}

OfflineResult offline_workflow(const Mesh2D& reference,
                               const std::vector<BoundaryPolyline>& targets,
                               const OfflineConfig& config) {
  config.elastic.validate();
  if (targets.empty()) throw std::invalid_argument("offline workflow: no training targets");
  const Eigen::Index n = static_cast<Eigen::Index>(targets.size());
  const Eigen::Index n2 = 2 * static_cast<Eigen::Index>(reference.vertices.size());

  OfflineResult out;
  Eigen::MatrixXd snapshots(n2, n);
  std::vector<BoundaryIndex> indexes;
  indexes.reserve(targets.size());

  for (Eigen::Index i = 0; i < n; ++i) {
    indexes.emplace_back(targets[static_cast<size_t>(i)]);
    const auto t0 = std::chrono::steady_clock::now();
    MorphResult morph = run_morph(reference, indexes.back(), config.elastic, config.algorithm,
                                  config.stall_limit);
    if (!morph.converged)
      throw std::runtime_error("offline workflow: training morph " + std::to_string(i) +
                               " ended with status '" + morph.status + "'");
    // Snapshot the exactly-corrected morphing so the basis spans boundary
    // placements at roundoff, not at the iteration tolerance.
    MorphResult corrected =
        final_correction(reference, morph.positions, indexes.back(), config.elastic);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    morph.positions = std::move(corrected.positions);
    morph.displacement = std::move(corrected.displacement);
    morph.final_delta1 = corrected.final_delta1;
    morph.final_delta2 = corrected.final_delta2;
    snapshots.col(i) = morph.displacement;
    log::info("offline: snapshot " + std::to_string(i + 1) + "/" + std::to_string(n) + " in " +
              std::to_string(morph.iterations) + " iterations, " + format_double(seconds) + " s");
    out.morphs.push_back(std::move(morph));
    out.morph_seconds.push_back(seconds);
    out.mean_morph_seconds += seconds / static_cast<double>(n);
  }

  ReducedModel& model = out.model;
  model.reference = reference;
  model.config = config.elastic;
  model.delta_geo = config.delta_geo;
  model.gamma_online = config.gamma_online;
  model.max_online_iterations = config.max_online_iterations;

  const Eigen::SparseMatrix<double> mass = assemble_mass(reference, reference.vertices);
  model.pod = snapshot_pod(snapshots, mass);
  model.r = config.selection == OfflineConfig::Selection::geometric
                ? select_r_geometric(reference, model.pod, indexes, config.delta_geo,
                                     config.elastic.sampling)
                : select_r_energy(model.pod.eigenvalues, model.pod.rank(), config.delta_pod);

  // Boundary features and the coordinate initializer.
  model.feature_weight = feature_weights(reference);
  Eigen::MatrixXd features(model.feature_weight.size(), n);
  for (Eigen::Index i = 0; i < n; ++i)
    features.col(i) = shape_features(reference, indexes[static_cast<size_t>(i)]);
  model.features = fit_feature_basis(features, model.feature_weight, config.feature_modes);
  Eigen::MatrixXd theta(n, model.features.rank());
  for (Eigen::Index i = 0; i < n; ++i)
    theta.row(i) =
        feature_coords(model.features, model.feature_weight, features.col(i)).transpose();
  model.initializer = gpr_train(theta, model.pod.coords.leftCols(model.r), config.gpr);

  // Out-of-distribution threshold: mean reduced-gradient norm at the
  // (converged) training coordinates.
  double grad_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd alpha = model.pod.coords.row(i).head(model.r).transpose();
    grad_sum += reduced_gradient(model, indexes[static_cast<size_t>(i)], alpha).norm();
  }
  model.delta_grad = grad_sum / static_cast<double>(n);

  log::info("offline: r = " + std::to_string(model.r) + " of rank " +
            std::to_string(model.pod.rank()) + ", gradient threshold " +
            format_double(model.delta_grad));
  return out;
}

namespace {

json mat_to_json(const Eigen::MatrixXd& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", base64_encode(m)}};
}

Eigen::MatrixXd mat_from_json(const json& j) {
  return base64_decode(j.at("data").get<std::string>(), j.at("rows").get<Eigen::Index>(),
                       j.at("cols").get<Eigen::Index>());
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::MatrixXd m = mat_from_json(j);
  if (m.cols() > 1) throw MeshError("model document: expected a column vector");
  return m.cols() == 1 ? Eigen::VectorXd(m.col(0)) : Eigen::VectorXd();
}

json pod_to_json(const PodBasis& pod) {
  return json{{"modes", mat_to_json(pod.modes)},
              {"eigenvalues", mat_to_json(pod.eigenvalues)},
              {"coords", mat_to_json(pod.coords)}};
}

PodBasis pod_from_json(const json& j) {
  PodBasis pod;
  pod.modes = mat_from_json(j.at("modes"));
  pod.eigenvalues = vec_from_json(j.at("eigenvalues"));
  pod.coords = mat_from_json(j.at("coords"));
  return pod;
}

const char* sampling_name(BoundarySampling s) {
  return s == BoundarySampling::nodes_only ? "nodes_only" : "nodes_plus_9";
}

BoundarySampling sampling_from_name(const std::string& name) {
  if (name == "nodes_only") return BoundarySampling::nodes_only;
  if (name == "nodes_plus_9") return BoundarySampling::nodes_plus_9;
  throw MeshError("model document: unknown sampling '" + name + "'");
}

json elastic_to_json(const ElasticConfig& c) {
  return json{{"young", c.young},
              {"poisson", c.poisson},
              {"alpha", c.alpha},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"gamma", c.gamma},
              {"epsilon", c.epsilon},
              {"max_iterations", c.max_iterations},
              {"sampling", sampling_name(c.sampling)},
              {"variable_young", c.variable_young},
              {"h_ref", c.h_ref},
              {"full_vector_line_load", c.full_vector_line_load}};
}

ElasticConfig elastic_from_json(const json& j) {
  ElasticConfig c;
  reject_unknown_keys(j,
                      {"young", "poisson", "alpha", "beta1", "beta2", "gamma", "epsilon",
                       "max_iterations", "sampling", "variable_young", "h_ref",
                       "full_vector_line_load"},
                      "elastic configuration");
  c.young = j.at("young").get<double>();
  c.poisson = j.at("poisson").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.sampling = sampling_from_name(j.at("sampling").get<std::string>());
  c.variable_young = j.at("variable_young").get<bool>();
  c.h_ref = j.at("h_ref").get<double>();
  c.full_vector_line_load = j.at("full_vector_line_load").get<bool>();
  c.validate();
  return c;
}

json gpr_to_json(const GprModel& m) {
  json heads = json::array();
  for (const GprModel::Head& h : m.heads)
    heads.push_back(json{{"log_length", mat_to_json(h.log_length)},
                         {"log_signal", h.log_signal},
                         {"jitter", h.jitter},
                         {"weights", mat_to_json(h.weights)},
                         {"chol", mat_to_json(h.chol)},
                         {"lml", h.lml}});
  return json{{"inputs", mat_to_json(m.inputs)},
              {"input_mean", mat_to_json(m.input_mean)},
              {"input_scale", mat_to_json(m.input_scale)},
              {"output_mean", mat_to_json(m.output_mean)},
              {"output_scale", mat_to_json(m.output_scale)},
              {"heads", heads},
              {"constant", m.constant},
              {"constant_value", mat_to_json(m.constant_value)}};
}

GprModel gpr_from_json(const json& j) {
  GprModel m;
  m.inputs = mat_from_json(j.at("inputs"));
  m.input_mean = vec_from_json(j.at("input_mean"));
  m.input_scale = vec_from_json(j.at("input_scale"));
  m.output_mean = vec_from_json(j.at("output_mean"));
  m.output_scale = vec_from_json(j.at("output_scale"));
  for (const json& hj : j.at("heads")) {
    GprModel::Head h;
    h.log_length = vec_from_json(hj.at("log_length"));
    h.log_signal = hj.at("log_signal").get<double>();
    h.jitter = hj.at("jitter").get<double>();
    h.weights = vec_from_json(hj.at("weights"));
    h.chol = mat_from_json(hj.at("chol"));
    h.lml = hj.at("lml").get<double>();
    m.heads.push_back(std::move(h));
  }
  m.constant = j.at("constant").get<bool>();
  m.constant_value = vec_from_json(j.at("constant_value"));
  return m;
}

}  // namespace

void save_model(const ReducedModel& model, const std::string& path) {
  json doc;
  doc["format"] = "morphrom-model";
  doc["version"] = model.version;
  doc["reference"] = mesh_to_json(model.reference);
  doc["pod"] = pod_to_json(model.pod);
  doc["r"] = model.r;
  doc["elastic"] = elastic_to_json(model.config);
  doc["delta_geo"] = model.delta_geo;
  doc["delta_grad"] = model.delta_grad;
  doc["gamma_online"] = model.gamma_online;
  doc["max_online_iterations"] = model.max_online_iterations;
  doc["features"] = pod_to_json(model.features);
  doc["feature_weight"] = mat_to_json(model.feature_weight);
  doc["initializer"] = gpr_to_json(model.initializer);
  doc["has_scalar"] = model.has_scalar;
  if (model.has_scalar) {
    doc["scalar"] = gpr_to_json(model.scalar);
    doc["scalar_coords"] = model.scalar_coords;
    doc["scalar_mu_dim"] = model.scalar_mu_dim;
  }
  write_text_file(path, doc.dump());
}

ReducedModel load_model(const std::string& path) {
  const json doc = read_json_file(path);
  if (!doc.is_object() || doc.value("format", "") != "morphrom-model")
    throw MeshError("'" + path + "' is not a model document");
  ReducedModel model;
  try {
    model.version = doc.at("version").get<int>();
    if (model.version != 1)
      throw MeshError("'" + path + "': unsupported model version " +
                      std::to_string(model.version));
    model.reference = mesh_from_json(doc.at("reference"), path);
    model.pod = pod_from_json(doc.at("pod"));
    model.r = doc.at("r").get<int>();
    model.config = elastic_from_json(doc.at("elastic"));
    model.delta_geo = doc.at("delta_geo").get<double>();
    model.delta_grad = doc.at("delta_grad").get<double>();
    model.gamma_online = doc.at("gamma_online").get<double>();
    model.max_online_iterations = doc.at("max_online_iterations").get<int>();
    model.features = pod_from_json(doc.at("features"));
    model.feature_weight = vec_from_json(doc.at("feature_weight"));
    model.initializer = gpr_from_json(doc.at("initializer"));
    model.has_scalar = doc.at("has_scalar").get<bool>();
    if (model.has_scalar) {
      model.scalar = gpr_from_json(doc.at("scalar"));
      model.scalar_coords = doc.at("scalar_coords").get<int>();
      model.scalar_mu_dim = doc.at("scalar_mu_dim").get<int>();
    }
  } catch (const json::exception& e) {
    throw MeshError("'" + path + "': malformed model document: " + e.what());
  }
  if (model.r < 0 || model.r > model.pod.rank())
    throw MeshError("'" + path + "': active mode count outside the stored basis");
  return model;
}

}  // namespace morphrom
