// morphrom command line: dataset synthesis, high-fidelity morphing runs,
// offline reduced-model training, factorization-free online solves, scalar
// learning, and SVG reports.
//
// Every command is a pure function of its config file, input files and seed:
// reruns produce byte-identical result files.  Wall-clock measurements are
// therefore kept out of histories and models and reported in separate
// benchmark records.  Exit codes: 0 converged/ok, 1 hard error, 2
// out-of-distribution, 3 max-iterations-with-large-gradient.

#include "CLI11.hpp"

#include "morphrom/json_io.hpp"
#include "morphrom/logging.hpp"
#include "morphrom/morph.hpp"
#include "morphrom/random.hpp"
#include "morphrom/rom.hpp"
#include "morphrom/serial.hpp"
#include "morphrom/svg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace morphrom;

namespace {

// ---------------------------------------------------------------------------
// config files: flat JSON documents whose keys are the long option names of
// the chosen subcommand.  Keys are expanded into argv tokens before parsing,
// so CLI11 applies its usual validation and explicit flags win over the file.

std::string g_config_path;  // storage for every subcommand's --config option

void attach_config(CLI::App* cmd) {
  cmd->add_option("--config", g_config_path,
                  "JSON config file; explicit flags override its keys");
}

std::vector<std::string> expand_config(CLI::App& app, int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) return args;
  CLI::App* cmd = app.get_subcommand_no_throw(args[0]);
  if (cmd == nullptr) return args;

  std::string file;
  for (size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      file = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      file = args[i].substr(9);
  }
  if (file.empty()) return args;

  json config;
  try {
    config = json::parse(read_text_file(file));
  } catch (const json::exception& e) {
    throw std::runtime_error("config '" + file + "' is not valid JSON: " + e.what());
  }
  if (!config.is_object()) throw std::runtime_error("config root must be a JSON object");

  std::vector<std::string> injected;
  for (auto it = config.begin(); it != config.end(); ++it) {
    CLI::Option* option = cmd->get_option_no_throw("--" + it.key());
    if (option == nullptr)
      throw std::runtime_error("unknown config key '" + it.key() + "' for command '" + args[0] +
                               "'");
    bool given_explicitly = false;
    for (size_t i = 1; i < args.size() && !given_explicitly; ++i) {
      if (args[i].rfind("--", 0) != 0) continue;
      const std::string name = args[i].substr(0, args[i].find('='));
      given_explicitly = cmd->get_option_no_throw(name) == option;
    }
    if (given_explicitly) continue;

    const json& value = *it;
    std::string text;
    if (value.is_string())
      text = value.get<std::string>();
    else if (value.is_boolean() || value.is_number())
      text = value.dump();
    else
      throw std::runtime_error("config key '" + it.key() + "' must be a scalar");
    injected.push_back("--" + it.key() + "=" + text);
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

// ---------------------------------------------------------------------------
// small filesystem / formatting helpers

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir + "': " + ec.message());
}

// Atomic-per-file write: compose next to the target, then rename over it.
void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  write_text_file(tmp, content);
  fs::rename(tmp, path);
}

std::string path_stem(const std::string& path) { return fs::path(path).stem().string(); }

void fail_json(const std::string& status, const std::string& message) {
  json err{{"status", status}, {"message", message}};
  std::fputs((err.dump() + "\n").c_str(), stderr);
}

std::string vec_csv(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

json vec_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

std::string history_csv(const std::vector<MorphHistoryRow>& history) {
  std::string csv = "iteration,delta1,delta2,max_step,max_regularity\n";
  for (const MorphHistoryRow& row : history)
    csv += std::to_string(row.iteration) + "," + format_double(row.delta1) + "," +
           format_double(row.delta2) + "," + format_double(row.max_step) + "," +
           format_double(row.max_regularity) + "\n";
  return csv;
}

std::string online_history_csv(const std::vector<OnlineHistoryRow>& history) {
  std::string csv = "iteration,delta2,gradient_norm\n";
  for (const OnlineHistoryRow& row : history)
    csv += std::to_string(row.iteration) + "," + format_double(row.delta2) + "," +
           format_double(row.gradient_norm) + "\n";
  return csv;
}

Mesh2D with_positions(const Mesh2D& mesh, std::span<const Vec2> positions) {
  Mesh2D moved = mesh;
  moved.vertices.assign(positions.begin(), positions.end());
  return moved;
}

// ---------------------------------------------------------------------------
// elastic parameter flags with the two documented presets

struct ElasticOptions {
  ElasticConfig cfg;  // flag defaults are the plate preset
  std::string preset = "plate";
  std::string sampling = "nodes_only";
  CLI::Option* young = nullptr;
  CLI::Option* alpha = nullptr;
  CLI::Option* beta1 = nullptr;
  CLI::Option* gamma = nullptr;
  CLI::Option* epsilon = nullptr;
  CLI::Option* variable_young = nullptr;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--preset", preset, "parameter preset: plate or airfoil")
        ->check(CLI::IsMember({"plate", "airfoil"}));
    young = cmd.add_option("--young", cfg.young, "Young modulus E");
    cmd.add_option("--poisson", cfg.poisson, "Poisson ratio");
    alpha = cmd.add_option("--alpha", cfg.alpha, "boundary normal-penalty weight");
    beta1 = cmd.add_option("--beta1", cfg.beta1, "tracked-point load weight");
    cmd.add_option("--beta2", cfg.beta2, "boundary line load weight");
    gamma = cmd.add_option("--gamma", cfg.gamma, "morphing step size");
    epsilon = cmd.add_option("--epsilon", cfg.epsilon, "convergence threshold");
    cmd.add_option("--max-iterations", cfg.max_iterations, "iteration cap");
    cmd.add_option("--sampling", sampling, "mismatch sampling: nodes_only or nodes_plus_9")
        ->check(CLI::IsMember({"nodes_only", "nodes_plus_9"}));
    variable_young = cmd.add_flag("--variable-young,!--no-variable-young", cfg.variable_young,
                                  "per-element Young modulus E*(h_ref/h_K)");
    cmd.add_option("--h-ref", cfg.h_ref, "reference element size (0 = median longest edge)");
    cmd.add_flag("--full-vector-line-load", cfg.full_vector_line_load,
                 "use the full vector line load instead of its normal part");
  }

  ElasticConfig resolve() const {
    ElasticConfig out = cfg;
    if (preset == "airfoil") {
      if (!young->count()) out.young = 0.1;
      if (!alpha->count()) out.alpha = 500.0;
      if (!beta1->count()) out.beta1 = 10.0;
      if (!gamma->count()) out.gamma = 5.0;
      if (!epsilon->count()) out.epsilon = 5e-4;
      if (!variable_young->count()) out.variable_young = true;
    }
    out.sampling =
        sampling == "nodes_plus_9" ? BoundarySampling::nodes_plus_9 : BoundarySampling::nodes_only;
    out.validate();
    return out;
  }
};

MorphAlgorithm parse_algorithm(const std::string& name) {
  if (name == "sdf") return MorphAlgorithm::signed_distance;
  if (name == "vdf") return MorphAlgorithm::vector_distance;
  throw std::runtime_error("unknown algorithm '" + name + "' (expected sdf or vdf)");
}

// ---------------------------------------------------------------------------
// target collections: a directory of target_*.json or a synth manifest

std::vector<std::string> collect_targets(const std::string& spec) {
  std::vector<std::string> files;
  if (fs::is_directory(spec)) {
    for (const auto& entry : fs::directory_iterator(spec)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && name.rfind("target_", 0) == 0 &&
          entry.path().extension() == ".json")
        files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
  } else {
    const json manifest = read_json_file(spec);
    const fs::path dir = fs::path(spec).parent_path();
    for (const json& sample : manifest.at("samples"))
      files.push_back((dir / sample.at("file").get<std::string>()).string());
  }
  if (files.empty()) throw std::runtime_error("no targets found under '" + spec + "'");
  return files;
}

std::vector<std::string> split_tags(const std::string& joined) {
  std::vector<std::string> tags;
  std::stringstream ss(joined);
  std::string tag;
  while (std::getline(ss, tag, ','))
    if (!tag.empty()) tags.push_back(tag);
  if (tags.empty()) throw std::runtime_error("empty tag list");
  return tags;
}

// ===========================================================================
// synth

struct SynthOptions {
  std::string kind = "plate";
  std::string out;
  int count = 10;
  double h = 0.05;
  double target_h = 0.01;
  double reference_radius = 0.5;
  double radius_min = 0.0, radius_max = 0.0;  // both 0: R_i = 0.2 + 0.6 i/n
  double notch_half_width = 0.3;
  int n_boundary = 48;
  int target_points = 0;  // 0: 4 * n_boundary
  double farfield = 5.0;
  uint64_t seed = 0;
  double m_max = 0.03;
  double p_min = 0.35, p_max = 0.45;
  double t_min = 0.09, t_max = 0.15;
  double v0_min = 0.5, v0_max = 1.5;
  double theta_min = -0.3, theta_max = 0.3;
};

int run_synth(const SynthOptions& opt) {
  ensure_dir(opt.out);
  const fs::path dir(opt.out);
  json manifest{{"kind", opt.kind}, {"seed", opt.seed}};
  json samples = json::array();

  if (opt.kind == "plate") {
    Mesh2D reference = synth_plate(opt.reference_radius, opt.h);
    save_mesh(reference, (dir / "reference.json").string());
    const bool uniform = opt.radius_max > opt.radius_min;
    for (int i = 0; i < opt.count; ++i) {
      const double radius =
          uniform ? opt.radius_min + (opt.radius_max - opt.radius_min) *
                                         (opt.count > 1 ? double(i) / (opt.count - 1) : 0.0)
                  : 0.2 + 0.6 * double(i + 1) / opt.count;
      char name[32];
      std::snprintf(name, sizeof name, "target_%03d.json", i);
      save_polyline(plate_boundary(radius, opt.target_h), (dir / name).string());
      samples.push_back(json{{"file", name}, {"radius", radius}});
    }
    manifest["h"] = opt.h;
    manifest["target_h"] = opt.target_h;
    manifest["reference_radius"] = opt.reference_radius;
    manifest["reference"] = "reference.json";
  } else if (opt.kind == "notched") {
    save_polyline(notched_plate_boundary(opt.notch_half_width, opt.target_h),
                  (dir / "target_notched.json").string());
    samples.push_back(json{{"file", "target_notched.json"}, {"half_width", opt.notch_half_width}});
    manifest["target_h"] = opt.target_h;
  } else if (opt.kind == "airfoil") {
    Mesh2D reference = synth_airfoil(0.0, 0.4, 0.12, opt.n_boundary, opt.farfield);
    save_mesh(reference, (dir / "reference.json").string());
    const int points = opt.target_points > 0 ? opt.target_points : 4 * opt.n_boundary;
    for (int i = 0; i < opt.count; ++i) {
      const uint64_t k = opt.seed + static_cast<uint64_t>(i) + 1;
      const double m = opt.m_max * halton(k, 2);
      const double p = opt.p_min + (opt.p_max - opt.p_min) * halton(k, 3);
      const double t = opt.t_min + (opt.t_max - opt.t_min) * halton(k, 5);
      const double v0 = opt.v0_min + (opt.v0_max - opt.v0_min) * halton(k, 7);
      const double theta0 = opt.theta_min + (opt.theta_max - opt.theta_min) * halton(k, 11);
      char name[32];
      std::snprintf(name, sizeof name, "target_%03d.json", i);
      save_polyline(airfoil_boundary(m, p, t, points, opt.farfield), (dir / name).string());
      samples.push_back(json{{"file", name},
                             {"m", m},
                             {"p", p},
                             {"t", t},
                             {"v0", v0},
                             {"theta0", theta0}});
    }
    manifest["n_boundary"] = opt.n_boundary;
    manifest["target_points"] = points;
    manifest["farfield"] = opt.farfield;
    manifest["reference"] = "reference.json";
  } else {
    throw std::runtime_error("unknown kind '" + opt.kind + "'");
  }

  manifest["count"] = samples.size();
  manifest["samples"] = samples;
  write_atomic((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  std::printf("synth: wrote %zu sample(s) under %s\n", samples.size(), opt.out.c_str());
  return 0;
}

// ===========================================================================
// morph

struct MorphOptions {
  std::string reference, target, out;
  std::string algorithm = "vdf";
  ElasticOptions elastic;
  int stall_limit = 20;
  bool correct = true;
  bool vtk = true;
  bool svg = false;
  int vtk_every = 0;
};

int run_cmd_morph(const MorphOptions& opt) {
  ensure_dir(opt.out);
  const fs::path dir(opt.out);
  const Mesh2D reference = load_mesh(opt.reference);
  const BoundaryIndex index = build_index(load_polyline(opt.target));
  const ElasticConfig config = opt.elastic.resolve();
  const MorphAlgorithm algorithm = parse_algorithm(opt.algorithm);

  MorphObserver observer;
  if (opt.vtk_every > 0)
    observer = [&](int iteration, std::span<const Vec2> positions) {
      if (iteration % opt.vtk_every) return;
      char name[32];
      std::snprintf(name, sizeof name, "iteration_%04d.vtk", iteration);
      export_vtk(reference, positions, {}, (dir / name).string());
    };

  counters::reset_factorizations();
  counters::reset_distance_queries();
  const auto t0 = std::chrono::steady_clock::now();
  MorphResult result = run_morph(reference, index, config, algorithm, opt.stall_limit, observer);
  json doc{{"algorithm", opt.algorithm},
           {"status", result.status},
           {"converged", result.converged},
           {"iterations", result.iterations},
           {"final_delta1", result.final_delta1},
           {"final_delta2", result.final_delta2},
           {"corrected", false}};
  if (result.converged && opt.correct) {
    MorphResult corrected = final_correction(reference, result.positions, index, config);
    result.positions = std::move(corrected.positions);
    result.displacement = std::move(corrected.displacement);
    doc["corrected"] = true;
    doc["corrected_delta1"] = corrected.final_delta1;
    doc["corrected_delta2"] = corrected.final_delta2;
  }
  doc["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  doc["factorizations"] = counters::factorizations();
  doc["distance_queries"] = counters::distance_queries();

  write_atomic((dir / "history.csv").string(), history_csv(result.history));
  write_atomic((dir / "morphed.json").string(),
               mesh_to_json(with_positions(reference, result.positions)).dump());
  write_atomic((dir / "result.json").string(), doc.dump(2) + "\n");
  if (opt.vtk)
    export_vtk(reference, result.positions, {{"displacement", result.displacement}},
               (dir / "morphed.vtk").string());
  if (opt.svg) save_mesh_plot(reference, result.positions, (dir / "morphed.svg").string());

  std::printf("morph: %s after %d iterations (delta1 %s, delta2 %s)\n", result.status.c_str(),
              result.iterations, format_double(result.final_delta1).c_str(),
              format_double(result.final_delta2).c_str());
  if (result.converged) return 0;
  fail_json(result.status, "morphing did not converge within the configured budget");
  return result.status == "max_iterations" ? 3 : 1;
}

// ===========================================================================
// offline

struct OfflineOptions {
  std::string reference, targets, out;
  std::string algorithm = "vdf";
  int count = 0;  // 0: every target
  ElasticOptions elastic;
  double delta_geo = 5e-4;
  std::string selection = "geometric";
  double delta_pod = 1e-3;
  int feature_modes = 5;
  double gamma_online = 0.02;
  int max_online_iterations = 500;
  int stall_limit = 20;
  GprConfig gpr;
};

int run_offline(const OfflineOptions& opt) {
  ensure_dir(opt.out);
  const fs::path dir(opt.out);
  const Mesh2D reference = load_mesh(opt.reference);
  std::vector<std::string> files = collect_targets(opt.targets);
  if (opt.count > 0 && opt.count < static_cast<int>(files.size()))
    files.resize(static_cast<size_t>(opt.count));
  std::vector<BoundaryPolyline> targets;
  targets.reserve(files.size());
  for (const std::string& file : files) targets.push_back(load_polyline(file));

  OfflineConfig config;
  config.elastic = opt.elastic.resolve();
  config.algorithm = parse_algorithm(opt.algorithm);
  config.delta_geo = opt.delta_geo;
  config.selection = opt.selection == "energy" ? OfflineConfig::Selection::energy
                                               : OfflineConfig::Selection::geometric;
  config.delta_pod = opt.delta_pod;
  config.feature_modes = opt.feature_modes;
  config.gpr = opt.gpr;
  config.gamma_online = opt.gamma_online;
  config.max_online_iterations = opt.max_online_iterations;
  config.stall_limit = opt.stall_limit;

  counters::reset_factorizations();
  counters::reset_distance_queries();
  OfflineResult result = offline_workflow(reference, targets, config);
  save_model(result.model, (dir / "model.json").string());

  std::string eig = "mode,eigenvalue\n";
  for (Eigen::Index j = 0; j < result.model.pod.eigenvalues.size(); ++j)
    eig += std::to_string(j + 1) + "," + format_double(result.model.pod.eigenvalues[j]) + "\n";
  write_atomic((dir / "eigenvalues.csv").string(), eig);

  json per_target = json::array();
  for (size_t i = 0; i < files.size(); ++i)
    per_target.push_back(json{{"file", fs::path(files[i]).filename().string()},
                              {"iterations", result.morphs[i].iterations},
                              {"final_delta2", result.morphs[i].final_delta2},
                              {"seconds", result.morph_seconds[i]}});
  json report{{"n_targets", files.size()},
              {"r", result.model.r},
              {"rank", result.model.pod.rank()},
              {"delta_grad", result.model.delta_grad},
              {"mean_morph_seconds", result.mean_morph_seconds},
              {"factorizations", counters::factorizations()},
              {"distance_queries", counters::distance_queries()},
              {"targets", per_target}};
  write_atomic((dir / "offline_report.json").string(), report.dump(2) + "\n");

  std::printf("offline: %zu morphs, r=%d of rank %d, delta_grad %s\n", files.size(),
              result.model.r, result.model.pod.rank(),
              format_double(result.model.delta_grad).c_str());
  return 0;
}

// ===========================================================================
// online

struct OnlineOptions {
  std::string model, target, targets, out;
  std::string offline_report;
  int workers = 1;
  bool vtk = false;
  double delta_geo = -1.0;
  double delta_grad = -1.0;
  double gamma_online = -1.0;
  int max_online_iterations = -1;
};

struct OnlineRun {
  std::string file;
  std::string status;
  std::string message;
  int iterations = 0;
  double final_delta2 = 0.0;
  double gradient_norm = 0.0;
  double seconds = 0.0;
};

int status_exit_code(const std::string& status) {
  if (status == "converged") return 0;
  if (status == "out_of_distribution") return 2;
  if (status == "max_iter_gradient_large") return 3;
  return 1;
}

int run_online(const OnlineOptions& opt) {
  if (opt.target.empty() == opt.targets.empty())
    throw std::runtime_error("pass exactly one of --target (single) or --targets (batch)");
  ensure_dir(opt.out);
  const fs::path dir(opt.out);

  ReducedModel model = load_model(opt.model);
  if (opt.delta_geo > 0) model.delta_geo = opt.delta_geo;
  if (opt.delta_grad >= 0) model.delta_grad = opt.delta_grad;
  if (opt.gamma_online > 0) model.gamma_online = opt.gamma_online;
  if (opt.max_online_iterations > 0) model.max_online_iterations = opt.max_online_iterations;

  const std::vector<std::string> files =
      opt.target.empty() ? collect_targets(opt.targets) : std::vector<std::string>{opt.target};
  const bool batch = opt.target.empty();

  const uint64_t fact0 = counters::factorizations();
  const uint64_t queries0 = counters::distance_queries();

  std::vector<OnlineRun> runs(files.size());
  std::atomic<size_t> cursor{0};
  auto work = [&]() {
    for (size_t i; (i = cursor.fetch_add(1)) < files.size();) {
      OnlineRun& run = runs[i];
      run.file = fs::path(files[i]).filename().string();
      const fs::path sample_dir = batch ? dir / path_stem(files[i]) : dir;
      try {
        ensure_dir(sample_dir.string());
        const BoundaryIndex index = build_index(load_polyline(files[i]));
        const auto t0 = std::chrono::steady_clock::now();
        const Eigen::VectorXd alpha0 = predict_init(model, index);
        OnlineReport report = online_solve(model, index, alpha0);
        run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        run.status = report.status;
        run.iterations = report.iterations;
        run.final_delta2 = report.final_delta2;
        run.gradient_norm = report.gradient_norm;

        const ReducedMorphing morphing = realize(model, report.alpha);
        json doc{{"target", run.file},
                 {"status", report.status},
                 {"iterations", report.iterations},
                 {"final_delta2", report.final_delta2},
                 {"gradient_norm", report.gradient_norm},
                 {"delta_geo", model.delta_geo},
                 {"delta_grad", model.delta_grad},
                 {"alpha0", vec_json(report.alpha0)},
                 {"alpha", vec_json(report.alpha)}};
        write_atomic((sample_dir / "report.json").string(), doc.dump(2) + "\n");
        write_atomic((sample_dir / "history.csv").string(), online_history_csv(report.history));
        write_atomic((sample_dir / "morphed.json").string(),
                     mesh_to_json(with_positions(model.reference, morphing.positions)).dump());
        if (opt.vtk) {
          const Eigen::VectorXd u = pack_positions(morphing.positions) -
                                    pack_positions(model.reference.vertices);
          export_vtk(model.reference, morphing.positions, {{"displacement", u}},
                     (sample_dir / "morphed.vtk").string());
        }
      } catch (const std::exception& e) {
        run.status = "error";
        run.message = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::max(1, opt.workers); ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  double mean_seconds = 0.0, max_seconds = 0.0;
  json per_target = json::array();
  int n_converged = 0;
  int exit_code = 0;
  for (const OnlineRun& run : runs) {
    mean_seconds += run.seconds / static_cast<double>(runs.size());
    max_seconds = std::max(max_seconds, run.seconds);
    n_converged += run.status == "converged";
    json row{{"file", run.file},
             {"status", run.status},
             {"iterations", run.iterations},
             {"final_delta2", run.final_delta2},
             {"gradient_norm", run.gradient_norm},
             {"seconds", run.seconds}};
    if (!run.message.empty()) row["message"] = run.message;
    per_target.push_back(std::move(row));
    // Severity order: hard error > out-of-distribution > iteration cap > ok.
    const int code = status_exit_code(run.status);
    const auto severity = [](int c) { return c == 1 ? 3 : c == 2 ? 2 : c == 3 ? 1 : 0; };
    if (severity(code) > severity(exit_code)) exit_code = code;
  }

  json benchmark{{"n_targets", runs.size()},
                 {"online_mean_seconds", mean_seconds},
                 {"online_max_seconds", max_seconds},
                 {"factorizations", counters::factorizations() - fact0},
                 {"distance_queries", counters::distance_queries() - queries0}};
  if (!opt.offline_report.empty()) {
    const json offline = read_json_file(opt.offline_report);
    const double offline_mean = offline.at("mean_morph_seconds").get<double>();
    benchmark["offline_mean_seconds"] = offline_mean;
    benchmark["time_ratio"] = mean_seconds > 0 ? offline_mean / mean_seconds : 0.0;
  }
  write_atomic((dir / "benchmark.json").string(), benchmark.dump(2) + "\n");

  if (batch) {
    json summary{{"n_targets", runs.size()}, {"converged", n_converged}, {"targets", per_target}};
    write_atomic((dir / "summary.json").string(), summary.dump(2) + "\n");
    std::printf("online: %d/%zu converged\n", n_converged, runs.size());
  } else {
    std::printf("online: %s after %d iterations (delta2 %s)\n", runs[0].status.c_str(),
                runs[0].iterations, format_double(runs[0].final_delta2).c_str());
    if (exit_code != 0)
      fail_json(runs[0].status,
                runs[0].message.empty() ? "online solve did not converge" : runs[0].message);
  }
  return exit_code;
}

// ===========================================================================
// learn / predict: scalar outputs over (coordinates, physical parameters)

struct LearnOptions {
  std::string model, manifest, out;
  std::string tags = "upper,lower";
  int count = 0;  // 0: all snapshots the model was trained on
  GprConfig gpr;
};

int run_learn(const LearnOptions& opt) {
  ensure_dir(opt.out);
  const fs::path dir(opt.out);
  ReducedModel model = load_model(opt.model);
  const json manifest = read_json_file(opt.manifest);
  const fs::path manifest_dir = fs::path(opt.manifest).parent_path();
  const json& samples = manifest.at("samples");
  const std::vector<std::string> tags = split_tags(opt.tags);

  const int n_train = opt.count > 0 ? opt.count : static_cast<int>(model.pod.coords.rows());
  if (n_train != model.pod.coords.rows())
    throw std::runtime_error("training count " + std::to_string(n_train) +
                             " does not match the model's " +
                             std::to_string(model.pod.coords.rows()) + " snapshots");
  if (static_cast<int>(samples.size()) < n_train)
    throw std::runtime_error("manifest has fewer samples than the model's snapshot count");

  const int r = model.r;
  Eigen::MatrixXd X(n_train, r + 2);
  Eigen::VectorXd w(n_train);
  for (int i = 0; i < n_train; ++i) {
    const json& sample = samples.at(i);
    const BoundaryPolyline shape =
        load_polyline((manifest_dir / sample.at("file").get<std::string>()).string());
    const double v0 = sample.at("v0").get<double>();
    const double theta0 = sample.at("theta0").get<double>();
    X.row(i).head(r) = model.pod.coords.row(i).head(r);
    X(i, r) = v0;
    X(i, r + 1) = theta0;
    w[i] = synthetic_scalar_oracle(shape, tags, v0, theta0);
  }

  model.scalar = gpr_train(X, w, opt.gpr);
  model.has_scalar = true;
  model.scalar_coords = r;
  model.scalar_mu_dim = 2;
  save_model(model, (dir / "model.json").string());

  Eigen::VectorXd fitted(n_train);
  std::string csv = "sample,true,predicted,variance\n";
  for (int i = 0; i < n_train; ++i) {
    const GprPrediction p = gpr_predict(model.scalar, X.row(i).transpose());
    fitted[i] = p.mean[0];
    csv += std::to_string(i) + "," + format_double(w[i]) + "," + format_double(fitted[i]) + "," +
           format_double(p.variance[0]) + "\n";
  }
  write_atomic((dir / "training_predictions.csv").string(), csv);
  const double q2 = q2_score(w, fitted);
  write_atomic((dir / "learn_summary.json").string(),
               json{{"n_train", n_train}, {"r", r}, {"mu_dim", 2}, {"q2_train", q2}}.dump(2) +
                   "\n");
  std::printf("learn: %d samples, q2_train = %s\n", n_train, format_double(q2).c_str());
  return 0;
}

struct PredictOptions {
  std::string model, manifest, out;
  std::string tags = "upper,lower";
  int from = 0;   // 0: first sample after the model's snapshots
  int count = 0;  // 0: every remaining manifest sample
  bool truth = true;
  bool r_sweep = false;
  int workers = 1;
  GprConfig gpr;
};

int run_predict(const PredictOptions& opt) {
  ensure_dir(opt.out);
  const fs::path dir(opt.out);
  const ReducedModel model = load_model(opt.model);
  if (!model.has_scalar)
    throw std::runtime_error("model has no scalar head; run the learn command first");
  const json manifest = read_json_file(opt.manifest);
  const fs::path manifest_dir = fs::path(opt.manifest).parent_path();
  const json& samples = manifest.at("samples");
  const std::vector<std::string> tags = split_tags(opt.tags);

  const int n_train = static_cast<int>(model.pod.coords.rows());
  const int from = opt.from > 0 ? opt.from : n_train;
  const int count = opt.count > 0 ? opt.count : static_cast<int>(samples.size()) - from;
  if (from < 0 || count <= 0 || from + count > static_cast<int>(samples.size()))
    throw std::runtime_error("sample range [" + std::to_string(from) + ", " +
                             std::to_string(from + count) + ") outside the manifest");

  const int r = model.r;
  struct Row {
    std::string status;
    int iterations = 0;
    double delta2 = 0.0;
    double truth = 0.0;
    double predicted = 0.0;
    double variance = 0.0;
    Eigen::VectorXd alpha;
    double v0 = 0.0, theta0 = 0.0;
  };
  std::vector<Row> rows(static_cast<size_t>(count));
  std::atomic<int> cursor{0};
  auto work = [&]() {
    for (int k; (k = cursor.fetch_add(1)) < count;) {
      Row& row = rows[static_cast<size_t>(k)];
      const json& sample = samples.at(from + k);
      const BoundaryPolyline shape =
          load_polyline((manifest_dir / sample.at("file").get<std::string>()).string());
      row.v0 = sample.at("v0").get<double>();
      row.theta0 = sample.at("theta0").get<double>();
      const BoundaryIndex index = build_index(shape);
      OnlineReport report = online_solve(model, index, predict_init(model, index));
      row.status = report.status;
      row.iterations = report.iterations;
      row.delta2 = report.final_delta2;
      row.alpha = report.alpha;
      Eigen::VectorXd x(r + 2);
      x.head(r) = report.alpha;
      x[r] = row.v0;
      x[r + 1] = row.theta0;
      const GprPrediction p = gpr_predict(model.scalar, x);
      row.predicted = p.mean[0];
      row.variance = p.variance[0];
      if (opt.truth) row.truth = synthetic_scalar_oracle(shape, tags, row.v0, row.theta0);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::max(1, opt.workers); ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  std::string csv = "sample,true,predicted,variance,status,iterations,delta2\n";
  Eigen::VectorXd y_true(count), y_pred(count);
  int n_converged = 0;
  for (int k = 0; k < count; ++k) {
    const Row& row = rows[static_cast<size_t>(k)];
    n_converged += row.status == "converged";
    y_true[k] = row.truth;
    y_pred[k] = row.predicted;
    csv += std::to_string(from + k) + "," +
           (opt.truth ? format_double(row.truth) : std::string("nan")) + "," +
           format_double(row.predicted) + "," + format_double(row.variance) + "," + row.status +
           "," + std::to_string(row.iterations) + "," + format_double(row.delta2) + "\n";
  }
  write_atomic((dir / "predictions.csv").string(), csv);

  json summary{{"n_samples", count}, {"converged", n_converged}};
  if (opt.truth) {
    const double q2 = q2_score(y_true, y_pred);
    summary["q2"] = q2;
    std::printf("predict: %d samples, %d converged, q2 = %s\n", count, n_converged,
                format_double(q2).c_str());
  } else {
    std::printf("predict: %d samples, %d converged\n", count, n_converged);
  }

  // Scalar accuracy as a function of the truncation rank: retrain the scalar
  // head on the leading r' coordinates and rescore the same online solves.
  if (opt.r_sweep && opt.truth) {
    Eigen::MatrixXd w_train(n_train, 1);
    for (int i = 0; i < n_train; ++i) {
      const json& sample = samples.at(i);
      const BoundaryPolyline shape =
          load_polyline((manifest_dir / sample.at("file").get<std::string>()).string());
      w_train(i, 0) = synthetic_scalar_oracle(shape, tags, sample.at("v0").get<double>(),
                                              sample.at("theta0").get<double>());
    }
    std::string sweep = "r,q2\n";
    for (int rp = 1; rp <= r; ++rp) {
      Eigen::MatrixXd X(n_train, rp + 2);
      for (int i = 0; i < n_train; ++i) {
        X.row(i).head(rp) = model.pod.coords.row(i).head(rp);
        X(i, rp) = samples.at(i).at("v0").get<double>();
        X(i, rp + 1) = samples.at(i).at("theta0").get<double>();
      }
      const GprModel scalar = gpr_train(X, w_train, opt.gpr);
      Eigen::VectorXd pred(count);
      for (int k = 0; k < count; ++k) {
        Eigen::VectorXd x(rp + 2);
        x.head(rp) = rows[static_cast<size_t>(k)].alpha.head(rp);
        x[rp] = rows[static_cast<size_t>(k)].v0;
        x[rp + 1] = rows[static_cast<size_t>(k)].theta0;
        pred[k] = gpr_predict(scalar, x).mean[0];
      }
      sweep += std::to_string(rp) + "," + format_double(q2_score(y_true, pred)) + "\n";
    }
    write_atomic((dir / "q2_vs_r.csv").string(), sweep);
  }

  write_atomic((dir / "predict_summary.json").string(), summary.dump(2) + "\n");
  return 0;
}

// ===========================================================================
// report: SVG plots from whatever run artifacts are present

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::stringstream stream(read_text_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(stream, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

struct ReportOptions {
  std::string in, out;
};

int run_report(const ReportOptions& opt) {
  const std::string out = opt.out.empty() ? opt.in : opt.out;
  ensure_dir(out);
  const fs::path in_dir(opt.in), out_dir(out);
  json generated = json::array();

  if (fs::exists(in_dir / "history.csv")) {
    const auto rows = read_csv((in_dir / "history.csv").string());
    PlotSeries d1{"delta1", {}, {}}, d2{"delta2", {}, {}};
    for (size_t i = 1; i < rows.size(); ++i) {
      const double it = std::stod(rows[i][0]);
      d1.x.push_back(it);
      d1.y.push_back(std::stod(rows[i][1]));
      d2.x.push_back(it);
      d2.y.push_back(std::stod(rows[i][2]));
    }
    PlotSpec spec{"boundary mismatch per iteration", "iteration", "mismatch", true, 640, 420};
    save_line_plot(spec, {d1, d2}, (out_dir / "convergence.svg").string());
    generated.push_back("convergence.svg");
  }

  if (fs::exists(in_dir / "eigenvalues.csv")) {
    const auto rows = read_csv((in_dir / "eigenvalues.csv").string());
    PlotSeries eig{"eigenvalue", {}, {}};
    for (size_t i = 1; i < rows.size(); ++i) {
      eig.x.push_back(std::stod(rows[i][0]));
      eig.y.push_back(std::stod(rows[i][1]));
    }
    PlotSpec spec{"snapshot correlation spectrum", "mode", "eigenvalue", true, 640, 420};
    save_line_plot(spec, {eig}, (out_dir / "eigenvalues.svg").string());
    generated.push_back("eigenvalues.svg");
  }

  if (fs::exists(in_dir / "summary.json")) {
    const json summary = read_json_file((in_dir / "summary.json").string());
    std::vector<int> iterations;
    for (const json& t : summary.at("targets"))
      if (t.at("status").get<std::string>() == "converged")
        iterations.push_back(t.at("iterations").get<int>());
    std::sort(iterations.begin(), iterations.end());
    PlotSeries curve{"converged samples", {}, {}};
    for (size_t i = 0; i < iterations.size(); ++i) {
      curve.x.push_back(iterations[i]);
      curve.y.push_back(static_cast<double>(i + 1));
    }
    PlotSpec spec{"samples converged within an iteration budget", "iterations", "samples", false,
                  640, 420};
    save_line_plot(spec, {curve}, (out_dir / "converged_samples.svg").string());
    generated.push_back("converged_samples.svg");
  }

  if (fs::exists(in_dir / "predictions.csv")) {
    const auto rows = read_csv((in_dir / "predictions.csv").string());
    std::vector<std::pair<double, double>> pairs;
    for (size_t i = 1; i < rows.size(); ++i) {
      const double truth = std::stod(rows[i][1]);
      if (std::isfinite(truth)) pairs.emplace_back(truth, std::stod(rows[i][2]));
    }
    std::sort(pairs.begin(), pairs.end());
    PlotSeries truth{"true", {}, {}}, predicted{"predicted", {}, {}};
    for (size_t i = 0; i < pairs.size(); ++i) {
      truth.x.push_back(static_cast<double>(i + 1));
      truth.y.push_back(pairs[i].first);
      predicted.x.push_back(static_cast<double>(i + 1));
      predicted.y.push_back(pairs[i].second);
    }
    PlotSpec spec{"scalar predictions against truth", "sample (sorted by truth)", "value", false,
                  640, 420};
    save_line_plot(spec, {truth, predicted}, (out_dir / "predictions.svg").string());
    generated.push_back("predictions.svg");
  }

  if (fs::exists(in_dir / "q2_vs_r.csv")) {
    const auto rows = read_csv((in_dir / "q2_vs_r.csv").string());
    PlotSeries q2{"q2", {}, {}};
    for (size_t i = 1; i < rows.size(); ++i) {
      q2.x.push_back(std::stod(rows[i][0]));
      q2.y.push_back(std::stod(rows[i][1]));
    }
    PlotSpec spec{"scalar accuracy against truncation rank", "modes", "q2", false, 640, 420};
    save_line_plot(spec, {q2}, (out_dir / "q2_vs_r.svg").string());
    generated.push_back("q2_vs_r.svg");
  }

  if (generated.empty())
    throw std::runtime_error(
        "no report inputs in '" + opt.in +
        "': expected history.csv, eigenvalues.csv, summary.json, predictions.csv or q2_vs_r.csv");

  write_atomic((out_dir / "report_summary.json").string(),
               json{{"input_dir", opt.in}, {"generated", generated}}.dump(2) + "\n");
  std::printf("report: wrote %zu plot(s) under %s\n", generated.size(), out.c_str());
  return 0;
}

void add_gpr_options(CLI::App& cmd, GprConfig& gpr) {
  cmd.add_option("--gpr-restarts", gpr.restarts, "hyperparameter optimization restarts");
  cmd.add_option("--gpr-seed", gpr.seed, "restart perturbation seed");
  cmd.add_option("--gpr-max-iterations", gpr.max_opt_iterations, "optimizer iteration cap");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"elasticity-driven mesh morphing with reduced-order online solves"};
  app.require_subcommand(1);
  int exit_code = 0;

  auto synth = std::make_shared<SynthOptions>();
  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic geometry family");
  attach_config(synth_cmd);
  synth_cmd->add_option("--kind", synth->kind, "plate, airfoil or notched")
      ->check(CLI::IsMember({"plate", "airfoil", "notched"}));
  synth_cmd->add_option("--out", synth->out, "output directory")->required();
  synth_cmd->add_option("--count", synth->count, "family size");
  synth_cmd->add_option("--mesh-h", synth->h, "reference mesh element size (plate)");
  synth_cmd->add_option("--target-h", synth->target_h, "target polyline segment length");
  synth_cmd->add_option("--reference-radius", synth->reference_radius, "plate reference radius");
  synth_cmd->add_option("--radius-min", synth->radius_min, "uniform radius family lower bound");
  synth_cmd->add_option("--radius-max", synth->radius_max, "uniform radius family upper bound");
  synth_cmd->add_option("--notch-half-width", synth->notch_half_width, "notched target half width");
  synth_cmd->add_option("--n-boundary", synth->n_boundary, "airfoil surface point count");
  synth_cmd->add_option("--target-points", synth->target_points,
                        "airfoil target polyline points (0: 4x n-boundary)");
  synth_cmd->add_option("--farfield", synth->farfield, "airfoil far-field radius");
  synth_cmd->add_option("--seed", synth->seed, "family sampling seed");
  synth_cmd->add_option("--m-max", synth->m_max, "airfoil camber upper bound");
  synth_cmd->add_option("--p-min", synth->p_min, "airfoil camber position lower bound");
  synth_cmd->add_option("--p-max", synth->p_max, "airfoil camber position upper bound");
  synth_cmd->add_option("--t-min", synth->t_min, "airfoil thickness lower bound");
  synth_cmd->add_option("--t-max", synth->t_max, "airfoil thickness upper bound");
  synth_cmd->add_option("--v0-min", synth->v0_min, "flow speed lower bound");
  synth_cmd->add_option("--v0-max", synth->v0_max, "flow speed upper bound");
  synth_cmd->add_option("--theta-min", synth->theta_min, "flow angle lower bound");
  synth_cmd->add_option("--theta-max", synth->theta_max, "flow angle upper bound");
  synth_cmd->callback([&] { exit_code = run_synth(*synth); });

  auto morph = std::make_shared<MorphOptions>();
  CLI::App* morph_cmd = app.add_subcommand("morph", "one high-fidelity morphing run");
  attach_config(morph_cmd);
  morph_cmd->add_option("--reference", morph->reference, "reference mesh file")->required();
  morph_cmd->add_option("--target", morph->target, "target boundary polyline file")->required();
  morph_cmd->add_option("--out", morph->out, "output directory")->required();
  morph_cmd->add_option("--algorithm", morph->algorithm, "sdf or vdf")
      ->check(CLI::IsMember({"sdf", "vdf"}));
  morph->elastic.add_to(*morph_cmd);
  morph_cmd->add_option("--stall-limit", morph->stall_limit,
                        "non-improving iterations before aborting");
  morph_cmd->add_flag("--correct,!--no-correct", morph->correct,
                      "exact boundary placement after convergence");
  morph_cmd->add_flag("--vtk,!--no-vtk", morph->vtk, "write the morphed mesh as VTK");
  morph_cmd->add_flag("--svg", morph->svg, "write a wireframe plot of the morphed mesh");
  morph_cmd->add_option("--vtk-every", morph->vtk_every,
                        "write a VTK snapshot every k iterations (0: off)");
  morph_cmd->callback([&] { exit_code = run_cmd_morph(*morph); });

  auto offline = std::make_shared<OfflineOptions>();
  CLI::App* offline_cmd = app.add_subcommand("offline", "train a reduced model on a family");
  attach_config(offline_cmd);
  offline_cmd->add_option("--reference", offline->reference, "reference mesh file")->required();
  offline_cmd->add_option("--targets", offline->targets, "target directory or synth manifest")
      ->required();
  offline_cmd->add_option("--out", offline->out, "output directory")->required();
  offline_cmd->add_option("--algorithm", offline->algorithm, "sdf or vdf")
      ->check(CLI::IsMember({"sdf", "vdf"}));
  offline_cmd->add_option("--count", offline->count, "train on the first N targets (0: all)");
  offline->elastic.add_to(*offline_cmd);
  offline_cmd->add_option("--delta-geo", offline->delta_geo, "geometric tolerance");
  offline_cmd->add_option("--selection", offline->selection, "rank selection: geometric or energy")
      ->check(CLI::IsMember({"geometric", "energy"}));
  offline_cmd->add_option("--delta-pod", offline->delta_pod, "energy-criterion threshold");
  offline_cmd->add_option("--feature-modes", offline->feature_modes, "boundary feature modes q");
  offline_cmd->add_option("--gamma-online", offline->gamma_online, "online step size");
  offline_cmd->add_option("--max-online-iterations", offline->max_online_iterations,
                          "online iteration cap");
  offline_cmd->add_option("--stall-limit", offline->stall_limit,
                          "non-improving iterations before aborting a morph");
  add_gpr_options(*offline_cmd, offline->gpr);
  offline_cmd->callback([&] { exit_code = run_offline(*offline); });

  auto online = std::make_shared<OnlineOptions>();
  CLI::App* online_cmd = app.add_subcommand("online", "reduced online solve (single or batch)");
  attach_config(online_cmd);
  online_cmd->add_option("--model", online->model, "reduced model file")->required();
  online_cmd->add_option("--target", online->target, "single target polyline file");
  online_cmd->add_option("--targets", online->targets, "target directory or synth manifest");
  online_cmd->add_option("--out", online->out, "output directory")->required();
  online_cmd->add_option("--offline-report", online->offline_report,
                         "offline report for the time-ratio benchmark");
  online_cmd->add_option("--workers", online->workers, "parallel targets");
  online_cmd->add_flag("--vtk", online->vtk, "write morphed meshes as VTK");
  online_cmd->add_option("--delta-geo", online->delta_geo, "override the model's tolerance");
  online_cmd->add_option("--delta-grad", online->delta_grad,
                         "override the out-of-distribution threshold");
  online_cmd->add_option("--gamma-online", online->gamma_online, "override the online step size");
  online_cmd->add_option("--max-online-iterations", online->max_online_iterations,
                         "override the online iteration cap");
  online_cmd->callback([&] { exit_code = run_online(*online); });

  auto learn = std::make_shared<LearnOptions>();
  CLI::App* learn_cmd = app.add_subcommand("learn", "train the scalar head of a reduced model");
  attach_config(learn_cmd);
  learn_cmd->add_option("--model", learn->model, "reduced model file")->required();
  learn_cmd->add_option("--manifest", learn->manifest, "synth manifest with flow parameters")
      ->required();
  learn_cmd->add_option("--out", learn->out, "output directory")->required();
  learn_cmd->add_option("--tags", learn->tags, "comma-separated shape loop tags");
  learn_cmd->add_option("--count", learn->count, "training sample count (0: model snapshots)");
  add_gpr_options(*learn_cmd, learn->gpr);
  learn_cmd->callback([&] { exit_code = run_learn(*learn); });

  auto predict = std::make_shared<PredictOptions>();
  CLI::App* predict_cmd = app.add_subcommand("predict", "online solve + scalar prediction");
  attach_config(predict_cmd);
  predict_cmd->add_option("--model", predict->model, "reduced model file with scalar head")
      ->required();
  predict_cmd->add_option("--manifest", predict->manifest, "synth manifest with flow parameters")
      ->required();
  predict_cmd->add_option("--out", predict->out, "output directory")->required();
  predict_cmd->add_option("--tags", predict->tags, "comma-separated shape loop tags");
  predict_cmd->add_option("--from", predict->from,
                          "first manifest sample to predict (0: after training set)");
  predict_cmd->add_option("--count", predict->count, "sample count (0: rest of manifest)");
  predict_cmd->add_flag("--truth,!--no-truth", predict->truth,
                        "recompute oracle truth and report q2");
  predict_cmd->add_flag("--r-sweep", predict->r_sweep, "emit q2 against truncation rank");
  predict_cmd->add_option("--workers", predict->workers, "parallel samples");
  add_gpr_options(*predict_cmd, predict->gpr);
  predict_cmd->callback([&] { exit_code = run_predict(*predict); });

  auto report = std::make_shared<ReportOptions>();
  CLI::App* report_cmd = app.add_subcommand("report", "render SVG plots from run artifacts");
  attach_config(report_cmd);
  report_cmd->add_option("--in", report->in, "artifact directory")->required();
  report_cmd->add_option("--out", report->out, "plot directory (default: --in)");
  report_cmd->callback([&] { exit_code = run_report(*report); });

  try {
    std::vector<std::string> args = expand_config(app, argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    fail_json("error", e.what());
    return 1;
  }
  return exit_code;
}
