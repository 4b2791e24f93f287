#pragma once

// The `une` command-line tool. run() is separate from main() so tests can
// drive it in-process.
//
// Exit codes: 0 success, 1 data or compute error, 2 usage error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "une/une.hpp"

namespace une::cli {

namespace fs = std::filesystem;

namespace detail {

struct Globals {
  std::string workdir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : fs::path(workdir) / path;
  }
};

inline std::string stem_of(const std::string& p) { return fs::path(p).stem().string(); }

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

inline void save_matrix(const Matrix& m, const fs::path& p) {
  ensure_parent(p);
  write_lat1(m, p);
}

inline Json vector_json(const std::vector<std::string>& v) { return Json(v); }

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string preset = "oracle-default";
  std::string out;
  double sigma = 0.0;
  bool controls = false;
};

inline int simulate(const Globals& g, const SimulateArgs& a, std::ostream& log) {
  if (a.preset != "oracle-default") throw ConfigError("unknown simulation preset '" + a.preset + "'");
  OraclePreset p = oracle_default();
  if (g.seed_given) p.seed = g.seed;
  const OracleDataset ds = make_oracle(p, a.sigma);
  const fs::path out = g.resolve(a.out);
  fs::create_directories(out);

  DatasetManifest man = ds.manifest;
  man.dataset_name = "oracle-default";
  man.attributes_path = "attributes.csv";
  auto record = [&](const std::string& rel) { man.checksums[rel] = sha256_file(out / rel); };

  save_latents(ds.une, out / "une.lat1");
  man.models["une"]["all"] = "une.lat1";
  record("une.lat1");
  for (const auto& v : ds.views) {
    const std::string id = v.model_id();
    const auto [tr, te] = split(v, ds.manifest);
    save_latents(v, out / (id + ".lat1"));
    save_latents(tr, out / (id + "_train.lat1"));
    save_latents(te, out / (id + "_test.lat1"));
    man.models[id] = {{"all", id + ".lat1"}, {"train", id + "_train.lat1"}, {"test", id + "_test.lat1"}};
    for (const char* suffix : {".lat1", "_train.lat1", "_test.lat1"}) record(id + suffix);
  }
  save_attributes(ds.labels, out / "attributes.csv");
  save_attributes(ds.labels.select_rows(ds.manifest.train_indices), out / "attributes_train.csv");
  save_attributes(ds.labels.select_rows(ds.manifest.test_indices), out / "attributes_test.csv");
  for (const char* f : {"attributes.csv", "attributes_train.csv", "attributes_test.csv"}) record(f);

  if (a.controls) {
    fs::create_directories(out / "controls");
    const std::vector<std::pair<std::string, LatentMatrix>> controls = {
        {"gaussian", sample_une({64, 250, p.seed + 10})},
        {"delta", control_distribution({ControlKind::delta, 250, 64, p.seed + 11})},
        {"uniform5d", control_distribution({ControlKind::uniform_lowdim, 250, 64, p.seed + 12, 5})},
        {"bimodal", control_distribution({ControlKind::bimodal, 250, 2, p.seed + 13, 5, 4.0})},
    };
    for (const auto& [name, m] : controls) {
      const std::string rel = "controls/" + name + ".lat1";
      save_latents(m, out / rel);
      man.models["control-" + name]["all"] = rel;
      record(rel);
    }
  }

  Json truth;
  truth["preset"] = a.preset;
  truth["seed"] = p.seed;
  truth["sigma"] = a.sigma;
  truth["une_dim"] = p.dim;
  truth["n"] = p.n;
  truth["train_fraction"] = p.train_fraction;
  Json views = Json::array();
  for (std::size_t i = 0; i < ds.views.size(); ++i) {
    views.push_back({{"model_id", ds.views[i].model_id()}, {"dim", ds.views[i].cols()}, {"mixing", to_json(ds.mixings[i])}});
  }
  truth["views"] = views;
  Json attrs = Json::array();
  for (const auto& at : ds.attributes) {
    attrs.push_back({{"name", at.name}, {"kind", "binary"}, {"direction", to_json(at.direction)}});
  }
  truth["attributes"] = attrs;
  write_json(truth, out / "ground_truth.json");
  record("ground_truth.json");

  save_manifest(man, out / "manifest.json");
  log << "wrote oracle-default (sigma=" << a.sigma << ", seed=" << p.seed << ") to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gaussianity
// ---------------------------------------------------------------------------

struct GaussianityArgs {
  std::string latents;
  std::string control;
  Index dim = 64;
  Index n = 250;
  std::size_t projections = 5000;
  std::size_t subset = 250;
  bool resample = false;
  double jitter = 1e-12;
  std::string model;
  std::string out;
};

inline int gaussianity(const Globals& g, const GaussianityArgs& a, std::ostream& log) {
  ReportEnvelope env;
  env.command = "gaussianity";
  env.seed = g.seed;
  LatentMatrix m;
  std::string model = a.model;
  if (!a.latents.empty()) {
    const fs::path p = g.resolve(a.latents);
    m = load_latents(p);
    env.add_input(p, a.latents);
    if (model.empty()) model = m.model_id();
  } else {
    if (a.control == "gaussian") {
      m = sample_une({a.dim, a.n, g.seed});
    } else {
      m = control_distribution({parse_control_kind(a.control), a.n, a.dim, g.seed});
    }
    if (model.empty()) model = a.control;
    env.config["control"] = {{"kind", a.control}, {"dim", a.dim}, {"n", a.n}};
  }
  const BatteryOptions opt{a.projections, a.subset, g.seed, a.resample, a.jitter};
  env.config["projections"] = a.projections;
  env.config["subset"] = a.subset;
  env.config["resample_subset"] = a.resample;
  env.config["jitter"] = a.jitter;
  env.config["model"] = model;
  const NormalityReport r = projection_battery(m, opt);
  env.results = to_json(r);
  env.results["model"] = model;
  env.results["rows"] = m.rows();
  env.results["dim"] = m.cols();
  env.table = table_rows(model, r);
  write_json(env.to_json(), g.resolve(a.out));
  log << model << ": AD " << 100.0 * r.ad_accept_rate << "%  DP " << 100.0 * r.dp_accept_rate << "%  SW "
      << 100.0 * r.sw_accept_rate << "%\n";
  return 0;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

struct ProbeArgs {
  std::string train, test, attrs, test_attrs, manifest, out, save_probe, model;
  Index pca_k = 0;
  double lambda = 1e-4;
};

/// Train/test attribute tables from (attrs, test_attrs) or (full attrs, manifest)
/// or a full table whose first rows are train and remaining rows are test.
inline std::pair<AttributeTable, AttributeTable> resolve_attrs(const Globals& g, const std::string& attrs,
                                                               const std::string& test_attrs,
                                                               const std::string& manifest, Index n_train,
                                                               Index n_test, ReportEnvelope& env) {
  const fs::path ap = g.resolve(attrs);
  const AttributeTable full = load_attributes(ap);
  env.add_input(ap, attrs);
  if (!test_attrs.empty()) {
    const fs::path tp = g.resolve(test_attrs);
    env.add_input(tp, test_attrs);
    return {full, load_attributes(tp)};
  }
  if (!manifest.empty()) {
    const fs::path mp = g.resolve(manifest);
    env.add_input(mp, manifest);
    const DatasetManifest man = load_manifest(mp);
    man.validate(static_cast<std::size_t>(full.rows()));
    return {full.select_rows(man.train_indices), full.select_rows(man.test_indices)};
  }
  if (full.rows() != n_train + n_test) {
    throw AlignmentError("attribute table has " + std::to_string(full.rows()) + " rows; expected train+test = " +
                         std::to_string(n_train + n_test) + " (or pass --test-attrs / --manifest)");
  }
  std::vector<std::size_t> tr(static_cast<std::size_t>(n_train)), te(static_cast<std::size_t>(n_test));
  std::iota(tr.begin(), tr.end(), std::size_t{0});
  std::iota(te.begin(), te.end(), static_cast<std::size_t>(n_train));
  return {full.select_rows(tr), full.select_rows(te)};
}

inline int probe(const Globals& g, const ProbeArgs& a, std::ostream& log) {
  ReportEnvelope env;
  env.command = "probe";
  env.seed = g.seed;
  const fs::path trp = g.resolve(a.train), tep = g.resolve(a.test);
  const LatentMatrix tr = load_latents(trp, {}, "train"), te = load_latents(tep, {}, "test");
  env.add_input(trp, a.train);
  env.add_input(tep, a.test);
  const auto [atr, ate] = resolve_attrs(g, a.attrs, a.test_attrs, a.manifest, tr.rows(), te.rows(), env);
  ProbeOptions opt;
  opt.pca_k = a.pca_k;
  opt.l2_lambda = a.lambda;
  const ProbeResult r = probe_all(tr, te, atr, ate, opt);
  const std::string model = a.model.empty() ? tr.model_id() : a.model;
  env.config = {{"pca_k_requested", a.pca_k > 0 ? a.pca_k : default_pca_k(tr.cols())},
                {"l2_lambda", a.lambda},
                {"objective", "mean logistic loss + lambda/2 |w|^2 on standardised PCA scores"},
                {"model", model}};
  env.results = to_json(r.report);
  env.table = table_rows(model, r.report);
  if (!a.save_probe.empty()) {
    save_probe(r.probe, g.resolve(a.save_probe));
    env.config["saved_probe"] = a.save_probe;
  }
  write_json(env.to_json(), g.resolve(a.out));
  log << model << ": mean accuracy " << r.report.mean_accuracy << " (pca_k " << r.report.pca_k << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// transfer
// ---------------------------------------------------------------------------

struct TransferArgs {
  std::string src, dst, src_test, dst_test, probe, attrs, out, save_map;
  double alpha = 1.0;
};

inline int transfer(const Globals& g, const TransferArgs& a, std::ostream& log) {
  ReportEnvelope env;
  env.command = "transfer";
  env.seed = g.seed;
  const fs::path sp = g.resolve(a.src), dp = g.resolve(a.dst);
  const LatentMatrix src = load_latents(sp), dst = load_latents(dp);
  env.add_input(sp, a.src);
  env.add_input(dp, a.dst);
  const LinearMap map = fit_ridge_map(src, dst, a.alpha);
  env.config = {{"alpha", a.alpha}, {"alpha_scaling", "alpha * |X_src|_F^2 / d_src"}};
  env.results["map"] = to_json(map);
  const Matrix fitted = predict(map, src.data());
  env.results["train_mse"] = number(mean_squared_error(fitted, dst.data()));
  env.results["train_mean_cosine"] = number(mean_row_cosine(fitted, dst.data()));
  const std::string model = src.model_id() + "->" + dst.model_id();
  env.results["model"] = model;

  if (!a.src_test.empty() || !a.dst_test.empty() || !a.probe.empty()) {
    if (a.src_test.empty() || a.dst_test.empty() || a.probe.empty() || a.attrs.empty()) {
      throw ConfigError("evaluation needs --src-test, --dst-test, --probe and --attrs together");
    }
    const fs::path stp = g.resolve(a.src_test), dtp = g.resolve(a.dst_test), pp = g.resolve(a.probe),
                   ap = g.resolve(a.attrs);
    const LatentMatrix st = load_latents(stp), dt = load_latents(dtp);
    const LinearProbe probe = load_probe(pp);
    const AttributeTable attrs = load_attributes(ap);
    env.add_input(stp, a.src_test);
    env.add_input(dtp, a.dst_test);
    env.add_input(pp, a.probe);
    env.add_input(ap, a.attrs);
    const TransferReport r = evaluate_transfer(map, st, dt, probe, attrs);
    env.results["evaluation"] = to_json(r);
    env.table = table_rows(model, r);
    log << model << ": mse " << r.mse << "  cosine " << r.mean_cosine << "  drop " << r.mean_accuracy_drop_pp
        << " pp\n";
  } else {
    log << model << ": train mse " << env.results["train_mse"] << "\n";
  }
  if (!a.save_map.empty()) {
    const fs::path md = g.resolve(a.save_map);
    save_matrix(map.weights, md / "weights.lat1");
    save_matrix(Matrix(map.bias.transpose()), md / "bias.lat1");
  }
  write_json(env.to_json(), g.resolve(a.out));
  return 0;
}

// ---------------------------------------------------------------------------
// shared
// ---------------------------------------------------------------------------

struct SharedArgs {
  std::vector<std::string> views, test_views, lambdas_raw;
  Index k = 64;
  std::string out, preset, attrs, test_attrs;
  std::vector<Index> k_grid;
  double rank_tol = 1e-10;
  int alternations = 0;
};

inline int shared(const Globals& g, const SharedArgs& a, std::ostream& log) {
  ReportEnvelope env;
  env.command = "shared";
  env.seed = g.seed;
  if (a.views.empty()) throw ConfigError("--views needs at least one file");
  std::vector<std::string> ids;
  if (!a.preset.empty()) {
    ids = shared_preset(a.preset).models;
    if (ids.size() != a.views.size()) {
      throw ConfigError("preset " + a.preset + " lists " + std::to_string(ids.size()) + " models, got " +
                        std::to_string(a.views.size()) + " views");
    }
  }
  std::vector<LatentMatrix> views;
  for (std::size_t i = 0; i < a.views.size(); ++i) {
    const fs::path p = g.resolve(a.views[i]);
    views.push_back(load_latents(p, ids.empty() ? std::string{} : ids[i], "train"));
    env.add_input(p, a.views[i]);
  }
  GccaOptions opt;
  opt.rank_tol = a.rank_tol;
  opt.alternations = a.alternations;
  for (const auto& l : a.lambdas_raw) opt.lambdas.push_back(std::stod(l));
  const SharedSpace sp = gcca_fit(views, a.k, opt);

  const fs::path out = g.resolve(a.out);
  fs::create_directories(out);
  save_matrix(sp.x, out / "x.lat1");
  for (std::size_t i = 0; i < views.size(); ++i) {
    const std::string id = sp.source_model_ids[i];
    save_matrix(sp.projectors[i], out / ("projector_" + id + ".lat1"));
    save_matrix(Matrix(sp.means[i].transpose()), out / ("mean_" + id + ".lat1"));
  }
  env.config = {{"k", a.k}, {"rank_tol", a.rank_tol}, {"alternations", a.alternations}, {"preset", a.preset}};
  env.results = summary_json(sp);

  if (!a.test_views.empty()) {
    if (a.test_views.size() != views.size()) throw ConfigError("--test-views must match --views");
    std::vector<LatentMatrix> test;
    for (const auto& t : a.test_views) {
      const fs::path p = g.resolve(t);
      test.push_back(load_latents(p, {}, "test"));
      env.add_input(p, t);
    }
    save_matrix(project_views_to_shared(sp, test), out / "x_test.lat1");
    if (!a.attrs.empty()) {
      const auto [atr, ate] = resolve_attrs(g, a.attrs, a.test_attrs, {}, views[0].rows(), test[0].rows(), env);
      std::vector<Index> grid = a.k_grid.empty() ? std::vector<Index>{a.k} : a.k_grid;
      const auto curve = shared_probe_curve(views, test, atr, ate, grid, opt);
      Json c = Json::array();
      for (const auto& pt : curve) {
        Json accs = Json::object();
        for (std::size_t j = 0; j < pt.attribute_names.size(); ++j) accs[pt.attribute_names[j]] = number(pt.accuracy[j]);
        c.push_back({{"k", pt.k}, {"mean_accuracy", number(pt.mean_accuracy)}, {"accuracy", accs}});
        env.table.push_back({"shared", "mean_accuracy@k=" + std::to_string(pt.k), pt.mean_accuracy});
      }
      env.results["probe_curve"] = c;
    }
  }
  write_json(env.to_json(), out / "shared.json");
  log << "shared space k=" << a.k << " objective " << sp.objective << " (shared rank " << sp.shared_rank << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// retrieval
// ---------------------------------------------------------------------------

struct RetrievalArgs {
  std::vector<std::string> spaces;
  std::size_t subset_size = 10000;
  std::string out;
};

inline int retrieval(const Globals& g, const RetrievalArgs& a, std::ostream& log) {
  ReportEnvelope env;
  env.command = "retrieval";
  env.seed = g.seed;
  std::vector<Matrix> spaces;
  std::vector<std::string> names;
  for (const auto& s : a.spaces) {
    const fs::path p = g.resolve(s);
    spaces.push_back(read_lat1(p));
    names.push_back(stem_of(s));
    env.add_input(p, s);
  }
  if (spaces.empty()) throw ConfigError("--spaces needs at least one file");
  const auto n = static_cast<std::size_t>(spaces.front().rows());
  const std::size_t size = std::min(a.subset_size, n);
  const auto subset = sample_subset(n, size, g.seed);
  const SpearmanStructure s = spearman_structure(spaces, subset);
  env.config = {{"subset_size_requested", a.subset_size}, {"subset_size", size}};
  env.results = to_json(s, names);
  env.table = table_rows(s, names);
  write_json(env.to_json(), g.resolve(a.out));
  log << "spearman structure over " << size << " anchors written\n";
  return 0;
}

// ---------------------------------------------------------------------------
// edit
// ---------------------------------------------------------------------------

struct EditArgs {
  std::string latents, train, probe, attr, out, log_path;
  std::vector<double> intensities = {-2, -1, 0, 1, 2};
  std::vector<std::string> orth_against;
};

inline int edit(const Globals& g, const EditArgs& a, std::ostream& log) {
  ReportEnvelope env;
  env.command = "edit";
  env.seed = g.seed;
  const fs::path lp = g.resolve(a.latents), pp = g.resolve(a.probe);
  const LatentMatrix z = load_latents(lp);
  const LinearProbe probe = load_probe(pp);
  env.add_input(lp, a.latents);
  env.add_input(pp, a.probe);
  LatentMatrix train = z;
  if (!a.train.empty()) {
    const fs::path tp = g.resolve(a.train);
    train = load_latents(tp);
    env.add_input(tp, a.train);
  }
  SemanticDirection dir = direction_from_probe(probe, a.attr, train);
  std::vector<SemanticDirection> spurious;
  for (const auto& s : a.orth_against) spurious.push_back(direction_from_probe(probe, s, train));
  if (!spurious.empty()) dir = orthogonalize_against(dir, spurious);

  const Matrix edited = edit_rows_to_intensities(z.data(), dir, a.intensities);
  save_matrix(edited, g.resolve(a.out));

  const auto nt = static_cast<Index>(a.intensities.size());
  double max_intensity_err = 0.0, max_spurious_shift = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const Vector zr = z.data().row(r).transpose();
    for (Index j = 0; j < nt; ++j) {
      const Vector e = edited.row(r * nt + j).transpose();
      max_intensity_err = std::max(max_intensity_err, std::abs(intensity(e, dir) - a.intensities[static_cast<std::size_t>(j)]));
      for (const auto& s : spurious) max_spurious_shift = std::max(max_spurious_shift, std::abs(s.w.dot(e - zr)));
    }
  }
  env.config = {{"attribute", a.attr},
                {"intensities", a.intensities},
                {"orth_against", a.orth_against},
                {"row_layout", "row i * T + j is input row i at intensity j"}};
  env.results = {{"direction", to_json(dir)},
                 {"rows_in", z.rows()},
                 {"rows_out", edited.rows()},
                 {"max_intensity_error", number(max_intensity_err)},
                 {"max_spurious_score_shift", number(max_spurious_shift)},
                 {"output", a.out}};
  env.add_input(g.resolve(a.out), a.out);
  if (!a.log_path.empty()) write_json(env.to_json(), g.resolve(a.log_path));
  log << "edited " << z.rows() << " latents at " << nt << " intensities along " << a.attr << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string format = "csv";
  std::string out;
};

inline int report(const Globals& g, const ReportArgs& a, std::ostream& out) {
  std::vector<TableRow> rows;
  Json merged = Json::array();
  for (const auto& in : a.inputs) {
    Json j;
    try {
      j = Json::parse(une::detail::read_file_bytes(g.resolve(in)));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(in + ": " + e.what());
    }
    const auto r = table_from_report(j);
    rows.insert(rows.end(), r.begin(), r.end());
    merged.push_back({{"source", in}, {"table", to_json(r)}});
  }
  const std::string text = a.format == "csv" ? format_table_csv(rows) : dump_json(merged);
  if (a.out.empty()) {
    out << text;
  } else {
    const fs::path p = g.resolve(a.out);
    ensure_parent(p);
    une::detail::write_file_bytes(p, text);
  }
  return 0;
}

}  // namespace detail

/// Parses argv and runs one subcommand. Normal output goes to `out`,
/// diagnostics and usage to `err`.
inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Universal Normal Embedding toolkit", "une"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  detail::Globals g;
  app.add_option("--workdir", g.workdir, "Base directory for relative paths");
  auto* seed_opt = app.add_option("--seed", g.seed, "Global RNG seed");

  detail::SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Write the synthetic oracle dataset");
  c_sim->add_option("--preset", sim.preset)->capture_default_str();
  c_sim->add_option("--out", sim.out)->required();
  c_sim->add_option("--sigma", sim.sigma, "Noise level of the views")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_sim->add_flag("--controls", sim.controls, "Also write delta / uniform / bimodal / Gaussian control sets");

  detail::GaussianityArgs gs;
  auto* c_gs = app.add_subcommand("gaussianity", "Random 1-D projection normality battery");
  auto* g_lat = c_gs->add_option("--latents", gs.latents);
  auto* g_ctl = c_gs->add_option("--control", gs.control, "delta | uniform | bimodal | gaussian")->excludes(g_lat);
  c_gs->add_option("--dim", gs.dim)->capture_default_str()->needs(g_ctl);
  c_gs->add_option("--n", gs.n)->capture_default_str()->needs(g_ctl);
  c_gs->add_option("--projections", gs.projections)->capture_default_str();
  c_gs->add_option("--subset", gs.subset)->capture_default_str();
  c_gs->add_flag("--resample-subset", gs.resample);
  c_gs->add_option("--jitter", gs.jitter)->capture_default_str();
  c_gs->add_option("--model", gs.model);
  c_gs->add_option("--out", gs.out)->required();

  detail::ProbeArgs pr;
  auto* c_pr = app.add_subcommand("probe", "Fit linear attribute probes");
  c_pr->add_option("--train", pr.train)->required();
  c_pr->add_option("--test", pr.test)->required();
  c_pr->add_option("--attrs", pr.attrs)->required();
  auto* pr_ta = c_pr->add_option("--test-attrs", pr.test_attrs);
  c_pr->add_option("--manifest", pr.manifest)->excludes(pr_ta);
  c_pr->add_option("--pca-k", pr.pca_k, "0 selects 500 for d > 4096, else 310")->capture_default_str();
  c_pr->add_option("--lambda", pr.lambda)->capture_default_str()->check(CLI::PositiveNumber);
  c_pr->add_option("--model", pr.model);
  c_pr->add_option("--out", pr.out)->required();
  c_pr->add_option("--save-probe", pr.save_probe);

  detail::TransferArgs tr;
  auto* c_tr = app.add_subcommand("transfer", "Ridge map between latent spaces");
  c_tr->add_option("--src", tr.src)->required();
  c_tr->add_option("--dst", tr.dst)->required();
  c_tr->add_option("--src-test", tr.src_test);
  c_tr->add_option("--dst-test", tr.dst_test);
  c_tr->add_option("--probe", tr.probe, "Probe directory fitted on the target space");
  c_tr->add_option("--attrs", tr.attrs, "Attribute CSV aligned with the test rows");
  c_tr->add_option("--alpha", tr.alpha)->capture_default_str()->check(CLI::PositiveNumber);
  c_tr->add_option("--save-map", tr.save_map);
  c_tr->add_option("--out", tr.out)->required();

  detail::SharedArgs sh;
  auto* c_sh = app.add_subcommand("shared", "MAXVAR GCCA shared space");
  c_sh->add_option("--views", sh.views)->required()->delimiter(',');
  c_sh->add_option("--k", sh.k)->capture_default_str();
  c_sh->add_option("--out", sh.out)->required();
  c_sh->add_option("--preset", sh.preset, "X1..X5 or oracle-default; names the views");
  c_sh->add_option("--rank-tol", sh.rank_tol)->capture_default_str();
  c_sh->add_option("--lambdas", sh.lambdas_raw)->delimiter(',');
  c_sh->add_option("--alternations", sh.alternations)->capture_default_str();
  c_sh->add_option("--test-views", sh.test_views)->delimiter(',');
  c_sh->add_option("--attrs", sh.attrs);
  c_sh->add_option("--test-attrs", sh.test_attrs);
  c_sh->add_option("--k-grid", sh.k_grid)->delimiter(',');

  detail::RetrievalArgs rt;
  auto* c_rt = app.add_subcommand("retrieval", "Spearman structure of retrieval profiles");
  c_rt->add_option("--spaces", rt.spaces)->required()->delimiter(',');
  c_rt->add_option("--subset-size", rt.subset_size)->capture_default_str();
  c_rt->add_option("--out", rt.out)->required();

  detail::EditArgs ed;
  auto* c_ed = app.add_subcommand("edit", "Edit latents along a probe direction");
  c_ed->add_option("--latents", ed.latents)->required();
  c_ed->add_option("--probe", ed.probe)->required();
  c_ed->add_option("--attr", ed.attr)->required();
  c_ed->add_option("--train", ed.train, "Training latents for the intensity unit (default: --latents)");
  c_ed->add_option("--intensity", ed.intensities)->delimiter(',')->capture_default_str();
  c_ed->add_option("--orth-against", ed.orth_against)->delimiter(',');
  c_ed->add_option("--out", ed.out)->required();
  c_ed->add_option("--log", ed.log_path);

  detail::ReportArgs rp;
  auto* c_rp = app.add_subcommand("report", "Collect report tables");
  c_rp->add_option("--inputs", rp.inputs)->required();
  c_rp->add_option("--format", rp.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  c_rp->add_option("--out", rp.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (*c_sim) return detail::simulate(g, sim, err);
    if (*c_gs) {
      if (gs.latents.empty() && gs.control.empty()) {
        err << "gaussianity: one of --latents or --control is required\n" << c_gs->help();
        return 2;
      }
      return detail::gaussianity(g, gs, err);
    }
    if (*c_pr) return detail::probe(g, pr, err);
    if (*c_tr) return detail::transfer(g, tr, err);
    if (*c_sh) return detail::shared(g, sh, err);
    if (*c_rt) return detail::retrieval(g, rt, err);
    if (*c_ed) return detail::edit(g, ed, err);
    if (*c_rp) return detail::report(g, rp, out);
  } catch (const Error& e) {
    err << "une: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "une: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace une::cli
