// Acceptance checks. One PASS/FAIL line per criterion; exit status is nonzero
// if any check fails. Tolerances are fixed constants below.
//
// The NoiseZoo tier runs only when UNE_NOISEZOO_DIR points at a directory with
//   sd15.lat1, sd15_train.lat1, sd15_test.lat1, clipb16_train.lat1,
//   clipb16_test.lat1, attributes_train.csv, attributes_test.csv

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "une/une.hpp"

using namespace une;

namespace {

int g_failed = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %-44s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

void skip(const std::string& name, const std::string& why) {
  std::printf("SKIP  %-44s %s\n", name.c_str(), why.c_str());
}

template <typename... Ts>
std::string fmt(const Ts&... parts) {
  std::ostringstream ss;
  ss.precision(6);
  (ss << ... << parts);
  return ss.str();
}

Matrix gaussian(Index n, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return une::detail::gaussian_matrix(n, d, rng);
}

double pct(double rate) { return 100.0 * rate; }

/// Runs fn and reports a failure instead of aborting when it throws.
template <typename Fn>
void guarded(const std::string& name, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(name, false, fmt("threw: ", e.what()));
  }
}

// ---------------------------------------------------------------------------

void gaussian_null() {
  const LatentMatrix z = sample_une({64, 250, 1001});
  BatteryOptions opt;
  opt.n_projections = 5000;
  opt.subset_size = 250;
  opt.seed = 2024;
  const auto t0 = std::chrono::steady_clock::now();
  const NormalityReport r = projection_battery(z, opt, 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double ad = pct(r.ad_accept_rate), dp = pct(r.dp_accept_rate), sw = pct(r.sw_accept_rate);
  report("gaussian_null.ad_acceptance", ad >= 93.5 && ad <= 96.5, fmt("AD ", ad, "% in [93.5, 96.5]"));
  report("gaussian_null.dp_acceptance", dp >= 93.0 && dp <= 97.0, fmt("DP ", dp, "% in [93, 97]"));
  report("gaussian_null.sw_acceptance", sw >= 93.0 && sw <= 97.0, fmt("SW ", sw, "% in [93, 97]"));
  report("gaussian_null.runtime_single_thread", secs <= 60.0, fmt(secs, " s <= 60 s"));
}

void control_ordering() {
  BatteryOptions opt;
  opt.n_projections = 5000;
  opt.subset_size = 250;
  opt.seed = 2025;
  const double gauss = pct(projection_battery(sample_une({64, 250, 1101}), opt).ad_accept_rate);
  const double delta = pct(projection_battery(control_distribution({ControlKind::delta, 250, 64, 1102}), opt).ad_accept_rate);
  const double unif =
      pct(projection_battery(control_distribution({ControlKind::uniform_lowdim, 250, 64, 1103, 5}), opt).ad_accept_rate);
  const double bim =
      pct(projection_battery(control_distribution({ControlKind::bimodal, 250, 2, 1104, 5, 4.0}), opt).ad_accept_rate);
  report("controls.delta_below_1pct", delta < 1.0, fmt("delta AD ", delta, "%"));
  report("controls.bimodal_below_30pct", bim < 30.0, fmt("bimodal(mu=4, d=2) AD ", bim, "%"));
  report("controls.uniform_10pp_below_gaussian", unif <= gauss - 10.0, fmt("uniform5d ", unif, "% vs gaussian ", gauss, "%"));
  report("controls.strict_ordering", delta < bim && bim < unif && unif < gauss,
         fmt(delta, " < ", bim, " < ", unif, " < ", gauss));
}

void oracle_separability() {
  const OraclePreset p = oracle_default();
  std::vector<std::vector<double>> acc(p.view_dims.size());
  for (double sigma : p.sigma_grid) {
    const OracleDataset ds = make_oracle(p, sigma);
    const AttributeTable atr = ds.labels.select_rows(ds.manifest.train_indices);
    const AttributeTable ate = ds.labels.select_rows(ds.manifest.test_indices);
    for (std::size_t v = 0; v < ds.views.size(); ++v) {
      const auto [tr, te] = split(ds.views[v], ds.manifest);
      acc[v].push_back(probe_all(tr, te, atr, ate).report.mean_accuracy);
    }
  }
  double worst = 1.0;
  for (const auto& a : acc) worst = std::min(worst, a.front());
  report("oracle.sigma0_accuracy_all_ines", worst >= 0.99, fmt("min mean accuracy ", worst, " >= 0.99"));
  bool monotone = true;
  std::string trail;
  for (std::size_t v = 0; v < acc.size(); ++v) {
    trail += fmt(v ? "; ine" : "ine", v, ":");
    for (std::size_t s = 0; s < acc[v].size(); ++s) {
      trail += fmt(" ", acc[v][s]);
      if (s > 0 && acc[v][s] > acc[v][s - 1]) monotone = false;
    }
  }
  report("oracle.accuracy_nonincreasing_in_sigma", monotone, trail);
}

void gcca_exactness() {
  const LatentMatrix z = sample_une({16, 500, 1201});
  std::vector<LatentMatrix> views;
  for (int i = 0; i < 2; ++i) {
    views.push_back(make_ine(z, {make_mixing(MixingRecipe::gaussian, 32 + 16 * i, 16, 1202 + i), 0.0, 0,
                                 "ine" + std::to_string(i)}));
  }
  const SharedSpace sp = gcca_fit(views, 16);
  const double n = static_cast<double>(sp.x.rows());
  const Matrix true_span = thin_svd(center_columns(z.data())).matrixU().leftCols(16);
  const double angle = principal_angles(sp.x, true_span).maxCoeff();
  const double ortho = (sp.x.transpose() * sp.x - Matrix::Identity(16, 16)).cwiseAbs().maxCoeff();
  const double centred = sp.x.colwise().sum().cwiseAbs().maxCoeff();
  report("gcca.noiseless_residual", sp.objective <= 1e-8, fmt("residual ", sp.objective, " <= 1e-8"));
  report("gcca.principal_angles", angle <= 1e-6, fmt("max angle ", angle, " rad <= 1e-6"));
  report("gcca.orthonormal_x", ortho <= 1e-6, fmt("|X'X - I|_max ", ortho, " <= 1e-6"));
  report("gcca.centred_x", centred <= 1e-6 * std::sqrt(n), fmt("max |1'X| ", centred, " <= ", 1e-6 * std::sqrt(n)));

  const Index small_n = 12;
  const std::vector<Matrix> small = {gaussian(small_n, 3, 1210), gaussian(small_n, 4, 1211), gaussian(small_n, 2, 1212)};
  const SharedSpace s1 =
      gcca_fit({LatentMatrix(small[0], "a"), LatentMatrix(small[1], "b"), LatentMatrix(small[2], "c")}, 1);
  std::mt19937_64 rng(1213);
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 10000; ++t) {
    Matrix x = une::detail::gaussian_matrix(small_n, 1, rng);
    x.array() -= x.mean();
    x /= x.norm();
    best = std::min(best, gcca_objective(small, x));
  }
  report("gcca.brute_force_optimality", s1.objective <= best + 1e-12,
         fmt("eigen ", s1.objective, " vs best of 10000 random ", best));
}

void transfer_fidelity() {
  const Matrix x = gaussian(600, 12, 1301);
  const Matrix m_true = gaussian(12, 9, 1302);
  const LinearMap m = fit_ridge_map(LatentMatrix(x), LatentMatrix(Matrix(x * m_true)), 1e-10);
  const double err = (m.weights - m_true).norm();
  report("transfer.exact_map_recovery", err <= 1e-6, fmt("|W - M|_F ", err, " <= 1e-6 at alpha 1e-10"));

  // Worst mean drop over all ordered view pairs. The detail names the pair and
  // the source view's own probe accuracy, which roughly caps what a map from
  // that view can carry.
  struct Worst {
    double drop = -std::numeric_limits<double>::infinity();
    std::string detail;
  };
  auto worst_drop = [](double sigma, double alpha) {
    const OracleDataset ds = make_oracle(oracle_default(), sigma);
    const AttributeTable atr = ds.labels.select_rows(ds.manifest.train_indices);
    const AttributeTable ate = ds.labels.select_rows(ds.manifest.test_indices);
    std::vector<std::pair<LatentMatrix, LatentMatrix>> parts;
    std::vector<ProbeResult> probes;
    for (const auto& v : ds.views) {
      parts.push_back(split(v, ds.manifest));
      probes.push_back(probe_all(parts.back().first, parts.back().second, atr, ate));
    }
    Worst w;
    for (std::size_t s = 0; s < parts.size(); ++s)
      for (std::size_t d = 0; d < parts.size(); ++d) {
        if (s == d) continue;
        const LinearMap map = fit_ridge_map(parts[s].first, parts[d].first, alpha);
        const double drop =
            evaluate_transfer(map, parts[s].second, parts[d].second, probes[d].probe, ate).mean_accuracy_drop_pp;
        if (drop > w.drop) {
          w.drop = drop;
          w.detail = fmt(" (", ds.views[s].model_id(), "->", ds.views[d].model_id(), "; probe accuracy ",
                         probes[s].report.mean_accuracy, " on source vs ", probes[d].report.mean_accuracy, " on target)");
        }
      }
    return w;
  };
  const Worst clean = worst_drop(0.0, 1e-10);
  report("transfer.noiseless_drop_zero", clean.drop == 0.0,
         fmt("max drop over view pairs ", clean.drop, " pp == 0.0"));
  const Worst noisy = worst_drop(0.1, 1e-6);
  report("transfer.sigma0.1_drop_le_1pp", noisy.drop <= 1.0,
         fmt("max drop over view pairs ", noisy.drop, " pp <= 1 at alpha 1e-6", noisy.detail));
}

void editing_identities() {
  std::mt19937_64 rng(1401);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const std::vector<Index> dims = {2, 3, 16, 128, 1024, 4096, 16384};
  double worst_inv = 0.0, worst_rt = 0.0, worst_idem = 0.0;
  for (int f = 0; f < 1000; ++f) {
    const Index d = dims[static_cast<std::size_t>(f) % dims.size()];
    auto train = std::make_shared<const Matrix>(une::detail::gaussian_matrix(20, d, rng));
    auto direction = [&](const std::string& name) {
      SemanticDirection s;
      s.w = une::detail::gaussian_matrix(d, 1, rng).col(0) * std::exp(2.0 * unif(rng));
      s.b = 3.0 * unif(rng);
      s.attribute_name = name;
      s.train = train;
      s.margin_std = une::detail::margin_std(s.w, s.b, *train);
      return s;
    };
    const SemanticDirection w1 = direction("target"), w2 = direction("spurious");
    const Vector z = une::detail::gaussian_matrix(d, 1, rng).col(0) * std::exp(unif(rng));
    const SemanticDirection o = orthogonalize(w1, w2);
    const double scale = w2.w.norm() * z.norm();
    const double t = 3.0 * unif(rng), alpha = 10.0 * unif(rng);
    const double base = w2.w.dot(z);
    worst_inv = std::max(worst_inv, std::abs(w2.w.dot(edit(z, o, alpha)) - base) / scale);
    worst_inv = std::max(worst_inv, std::abs(w2.w.dot(edit_to_intensity(z, o, t)) - base) / scale);
    worst_rt = std::max(worst_rt, std::abs(intensity(edit_to_intensity(z, w1, t), w1) - t));
    worst_rt = std::max(worst_rt, std::abs(intensity(edit_to_intensity(z, o, t), o) - t));
    worst_idem = std::max(worst_idem, (orthogonalize(o, w2).w - o.w).norm() / o.w.norm());
  }
  report("editing.spurious_score_invariance", worst_inv <= 1e-9,
         fmt("max |w2'(edit) - w2'z| / (|w2||z|) ", worst_inv, " <= 1e-9 over 1000 fixtures"));
  report("editing.intensity_round_trip", worst_rt <= 1e-8, fmt("max |t_back - t| ", worst_rt, " <= 1e-8"));
  report("editing.orthogonalize_idempotent", worst_idem <= 1e-12, fmt("max relative change ", worst_idem, " <= 1e-12"));
}

void numerical_checks() {
  const Matrix x = gaussian(60, 5, 1501);
  Labels y(60);
  for (Index i = 0; i < 60; ++i) y(i) = x(i, 0) - 0.5 * x(i, 2) + 0.3 * x(i, 4) > 0.1 ? 1 : 0;
  Vector w(5);
  w << 0.4, -0.2, 0.9, 0.0, -1.3;
  const double b = -0.25, lam = 0.01, h = 1e-5;
  const Vector g = logistic_gradient(x, y, lam, w, b);
  Vector fd(6);
  for (Index j = 0; j < 6; ++j) {
    Vector wp = w, wm = w;
    double bp = b, bm = b;
    if (j < 5) {
      wp(j) += h;
      wm(j) -= h;
    } else {
      bp += h;
      bm -= h;
    }
    fd(j) = (logistic_objective(x, y, lam, wp, bp) - logistic_objective(x, y, lam, wm, bm)) / (2.0 * h);
  }
  const double grad_rel = (g - fd).norm() / g.norm();
  report("numerical.logistic_gradient_fd", grad_rel <= 1e-6, fmt("relative error ", grad_rel, " <= 1e-6"));

  const Matrix xs = gaussian(150, 11, 1502), ys = gaussian(150, 6, 1503);
  double worst = 0.0;
  for (double alpha : {1e-6, 1e-2, 1.0, 100.0}) {
    const LinearMap m = fit_ridge_map(LatentMatrix(xs), LatentMatrix(ys), alpha);
    const Matrix xc = center_columns(xs), yc = center_columns(ys);
    const Matrix lhs = (xc.transpose() * xc + m.effective_lambda * Matrix::Identity(11, 11)) * m.weights;
    const Matrix rhs = xc.transpose() * yc;
    worst = std::max(worst, (lhs - rhs).norm() / rhs.norm());
  }
  report("numerical.ridge_normal_equations", worst <= 1e-8, fmt("relative residual ", worst, " <= 1e-8"));

  const Matrix xp = gaussian(40, 9, 1504).array() * 2.0 + 1.0;
  const PcaModel pca = fit_pca(xp, 9);
  const double rec = (pca.inverse_transform(pca.transform(xp)) - xp).cwiseAbs().maxCoeff();
  report("numerical.pca_full_rank_reconstruction", rec <= 1e-8, fmt("max abs error ", rec, " <= 1e-8"));
}

void noisezoo() {
  const char* root = std::getenv("UNE_NOISEZOO_DIR");
  if (root == nullptr || *root == '\0') {
    skip("noisezoo.sd15_normality", "UNE_NOISEZOO_DIR not set");
    skip("noisezoo.sd15_to_clipb16_drop", "UNE_NOISEZOO_DIR not set");
    return;
  }
  const std::filesystem::path dir(root);
  guarded("noisezoo.sd15_normality", [&] {
    const NormalityReport r = projection_battery(load_latents(dir / "sd15.lat1"), BatteryOptions{});
    const double ad = pct(r.ad_accept_rate);
    report("noisezoo.sd15_normality", std::abs(ad - 96.0) <= 2.0 && std::abs(r.avg_ad_statistic - 0.387) <= 0.05,
           fmt("AD ", ad, "% (96 +- 2), avg AD ", r.avg_ad_statistic, " (0.387 +- 0.05)"));
  });
  guarded("noisezoo.sd15_to_clipb16_drop", [&] {
    const AttributeTable atr = load_attributes(dir / "attributes_train.csv");
    const AttributeTable ate = load_attributes(dir / "attributes_test.csv");
    const LatentMatrix s_tr = load_latents(dir / "sd15_train.lat1"), s_te = load_latents(dir / "sd15_test.lat1");
    const LatentMatrix d_tr = load_latents(dir / "clipb16_train.lat1"), d_te = load_latents(dir / "clipb16_test.lat1");
    const LinearProbe probe = probe_all(d_tr, d_te, atr, ate).probe;
    const TransferReport r = evaluate_transfer(fit_ridge_map(s_tr, d_tr, 1.0), s_te, d_te, probe, ate);
    report("noisezoo.sd15_to_clipb16_drop", r.mean_accuracy_drop_pp <= 0.5,
           fmt("drop ", r.mean_accuracy_drop_pp, " pp <= 0.5"));
  });
}

}  // namespace

int main() {
  guarded("gaussian_null", gaussian_null);
  guarded("controls", control_ordering);
  guarded("oracle", oracle_separability);
  guarded("gcca", gcca_exactness);
  guarded("transfer", transfer_fidelity);
  guarded("editing", editing_identities);
  guarded("numerical", numerical_checks);
  noisezoo();
  std::printf("%s: %d failed\n", g_failed == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED", g_failed);
  return g_failed == 0 ? 0 : 1;
}
