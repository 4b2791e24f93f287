#pragma once

// JSON reports and long-format CSV tables.
//
// Every report is a JSON object with sorted keys and no timestamps, so equal
// inputs and configuration give byte-identical files:
//   tool, version, command, seed, config, inputs (path -> sha256), results,
//   table (list of {model, metric, value} rows in column order)

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "une/editing.hpp"
#include "une/gaussianity.hpp"
#include "une/latent_store.hpp"
#include "une/probing.hpp"
#include "une/shared_space.hpp"
#include "une/transfer.hpp"

namespace une {

inline constexpr const char* kToolName = "une";
inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::json;

/// NaN and infinities become null.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

inline Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

struct TableRow {
  std::string model;
  std::string metric;
  double value = 0.0;
};

inline Json to_json(const std::vector<TableRow>& rows) {
  Json a = Json::array();
  for (const auto& r : rows) a.push_back({{"model", r.model}, {"metric", r.metric}, {"value", number(r.value)}});
  return a;
}

// ---------------------------------------------------------------------------
// Module results
// ---------------------------------------------------------------------------

inline Json to_json(const NormalityReport& r) {
  return {{"avg_ad_statistic", number(r.avg_ad_statistic)},
          {"ad_accept_rate", number(r.ad_accept_rate)},
          {"avg_dp_pvalue", number(r.avg_dp_pvalue)},
          {"dp_accept_rate", number(r.dp_accept_rate)},
          {"avg_sw_pvalue", number(r.avg_sw_pvalue)},
          {"sw_accept_rate", number(r.sw_accept_rate)},
          {"n_projections", r.n_projections},
          {"subset_size", r.subset_size},
          {"seed", r.seed},
          {"resample_subset", r.resample_subset},
          {"jitter", r.jitter},
          {"n_degenerate", r.n_degenerate},
          {"ad_statistic_convention", "stephens-corrected A*^2, accept iff < 0.752"},
          {"dp_sw_average_convention", "mean p-value"}};
}

/// Column order: Avg AD, AD %, Avg DP, DP %, Avg SW, SW %.
inline std::vector<TableRow> table_rows(const std::string& model, const NormalityReport& r) {
  return {{model, "avg_ad", r.avg_ad_statistic},     {model, "ad_pct", 100.0 * r.ad_accept_rate},
          {model, "avg_dp", r.avg_dp_pvalue},        {model, "dp_pct", 100.0 * r.dp_accept_rate},
          {model, "avg_sw", r.avg_sw_pvalue},        {model, "sw_pct", 100.0 * r.sw_accept_rate}};
}

inline Json to_json(const ProbeReport& r) {
  Json attrs = Json::array();
  for (const auto& a : r.attributes) {
    attrs.push_back({{"name", a.name},
                     {"fitted", a.fitted},
                     {"accuracy", number(a.accuracy)},
                     {"auc", number(a.auc)},
                     {"grad_norm", number(a.grad_norm)},
                     {"iterations", a.iterations},
                     {"converged", a.converged}});
  }
  return {{"attributes", attrs}, {"mean_accuracy", number(r.mean_accuracy)}, {"pca_k", r.pca_k}, {"skipped", r.skipped}};
}

inline std::vector<TableRow> table_rows(const std::string& model, const ProbeReport& r) {
  std::vector<TableRow> rows{{model, "mean_accuracy", r.mean_accuracy}};
  for (const auto& a : r.attributes) {
    if (a.fitted) rows.push_back({model, "accuracy:" + a.name, a.accuracy});
  }
  return rows;
}

inline Json to_json(const TransferReport& r) {
  Json attrs = Json::array();
  for (std::size_t i = 0; i < r.attribute_names.size(); ++i) {
    attrs.push_back({{"name", r.attribute_names[i]},
                     {"accuracy_true", number(r.accuracy_true[i])},
                     {"accuracy_mapped", number(r.accuracy_mapped[i])},
                     {"accuracy_drop_pp", number(r.accuracy_drop_pp[i])}});
  }
  return {{"mse", number(r.mse)},
          {"mse_convention", "mean over all coordinates"},
          {"mean_cosine", number(r.mean_cosine)},
          {"attributes", attrs},
          {"mean_accuracy_drop_pp", number(r.mean_accuracy_drop_pp)},
          {"skipped", r.skipped}};
}

/// Column order: MSE, cosine similarity, accuracy drop (pp).
inline std::vector<TableRow> table_rows(const std::string& model, const TransferReport& r) {
  return {{model, "mse", r.mse}, {model, "cosine", r.mean_cosine}, {model, "accuracy_drop_pp", r.mean_accuracy_drop_pp}};
}

inline Json to_json(const LinearMap& m) {
  return {{"src_model_id", m.src_model_id},
          {"dst_model_id", m.dst_model_id},
          {"src_dim", m.src_dim()},
          {"dst_dim", m.dst_dim()},
          {"effective_lambda", number(m.effective_lambda)}};
}

inline Json summary_json(const SharedSpace& s) {
  std::vector<double> lambdas(s.lambdas.begin(), s.lambdas.end());
  return {{"k", s.k()},
          {"n", s.x.rows()},
          {"source_model_ids", s.source_model_ids},
          {"view_ranks", s.view_ranks},
          {"shared_rank", s.shared_rank},
          {"eigenvalues", to_json(s.eigenvalues)},
          {"objective", number(s.objective)},
          {"regularized_objective", number(s.regularized_objective)},
          {"view_residual", s.view_residual},
          {"lambdas", lambdas},
          {"alternations", s.alternations}};
}

inline Json to_json(const SpearmanStructure& s, const std::vector<std::string>& names) {
  Json q = Json::object();
  for (std::size_t i = 0; i < kSpearmanQuantiles.size(); ++i) {
    std::ostringstream key;
    key << "q" << kSpearmanQuantiles[i];
    q[key.str()] = to_json(s.quantiles[i]);
  }
  Json used = Json::array(), skipped = Json::array();
  for (Index r = 0; r < s.used.rows(); ++r) {
    std::vector<int> u, k;
    for (Index c = 0; c < s.used.cols(); ++c) {
      u.push_back(s.used(r, c));
      k.push_back(s.skipped(r, c));
    }
    used.push_back(u);
    skipped.push_back(k);
  }
  return {{"spaces", names},
          {"anchors", s.anchors},
          {"mean", to_json(s.mean)},
          {"aggregation", "mean over anchors"},
          {"quantiles", q},
          {"anchors_used", used},
          {"anchors_skipped", skipped}};
}

inline std::vector<TableRow> table_rows(const SpearmanStructure& s, const std::vector<std::string>& names) {
  std::vector<TableRow> rows;
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j) {
      rows.push_back({names[i], "spearman:" + names[j], s.mean(static_cast<Index>(i), static_cast<Index>(j))});
    }
  return rows;
}

inline Json to_json(const SemanticDirection& d) {
  return {{"attribute", d.attribute_name},
          {"w_norm", number(d.w.norm())},
          {"b", number(d.b)},
          {"margin_std", number(d.margin_std)},
          {"intensity_unit", "std of training signed distances (w.z + b) / |w|"}};
}

// ---------------------------------------------------------------------------
// Envelope and output
// ---------------------------------------------------------------------------

struct ReportEnvelope {
  std::string command;
  std::uint64_t seed = 0;
  Json config = Json::object();
  std::map<std::string, std::string> inputs;  ///< path -> sha256
  Json results = Json::object();
  std::vector<TableRow> table;

  /// Records the checksum of an input file (or every file in a directory).
  void add_input(const std::filesystem::path& path, const std::string& label) {
    if (std::filesystem::is_directory(path)) {
      std::vector<std::filesystem::path> files;
      for (const auto& e : std::filesystem::directory_iterator(path)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) inputs[label + "/" + f.filename().string()] = sha256_file(f);
    } else {
      inputs[label] = sha256_file(path);
    }
  }

  Json to_json() const {
    return {{"tool", kToolName},
            {"version", kToolVersion},
            {"command", command},
            {"seed", seed},
            {"config", config},
            {"inputs", inputs},
            {"results", results},
            {"table", une::to_json(table)}};
  }
};

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

inline void write_json(const Json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::write_file_bytes(path, dump_json(j));
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

/// Long-format CSV: header model,metric,value and one row per entry.
inline std::string format_table_csv(const std::vector<TableRow>& rows) {
  std::string out = "model,metric,value\n";
  for (const auto& r : rows) out += csv_escape(r.model) + "," + csv_escape(r.metric) + "," + format_number(r.value) + "\n";
  return out;
}

/// Table rows stored in a report; entries with null values are kept as NaN.
inline std::vector<TableRow> table_from_report(const Json& report) {
  std::vector<TableRow> rows;
  if (!report.is_object() || !report.contains("table") || !report.at("table").is_array()) {
    throw FormatError("report has no table");
  }
  for (const auto& r : report.at("table")) {
    try {
      const auto& v = r.at("value");
      rows.push_back({r.at("model").get<std::string>(), r.at("metric").get<std::string>(),
                      v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed table row: ") + e.what());
    }
  }
  return rows;
}

}  // namespace une
