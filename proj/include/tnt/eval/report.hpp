#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tnt/common/error.hpp"

namespace tnt::eval {

using Json = nlohmann::ordered_json;

/// One measured ASR: exact counts, so the rate is always recomputable.
struct ReportCell {
  std::size_t fooled = 0;
  std::size_t total = 0;
  std::size_t excluded = 0;  // targeted mode: samples whose ground truth is the target

  double asr() const { return total == 0 ? 0.0 : static_cast<double>(fooled) / static_cast<double>(total); }

  Json to_json() const {
    return Json{{"fooled", fooled}, {"total", total}, {"excluded", excluded}, {"asr", asr()}};
  }
};

struct LocationRow {
  std::string location;
  bool skipped = false;
  ReportCell cell;
};

struct SizeRow {
  double fraction = 0.0;
  bool skipped = false;
  ReportCell cell;
};

struct TransferCell {
  std::string source;
  std::string target;
  std::size_t canvas = 0;  // target input size the patch was rescaled to
  ReportCell cell;
};

struct BaselineStats {
  std::string kind;  // "color" | "natural"
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_patch_asr;
};

/// The structured result document. Key order is fixed by construction; wall
/// time lives in a separate metadata object so payload bytes stay stable for
/// identical runs.
struct EvaluationReport {
  std::string task_id;
  std::vector<std::string> classifier_ids;
  std::vector<std::string> patch_ids;
  std::string mode;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, ReportCell>> split_asr;  // split name -> cell
  std::vector<LocationRow> locations;
  std::vector<SizeRow> sizes;
  std::vector<TransferCell> transfer;
  std::string transfer_annotation;
  std::vector<BaselineStats> baselines;
  double wall_seconds = 0.0;

  Json payload() const {
    Json j;
    j["format_version"] = 1;
    j["task_id"] = task_id;
    j["classifier_ids"] = classifier_ids;
    j["patch_ids"] = patch_ids;
    j["mode"] = mode;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    Json splits = Json::object();
    for (const auto& [name, cell] : split_asr) splits[name] = cell.to_json();
    j["split_asr"] = splits;
    if (!locations.empty()) {
      Json rows = Json::array();
      for (const auto& r : locations) {
        Json row{{"location", r.location}, {"skipped", r.skipped}};
        if (!r.skipped) row["cell"] = r.cell.to_json();
        rows.push_back(row);
      }
      j["location_sweep"] = rows;
    }
    if (!sizes.empty()) {
      Json rows = Json::array();
      for (const auto& r : sizes) {
        Json row{{"fraction", r.fraction}, {"skipped", r.skipped}};
        if (!r.skipped) row["cell"] = r.cell.to_json();
        rows.push_back(row);
      }
      j["size_sweep"] = rows;
    }
    if (!transfer.empty()) {
      Json rows = Json::array();
      for (const auto& t : transfer)
        rows.push_back(Json{{"source", t.source},
                            {"target", t.target},
                            {"canvas", t.canvas},
                            {"cell", t.cell.to_json()}});
      j["transfer_matrix"] = rows;
      j["transfer_annotation"] = transfer_annotation;
    }
    if (!baselines.empty()) {
      Json rows = Json::array();
      for (const auto& b : baselines)
        rows.push_back(Json{{"kind", b.kind},
                            {"mean", b.mean},
                            {"stddev", b.stddev},
                            {"per_patch_asr", b.per_patch_asr}});
      j["baselines"] = rows;
    }
    return j;
  }

  /// Full document = stable payload + volatile metadata (timings).
  Json to_json() const {
    Json j = payload();
    j["meta"] = Json{{"wall_seconds", wall_seconds}};
    return j;
  }
};

/// CSV flattening for the tabular sections ("location", "size", "transfer").
inline std::string report_table_csv(const EvaluationReport& r, const std::string& table) {
  std::string out;
  auto cell_cols = [](const ReportCell& c) {
    return std::to_string(c.fooled) + "," + std::to_string(c.total) + "," +
           std::to_string(c.excluded) + "," + std::to_string(c.asr());
  };
  if (table == "location") {
    out = "location,skipped,fooled,total,excluded,asr\n";
    for (const auto& row : r.locations)
      out += row.location + "," + (row.skipped ? "1," : "0,") +
             (row.skipped ? ",,," : cell_cols(row.cell)) + "\n";
  } else if (table == "size") {
    out = "fraction,skipped,fooled,total,excluded,asr\n";
    for (const auto& row : r.sizes)
      out += std::to_string(row.fraction) + "," + (row.skipped ? "1," : "0,") +
             (row.skipped ? ",,," : cell_cols(row.cell)) + "\n";
  } else if (table == "transfer") {
    out = "source,target,canvas,fooled,total,excluded,asr\n";
    for (const auto& row : r.transfer)
      out += row.source + "," + row.target + "," + std::to_string(row.canvas) + "," +
             cell_cols(row.cell) + "\n";
  } else {
    throw ConfigError("report_table_csv: unknown table '" + table + "'");
  }
  return out;
}

}  // namespace tnt::eval
