#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "zibbmr/model.hpp"
#include "zibbmr/saem.hpp"
#include "zibbmr/simstudy.hpp"

namespace zibbmr {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kResultSchema = "zibbmr-result/1";

using OrderedJson = nlohmann::ordered_json;

// Everything a run needs besides the data: the fit configuration plus the
// covariate column selection used when loading CSV files.  Empty column
// lists mean "take every x_* / z_* column in header order".
struct RunConfig {
  FitConfig fit;
  std::vector<std::string> x_cols;
  std::vector<std::string> z_cols;
};

// ---- CSV data files --------------------------------------------------
//
// Schema: header row, then columns subject_id (string), time (integer),
// y (integer), s (integer), and decimal covariate columns.  Rows are
// grouped by subject in order of first appearance and sorted by time
// within subject.  Fields must not contain commas; extra columns are
// ignored unless selected.

Dataset parse_dataset_csv(const std::string& text,
                          const std::vector<std::string>& x_cols = {},
                          const std::vector<std::string>& z_cols = {});
Dataset load_dataset_csv(const std::string& path,
                         const std::vector<std::string>& x_cols = {},
                         const std::vector<std::string>& z_cols = {});

// Writes columns subject_id,time,y,s,x_1..,z_1.. with times numbered
// 1..T_i per subject and covariates printed exactly (round-trippable).
std::string dataset_to_csv(const Dataset& data);
void write_dataset_csv(const Dataset& data, const std::string& path);

// ---- JSON pieces -----------------------------------------------------

OrderedJson theta_to_json(const Theta& theta);
Theta theta_from_json(const OrderedJson& j);

OrderedJson moments_to_json(const ConditionalMoments& moments);
ConditionalMoments moments_from_json(const OrderedJson& j);

// The config echo deliberately omits the thread count: results are
// thread-invariant and their files should be too.
OrderedJson run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const OrderedJson& j);

// ---- Result files ----------------------------------------------------
//
// All result files share the versioned envelope {"schema": "zibbmr-result/1",
// "version", "kind", ...} where kind is one of "fit", "loglik", "test",
// "simulate-truth", with the payload after it.

OrderedJson fit_result_to_json(const FitResult& result,
                               const RunConfig& config);

// ---- Benchmark tables ------------------------------------------------

std::string metrics_to_csv(int setting_id,
                           const std::vector<MetricRow>& rows, int n_fail);
std::string type1_to_csv(int setting_id, const Type1Result& result);

// ---- Small file helpers ----------------------------------------------

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace zibbmr
