#pragma once

#include <json.hpp>

#include <string>

#include "plam/evaluation.hpp"
#include "plam/models.hpp"
#include "plam/simulation.hpp"

namespace plam {

using json = nlohmann::ordered_json;

// Unified model schema: {schema_version, variant, config, columns, intercept,
// linear_terms, smooths:[{variable, knots, coefficients, psi, edf}], trees?,
// selection?}. Doubles round-trip bit-exactly.
json model_to_json(const FittedModel& model, const json& run_config);
FittedModel model_from_json(const json& j);

json mcs_to_json(const McsResult& mcs, const std::vector<std::string>& model_ids);
json auc_test_to_json(const AucTestResult& t);
json report_rows_to_json(const MonteCarloReport& report);

// temp-file + rename so partial writes never surface
void write_text_atomic(const std::string& path, const std::string& content);
void write_json_atomic(const std::string& path, const json& j);
json read_json_file(const std::string& path);

std::string csv_escape_number(double v);  // shortest round-trip decimal form

}  // namespace plam
