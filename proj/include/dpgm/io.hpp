#pragma once

// File formats: models, clique tables, releases and fits as JSON; datasets
// as CSV with columns x0..x{T-1} and an optional trailing weight column.

#include <filesystem>
#include <string>

#include "json.hpp"

#include "dpgm/inference.hpp"
#include "dpgm/model.hpp"
#include "dpgm/naive.hpp"
#include "dpgm/privacy.hpp"

namespace dpgm {

using Json = nlohmann::ordered_json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Model {
  StructurePtr structure;
  Parameters theta;
};

Json structure_to_json(const ModelStructure& structure);
StructurePtr structure_from_json(const Json& j);

// {"0-1": [...], "1-2": [...]} in clique order.
Json blocks_to_json(const CliqueVector& v);
std::vector<double> blocks_from_json(const Json& j, const ModelStructure& structure);

Json model_to_json(const Model& model);
Model model_from_json(const Json& j);

Json tables_to_json(const CliqueTableSet& tables);
CliqueTableSet tables_from_json(const Json& j, const StructurePtr& structure);

Json release_to_json(const PrivateRelease& release);
PrivateRelease release_from_json(const Json& j);

Json fit_to_json(const FitResult& fit);
Json bp_to_json(const BPResult& bp);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
// Reads a dataset; the weight column is recognized by its header name.
Dataset read_dataset_csv(const std::filesystem::path& path);

// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

}  // namespace dpgm
