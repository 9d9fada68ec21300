#pragma once

// File formats. Ids are 1-based in files and 0-based in memory.

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "seqlabel/inference.hpp"
#include "seqlabel/params.hpp"
#include "seqlabel/sgd.hpp"
#include "seqlabel/synth.hpp"

namespace seqlabel {

struct LoadedModel {
  ModelSpec model;
  std::optional<Truth> truth;
  Diagnostics diagnostics;
};

LoadedModel parse_model(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
LoadedModel load_model(const std::filesystem::path& path);
nlohmann::json model_to_json(const ModelSpec& model, const Truth* truth = nullptr);

// "seq_id,source_id,task_index,vote"; missing cells are abstentions and the
// sequence count is the largest seq_id.
VoteTensor read_votes(const std::filesystem::path& path, const ModelSpec& model);
void write_votes(const std::filesystem::path& path, const ModelSpec& model, const VoteTensor& votes);

// "seq_id,task_index,p_positive" at 17 significant digits.
void write_labels(const std::filesystem::path& path, const LabelTable& table);
LabelTable read_labels(const std::filesystem::path& path);

nlohmann::json params_to_json(const ModelSpec& model, const LabelModelParams& params);
LabelModelParams params_from_json(const ModelSpec& model, const nlohmann::json& doc);
void save_params(const std::filesystem::path& path, const ModelSpec& model, const LabelModelParams& params);
LabelModelParams load_params(const std::filesystem::path& path, const ModelSpec& model);

nlohmann::json metrics_to_json(const Metrics& m);

void write_scaling_csv(const std::filesystem::path& path, const std::vector<ScalingRow>& rows);
void write_benefit_csv(const std::filesystem::path& path, const std::vector<BenefitRow>& rows);
void write_loss_curve(const std::filesystem::path& path, const std::vector<double>& curve);

// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace seqlabel
