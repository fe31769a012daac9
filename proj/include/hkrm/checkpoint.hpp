#pragma once

#include <filesystem>

#include "hkrm/config.hpp"
#include "hkrm/model.hpp"
#include "hkrm/tensor_io.hpp"

namespace hkrm {

// A model checkpoint is an "hkrm-tensors" archive:
//   meta.kind = "hkrm-model", meta.feature_dim, meta.num_classes,
//   meta.model = model_config_to_json(...), meta.priors = {attribute|relationship:
//   {similarity, class_names}}, meta.run_config = serialized RunConfig (optional),
//   meta.epoch = last completed epoch;
//   one tensor per trainable parameter under its ParamList name, plus
//   "prior.attribute" / "prior.relationship" when set.
TensorArchive model_to_archive(const HkrmModel& model, const nlohmann::json& extra_meta = {});
// Throws FormatError for a missing/misshaped tensor or bad metadata.
HkrmModel model_from_archive(const TensorArchive& archive);

void save_model(const std::filesystem::path& path, const HkrmModel& model,
                const nlohmann::json& extra_meta = {});
HkrmModel load_model(const std::filesystem::path& path);

// The run config stored by the CLI under meta.run_config. Throws FormatError
// when absent.
RunConfig run_config_from_archive(const TensorArchive& archive);

}  // namespace hkrm
