#pragma once

#include <filesystem>
#include <string>

#include "cdslam/pipeline.hpp"
#include "cdslam/simkit.hpp"

namespace cdslam {

// JSON configuration files. A scene file may start from a preset
// ("default", "parked" or "empty") and override any field; unknown keys
// are rejected with kConfigInvalid.

SceneConfig SceneConfigFromJson(const std::string& text);
std::string SceneConfigToJson(const SceneConfig& cfg);
SceneConfig LoadSceneConfig(const std::filesystem::path& path);

PipelineConfig PipelineConfigFromJson(const std::string& text);
std::string PipelineConfigToJson(const PipelineConfig& cfg);
PipelineConfig LoadPipelineConfig(const std::filesystem::path& path);

}  // namespace cdslam
