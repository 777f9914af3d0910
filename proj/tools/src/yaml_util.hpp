#pragma once

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <string>

#include "ltmcli/cli.hpp"

namespace ltm::cli {

void apply_model(const YAML::Node& node, ModelConfig& m);
void apply_train(const YAML::Node& node, TrainConfig& t);
void emit_model(YAML::Emitter& e, const ModelConfig& m);
void emit_train(YAML::Emitter& e, const TrainConfig& t);
YAML::Node load_yaml(const std::string& text, const std::string& what);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ltm::cli
