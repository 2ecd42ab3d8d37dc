#pragma once

#include <string>
#include <vector>

#include "nmrsim/config.hpp"

namespace nmr {

struct RecipeInfo {
    std::string name;
    std::string summary;
};

const std::vector<RecipeInfo>& recipe_list();

// Built-in configuration text a recipe starts from, and the keys of its scan section.
std::string recipe_default_config(const std::string& name);
Schema recipe_scan_schema(const std::string& name);

// The recipe's own configuration with `overrides` ("section.key=value") applied.
// A non-empty config_text replaces the built-in text.
ExperimentConfig recipe_config(const std::string& name, const std::string& config_text = {},
                               const std::vector<std::string>& overrides = {}, const std::string& base_dir = ".");

// Long-form table with a '#'-prefixed manifest block ahead of the header row.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
};

struct RecipeOutput {
    std::string name;
    Table table;
    std::vector<std::pair<std::string, std::string>> manifest;
    std::vector<std::pair<std::string, std::string>> extra_files;  // file name, contents
};

RecipeOutput run_recipe(const std::string& name, const ExperimentConfig& cfg);

std::string to_csv(const RecipeOutput& out);
// Writes <dir>/<name>.csv, <dir>/<name>.manifest and any extra files; returns the paths written.
std::vector<std::string> write_recipe(const RecipeOutput& out, const std::string& dir);

// Fixed-precision number formatting shared by every emitted table.
std::string fmt(double v);

}  // namespace nmr
