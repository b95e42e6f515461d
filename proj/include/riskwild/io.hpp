#pragma once

#include <string>

#include "riskwild/models.hpp"

#include "json.hpp"

namespace riskwild {

// CSV with header x_1..x_p,y_1..y_d, one row per sample.
std::string dataset_to_csv(const FixedDesignDataset& ds);
FixedDesignDataset dataset_from_csv(const std::string& text);

// Self-describing JSON variant carrying n, p, d explicitly.
nlohmann::json dataset_to_json(const FixedDesignDataset& ds);
FixedDesignDataset dataset_from_json(const nlohmann::json& j);

FixedDesignDataset load_dataset(const std::string& path);  // dispatches on extension

std::string read_text_file(const std::string& path);

// Writes via a temp file in the same directory followed by a rename.
void atomic_write_text(const std::string& path, const std::string& content);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace riskwild
