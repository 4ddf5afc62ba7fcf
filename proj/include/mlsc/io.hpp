#pragma once

#include "mlsc/core.hpp"

#include <filesystem>
#include <string>

// Shared file formats: UTF-8 CSV matrices (one row per line, >= 17 significant
// digits per value) and the model directory layout D1.csv..Dk.csv plus a JSON
// manifest listing dimensions in layer order. Vectors are single-column CSVs.

namespace mlsc::io {

std::string format_double(double v);

void write_matrix_csv(const std::filesystem::path& path, const MatrixXd& m);
MatrixXd read_matrix_csv(const std::filesystem::path& path);

void write_vector_csv(const std::filesystem::path& path, const VectorXd& v);
VectorXd read_vector_csv(const std::filesystem::path& path);

/// Writes D1.csv..Dk.csv and manifest.json into `dir` (created if missing).
void write_model_dir(const std::filesystem::path& dir, const MultiLayerModel& model);
MultiLayerModel read_model_dir(const std::filesystem::path& dir);

}  // namespace mlsc::io
