#include "mlsc/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mlsc::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const fs::path& path, const MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

MatrixXd read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged CSV: " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty CSV: " + path.string());
  MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_vector_csv(const fs::path& path, const VectorXd& v) {
  write_matrix_csv(path, v);
}

VectorXd read_vector_csv(const fs::path& path) {
  MatrixXd m = read_matrix_csv(path);
  if (m.cols() != 1) throw std::runtime_error("expected single-column CSV: " + path.string());
  return m.col(0);
}

void write_model_dir(const fs::path& dir, const MultiLayerModel& model) {
  fs::create_directories(dir);
  json manifest;
  manifest["layer_count"] = model.depth();
  manifest["dims"] = model.dims();
  json files = json::array();
  for (int i = 1; i <= model.depth(); ++i) {
    const std::string name = "D" + std::to_string(i) + ".csv";
    write_matrix_csv(dir / name, model.layer(i).mat());
    files.push_back(name);
  }
  manifest["files"] = files;
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + (dir / "manifest.json").string());
}

MultiLayerModel read_model_dir(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing manifest: " + (dir / "manifest.json").string());
  json manifest = json::parse(in);
  const int k = manifest.at("layer_count").get<int>();
  const auto dims = manifest.at("dims").get<std::vector<int>>();
  if (static_cast<int>(dims.size()) != k + 1)
    throw std::runtime_error("manifest dims length != layer_count + 1");
  std::vector<Dictionary> layers;
  for (int i = 1; i <= k; ++i) {
    MatrixXd m = read_matrix_csv(dir / ("D" + std::to_string(i) + ".csv"));
    if (m.rows() != dims[i - 1] || m.cols() != dims[i])
      throw std::runtime_error("D" + std::to_string(i) + ".csv dims disagree with manifest");
    layers.emplace_back(std::move(m));
  }
  return MultiLayerModel(std::move(layers));
}

}  // namespace mlsc::io
