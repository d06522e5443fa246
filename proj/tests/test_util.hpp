#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace cwefs::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::path(CWEFS_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Eigen::MatrixXd random_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                      double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline Eigen::MatrixXd random_binary(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::bernoulli_distribution b(0.5);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = b(rng) ? 1.0 : 0.0;
  return m;
}

}  // namespace cwefs::testing
