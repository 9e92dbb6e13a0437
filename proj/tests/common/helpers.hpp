#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "svytrans/core_data.hpp"
#include "svytrans/rng.hpp"

namespace testing {

inline std::vector<std::string> names(std::size_t p) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < p; ++j) out.push_back("x" + std::to_string(j + 1));
  return out;
}

/// Trial rows first (alternating arms), then survey rows. Survey covariates
/// are shifted by `shift` so the membership model has something to fit.
inline svytrans::CombinedDataset random_dataset(svytrans::Rng& rng, std::size_t n_trial,
                                                std::size_t n_survey, std::size_t p,
                                                bool binary_outcome = false,
                                                double shift = 0.5) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> wdist(1.0, 20.0);
  svytrans::CombinedDataset::Builder b(names(p));
  std::vector<double> x(p);
  for (std::size_t i = 0; i < n_trial; ++i) {
    for (auto& v : x) v = z(rng);
    const int a = static_cast<int>(i % 2);
    double y = 1.0 + a * (2.0 + x[0]) + z(rng);
    if (binary_outcome) y = svytrans::uniform01(rng) < 1.0 / (1.0 + std::exp(-y + 2.0)) ? 1.0 : 0.0;
    b.add_trial(x, a, y);
  }
  for (std::size_t i = 0; i < n_survey; ++i) {
    for (auto& v : x) v = z(rng) + shift;
    b.add_survey(x, wdist(rng));
  }
  return std::move(b).build();
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("svytrans_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing
