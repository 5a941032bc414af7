#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petsa/tensor.hpp"

namespace petsa {

/// Per-variable standardization statistics, computed on the train split only.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // clamped to >= 1e-8
  bool clamped = false;        // some column was constant
};

struct Dataset {
  std::string name;
  std::size_t rows = 0;
  std::size_t vars = 0;
  std::vector<double> values;  // [rows×vars] row-major
  std::vector<std::string> timestamps;
  std::size_t train_end = 0;  // valid after split_and_normalize
  std::size_t val_end = 0;
  NormStats norm;
  bool normalized = false;
};

enum class Part { train, val, test };

/// Lookback/target pair. x holds the L rows immediately before t_star,
/// y the H rows from t_star on.
struct WindowPair {
  Tensor x;  // [L×V]
  Tensor y;  // [H×V]
  std::size_t t_star = 0;
};

/// Header row `date,<var>...`; the first column is kept as an opaque string.
/// Rejects missing and non-finite cells, naming row and column.
Dataset load_csv(const std::string& path);

void save_csv(const Dataset& ds, const std::string& path);

/// Chronological split plus per-variable standardization by train statistics.
/// Ratios default to the benchmark conventions: 0.6/0.2/0.2 for ETT-family
/// names, 0.7/0.1/0.2 otherwise. Pass explicit ratios to override.
void split_and_normalize(Dataset& ds);
void split_and_normalize(Dataset& ds, double train_ratio, double val_ratio);

/// Undo standardization for one value of variable v.
double denormalize(const Dataset& ds, double x, std::size_t v);

/// Sliding windows of one part, chronological, stride >= 1. Train windows are
/// fully contained in the train rows; val/test lookbacks may reach back across
/// the split boundary (standard benchmark convention). Short parts yield an
/// empty sequence and a stderr warning.
std::vector<WindowPair> windows(const Dataset& ds, Part part, std::size_t lookback,
                                std::size_t horizon, std::size_t stride = 1);

/// Seed-deterministic multivariate series: per-variable sinusoid mixes plus
/// mild noise, with a level-and-amplitude shift over the last fifth of the
/// rows so test-time adaptation has drift to correct.
Dataset make_synthetic(std::size_t rows, std::size_t vars, std::uint64_t seed);

}  // namespace petsa
