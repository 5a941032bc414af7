#include "petsa/dataio.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "petsa/errors.hpp"
#include "petsa/rng.hpp"

namespace petsa {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string file_stem(const std::string& path) {
  const std::size_t slash = path.find_last_of("/\\");
  std::string base = (slash == std::string::npos) ? path : path.substr(slash + 1);
  const std::size_t dot = base.find_last_of('.');
  return (dot == std::string::npos) ? base : base.substr(0, dot);
}

const char* part_name(Part p) {
  switch (p) {
    case Part::train: return "train";
    case Part::val: return "val";
    default: return "test";
  }
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("load_csv: " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  if (header.size() < 2) {
    throw DataError("load_csv: " + path + " needs a timestamp column and at least one variable");
  }

  Dataset ds;
  ds.name = file_stem(path);
  ds.vars = header.size() - 1;

  std::size_t file_line = 1;
  while (std::getline(in, line)) {
    ++file_line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError("load_csv: " + path + " line " + std::to_string(file_line) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    ds.timestamps.push_back(cells[0]);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      const char* begin = cell.c_str();
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      const bool parsed = end != begin && *end == '\0';
      if (cell.empty() || !parsed || !std::isfinite(v)) {
        throw DataError("load_csv: " + path + " line " + std::to_string(file_line) +
                        ", column '" + header[c] + "': bad cell '" + cell + "'");
      }
      ds.values.push_back(v);
    }
    ++ds.rows;
  }
  if (ds.rows == 0) throw DataError("load_csv: " + path + " has no data rows");
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("save_csv: cannot open " + path + " for writing");
  out << "date";
  for (std::size_t v = 0; v < ds.vars; ++v) out << ",v" << v;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t t = 0; t < ds.rows; ++t) {
    if (t < ds.timestamps.size()) {
      out << ds.timestamps[t];
    } else {
      out << 't' << t;
    }
    for (std::size_t v = 0; v < ds.vars; ++v) out << ',' << ds.values[t * ds.vars + v];
    out << '\n';
  }
  if (!out) throw DataError("save_csv: write to " + path + " failed");
}

void split_and_normalize(Dataset& ds) {
  const bool ett = ds.name.rfind("ETT", 0) == 0;
  if (ett) {
    split_and_normalize(ds, 0.6, 0.2);
  } else {
    split_and_normalize(ds, 0.7, 0.1);
  }
}

void split_and_normalize(Dataset& ds, double train_ratio, double val_ratio) {
  if (ds.normalized) throw DataError("split_and_normalize: dataset already normalized");
  if (train_ratio <= 0.0 || val_ratio <= 0.0 || train_ratio + val_ratio >= 1.0) {
    throw DataError("split_and_normalize: ratios must be positive and leave room for test");
  }
  const auto t = static_cast<double>(ds.rows);
  ds.train_end = static_cast<std::size_t>(std::floor(t * train_ratio));
  ds.val_end = ds.train_end + static_cast<std::size_t>(std::floor(t * val_ratio));
  if (ds.train_end == 0 || ds.val_end == ds.train_end || ds.val_end >= ds.rows) {
    throw DataError("split_and_normalize: a split is empty (rows=" + std::to_string(ds.rows) + ")");
  }

  ds.norm.mean.assign(ds.vars, 0.0);
  ds.norm.stddev.assign(ds.vars, 0.0);
  ds.norm.clamped = false;
  const double n = static_cast<double>(ds.train_end);
  for (std::size_t v = 0; v < ds.vars; ++v) {
    double acc = 0.0;
    for (std::size_t r = 0; r < ds.train_end; ++r) acc += ds.values[r * ds.vars + v];
    const double mu = acc / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < ds.train_end; ++r) {
      const double d = ds.values[r * ds.vars + v] - mu;
      ss += d * d;
    }
    double sd = std::sqrt(ss / n);
    if (sd < 1e-8) {
      sd = 1e-8;
      ds.norm.clamped = true;
    }
    ds.norm.mean[v] = mu;
    ds.norm.stddev[v] = sd;
  }
  for (std::size_t r = 0; r < ds.rows; ++r) {
    for (std::size_t v = 0; v < ds.vars; ++v) {
      double& x = ds.values[r * ds.vars + v];
      x = (x - ds.norm.mean[v]) / ds.norm.stddev[v];
    }
  }
  ds.normalized = true;
}

double denormalize(const Dataset& ds, double x, std::size_t v) {
  return x * ds.norm.stddev[v] + ds.norm.mean[v];
}

std::vector<WindowPair> windows(const Dataset& ds, Part part, std::size_t lookback,
                                std::size_t horizon, std::size_t stride) {
  if (lookback < 1 || horizon < 1 || stride < 1) {
    throw DimensionError("windows: lookback, horizon, stride must be >= 1");
  }
  if (!ds.normalized) throw DataError("windows: call split_and_normalize first");

  // t_star range; val/test lookbacks may cross the preceding boundary
  std::size_t lo = 0, hi_excl = 0;
  switch (part) {
    case Part::train:
      lo = lookback;
      hi_excl = (ds.train_end >= horizon) ? ds.train_end - horizon + 1 : 0;
      break;
    case Part::val:
      lo = std::max(ds.train_end, lookback);
      hi_excl = (ds.val_end >= horizon) ? ds.val_end - horizon + 1 : 0;
      break;
    case Part::test:
      lo = std::max(ds.val_end, lookback);
      hi_excl = (ds.rows >= horizon) ? ds.rows - horizon + 1 : 0;
      break;
  }

  std::vector<WindowPair> out;
  if (hi_excl <= lo) {
    std::cerr << "windows: " << part_name(part) << " part of " << ds.name
              << " too short for lookback " << lookback << " + horizon " << horizon
              << ", emitting no pairs\n";
    return out;
  }
  for (std::size_t t_star = lo; t_star < hi_excl; t_star += stride) {
    WindowPair w;
    w.t_star = t_star;
    w.x = Tensor::zeros({lookback, ds.vars});
    w.y = Tensor::zeros({horizon, ds.vars});
    std::copy(ds.values.begin() + static_cast<std::ptrdiff_t>((t_star - lookback) * ds.vars),
              ds.values.begin() + static_cast<std::ptrdiff_t>(t_star * ds.vars), w.x.data());
    std::copy(ds.values.begin() + static_cast<std::ptrdiff_t>(t_star * ds.vars),
              ds.values.begin() + static_cast<std::ptrdiff_t>((t_star + horizon) * ds.vars),
              w.y.data());
    out.push_back(std::move(w));
  }
  return out;
}

Dataset make_synthetic(std::size_t rows, std::size_t vars, std::uint64_t seed) {
  Dataset ds;
  ds.name = "synthetic";
  ds.rows = rows;
  ds.vars = vars;
  ds.values.assign(rows * vars, 0.0);

  Rng rng(seed);
  std::vector<double> phase(vars), amp(vars), period(vars), period2(vars);
  for (std::size_t v = 0; v < vars; ++v) {
    phase[v] = rng.uniform() * 6.283185307179586;
    amp[v] = 1.0 + 0.25 * static_cast<double>(v);
    period[v] = 24.0 + 6.0 * static_cast<double>(v);
    period2[v] = 96.0 + 10.0 * static_cast<double>(v);
  }
  const std::size_t shift_start = rows - rows / 5;
  for (std::size_t t = 0; t < rows; ++t) {
    const double td = static_cast<double>(t);
    for (std::size_t v = 0; v < vars; ++v) {
      const bool shifted = t >= shift_start;
      double seasonal = amp[v] * std::sin(6.283185307179586 * td / period[v] + phase[v]) +
                        0.4 * std::cos(6.283185307179586 * td / period2[v]);
      if (shifted) seasonal *= 1.25;
      double x = seasonal + 0.05 * td / static_cast<double>(rows) + 0.05 * rng.normal();
      if (shifted) x += 0.5 + 0.1 * static_cast<double>(v);
      ds.values[t * vars + v] = x;
    }
  }
  return ds;
}

}  // namespace petsa
