#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petsa/calibration.hpp"
#include "petsa/dataio.hpp"
#include "petsa/forecasters.hpp"
#include "petsa/losses.hpp"

namespace petsa {

/// Bookkeeping for delayed labels: a forecast issued at t* covers rows
/// t*..t*+H−1, and row t is observed once the wall clock passes it. In
/// poisoning mode unobserved entries are served as NaN so any premature read
/// contaminates everything downstream and gets caught.
class LabelCalendar {
 public:
  explicit LabelCalendar(std::size_t horizon) : H_(horizon) {}

  std::size_t horizon() const { return H_; }

  /// p(t*, s): number of target steps of forecast t* observed at step s.
  std::size_t observed(std::size_t t_star, std::size_t step) const {
    if (step <= t_star) return 0;
    const std::size_t seen = step - t_star;
    return seen < H_ ? seen : H_;
  }

  void poison(bool on) { poison_ = on; }
  bool poisoning() const { return poison_; }

  /// Write rows t*..t*+len−1, all variables, of the normalized series into
  /// out (len×V doubles). Rows not yet observed at `step` come back NaN when
  /// poisoning is on.
  void fill_target(const Dataset& ds, std::size_t t_star, std::size_t len, std::size_t step,
                   double* out) const;

 private:
  std::size_t H_;
  bool poison_ = false;
};

enum class Method { frozen = 0, dense_mse = 1, petsa = 2 };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

enum class OptimKind { sgd, adam };

struct AdaptationConfig {
  OptimKind optimizer = OptimKind::adam;
  double lr = 1e-3;
  std::size_t steps_per_event = 1;
  std::size_t rank = 4;
  double alpha0 = 0.5;
  LossConfig loss;
  std::size_t period_cap = 720;
  std::uint64_t seed = 0;
  bool audit_causality = false;   // poison unobserved labels with NaN
  bool store_predictions = false; // keep full prediction tensors in the report
};

struct EventRecord {
  std::size_t step = 0;
  LossMode mode = LossMode::partial;
  double total = 0.0, huber = 0.0, freq = 0.0, patch = 0.0;
  std::size_t n_observed = 0;
  bool patch_skipped = false;
};

struct WindowRecord {
  std::size_t t_star = 0;
  double mse_raw = 0.0, mae_raw = 0.0;  // backbone alone
  double mse_cal = 0.0, mae_cal = 0.0;  // as recorded by the method
};

struct RunReport {
  Method method = Method::frozen;
  std::size_t lookback = 0, horizon = 0, vars = 0;
  std::size_t dominant_period = 0;
  std::size_t adapt_params = 0;
  std::size_t backbone_params = 0;
  double mse = 0.0, mae = 0.0;          // normalized space, streamed
  double mse_raw = 0.0, mae_raw = 0.0;  // backbone alone over the same stream
  double wall_seconds = 0.0;
  std::uint64_t prediction_checksum = 0;  // FNV-1a over recorded predictions
  std::uint64_t backbone_checksum = 0;    // backbone weights, verified unchanged
  std::vector<WindowRecord> windows;
  std::vector<EventRecord> events;
  std::vector<double> predictions;      // [N×H×V] flattened, if stored
  std::vector<double> predictions_raw;  // [N×H×V] flattened, if stored
};

/// Strongest periodicity of a [T×V] series: per variable, the nonzero DFT bin
/// with maximal magnitude votes for round(T/k); majority wins, ties go to the
/// smaller period, result clamped to [2, cap]. Constant variables abstain.
std::size_t dominant_period(const Tensor& train_series, std::size_t cap);

/// dominant_period over the train rows of a split dataset.
std::size_t dominant_period(const Dataset& ds, std::size_t cap);

/// Input-side and output-side calibration around one frozen backbone.
struct CalibrationPair {
  CalibrationModule input;   // S = L
  CalibrationModule output;  // S = H
};

CalibrationPair init_pair(const Forecaster& f, const AdaptationConfig& cfg);
Tensor calibrated_predict(const Forecaster& f, const CalibrationPair& pair, const Tensor& x);

/// The dense per-variable output correction used by the TAFAS-like baseline:
/// out[:,:,v] = y[:,:,v] + y[:,:,v]·D[:,:,v] + bias[:,v], zero-initialized.
struct DenseMap {
  Tensor D;     // [H×H×V]
  Tensor bias;  // [H×V]
};

DenseMap init_dense(std::size_t H, std::size_t V);
Tensor dense_apply(const DenseMap& map, const Tensor& y);

std::size_t petsa_param_count(std::size_t L, std::size_t H, std::size_t V, std::size_t r);
std::size_t dense_param_count(std::size_t H, std::size_t V);

/// Stream the test split chronologically. Label arrivals are processed before
/// the step's own forecast, so a prediction can never see an update triggered
/// by its own ground truth. Partial events fire once p reaches
/// min(dominant_period, H); total events once p = H (which subsumes the
/// partial event when the period covers the horizon).
RunReport run_tta(const Dataset& ds, const Forecaster& f, const AdaptationConfig& cfg,
                  Method method);

struct MethodSummary {
  Method method = Method::frozen;
  double mse = 0.0, mae = 0.0;
  std::size_t adapt_params = 0;
  double wall_seconds = 0.0;
  std::uint64_t prediction_checksum = 0;
};

struct Comparison {
  std::size_t lookback = 0, horizon = 0, vars = 0;
  std::size_t dominant_period = 0;
  double param_ratio = 0.0;  // dense params / petsa params
  std::vector<MethodSummary> methods;  // frozen, dense_mse, petsa
  std::vector<RunReport> reports;      // same order
};

/// frozen / dense_mse / petsa under one seed and one label calendar.
Comparison compare_methods(const Dataset& ds, const Forecaster& f, const AdaptationConfig& cfg);

}  // namespace petsa
