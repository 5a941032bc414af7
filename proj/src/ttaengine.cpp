#include "petsa/ttaengine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "petsa/errors.hpp"
#include "petsa/fft.hpp"
#include "petsa/optim.hpp"

namespace petsa {
namespace {

std::uint64_t fnv1a_accum(std::uint64_t h, const void* p, std::size_t n) {
  const unsigned char* c = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= c[i];
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;

std::uint64_t backbone_checksum_of(const Forecaster& f) {
  std::uint64_t h = kFnvOffset;
  auto fold = [&h](const std::vector<Tensor>& group) {
    for (const Tensor& t : group) {
      if (t.defined()) h = fnv1a_accum(h, t.data(), t.size() * sizeof(double));
    }
  };
  fold(f.w1);
  fold(f.b1);
  fold(f.w2);
  fold(f.b2);
  if (f.smooth.defined()) h = fnv1a_accum(h, f.smooth.data(), f.smooth.size() * sizeof(double));
  return h;
}

std::size_t backbone_param_count(const Forecaster& f) {
  std::size_t n = 0;
  for (const auto* group : {&f.w1, &f.b1, &f.w2, &f.b2}) {
    for (const Tensor& t : *group) {
      if (t.defined()) n += t.size();
    }
  }
  return n;
}

const char* mode_name(LossMode m) { return m == LossMode::partial ? "partial" : "total"; }

std::string event_tail(const std::vector<EventRecord>& events) {
  std::ostringstream out;
  const std::size_t first = events.size() > 5 ? events.size() - 5 : 0;
  for (std::size_t i = first; i < events.size(); ++i) {
    if (i != first) out << "; ";
    out << "step=" << events[i].step << " " << mode_name(events[i].mode)
        << " loss=" << events[i].total;
  }
  return out.str();
}

}  // namespace

void LabelCalendar::fill_target(const Dataset& ds, std::size_t t_star, std::size_t len,
                                std::size_t step, double* out) const {
  if (len > H_) throw DimensionError("LabelCalendar: prefix longer than the horizon");
  if (t_star + len > ds.rows) throw DimensionError("LabelCalendar: target range exceeds series");
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t row = t_star + i;
    const bool seen = row < step;
    for (std::size_t v = 0; v < ds.vars; ++v) {
      out[i * ds.vars + v] =
          (!poison_ || seen) ? ds.values[row * ds.vars + v] : std::numeric_limits<double>::quiet_NaN();
    }
  }
}

const char* method_name(Method m) {
  switch (m) {
    case Method::frozen: return "frozen";
    case Method::dense_mse: return "dense_mse";
    case Method::petsa: return "petsa";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "frozen") return Method::frozen;
  if (name == "dense_mse") return Method::dense_mse;
  if (name == "petsa") return Method::petsa;
  throw DataError("unknown method '" + name + "' (want frozen, dense_mse, or petsa)");
}

std::size_t dominant_period(const Tensor& train_series, std::size_t cap) {
  if (train_series.rank() != 2) {
    throw DimensionError("dominant_period: expected a [TxV] series");
  }
  const std::size_t T = train_series.shape()[0];
  const std::size_t V = train_series.shape()[1];
  if (T < 4) throw DimensionError("dominant_period: need at least 4 rows");
  if (cap < 2) throw DimensionError("dominant_period: cap must be >= 2");

  // Center each variable; exactly flat variables get no vote.
  Tensor rows = Tensor::zeros({V, T});
  std::vector<bool> live(V, false);
  for (std::size_t v = 0; v < V; ++v) {
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += train_series.data()[t * V + v];
    mean /= static_cast<double>(T);
    double ss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double c = train_series.data()[t * V + v] - mean;
      rows.data()[v * T + t] = c;
      ss += c * c;
    }
    live[v] = std::sqrt(ss / static_cast<double>(T)) > 1e-12;
  }

  ComplexSpectrum spec = rdft(rows);
  const std::size_t bins = T / 2 + 1;
  std::map<std::size_t, std::size_t> votes;
  for (std::size_t v = 0; v < V; ++v) {
    if (!live[v]) continue;
    std::size_t best_k = 1;
    double best_amp = -1.0;
    for (std::size_t k = 1; k < bins; ++k) {
      const double amp =
          std::hypot(spec.real.data()[v * bins + k], spec.imag.data()[v * bins + k]);
      if (amp > best_amp) {
        best_amp = amp;
        best_k = k;
      }
    }
    const auto period = static_cast<std::size_t>(
        std::llround(static_cast<double>(T) / static_cast<double>(best_k)));
    ++votes[period];
  }
  if (votes.empty()) {
    throw DataError(
        "dominant_period: series is constant, no dominant frequency; supply a default period");
  }
  std::size_t winner = 0, winner_count = 0;
  for (const auto& [period, count] : votes) {  // ascending, so ties keep the smaller period
    if (count > winner_count) {
      winner = period;
      winner_count = count;
    }
  }
  return std::clamp<std::size_t>(winner, 2, cap);
}

std::size_t dominant_period(const Dataset& ds, std::size_t cap) {
  if (ds.train_end == 0) throw DataError("dominant_period: dataset is not split yet");
  const std::size_t T = ds.train_end;
  Tensor train = Tensor::from({T, ds.vars},
                              std::vector<double>(ds.values.begin(),
                                                  ds.values.begin() + static_cast<std::ptrdiff_t>(
                                                                          T * ds.vars)));
  return dominant_period(train, cap);
}

CalibrationPair init_pair(const Forecaster& f, const AdaptationConfig& cfg) {
  CalibrationPair pair;
  pair.input = init_calibration(Side::input, f.L, f.V, cfg.rank, cfg.alpha0, cfg.seed);
  pair.output = init_calibration(Side::output, f.H, f.V, cfg.rank, cfg.alpha0, cfg.seed + 1);
  return pair;
}

Tensor calibrated_predict(const Forecaster& f, const CalibrationPair& pair, const Tensor& x) {
  return calibrate(pair.output, predict(f, calibrate(pair.input, x)));
}

DenseMap init_dense(std::size_t H, std::size_t V) {
  if (H < 1 || V < 1) throw DimensionError("init_dense: H and V must be >= 1");
  DenseMap map;
  map.D = Tensor::zeros({H, H, V});
  map.bias = Tensor::zeros({H, V});
  return map;
}

Tensor dense_apply(const DenseMap& map, const Tensor& y) {
  const std::size_t H = map.D.shape()[0];
  const std::size_t V = map.D.shape()[2];
  if (y.rank() != 3 || y.shape()[1] != H || y.shape()[2] != V) {
    throw DimensionError("dense_apply: input shape mismatch");
  }
  std::vector<Tensor> parts;
  parts.reserve(V);
  for (std::size_t v = 0; v < V; ++v) {
    parts.push_back(matmul(channel(y, v), channel(map.D, v)));
  }
  return add(add(y, stack_channels(parts)), map.bias);
}

std::size_t petsa_param_count(std::size_t L, std::size_t H, std::size_t V, std::size_t r) {
  const auto module = [V, r](std::size_t S) { return S * r + r * S * V + S * V + V; };
  return module(L) + module(H);
}

std::size_t dense_param_count(std::size_t H, std::size_t V) { return H * H * V + H * V; }

RunReport run_tta(const Dataset& ds, const Forecaster& f, const AdaptationConfig& cfg,
                  Method method) {
  if (f.V != ds.vars) {
    throw DimensionError("run_tta: forecaster has " + std::to_string(f.V) +
                         " variables, dataset has " + std::to_string(ds.vars));
  }
  if (cfg.lr < 0.0) throw std::invalid_argument("run_tta: lr must be >= 0");
  if (cfg.steps_per_event < 1) throw std::invalid_argument("run_tta: steps_per_event must be >= 1");
  if (method == Method::petsa && (cfg.loss.patch_len < 1 || cfg.loss.patch_len > f.H)) {
    throw std::invalid_argument("run_tta: loss patch_len must lie in [1, horizon " +
                                std::to_string(f.H) + "]");
  }

  const auto started = std::chrono::steady_clock::now();
  const std::size_t L = f.L, H = f.H, V = f.V;

  std::vector<WindowPair> wins = windows(ds, Part::test, L, H, 1);
  if (wins.empty()) throw DataError("run_tta: test stream is empty");
  const std::size_t t0 = wins.front().t_star;

  const std::size_t period = dominant_period(ds, cfg.period_cap);
  const std::size_t pthr = std::min(period, H);

  LabelCalendar cal(H);
  cal.poison(cfg.audit_causality);

  const std::uint64_t backbone_before = backbone_checksum_of(f);

  RunReport rep;
  rep.method = method;
  rep.lookback = L;
  rep.horizon = H;
  rep.vars = V;
  rep.dominant_period = period;
  rep.backbone_params = backbone_param_count(f);
  rep.windows.reserve(wins.size());

  CalibrationPair pair;
  DenseMap dmap;
  std::vector<Tensor> params;
  if (method == Method::petsa) {
    pair = init_pair(f, cfg);
    set_trainable(pair.input, true);
    set_trainable(pair.output, true);
    params = calibration_params(pair.input);
    for (const Tensor& t : calibration_params(pair.output)) params.push_back(t);
    rep.adapt_params = param_count(pair.input) + param_count(pair.output);
  } else if (method == Method::dense_mse) {
    dmap = init_dense(H, V);
    dmap.D.set_requires_grad(true);
    dmap.bias.set_requires_grad(true);
    params = {dmap.D, dmap.bias};
    rep.adapt_params = dense_param_count(H, V);
  }

  std::unique_ptr<Sgd> sgd;
  std::unique_ptr<Adam> adam;
  if (method != Method::frozen) {
    if (cfg.optimizer == OptimKind::sgd) {
      sgd = std::make_unique<Sgd>(params, cfg.lr);
    } else {
      adam = std::make_unique<Adam>(params, cfg.lr);
    }
  }

  auto fire = [&](const WindowPair& w, std::size_t s, LossMode mode, std::size_t p) {
    Tensor target = Tensor::zeros({1, p, V});
    cal.fill_target(ds, w.t_star, p, s, target.data());
    Tensor xb = reshape(w.x, {1, L, V});
    Tensor raw;
    if (method == Method::dense_mse) raw = predict(f, xb);  // constant under this tape

    EventRecord rec;
    rec.step = s;
    rec.mode = mode;
    rec.n_observed = p;
    for (std::size_t k = 0; k < cfg.steps_per_event; ++k) {
      Tape tape;
      Tensor loss;
      if (method == Method::petsa) {
        LossReport lr = petsa_loss(calibrated_predict(f, pair, xb), target, cfg.loss, mode);
        loss = lr.total;
        if (k == 0) {
          rec.total = lr.total.value();
          rec.huber = lr.huber;
          rec.freq = lr.freq;
          rec.patch = lr.patch;
          rec.patch_skipped = lr.patch_skipped;
        }
      } else {
        Tensor pred = dense_apply(dmap, raw);
        if (p < H) pred = slice_time(pred, 0, p);
        Tensor d = sub(pred, target);
        loss = reduce_mean(mul(d, d));
        if (k == 0) rec.total = loss.value();
      }
      const double lv = loss.value();
      if (!std::isfinite(lv)) {
        throw NumericalError("run_tta: loss is not finite at step " + std::to_string(s) + " (" +
                             mode_name(mode) + "); recent events: " + event_tail(rep.events));
      }
      if (lv > 1e6) {
        throw NumericalError("run_tta: optimizer diverged (loss " + std::to_string(lv) +
                             " at step " + std::to_string(s) +
                             "); recent events: " + event_tail(rep.events));
      }
      backward(loss);
      if (sgd) sgd->step();
      if (adam) adam->step();
    }
    rep.events.push_back(rec);
  };

  double se_raw = 0.0, ae_raw = 0.0, se_cal = 0.0, ae_cal = 0.0;
  std::uint64_t pred_hash = kFnvOffset;
  const double denom = static_cast<double>(H * V);

  for (const WindowPair& w : wins) {
    const std::size_t s = w.t_star;

    // Labels that arrived by step s are consumed before this step's forecast.
    if (method != Method::frozen) {
      if (s >= t0 + H && s - H - t0 < wins.size()) {
        fire(wins[s - H - t0], s, LossMode::total, H);
      }
      if (pthr < H && s >= t0 + pthr && s - pthr - t0 < wins.size()) {
        fire(wins[s - pthr - t0], s, LossMode::partial, pthr);
      }
    }

    Tensor xb = reshape(w.x, {1, L, V});
    Tensor raw = predict(f, xb);
    Tensor calp;
    switch (method) {
      case Method::frozen: calp = raw; break;
      case Method::dense_mse: calp = dense_apply(dmap, raw); break;
      case Method::petsa: calp = calibrated_predict(f, pair, xb); break;
    }

    WindowRecord wr;
    wr.t_star = s;
    double wsr = 0.0, war = 0.0, wsc = 0.0, wac = 0.0;
    for (std::size_t i = 0; i < H * V; ++i) {
      const double truth = w.y.data()[i];
      const double er = raw.data()[i] - truth;
      const double ec = calp.data()[i] - truth;
      wsr += er * er;
      war += std::fabs(er);
      wsc += ec * ec;
      wac += std::fabs(ec);
    }
    wr.mse_raw = wsr / denom;
    wr.mae_raw = war / denom;
    wr.mse_cal = wsc / denom;
    wr.mae_cal = wac / denom;
    rep.windows.push_back(wr);
    se_raw += wsr;
    ae_raw += war;
    se_cal += wsc;
    ae_cal += wac;

    pred_hash = fnv1a_accum(pred_hash, calp.data(), calp.size() * sizeof(double));
    if (cfg.store_predictions) {
      rep.predictions.insert(rep.predictions.end(), calp.data(), calp.data() + calp.size());
      rep.predictions_raw.insert(rep.predictions_raw.end(), raw.data(), raw.data() + raw.size());
    }
  }

  const double total = static_cast<double>(wins.size()) * denom;
  rep.mse = se_cal / total;
  rep.mae = ae_cal / total;
  rep.mse_raw = se_raw / total;
  rep.mae_raw = ae_raw / total;
  rep.prediction_checksum = pred_hash;
  rep.backbone_checksum = backbone_before;
  if (backbone_checksum_of(f) != backbone_before) {
    throw std::logic_error("run_tta: backbone parameters changed during adaptation");
  }

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rep;
}

Comparison compare_methods(const Dataset& ds, const Forecaster& f, const AdaptationConfig& cfg) {
  Comparison cmp;
  cmp.lookback = f.L;
  cmp.horizon = f.H;
  cmp.vars = f.V;
  for (Method m : {Method::frozen, Method::dense_mse, Method::petsa}) {
    RunReport rep = run_tta(ds, f, cfg, m);
    MethodSummary sum;
    sum.method = m;
    sum.mse = rep.mse;
    sum.mae = rep.mae;
    sum.adapt_params = rep.adapt_params;
    sum.wall_seconds = rep.wall_seconds;
    sum.prediction_checksum = rep.prediction_checksum;
    cmp.methods.push_back(sum);
    cmp.reports.push_back(std::move(rep));
  }
  cmp.dominant_period = cmp.reports.front().dominant_period;
  cmp.param_ratio = static_cast<double>(dense_param_count(f.H, f.V)) /
                    static_cast<double>(petsa_param_count(f.L, f.H, f.V, cfg.rank));
  return cmp;
}

}  // namespace petsa
