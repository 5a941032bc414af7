#include "petsa/forecasters.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "petsa/errors.hpp"
#include "petsa/kernels.hpp"
#include "petsa/optim.hpp"
#include "petsa/rng.hpp"

namespace petsa {
namespace {

// (x · smooth)[t] = mean of the width-k window around t, edges replicated
Tensor make_smooth(std::size_t len, std::size_t kernel) {
  Tensor s = Tensor::zeros({len, len});
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kernel) / 2;
  const double w = 1.0 / static_cast<double>(kernel);
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(len); ++t) {
    for (std::ptrdiff_t o = -half; o <= half; ++o) {
      std::ptrdiff_t j = t + o;
      if (j < 0) j = 0;
      if (j >= static_cast<std::ptrdiff_t>(len)) j = static_cast<std::ptrdiff_t>(len) - 1;
      s.data()[static_cast<std::size_t>(j) * len + static_cast<std::size_t>(t)] += w;
    }
  }
  return s;
}

void check_train_windows(const std::vector<WindowPair>& train) {
  if (train.empty()) throw DataError("fit: no training windows");
}

std::size_t win_L(const std::vector<WindowPair>& w) { return w[0].x.shape()[0]; }
std::size_t win_H(const std::vector<WindowPair>& w) { return w[0].y.shape()[0]; }
std::size_t win_V(const std::vector<WindowPair>& w) { return w[0].x.shape()[1]; }

// channel c of every window, stacked [N×len]
std::vector<double> gather_channel(const std::vector<WindowPair>& wins, bool target,
                                   std::size_t c) {
  const Tensor& first = target ? wins[0].y : wins[0].x;
  const std::size_t len = first.shape()[0];
  const std::size_t vars = first.shape()[1];
  std::vector<double> out(wins.size() * len);
  for (std::size_t i = 0; i < wins.size(); ++i) {
    const double* src = (target ? wins[i].y : wins[i].x).data();
    for (std::size_t t = 0; t < len; ++t) out[i * len + t] = src[t * vars + c];
  }
  return out;
}

// Solve (G) w = rhs for SPD G via Cholesky; G is n×n, rhs n×m, all row-major.
std::vector<double> cholesky_solve(std::vector<double> g, const std::vector<double>& rhs,
                                   std::size_t n, std::size_t m) {
  std::vector<double> c(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = g[j * n + j];
    for (std::size_t k = 0; k < n; ++k) {
      if (k < j) d -= c[j * n + k] * c[j * n + k];
    }
    if (!(d > std::fabs(g[j * n + j]) * 1e-13) || !std::isfinite(d)) {
      throw NumericalError(
          "fit_ols: normal equations are singular; retry with ridge_lambda > 0");
    }
    c[j * n + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = g[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= c[i * n + k] * c[j * n + k];
      c[i * n + j] = v / c[j * n + j];
    }
  }
  // forward then back substitution, one rhs column at a time
  std::vector<double> w(n * m);
  std::vector<double> z(n);
  for (std::size_t col = 0; col < m; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = rhs[i * m + col];
      for (std::size_t k = 0; k < i; ++k) v -= c[i * n + k] * z[k];
      z[i] = v / c[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
      double v = z[i];
      for (std::size_t k = i + 1; k < n; ++k) v -= c[k * n + i] * w[k * m + col];
      w[i * m + col] = v / c[i * n + i];
    }
  }
  return w;
}

struct ChannelData {
  std::vector<double> x;  // [N×L]
  std::vector<double> y;  // [N×H]
};

// One mini-batch training run over per-channel data. forward maps a [b×L]
// batch to [b×H] predictions built from the given parameters.
template <class Forward>
void train_channel(const ChannelData& data, std::size_t len_in, std::size_t len_out,
                   std::vector<Tensor>& params, std::size_t epochs, double lr, std::size_t batch,
                   Rng& rng, Forward&& forward, const char* who) {
  const std::size_t n = data.x.size() / len_in;
  for (Tensor& p : params) p.set_requires_grad(true);
  Adam opt(params, lr);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b = std::min(batch, n - start);
      Tensor xb = Tensor::zeros({b, len_in});
      Tensor yb = Tensor::zeros({b, len_out});
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t row = order[start + i];
        std::copy(data.x.begin() + static_cast<std::ptrdiff_t>(row * len_in),
                  data.x.begin() + static_cast<std::ptrdiff_t>((row + 1) * len_in),
                  xb.data() + i * len_in);
        std::copy(data.y.begin() + static_cast<std::ptrdiff_t>(row * len_out),
                  data.y.begin() + static_cast<std::ptrdiff_t>((row + 1) * len_out),
                  yb.data() + i * len_out);
      }
      Tape tape;
      Tensor diff = sub(forward(xb), yb);
      Tensor loss = reduce_mean(mul(diff, diff));
      if (!std::isfinite(loss.value())) {
        throw NumericalError(std::string(who) + ": training diverged; lower lr");
      }
      backward(loss);
      opt.step();
    }
  }
  for (Tensor& p : params) p.set_requires_grad(false);
}

constexpr char kMagic[8] = {'P', 'E', 'T', 'S', 'A', 'F', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

template <class T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

void put_tensor(std::string& buf, const Tensor& t) {
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put<std::uint64_t>(buf, d);
  buf.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
}

struct Cursor {
  const unsigned char* p;
  std::size_t left;
  const std::string& path;

  void need(std::size_t n) const {
    if (left < n) throw DataError("load_checkpoint: " + path + " is truncated");
  }
  template <class T>
  T take() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, p, sizeof(T));
    p += sizeof(T);
    left -= sizeof(T);
    return v;
  }
  Tensor take_tensor() {
    const auto rank = take<std::uint32_t>();
    if (rank > 8) throw DataError("load_checkpoint: " + path + " has a corrupt tensor header");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = take<std::uint64_t>();
      numel *= d;
    }
    need(numel * sizeof(double));
    Tensor t = Tensor::zeros(shape);
    std::memcpy(t.data(), p, numel * sizeof(double));
    p += numel * sizeof(double);
    left -= numel * sizeof(double);
    return t;
  }
};

}  // namespace

const char* kind_name(BackboneKind k) {
  switch (k) {
    case BackboneKind::ols: return "ols";
    case BackboneKind::dlinear: return "dlinear";
    default: return "mlp";
  }
}

BackboneKind kind_from_name(const std::string& name) {
  if (name == "ols") return BackboneKind::ols;
  if (name == "dlinear") return BackboneKind::dlinear;
  if (name == "mlp") return BackboneKind::mlp;
  throw DataError("unknown forecaster kind '" + name + "' (want ols|dlinear|mlp)");
}

Forecaster fit_ols(const std::vector<WindowPair>& train, double ridge_lambda) {
  check_train_windows(train);
  Forecaster f;
  f.kind = BackboneKind::ols;
  f.L = win_L(train);
  f.H = win_H(train);
  f.V = win_V(train);

  const std::size_t n = train.size(), L = f.L, H = f.H;
  const auto& k = kernels::active();
  for (std::size_t c = 0; c < f.V; ++c) {
    auto x = gather_channel(train, false, c);
    auto y = gather_channel(train, true, c);

    std::vector<double> xm(L, 0.0), ym(H, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < L; ++t) xm[t] += x[i * L + t];
      for (std::size_t t = 0; t < H; ++t) ym[t] += y[i * H + t];
    }
    for (double& v : xm) v /= static_cast<double>(n);
    for (double& v : ym) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < L; ++t) x[i * L + t] -= xm[t];
      for (std::size_t t = 0; t < H; ++t) y[i * H + t] -= ym[t];
    }

    std::vector<double> gram(L * L, 0.0), rhs(L * H, 0.0);
    k.gemm_tn(x.data(), x.data(), gram.data(), L, n, L);
    k.gemm_tn(x.data(), y.data(), rhs.data(), L, n, H);
    for (std::size_t j = 0; j < L; ++j) gram[j * L + j] += ridge_lambda;

    auto w = cholesky_solve(std::move(gram), rhs, L, H);
    std::vector<double> intercept(H);
    for (std::size_t h = 0; h < H; ++h) {
      double dot = 0.0;
      for (std::size_t t = 0; t < L; ++t) dot += xm[t] * w[t * H + h];
      intercept[h] = ym[h] - dot;
    }
    f.w1.push_back(Tensor::from({L, H}, std::move(w)));
    f.b1.push_back(Tensor::from({1, H}, std::move(intercept)));
  }
  return f;
}

Forecaster fit_dlinear(const std::vector<WindowPair>& train, std::size_t kernel,
                       std::size_t epochs, double lr, std::size_t batch) {
  check_train_windows(train);
  Forecaster f;
  f.kind = BackboneKind::dlinear;
  f.L = win_L(train);
  f.H = win_H(train);
  f.V = win_V(train);
  f.kernel = kernel;
  if (kernel % 2 == 0) throw DimensionError("fit_dlinear: moving-average kernel must be odd");
  if (kernel >= 2 * f.L) {
    throw DimensionError("fit_dlinear: kernel " + std::to_string(kernel) +
                         " too wide for lookback " + std::to_string(f.L));
  }
  f.smooth = make_smooth(f.L, kernel);

  for (std::size_t c = 0; c < f.V; ++c) {
    ChannelData data{gather_channel(train, false, c), gather_channel(train, true, c)};
    Tensor wt = Tensor::zeros({f.L, f.H});
    Tensor wr = Tensor::zeros({f.L, f.H});
    std::vector<Tensor> params = {wt, wr};
    Rng rng(1299827 + c);
    train_channel(
        data, f.L, f.H, params, epochs, lr, batch, rng,
        [&](const Tensor& xb) {
          Tensor trend = matmul(xb, f.smooth);
          Tensor rem = sub(xb, trend);
          return add(matmul(trend, wt), matmul(rem, wr));
        },
        "fit_dlinear");
    f.w1.push_back(wt);
    f.w2.push_back(wr);
  }
  return f;
}

Forecaster fit_mlp(const std::vector<WindowPair>& train, std::size_t hidden, std::size_t epochs,
                   double lr, std::uint64_t seed, std::size_t batch) {
  check_train_windows(train);
  Forecaster f;
  f.kind = BackboneKind::mlp;
  f.L = win_L(train);
  f.H = win_H(train);
  f.V = win_V(train);
  f.hidden = hidden;

  for (std::size_t c = 0; c < f.V; ++c) {
    Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * (c + 1)));
    const double s1 = std::sqrt(2.0 / static_cast<double>(f.L + hidden));
    const double s2 = std::sqrt(2.0 / static_cast<double>(hidden + f.H));
    Tensor w1 = Tensor::zeros({f.L, hidden});
    for (std::size_t i = 0; i < w1.size(); ++i) w1.data()[i] = s1 * rng.normal();
    Tensor b1 = Tensor::zeros({1, hidden});
    Tensor w2 = Tensor::zeros({hidden, f.H});
    for (std::size_t i = 0; i < w2.size(); ++i) w2.data()[i] = s2 * rng.normal();
    Tensor b2 = Tensor::zeros({1, f.H});

    ChannelData data{gather_channel(train, false, c), gather_channel(train, true, c)};
    std::vector<Tensor> params = {w1, b1, w2, b2};
    train_channel(
        data, f.L, f.H, params, epochs, lr, batch, rng,
        [&](const Tensor& xb) {
          Tensor h = tanh(add(matmul(xb, w1), b1));
          return add(matmul(h, w2), b2);
        },
        "fit_mlp");
    f.w1.push_back(w1);
    f.b1.push_back(b1);
    f.w2.push_back(w2);
    f.b2.push_back(b2);
  }
  return f;
}

Tensor predict(const Forecaster& f, const Tensor& x) {
  if (x.rank() != 3 || x.shape()[1] != f.L || x.shape()[2] != f.V) {
    throw DimensionError("predict: input shape mismatch (want [Bx" + std::to_string(f.L) + "x" +
                         std::to_string(f.V) + "])");
  }
  std::vector<Tensor> outs;
  outs.reserve(f.V);
  for (std::size_t v = 0; v < f.V; ++v) {
    Tensor xc = channel(x, v);
    switch (f.kind) {
      case BackboneKind::ols:
        outs.push_back(add(matmul(xc, f.w1[v]), f.b1[v]));
        break;
      case BackboneKind::dlinear: {
        Tensor trend = matmul(xc, f.smooth);
        Tensor rem = sub(xc, trend);
        outs.push_back(add(matmul(trend, f.w1[v]), matmul(rem, f.w2[v])));
        break;
      }
      case BackboneKind::mlp: {
        Tensor h = tanh(add(matmul(xc, f.w1[v]), f.b1[v]));
        outs.push_back(add(matmul(h, f.w2[v]), f.b2[v]));
        break;
      }
    }
  }
  return stack_channels(outs);
}

void stamp_provenance(Forecaster& f, const Dataset& ds) {
  f.dataset = ds.name;
  f.train_end = ds.train_end;
  f.norm_mean = ds.norm.mean;
  f.norm_std = ds.norm.stddev;
}

void save_checkpoint(const Forecaster& f, const std::string& path) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put<std::uint32_t>(buf, kVersion);
  put<std::uint8_t>(buf, static_cast<std::uint8_t>(f.kind));
  put<std::uint64_t>(buf, f.L);
  put<std::uint64_t>(buf, f.H);
  put<std::uint64_t>(buf, f.V);
  put<std::uint64_t>(buf, f.hidden);
  put<std::uint64_t>(buf, f.kernel);
  put<std::uint64_t>(buf, f.train_end);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(f.dataset.size()));
  buf.append(f.dataset);
  put<std::uint8_t>(buf, f.norm_mean.empty() ? 0 : 1);
  if (!f.norm_mean.empty()) {
    buf.append(reinterpret_cast<const char*>(f.norm_mean.data()),
               f.norm_mean.size() * sizeof(double));
    buf.append(reinterpret_cast<const char*>(f.norm_std.data()),
               f.norm_std.size() * sizeof(double));
  }
  for (const auto* group : {&f.w1, &f.b1, &f.w2, &f.b2}) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(group->size()));
    for (const Tensor& t : *group) put_tensor(buf, t);
  }
  put<std::uint64_t>(buf, fnv1a(reinterpret_cast<const unsigned char*>(buf.data()), buf.size()));

  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_checkpoint: cannot write " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("save_checkpoint: write to " + tmp + " failed");
  }
  std::filesystem::rename(tmp, target);
}

Forecaster load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + sizeof(std::uint64_t)) {
    throw DataError("load_checkpoint: " + path + " is truncated");
  }

  const auto* bytes = reinterpret_cast<const unsigned char*>(buf.data());
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - sizeof(stored), sizeof(stored));
  if (fnv1a(bytes, buf.size() - sizeof(stored)) != stored) {
    throw DataError("load_checkpoint: " + path + " checksum mismatch, refusing to load");
  }

  Cursor cur{bytes, buf.size() - sizeof(stored), path};
  cur.need(sizeof(kMagic));
  if (std::memcmp(cur.p, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("load_checkpoint: " + path + " is not a forecaster checkpoint");
  }
  cur.p += sizeof(kMagic);
  cur.left -= sizeof(kMagic);

  const auto version = cur.take<std::uint32_t>();
  if (version != kVersion) {
    throw DataError("load_checkpoint: " + path + " has version " + std::to_string(version) +
                    ", expected " + std::to_string(kVersion));
  }
  Forecaster f;
  const auto kind = cur.take<std::uint8_t>();
  if (kind > 2) throw DataError("load_checkpoint: " + path + " has an unknown kind");
  f.kind = static_cast<BackboneKind>(kind);
  f.L = cur.take<std::uint64_t>();
  f.H = cur.take<std::uint64_t>();
  f.V = cur.take<std::uint64_t>();
  f.hidden = cur.take<std::uint64_t>();
  f.kernel = cur.take<std::uint64_t>();
  f.train_end = cur.take<std::uint64_t>();
  const auto name_len = cur.take<std::uint32_t>();
  cur.need(name_len);
  f.dataset.assign(reinterpret_cast<const char*>(cur.p), name_len);
  cur.p += name_len;
  cur.left -= name_len;
  if (cur.take<std::uint8_t>() != 0) {
    f.norm_mean.resize(f.V);
    f.norm_std.resize(f.V);
    cur.need(2 * f.V * sizeof(double));
    std::memcpy(f.norm_mean.data(), cur.p, f.V * sizeof(double));
    cur.p += f.V * sizeof(double);
    std::memcpy(f.norm_std.data(), cur.p, f.V * sizeof(double));
    cur.p += f.V * sizeof(double);
    cur.left -= 2 * f.V * sizeof(double);
  }
  for (auto* group : {&f.w1, &f.b1, &f.w2, &f.b2}) {
    const auto count = cur.take<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) group->push_back(cur.take_tensor());
  }
  if (f.kind == BackboneKind::dlinear) f.smooth = make_smooth(f.L, f.kernel);
  return f;
}

std::string checkpoint_path(const std::string& root, const std::string& dataset,
                            BackboneKind kind, std::size_t L, std::size_t H) {
  return root + "/" + dataset + "_" + kind_name(kind) + "_L" + std::to_string(L) + "_H" +
         std::to_string(H) + ".ckpt";
}

}  // namespace petsa
