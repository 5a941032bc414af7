#include "petsa/calibration.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "petsa/errors.hpp"
#include "petsa/rng.hpp"

namespace petsa {
namespace {

constexpr char kMagic[8] = {'P', 'E', 'T', 'S', 'A', 'C', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

CalibrationModule init_calibration(Side side, std::size_t S, std::size_t V, std::size_t r,
                                   double alpha0, std::uint64_t seed) {
  if (r < 1 || S < 1 || V < 1) {
    throw DimensionError("init_calibration: S, V, r must all be >= 1");
  }
  CalibrationModule m;
  m.side = side;
  m.S = S;
  m.V = V;
  m.r = r;
  m.alpha = Tensor::full({V}, alpha0);
  m.A = Tensor::zeros({S, r});
  Rng rng(seed);
  const double std_dev = std::sqrt(2.0 / static_cast<double>(S + r));
  for (std::size_t i = 0; i < m.A.size(); ++i) m.A.data()[i] = std_dev * rng.normal();
  m.B = Tensor::zeros({r, S, V});
  m.b = Tensor::zeros({S, V});
  return m;
}

Tensor calibrate(const CalibrationModule& m, const Tensor& z) {
  if (z.rank() != 3 || z.shape()[1] != m.S || z.shape()[2] != m.V) {
    throw DimensionError("calibrate: input shape mismatch (want [Bx" + std::to_string(m.S) + "x" +
                         std::to_string(m.V) + "])");
  }
  Tensor gate = tanh(mul(m.alpha, z));
  std::vector<Tensor> residual;
  residual.reserve(m.V);
  for (std::size_t v = 0; v < m.V; ++v) {
    // gate_v · (A·B_v) as (gate_v·A)·B_v: [B×S]·[S×r]·[r×S]
    residual.push_back(matmul(matmul(channel(gate, v), m.A), channel(m.B, v)));
  }
  return add(add(z, stack_channels(residual)), m.b);
}

std::size_t param_count(const CalibrationModule& m) {
  return m.S * m.r + m.r * m.S * m.V + m.S * m.V + m.V;
}

std::vector<Tensor> calibration_params(const CalibrationModule& m) {
  return {m.alpha, m.A, m.B, m.b};
}

void set_trainable(CalibrationModule& m, bool trainable) {
  m.alpha.set_requires_grad(trainable);
  m.A.set_requires_grad(trainable);
  m.B.set_requires_grad(trainable);
  m.b.set_requires_grad(trainable);
}

void save_calibration(const CalibrationModule& m, const std::string& path) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  auto put64 = [&buf](std::uint64_t v) {
    char raw[8];
    std::memcpy(raw, &v, 8);
    buf.append(raw, 8);
  };
  char ver[4];
  std::memcpy(ver, &kVersion, 4);
  buf.append(ver, 4);
  buf.push_back(static_cast<char>(m.side));
  put64(m.S);
  put64(m.V);
  put64(m.r);
  for (const Tensor* t : {&m.alpha, &m.A, &m.B, &m.b}) {
    buf.append(reinterpret_cast<const char*>(t->data()), t->size() * sizeof(double));
  }
  const std::uint64_t sum = fnv1a(reinterpret_cast<const unsigned char*>(buf.data()), buf.size());
  char raw[8];
  std::memcpy(raw, &sum, 8);
  buf.append(raw, 8);

  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_calibration: cannot write " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("save_calibration: write to " + tmp + " failed");
  }
  std::filesystem::rename(tmp, target);
}

CalibrationModule load_calibration(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_calibration: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t header = sizeof(kMagic) + 4 + 1 + 3 * 8;
  if (buf.size() < header + 8) throw DataError("load_calibration: " + path + " is truncated");

  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (fnv1a(reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 8) != stored) {
    throw DataError("load_calibration: " + path + " checksum mismatch, refusing to load");
  }
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("load_calibration: " + path + " is not a calibration snapshot");
  }
  std::uint32_t version;
  std::memcpy(&version, buf.data() + 8, 4);
  if (version != kVersion) {
    throw DataError("load_calibration: " + path + " has version " + std::to_string(version));
  }
  CalibrationModule m;
  m.side = static_cast<Side>(buf[12]);
  std::uint64_t dims[3];
  std::memcpy(dims, buf.data() + 13, 24);
  m.S = dims[0];
  m.V = dims[1];
  m.r = dims[2];

  m.alpha = Tensor::zeros({m.V});
  m.A = Tensor::zeros({m.S, m.r});
  m.B = Tensor::zeros({m.r, m.S, m.V});
  m.b = Tensor::zeros({m.S, m.V});
  std::size_t off = header;
  for (Tensor* t : {&m.alpha, &m.A, &m.B, &m.b}) {
    const std::size_t bytes = t->size() * sizeof(double);
    if (off + bytes + 8 > buf.size()) throw DataError("load_calibration: " + path + " is truncated");
    std::memcpy(t->data(), buf.data() + off, bytes);
    off += bytes;
  }
  return m;
}

}  // namespace petsa
