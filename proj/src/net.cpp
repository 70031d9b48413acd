#include "apg/net.hpp"

#include "apg/driving_state.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace apg {

std::vector<int> MLPSpec::layer_dims() const {
  std::vector<int> dims;
  dims.push_back(input_dim);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(head == HeadKind::Gaussian ? 2 * output_dim : output_dim);
  return dims;
}

int MLPSpec::param_count() const {
  const auto dims = layer_dims();
  int n = 0;
  for (size_t i = 0; i + 1 < dims.size(); ++i) n += dims[i + 1] * dims[i] + dims[i + 1];
  return n;
}

ParameterVector init_params(const MLPSpec& spec, std::uint64_t seed) {
  ParameterVector p;
  p.manifest = spec.layer_dims();
  p.seed = seed;
  p.data = Eigen::VectorXd::Zero(spec.param_count());
  int off = 0;
  for (size_t layer = 0; layer + 1 < p.manifest.size(); ++layer) {
    const int fan_in = p.manifest[layer];
    const int fan_out = p.manifest[layer + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::mt19937_64 gen(seed + layer);
    std::uniform_real_distribution<double> u(-limit, limit);
    for (int k = 0; k < fan_out * fan_in; ++k) p.data[off + k] = u(gen);
    off += fan_out * fan_in + fan_out;  // biases stay zero
  }
  if (spec.head == HeadKind::Gaussian) {
    // Start exploration narrow: a unit std saturates the tanh-squashed
    // actuator bounds and makes early sampled actions bang-bang.
    p.data.segment(p.data.size() - spec.output_dim, spec.output_dim).setConstant(kLogStdInit);
  }
  return p;
}

namespace {

struct LayerOffsets {
  int w = 0, b = 0, rows = 0, cols = 0;
};

std::vector<LayerOffsets> layer_offsets(const std::vector<int>& dims) {
  std::vector<LayerOffsets> out;
  int off = 0;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    LayerOffsets l;
    l.cols = dims[i];
    l.rows = dims[i + 1];
    l.w = off;
    l.b = off + l.rows * l.cols;
    off = l.b + l.rows;
    out.push_back(l);
  }
  return out;
}

}  // namespace

GaussianOut mlp_forward(Tape& tape, int bank, const MLPSpec& spec, Tape::Index input) {
  if (tape.size(input) != spec.input_dim) {
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  }
  const auto layers = layer_offsets(spec.layer_dims());
  Tape::Index x = input;
  for (size_t i = 0; i < layers.size(); ++i) {
    x = tape.affine(bank, layers[i].w, layers[i].b, layers[i].rows, x);
    if (i + 1 < layers.size()) x = tape.gelu(x);
  }
  GaussianOut out;
  if (spec.head == HeadKind::Gaussian) {
    const int d = spec.output_dim;
    const Tape::Index mean_pre = tape.slice(x, 0, d);
    const Tape::Index ls_pre = tape.slice(x, d, d);
    const Eigen::VectorXd center = 0.5 * (spec.bound_hi + spec.bound_lo);
    const Eigen::VectorXd half = 0.5 * (spec.bound_hi - spec.bound_lo);
    out.mean = tape.add_vec(
        tape.scale_vec(tape.tanh(mean_pre), {half.data(), static_cast<size_t>(d)}),
        {center.data(), static_cast<size_t>(d)});
    out.log_std = tape.clamp(ls_pre, kLogStdMin, kLogStdMax);
  } else {
    out.mean = tape.relu(x);
  }
  return out;
}

Tape::Index gaussian_sample(Tape& tape, const MLPSpec& spec, const GaussianOut& out,
                            const Eigen::VectorXd& z) {
  const Tape::Index zc = tape.constant(z);
  const Tape::Index noise = tape.mul(tape.exp(out.log_std), zc);
  const Tape::Index raw = tape.add(out.mean, noise);
  const int d = spec.output_dim;
  return tape.clamp(raw, {spec.bound_lo.data(), static_cast<size_t>(d)},
                    {spec.bound_hi.data(), static_cast<size_t>(d)});
}

EvalOut mlp_eval(const MLPSpec& spec, const ParameterVector& params,
                 const Eigen::VectorXd& input) {
  const auto layers = layer_offsets(spec.layer_dims());
  Eigen::VectorXd x = input;
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        w(params.data.data() + l.w, l.rows, l.cols);
    Eigen::Map<const Eigen::VectorXd> b(params.data.data() + l.b, l.rows);
    x = w * x + b;
    if (i + 1 < layers.size()) {
      for (int k = 0; k < x.size(); ++k) {
        const double v = x[k];
        x[k] = 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
      }
    }
  }
  EvalOut out;
  if (spec.head == HeadKind::Gaussian) {
    const int d = spec.output_dim;
    out.mean = 0.5 * (spec.bound_hi + spec.bound_lo).array() +
               0.5 * (spec.bound_hi - spec.bound_lo).array() *
                   x.head(d).array().tanh();
    out.log_std = x.segment(d, d).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  } else {
    out.mean = x.cwiseMax(0.0);
  }
  return out;
}

Eigen::VectorXd gaussian_sample_eval(const MLPSpec& spec, const EvalOut& out,
                                     std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd v = out.mean;
  for (int k = 0; k < v.size(); ++k) {
    v[k] += std::exp(out.log_std[k]) * unit(rng);
    v[k] = std::min(std::max(v[k], spec.bound_lo[k]), spec.bound_hi[k]);
  }
  return v;
}

const Eigen::VectorXd& state_input_scaling() {
  static const Eigen::VectorXd scaling = [] {
    Eigen::VectorXd s = Eigen::VectorXd::Ones(kStateDim);
    s[0] = s[1] = 1.0 / 50.0;             // ego position
    s[2] = s[3] = 1.0 / 10.0;             // ego velocities
    s[7] = 1.0 / 3.0;                     // acceleration
    s[kEgoDim + 0] = s[kEgoDim + 1] = 1.0 / 5.0;  // position errors
    s[kEgoDim + 2] = 1.0 / 5.0;                   // speed error
    for (int slot = 0; slot < kParticipantSlots; ++slot) {
      const int base = kEgoDim + kTrackDim + slot * kSlotDim;
      s[base + 0] = s[base + 1] = 1.0 / 50.0;  // relative position
      s[base + 2] = 1.0 / 10.0;                // speed
      s[base + 4] = s[base + 5] = 1.0 / 5.0;   // extents
    }
    return s;
  }();
  return scaling;
}

namespace {
constexpr char kMagic[4] = {'A', 'P', 'G', 'N'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_params(const ParameterVector& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  auto write_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto write_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  write_u32(kVersion);
  write_u32(static_cast<std::uint32_t>(p.manifest.size()));
  for (int d : p.manifest) write_u32(static_cast<std::uint32_t>(d));
  write_u64(p.seed);
  write_u64(p.iteration);
  write_u64(static_cast<std::uint64_t>(p.data.size()));
  out.write(reinterpret_cast<const char*>(p.data.data()),
            static_cast<std::streamsize>(p.data.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

ParameterVector load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path);
  }
  auto read_u32 = [&] {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto read_u64 = [&] {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  if (read_u32() != kVersion) throw std::runtime_error("unsupported checkpoint version");
  ParameterVector p;
  const std::uint32_t n_manifest = read_u32();
  p.manifest.resize(n_manifest);
  for (auto& d : p.manifest) d = static_cast<int>(read_u32());
  p.seed = read_u64();
  p.iteration = read_u64();
  const std::uint64_t count = read_u64();
  int expected = 0;
  for (size_t i = 0; i + 1 < p.manifest.size(); ++i) {
    expected += p.manifest[i + 1] * (p.manifest[i] + 1);
  }
  if (static_cast<int>(count) != expected) {
    throw std::runtime_error("checkpoint parameter count does not match manifest");
  }
  p.data.resize(static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(p.data.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return p;
}

}  // namespace apg
