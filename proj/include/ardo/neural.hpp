#pragma once

#include "ardo/error.hpp"
#include "ardo/geometry.hpp"
#include "ardo/parallel.hpp"
#include "ardo/random.hpp"
#include "ardo/types.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace ardo {

enum class Activation : std::uint32_t { tanh = 0, gelu = 1 };

inline std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "gelu"; }

inline Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "gelu") return Activation::gelu;
  throw Error("unknown activation '" + name + "' (expected tanh or gelu)");
}

/// Fully connected scalar network x ↦ net(x).
///
/// Parameters live in one flat vector, layer by layer, each layer storing its
/// weight matrix row-major (out × in) followed by its bias. The class offers
/// values and gradients with respect to the parameters. It deliberately has no
/// way to differentiate the output with respect to the input.
template <class T>
class MlpNetwork {
 public:
  using Scalar = T;
  using ParamVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  MlpNetwork(std::vector<int> widths, Activation activation) : widths_(std::move(widths)), activation_(activation) {
    if (widths_.size() < 2) throw Error("network needs at least an input and an output width");
    if (widths_.back() != 1) throw Error("network output width must be 1");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      if (widths_[l] < 1 || widths_[l + 1] < 1) throw Error("layer widths must be positive");
      layers_.push_back({offset, widths_[l], widths_[l + 1]});
      offset += static_cast<std::size_t>(widths_[l] + 1) * widths_[l + 1];
    }
    params_ = ParamVector::Zero(static_cast<Eigen::Index>(offset));
  }

  /// Xavier-uniform weights, zero biases.
  static MlpNetwork xavier(std::vector<int> widths, Activation activation, std::uint64_t seed) {
    MlpNetwork net(std::move(widths), activation);
    RandomStream rng(seed);
    for (const Layer& layer : net.layers_) {
      const double bound = std::sqrt(6.0 / (layer.in + layer.out));
      for (int k = 0; k < layer.in * layer.out; ++k)
        net.params_[static_cast<Eigen::Index>(layer.offset) + k] = static_cast<T>(rng.uniform(-bound, bound));
    }
    return net;
  }

  const std::vector<int>& widths() const noexcept { return widths_; }
  int input_width() const noexcept { return widths_.front(); }
  Activation activation() const noexcept { return activation_; }
  std::size_t parameter_count() const noexcept { return static_cast<std::size_t>(params_.size()); }
  const ParamVector& parameters() const noexcept { return params_; }
  ParamVector& parameters() noexcept { return params_; }

  void set_parameters(ParamVector p) {
    if (p.size() != params_.size()) throw Error("parameter vector has the wrong length");
    params_ = std::move(p);
  }

  template <class U>
  MlpNetwork<U> cast() const {
    MlpNetwork<U> out(widths_, activation_);
    out.set_parameters(params_.template cast<U>());
    return out;
  }

  double forward(const Vec& x) const {
    check_input(x.rows());
    PointSet one = x;
    return forward_batch(one)[0];
  }

  /// One output per column of `points`.
  Vec forward_batch(const PointSet& points) const {
    check_input(points.rows());
    Vec out(points.cols());
    parallel_for(chunk_count(points.cols()), [&](std::size_t c) {
      const auto [start, len] = chunk_range(c, points.cols());
      Work work;
      run_forward(points.middleCols(start, len), work);
      out.segment(start, len) = work.activations.back().row(0).transpose().template cast<double>();
    });
    return out;
  }

  /// Outputs in the network's own precision.
  ParamVector forward_batch_native(const PointSet& points) const {
    check_input(points.rows());
    ParamVector out(points.cols());
    parallel_for(chunk_count(points.cols()), [&](std::size_t c) {
      const auto [start, len] = chunk_range(c, points.cols());
      Work work;
      run_forward(points.middleCols(start, len), work);
      out.segment(start, len) = work.activations.back().row(0).transpose();
    });
    return out;
  }

  /// Gradient of upstream · net(x) with respect to the parameters.
  ParamVector param_gradient(const Vec& x, double upstream) const {
    check_input(x.rows());
    PointSet one = x;
    return param_gradient_batch(one, Vec::Constant(1, upstream));
  }

  /// Σ_k upstream_k · ∇_params net(points_k), by reverse accumulation.
  ParamVector param_gradient_batch(const PointSet& points, const Vec& upstream) const {
    check_input(points.rows());
    if (upstream.size() != points.cols()) throw Error("upstream length must match the number of points");
    const std::size_t chunks = chunk_count(points.cols());
    std::vector<ParamVector> partial(chunks);
    parallel_for(chunks, [&](std::size_t c) {
      const auto [start, len] = chunk_range(c, points.cols());
      partial[c] = backward(points.middleCols(start, len), upstream.segment(start, len));
    });
    if (chunks == 0) return ParamVector::Zero(params_.size());
    return pairwise_reduce(std::move(partial));
  }

 private:
  static constexpr Eigen::Index kChunk = 256;

  struct Layer {
    std::size_t offset;
    int in;
    int out;
  };

  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using WeightMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using GradMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  struct Work {
    std::vector<Matrix> pre;          // pre-activations of hidden layers
    std::vector<Matrix> activations;  // [input, hidden..., output]
  };

  void check_input(Eigen::Index rows) const {
    if (rows != widths_.front())
      throw Error("input dimension " + std::to_string(rows) + " does not match network input width " +
                  std::to_string(widths_.front()));
  }

  static std::size_t chunk_count(Eigen::Index cols) { return static_cast<std::size_t>((cols + kChunk - 1) / kChunk); }

  static std::pair<Eigen::Index, Eigen::Index> chunk_range(std::size_t c, Eigen::Index cols) {
    const Eigen::Index start = static_cast<Eigen::Index>(c) * kChunk;
    return {start, std::min(kChunk, cols - start)};
  }

  WeightMap weights(const Layer& l) const { return WeightMap(params_.data() + l.offset, l.out, l.in); }
  auto bias(const Layer& l) const { return params_.segment(static_cast<Eigen::Index>(l.offset) + l.in * l.out, l.out); }

  Matrix activate(const Matrix& z) const {
    if (activation_ == Activation::tanh) {
      // tanh through the vectorized exponential; |z| ≤ 20 already saturates.
      const auto e = (static_cast<T>(2) * z.array().min(static_cast<T>(20)).max(static_cast<T>(-20))).exp();
      return ((e - static_cast<T>(1)) / (e + static_cast<T>(1))).matrix();
    }
    return z.unaryExpr([](T v) {
      return static_cast<T>(0.5) * v * (static_cast<T>(1) + std::erf(v / static_cast<T>(std::numbers::sqrt2)));
    });
  }

  Matrix activation_slope(const Matrix& z, const Matrix& a) const {
    if (activation_ == Activation::tanh) return (static_cast<T>(1) - a.array().square()).matrix();
    return z.unaryExpr([](T v) {
      const T cdf = static_cast<T>(0.5) * (static_cast<T>(1) + std::erf(v / static_cast<T>(std::numbers::sqrt2)));
      const T pdf = std::exp(static_cast<T>(-0.5) * v * v) / static_cast<T>(std::sqrt(2.0 * std::numbers::pi));
      return cdf + v * pdf;
    });
  }

  template <class Points>
  void run_forward(const Points& points, Work& work) const {
    work.activations.clear();
    work.pre.clear();
    work.activations.push_back(points.template cast<T>());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      Matrix z = weights(layer) * work.activations.back();
      z.colwise() += bias(layer);
      if (l + 1 < layers_.size()) {
        work.activations.push_back(activate(z));
        work.pre.push_back(std::move(z));
      } else {
        work.activations.push_back(std::move(z));
      }
    }
  }

  template <class Points, class Upstream>
  ParamVector backward(const Points& points, const Upstream& upstream) const {
    Work work;
    run_forward(points, work);
    ParamVector grad = ParamVector::Zero(params_.size());
    Matrix delta = upstream.transpose().template cast<T>();
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Layer& layer = layers_[l];
      GradMap g(grad.data() + layer.offset, layer.out, layer.in);
      g.noalias() += delta * work.activations[l].transpose();
      grad.segment(static_cast<Eigen::Index>(layer.offset) + layer.in * layer.out, layer.out) += delta.rowwise().sum();
      if (l > 0) {
        Matrix back = weights(layer).transpose() * delta;
        delta = back.cwiseProduct(activation_slope(work.pre[l - 1], work.activations[l]));
      }
    }
    return grad;
  }

  std::vector<int> widths_;
  Activation activation_;
  std::vector<Layer> layers_;
  ParamVector params_;
};

/// Polynomial cutoff d ≥ 0 that vanishes exactly on the Dirichlet boundary
/// and, for parabolic problems, carries the terminal factor (T − t).
class DirichletMask {
 public:
  explicit DirichletMask(Domain domain, std::optional<double> horizon = std::nullopt)
      : domain_(std::move(domain)), horizon_(horizon) {
    if (domain_.is_box()) faces_ = domain_.faces(FaceKind::dirichlet);
  }

  const Domain& domain() const noexcept { return domain_; }
  std::optional<double> horizon() const noexcept { return horizon_; }

  double spatial(const Vec& x) const {
    if (!domain_.is_box()) {
      if (domain_.sphere_kind() != FaceKind::dirichlet) return 1.0;
      return domain_.radius() * domain_.radius() - (x - domain_.center()).squaredNorm();
    }
    double d = 1.0;
    for (const Face& f : faces_) {
      d *= f.side == Side::lower ? x[f.axis] - domain_.lower()[f.axis] : domain_.upper()[f.axis] - x[f.axis];
    }
    return d;
  }

  double operator()(const Vec& x, double t = 0.0) const {
    const double d = spatial(x);
    return horizon_ ? d * (*horizon_ - t) : d;
  }

  /// Mask values at augmented points (time in the last row when parabolic).
  Vec values(const PointSet& points) const {
    const int n = domain_.dim();
    Vec out(points.cols());
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      const Vec x = points.col(c).head(n);
      out[c] = horizon_ ? (*this)(x, points(n, c)) : spatial(x);
    }
    return out;
  }

 private:
  Domain domain_;
  std::optional<double> horizon_;
  std::vector<Face> faces_;
};

/// ρ(x[, t]) = d(x)·[(T − t)]·net(x[, t]).
template <class T>
double masked_test_function(const DirichletMask& mask, const MlpNetwork<T>& net, const Vec& x, double t = 0.0) {
  Vec input = x;
  if (mask.horizon()) {
    input.conservativeResize(x.size() + 1);
    input[x.size()] = t;
  }
  return mask(x, t) * net.forward(input);
}

/// The adversary: a raw network behind a Dirichlet mask.
template <class T>
class MaskedTestFunction {
 public:
  using ParamVector = typename MlpNetwork<T>::ParamVector;

  MaskedTestFunction(DirichletMask mask, MlpNetwork<T> net) : mask_(std::move(mask)), net_(std::move(net)) {}

  const DirichletMask& mask() const noexcept { return mask_; }
  const MlpNetwork<T>& network() const noexcept { return net_; }
  MlpNetwork<T>& network() noexcept { return net_; }

  double operator()(const Vec& x, double t = 0.0) const { return masked_test_function(mask_, net_, x, t); }

  Vec values(const PointSet& points) const { return mask_.values(points).cwiseProduct(net_.forward_batch(points)); }

  /// Σ_k upstream_k · ∇_params ρ(points_k).
  ParamVector param_gradient_batch(const PointSet& points, const Vec& upstream) const {
    return net_.param_gradient_batch(points, upstream.cwiseProduct(mask_.values(points)));
  }

 private:
  DirichletMask mask_;
  MlpNetwork<T> net_;
};

enum class Direction { descent, ascent };

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct AdamState {
  using ParamVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  explicit AdamState(std::size_t n)
      : first_moment(ParamVector::Zero(static_cast<Eigen::Index>(n))),
        second_moment(ParamVector::Zero(static_cast<Eigen::Index>(n))) {}

  ParamVector first_moment;
  ParamVector second_moment;
  long steps = 0;
};

/// One Adam update. Ascent negates the gradient before the update. Throws
/// DivergedError (tagged with `epoch`) on a non-finite gradient.
template <class T>
void adam_step(Eigen::Matrix<T, Eigen::Dynamic, 1>& params, const Eigen::Matrix<T, Eigen::Dynamic, 1>& gradient,
               AdamState<T>& state, double lr, Direction direction, long epoch = 0, const AdamSettings& s = {}) {
  if (params.size() != gradient.size() || params.size() != state.first_moment.size())
    throw Error("parameter, gradient and optimizer state sizes differ");
  if (!(lr > 0.0)) throw Error("learning rate must be positive");
  if (!gradient.allFinite()) throw DivergedError("diverged at epoch " + std::to_string(epoch) + ": non-finite gradient", epoch);

  const Eigen::Matrix<T, Eigen::Dynamic, 1> g = direction == Direction::ascent ? Eigen::Matrix<T, Eigen::Dynamic, 1>(-gradient) : gradient;
  ++state.steps;
  const T b1 = static_cast<T>(s.beta1);
  const T b2 = static_cast<T>(s.beta2);
  state.first_moment = b1 * state.first_moment + (static_cast<T>(1) - b1) * g;
  state.second_moment = b2 * state.second_moment + (static_cast<T>(1) - b2) * g.cwiseProduct(g);
  const T correction1 = static_cast<T>(1.0 - std::pow(s.beta1, static_cast<double>(state.steps)));
  const T correction2 = static_cast<T>(1.0 - std::pow(s.beta2, static_cast<double>(state.steps)));
  const T step = static_cast<T>(lr);
  params.array() -= step * (state.first_moment.array() / correction1) /
                    ((state.second_moment.array() / correction2).sqrt() + static_cast<T>(s.epsilon));
}

// Checkpoint layout (little-endian):
//   8 bytes  magic "ARDOCKPT"
//   u32      format version (1)
//   u32      activation id
//   u32      number of widths L, then L × u32 widths
//   u64      parameter count P, then P × f64 values
namespace checkpoint {

inline constexpr char kMagic[8] = {'A', 'R', 'D', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {

template <class U>
void put(std::string& buf, U value) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  char bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  buf.append(bytes, sizeof(U));
}

template <class U>
U take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(U) > buf.size()) throw Error("corrupt checkpoint: truncated");
  U value;
  std::memcpy(&value, buf.data() + pos, sizeof(U));
  pos += sizeof(U);
  return value;
}

}  // namespace detail

template <class T>
std::string encode(const MlpNetwork<T>& net) {
  std::string buf(kMagic, sizeof(kMagic));
  detail::put<std::uint32_t>(buf, kVersion);
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(net.activation()));
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(net.widths().size()));
  for (int w : net.widths()) detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(w));
  detail::put<std::uint64_t>(buf, net.parameter_count());
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i) detail::put<double>(buf, static_cast<double>(net.parameters()[i]));
  return buf;
}

inline MlpNetwork<double> decode(const std::string& buf) {
  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error("corrupt checkpoint: bad magic");
  std::size_t pos = sizeof(kMagic);
  if (detail::take<std::uint32_t>(buf, pos) != kVersion) throw Error("corrupt checkpoint: unsupported version");
  const auto activation = detail::take<std::uint32_t>(buf, pos);
  if (activation > 1) throw Error("corrupt checkpoint: unknown activation id");
  const auto count = detail::take<std::uint32_t>(buf, pos);
  if (count < 2 || count > 1024) throw Error("corrupt checkpoint: bad layer count");
  std::vector<int> widths;
  for (std::uint32_t i = 0; i < count; ++i) widths.push_back(static_cast<int>(detail::take<std::uint32_t>(buf, pos)));
  MlpNetwork<double> net(widths, static_cast<Activation>(activation));
  if (detail::take<std::uint64_t>(buf, pos) != net.parameter_count())
    throw Error("corrupt checkpoint: parameter count does not match widths");
  Vec params(static_cast<Eigen::Index>(net.parameter_count()));
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = detail::take<double>(buf, pos);
  if (pos != buf.size()) throw Error("corrupt checkpoint: trailing bytes");
  if (!params.allFinite()) throw Error("corrupt checkpoint: non-finite parameters");
  net.set_parameters(std::move(params));
  return net;
}

}  // namespace checkpoint

/// Writes `contents` to a sibling temporary file and renames it into place,
/// so readers see either the old file or the complete new one.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const MlpNetwork<T>& net) {
  write_file_atomic(path, checkpoint::encode(net));
}

inline MlpNetwork<double> load_checkpoint(const std::filesystem::path& path) { return checkpoint::decode(read_file(path)); }

}  // namespace ardo
