#include "mpts/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "mpts/error.hpp"
#include "mpts/layers.hpp"

namespace mpts {

void MlpParams::validate() const {
  if (layers.empty()) throw ParameterError("MLP has no layers");
  if (split_index < 1 || split_index >= layers.size()) {
    throw ParameterError("split_index " + std::to_string(split_index) + " must be in [1, " +
                         std::to_string(layers.size()) + ")");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].b.size() != layers[l].w.cols()) {
      throw ParameterError("layer " + std::to_string(l) + ": bias length mismatch");
    }
    if (l > 0 && layers[l].w.rows() != layers[l - 1].w.cols()) {
      throw ParameterError("layer " + std::to_string(l) + " does not chain: W " +
                           layers[l].w.shape_str() + " after " +
                           layers[l - 1].w.shape_str());
    }
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ParameterError("dropout rate must be in [0, 1)");
  }
}

MlpParams init_mlp(const ModelSpec& spec, Rng& rng) {
  const auto& sizes = spec.layer_sizes;
  if (sizes.size() < 2) throw ParameterError("MLP needs at least 2 layer sizes");
  for (std::size_t s : sizes) {
    if (s == 0) throw ParameterError("MLP layer sizes must be positive");
  }
  MlpParams p;
  p.split_index = spec.split_index;
  p.dropout_rate = spec.dropout_rate;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Layer layer{Matrix(sizes[l], sizes[l + 1]), std::vector<double>(sizes[l + 1], 0.0)};
    const double sd = std::sqrt(2.0 / static_cast<double>(sizes[l]));
    for (double& v : layer.w.data()) v = sd * rng.normal();
    p.layers.push_back(std::move(layer));
  }
  p.validate();
  return p;
}

ForwardResult forward(const MlpParams& params, const Matrix& x, bool train_mode, Rng& rng) {
  if (x.cols() != params.input_dim()) {
    throw DimensionError("forward: input " + x.shape_str() + " but network expects " +
                         std::to_string(params.input_dim()) + " features");
  }
  const std::size_t depth = params.layers.size();
  ForwardResult r;
  r.cache.inputs.reserve(depth);
  Matrix act = x;
  for (std::size_t l = 0; l < depth; ++l) {
    const Layer& layer = params.layers[l];
    Matrix z = affine_forward(act, layer.w, layer.b);
    r.cache.inputs.push_back(std::move(act));
    if (l + 1 == depth) {
      r.logits = std::move(z);
      break;
    }
    Matrix h = relu(z);
    r.cache.pre.push_back(std::move(z));
    DropoutResult d = dropout(h, params.dropout_rate, rng, train_mode);
    r.cache.masks.push_back(std::move(d.mask));
    act = std::move(d.out);
    if (l + 1 == params.split_index) r.features = act;
  }
  return r;
}

MlpGrads backward(const MlpParams& params, const ForwardCache& cache, const Matrix* dlogits,
                  const Matrix* dfeatures) {
  const std::size_t depth = params.layers.size();
  MlpGrads grads = zero_grads_like(params);
  // Gradient with respect to the output of layer l (post-dropout for hidden layers).
  Matrix dout;
  std::size_t top = depth;
  if (dlogits != nullptr) {
    dout = *dlogits;
  } else {
    top = params.split_index;
    dout = Matrix(cache.inputs[top].rows(), cache.inputs[top].cols());
  }
  for (std::size_t l = top; l-- > 0;) {
    const Layer& layer = params.layers[l];
    if (l + 1 < depth) {
      if (l + 1 == params.split_index && dfeatures != nullptr) {
        if (dfeatures->rows() != dout.rows() || dfeatures->cols() != dout.cols()) {
          throw DimensionError("backward: feature gradient " + dfeatures->shape_str() +
                               " vs features " + dout.shape_str());
        }
        auto d = dout.data();
        const auto f = dfeatures->data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += f[i];
      }
      dout = relu_backward(cache.pre[l], dropout_backward(cache.masks[l], dout));
    }
    AffineGrads g = affine_backward(cache.inputs[l], layer.w, dout);
    grads[l].w = std::move(g.dw);
    grads[l].b = std::move(g.db);
    if (l > 0) dout = std::move(g.dx);
  }
  return grads;
}

Matrix predict_proba(const MlpParams& params, const Matrix& x) {
  Rng unused(0);
  return softmax(forward(params, x, false, unused).logits);
}

Matrix extract_features(const MlpParams& params, const Matrix& x) {
  Rng unused(0);
  return forward(params, x, false, unused).features;
}

MlpGrads zero_grads_like(const MlpParams& params) {
  MlpGrads g;
  g.reserve(params.layers.size());
  for (const Layer& l : params.layers) {
    g.push_back({Matrix(l.w.rows(), l.w.cols()), std::vector<double>(l.b.size(), 0.0)});
  }
  return g;
}

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& is, const std::filesystem::path& path) {
  unsigned char bytes[8];
  const auto offset = static_cast<long long>(is.tellg());
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) {
    throw FormatError(path.string() + ": truncated checkpoint at offset " +
                      std::to_string(offset));
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void save_params(const MlpParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StateError("cannot open " + path.string() + " for writing");
  put_u64(os, params.layers.size());
  for (const Layer& l : params.layers) {
    put_u64(os, l.w.rows());
    put_u64(os, l.w.cols());
  }
  for (const Layer& l : params.layers) {
    for (double v : l.w.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
    for (double v : l.b) put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw StateError("write failed for " + path.string());
}

MlpParams load_params(const std::filesystem::path& path, std::size_t split_index,
                      double dropout_rate) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  const std::uint64_t count = get_u64(is, path);
  if (count == 0 || count > 1024) {
    throw FormatError(path.string() + ": implausible layer count " + std::to_string(count));
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto r = get_u64(is, path);
    const auto c = get_u64(is, path);
    if (r == 0 || c == 0 || r > (1u << 24) || c > (1u << 24)) {
      throw FormatError(path.string() + ": bad shape for layer " + std::to_string(i));
    }
    shapes.emplace_back(r, c);
  }
  MlpParams p;
  p.split_index = split_index;
  p.dropout_rate = dropout_rate;
  for (const auto& [r, c] : shapes) {
    Layer layer{Matrix(r, c), std::vector<double>(c)};
    for (double& v : layer.w.data()) v = std::bit_cast<double>(get_u64(is, path));
    for (double& v : layer.b) v = std::bit_cast<double>(get_u64(is, path));
    p.layers.push_back(std::move(layer));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes at offset " +
                      std::to_string(static_cast<long long>(is.tellg())));
  }
  p.validate();
  return p;
}

}  // namespace mpts
