#include "musep/nn.hpp"

#include "musep/error.hpp"
#include "musep/rng.hpp"

#include <cmath>
#include <numeric>

namespace musep {

std::size_t ModelConfig::input_width() const {
  return std::accumulate(input_dims.begin(), input_dims.end(), std::size_t{0});
}

ModelConfig make_model_config(std::vector<std::size_t> input_dims, std::size_t fused_dim,
                              std::size_t rnn_layers, bool bidirectional, std::uint64_t seed) {
  ModelConfig c;
  c.input_dims = std::move(input_dims);
  c.fused_dim = fused_dim;
  c.rnn_layers = rnn_layers;
  c.rnn_bidirectional = bidirectional;
  c.head_hidden = std::max<std::size_t>(1, fused_dim / 2);
  c.seed = seed;
  return c;
}

void validate(const ModelConfig& c) {
  if (c.input_dims.empty()) fail(ErrorCode::InvalidConfig, "model needs at least one input modality");
  for (const auto n : c.input_dims) {
    if (n == 0) fail(ErrorCode::InvalidConfig, "modality width must be positive");
  }
  if (c.fused_dim == 0) fail(ErrorCode::InvalidConfig, "fused_dim must be positive");
  if (c.rnn_layers == 0) fail(ErrorCode::InvalidConfig, "rnn_layers must be at least 1");
  if (c.head_hidden == 0) fail(ErrorCode::InvalidConfig, "head_hidden must be positive");
}

namespace param_index {

std::size_t gru(const ModelConfig& c, std::size_t layer, std::size_t direction, GruParam p) {
  return 2 + (layer * c.directions() + direction) * kGruParamCount + static_cast<std::size_t>(p);
}
std::size_t head_w1(const ModelConfig& c) { return 2 + c.rnn_layers * c.directions() * kGruParamCount; }
std::size_t head_b1(const ModelConfig& c) { return head_w1(c) + 1; }
std::size_t head_w2(const ModelConfig& c) { return head_w1(c) + 2; }
std::size_t head_b2(const ModelConfig& c) { return head_w1(c) + 3; }
std::size_t count(const ModelConfig& c) { return head_w1(c) + 4; }

}  // namespace param_index

namespace {

struct Shape {
  Eigen::Index rows;
  Eigen::Index cols;
  bool is_bias;
};

std::vector<Shape> param_shapes(const ModelConfig& c) {
  const auto n = static_cast<Eigen::Index>(c.input_width());
  const auto d = static_cast<Eigen::Index>(c.fused_dim);
  const auto h = static_cast<Eigen::Index>(c.head_hidden);
  const auto d_out = static_cast<Eigen::Index>(c.rnn_output_width());
  std::vector<Shape> s;
  s.push_back({n, d, false});
  s.push_back({1, d, true});
  for (std::size_t l = 0; l < c.rnn_layers; ++l) {
    const Eigen::Index in = l == 0 ? d : d_out;
    for (std::size_t dir = 0; dir < c.directions(); ++dir) {
      for (int i = 0; i < 3; ++i) s.push_back({in, d, false});
      for (int i = 0; i < 3; ++i) s.push_back({d, d, false});
      for (int i = 0; i < 3; ++i) s.push_back({1, d, true});
    }
  }
  s.push_back({d_out, h, false});
  s.push_back({1, h, true});
  s.push_back({h, 1, false});
  s.push_back({1, 1, true});
  return s;
}

constexpr auto kSigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

}  // namespace

std::vector<std::string> param_names(const ModelConfig& c) {
  static constexpr const char* gru_names[] = {"W_r", "W_z", "W_n", "U_r", "U_z", "U_n", "b_r", "b_z", "b_n"};
  std::vector<std::string> names = {"fusion.W", "fusion.b"};
  for (std::size_t l = 0; l < c.rnn_layers; ++l) {
    for (std::size_t dir = 0; dir < c.directions(); ++dir) {
      const std::string prefix = "gru" + std::to_string(l) + (dir == 0 ? ".fwd." : ".bwd.");
      for (const char* g : gru_names) names.push_back(prefix + g);
    }
  }
  for (const char* h : {"head.W1", "head.b1", "head.W2", "head.b2"}) names.emplace_back(h);
  return names;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.size());
  return n;
}

Model zero_model(const ModelConfig& config) {
  validate(config);
  Model m;
  m.config = config;
  for (const auto& s : param_shapes(config)) m.params.push_back(Matrix::Zero(s.rows, s.cols));
  return m;
}

Model init_model(const ModelConfig& config) {
  Model m = zero_model(config);
  const auto shapes = param_shapes(config);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].is_bias) continue;
    Rng rng(config.seed, i);
    const double bound = 1.0 / std::sqrt(static_cast<double>(shapes[i].rows));
    Matrix& w = m.params[i];
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.uniform(-bound, bound);
  }
  return m;
}

ParamSet zeros_like(const ParamSet& params) {
  ParamSet out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(Matrix::Zero(p.rows(), p.cols()));
  return out;
}

// ---------------------------------------------------------------------------
// forward

namespace {

// Runs one GRU direction over the whole (T*B) x in input. Rows of time step t
// occupy [t*B, (t+1)*B).
Matrix gru_direction_forward(const Model& model, std::size_t layer, std::size_t dir, const Matrix& x,
                             std::size_t steps, std::size_t batch, DirectionCache& cache) {
  const auto& c = model.config;
  auto p = [&](GruParam g) -> const Matrix& { return model.params[param_index::gru(c, layer, dir, g)]; };
  const auto d = static_cast<Eigen::Index>(c.fused_dim);
  const auto b = static_cast<Eigen::Index>(batch);
  const auto rows = x.rows();

  Matrix a_r(rows, d), a_z(rows, d), a_n(rows, d);
  a_r.noalias() = x * p(GruParam::Wr);
  a_z.noalias() = x * p(GruParam::Wz);
  a_n.noalias() = x * p(GruParam::Wn);
  a_r.rowwise() += p(GruParam::Br).row(0);
  a_z.rowwise() += p(GruParam::Bz).row(0);

  cache.r.resize(rows, d);
  cache.z.resize(rows, d);
  cache.n.resize(rows, d);
  cache.q.resize(rows, d);
  cache.h_prev.resize(rows, d);
  Matrix out(rows, d);

  Matrix h = Matrix::Zero(b, d);
  Matrix hr(b, d), hz(b, d), hn(b, d);
  const bool reverse = dir == 1;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const auto r0 = static_cast<Eigen::Index>(t) * b;
    hr.noalias() = h * p(GruParam::Ur);
    hz.noalias() = h * p(GruParam::Uz);
    hn.noalias() = h * p(GruParam::Un);
    hn.rowwise() += p(GruParam::Bn).row(0);

    cache.h_prev.middleRows(r0, b) = h;
    auto r = cache.r.middleRows(r0, b);
    auto z = cache.z.middleRows(r0, b);
    auto n = cache.n.middleRows(r0, b);
    cache.q.middleRows(r0, b) = hn;
    r = (a_r.middleRows(r0, b) + hr).unaryExpr(kSigmoid);
    z = (a_z.middleRows(r0, b) + hz).unaryExpr(kSigmoid);
    n = (a_n.middleRows(r0, b).array() + r.array() * hn.array()).tanh().matrix();
    h = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
    out.middleRows(r0, b) = h;
  }
  return out;
}

}  // namespace

ForwardResult forward_batch(const Model& model, std::span<const Matrix> xs) {
  const auto& c = model.config;
  if (xs.empty()) fail(ErrorCode::ShapeMismatch, "forward: empty batch");
  const auto steps = static_cast<std::size_t>(xs.front().rows());
  if (steps == 0) fail(ErrorCode::ShapeMismatch, "forward: sequence has no steps");
  const auto n_in = static_cast<Eigen::Index>(c.input_width());
  for (const auto& x : xs) {
    if (x.cols() != n_in) {
      fail(ErrorCode::ShapeMismatch, "forward: input width " + std::to_string(x.cols()) +
                                         " != model width " + std::to_string(n_in));
    }
    if (static_cast<std::size_t>(x.rows()) != steps) fail(ErrorCode::ShapeMismatch, "forward: unequal lengths in batch");
  }
  const std::size_t batch = xs.size();
  const auto b = static_cast<Eigen::Index>(batch);
  const auto rows = static_cast<Eigen::Index>(steps * batch);

  ForwardResult res;
  ForwardCache& cache = res.cache;
  cache.steps = steps;
  cache.batch = batch;
  cache.revision = model.revision;
  cache.config = c;

  if (batch == 1) {
    cache.input = xs.front();
  } else {
    cache.input.resize(rows, n_in);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t k = 0; k < batch; ++k) {
        cache.input.row(static_cast<Eigen::Index>(t * batch + k)) = xs[k].row(static_cast<Eigen::Index>(t));
      }
    }
  }

  cache.fused.noalias() = cache.input * model.params[param_index::kFusionW];
  cache.fused.rowwise() += model.params[param_index::kFusionB].row(0);

  const auto d = static_cast<Eigen::Index>(c.fused_dim);
  const Matrix* layer_in = &cache.fused;
  cache.layers.resize(c.rnn_layers);
  for (std::size_t l = 0; l < c.rnn_layers; ++l) {
    LayerCache& lc = cache.layers[l];
    lc.directions.resize(c.directions());
    Matrix out(rows, static_cast<Eigen::Index>(c.rnn_output_width()));
    for (std::size_t dir = 0; dir < c.directions(); ++dir) {
      out.middleCols(static_cast<Eigen::Index>(dir) * d, d) =
          gru_direction_forward(model, l, dir, *layer_in, steps, batch, lc.directions[dir]);
    }
    // Layer 0 reads the fused features directly; later layers own their input.
    if (l > 0) lc.input = std::move(cache.rnn_out);
    cache.rnn_out = std::move(out);
    layer_in = &cache.rnn_out;
  }

  cache.head_pre.noalias() = cache.rnn_out * model.params[param_index::head_w1(c)];
  cache.head_pre.rowwise() += model.params[param_index::head_b1(c)].row(0);
  const Matrix act = cache.head_pre.cwiseMax(0.0);
  Matrix out(rows, 1);
  out.noalias() = act * model.params[param_index::head_w2(c)];
  out.array() += model.params[param_index::head_b2(c)](0, 0);

  res.predictions = Eigen::Map<const Matrix>(out.data(), static_cast<Eigen::Index>(steps), b);
  return res;
}

ForwardResult forward(const Model& model, const Matrix& x) {
  return forward_batch(model, std::span<const Matrix>(&x, 1));
}

// ---------------------------------------------------------------------------
// backward

namespace {

// Accumulates parameter gradients of one GRU direction and returns dL/dx.
Matrix gru_direction_backward(const Model& model, std::size_t layer, std::size_t dir, const Matrix& x,
                              const DirectionCache& cache, const Matrix& d_out, std::size_t steps,
                              std::size_t batch, ParamSet& grads) {
  const auto& c = model.config;
  auto idx = [&](GruParam g) { return param_index::gru(c, layer, dir, g); };
  auto p = [&](GruParam g) -> const Matrix& { return model.params[idx(g)]; };
  const auto d = static_cast<Eigen::Index>(c.fused_dim);
  const auto b = static_cast<Eigen::Index>(batch);
  const auto rows = x.rows();

  Matrix da_r(rows, d), da_z(rows, d), da_n(rows, d), dq(rows, d);
  Matrix dh = Matrix::Zero(b, d);
  Matrix dh_prev(b, d);
  const bool reverse = dir == 1;
  const Matrix ur_t = p(GruParam::Ur).transpose();
  const Matrix uz_t = p(GruParam::Uz).transpose();
  const Matrix un_t = p(GruParam::Un).transpose();

  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const auto r0 = static_cast<Eigen::Index>(t) * b;
    dh += d_out.middleRows(r0, b);

    const auto r = cache.r.middleRows(r0, b).array();
    const auto z = cache.z.middleRows(r0, b).array();
    const auto n = cache.n.middleRows(r0, b).array();
    const auto q = cache.q.middleRows(r0, b).array();
    const auto hp = cache.h_prev.middleRows(r0, b).array();
    const auto g = dh.array();

    auto dan = da_n.middleRows(r0, b).array();
    dan = g * (1.0 - z) * (1.0 - n * n);
    dq.middleRows(r0, b).array() = dan * r;
    da_r.middleRows(r0, b).array() = dan * q * r * (1.0 - r);
    da_z.middleRows(r0, b).array() = g * (hp - n) * z * (1.0 - z);

    dh_prev.array() = g * z;
    dh_prev.noalias() += da_r.middleRows(r0, b) * ur_t;
    dh_prev.noalias() += da_z.middleRows(r0, b) * uz_t;
    dh_prev.noalias() += dq.middleRows(r0, b) * un_t;
    dh.swap(dh_prev);
  }

  const Matrix xt = x.transpose();
  const Matrix ht = cache.h_prev.transpose();
  grads[idx(GruParam::Wr)].noalias() += xt * da_r;
  grads[idx(GruParam::Wz)].noalias() += xt * da_z;
  grads[idx(GruParam::Wn)].noalias() += xt * da_n;
  grads[idx(GruParam::Ur)].noalias() += ht * da_r;
  grads[idx(GruParam::Uz)].noalias() += ht * da_z;
  grads[idx(GruParam::Un)].noalias() += ht * dq;
  grads[idx(GruParam::Br)] += da_r.colwise().sum();
  grads[idx(GruParam::Bz)] += da_z.colwise().sum();
  grads[idx(GruParam::Bn)] += dq.colwise().sum();

  Matrix dx(rows, x.cols());
  dx.noalias() = da_r * p(GruParam::Wr).transpose();
  dx.noalias() += da_z * p(GruParam::Wz).transpose();
  dx.noalias() += da_n * p(GruParam::Wn).transpose();
  return dx;
}

}  // namespace

Gradients backward(const Model& model, const ForwardCache& cache, const Matrix& d_predictions) {
  const auto& c = model.config;
  if (cache.revision != model.revision || !(cache.config == c)) {
    fail(ErrorCode::StaleCache, "forward cache does not belong to this model revision");
  }
  if (static_cast<std::size_t>(d_predictions.rows()) != cache.steps ||
      static_cast<std::size_t>(d_predictions.cols()) != cache.batch) {
    fail(ErrorCode::ShapeMismatch, "backward: gradient shape does not match predictions");
  }
  const auto rows = static_cast<Eigen::Index>(cache.steps * cache.batch);
  const auto d = static_cast<Eigen::Index>(c.fused_dim);

  Gradients g;
  g.params = zeros_like(model.params);
  const Eigen::Map<const Matrix> d_out(d_predictions.data(), rows, 1);

  // head
  const Matrix act = cache.head_pre.cwiseMax(0.0);
  g.params[param_index::head_w2(c)].noalias() = act.transpose() * d_out;
  g.params[param_index::head_b2(c)](0, 0) = d_out.sum();
  Matrix d_pre(rows, static_cast<Eigen::Index>(c.head_hidden));
  d_pre.noalias() = d_out * model.params[param_index::head_w2(c)].transpose();
  d_pre.array() *= (cache.head_pre.array() > 0.0).cast<double>();
  g.params[param_index::head_w1(c)].noalias() = cache.rnn_out.transpose() * d_pre;
  g.params[param_index::head_b1(c)] = d_pre.colwise().sum();
  Matrix d_layer_out(rows, static_cast<Eigen::Index>(c.rnn_output_width()));
  d_layer_out.noalias() = d_pre * model.params[param_index::head_w1(c)].transpose();

  // GRU stack, top to bottom
  for (std::size_t l = c.rnn_layers; l-- > 0;) {
    const Matrix& x = l == 0 ? cache.fused : cache.layers[l].input;
    Matrix dx = Matrix::Zero(rows, x.cols());
    for (std::size_t dir = 0; dir < c.directions(); ++dir) {
      const Matrix d_dir = d_layer_out.middleCols(static_cast<Eigen::Index>(dir) * d, d);
      dx += gru_direction_backward(model, l, dir, x, cache.layers[l].directions[dir], d_dir, cache.steps,
                                   cache.batch, g.params);
    }
    d_layer_out = std::move(dx);
  }

  // fusion
  g.params[param_index::kFusionW].noalias() = cache.input.transpose() * d_layer_out;
  g.params[param_index::kFusionB] = d_layer_out.colwise().sum();
  g.input.noalias() = d_layer_out * model.params[param_index::kFusionW].transpose();
  return g;
}

}  // namespace musep
