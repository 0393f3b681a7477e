#include "dq/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "dq/util.hpp"

namespace dq {

ModelConfig ModelConfig::production_scale() {
  ModelConfig c;
  c.dense_embed_dim = 32;
  c.id_embed_total_dim = 512;
  c.duration_embed_dim = 32;
  c.projection_out_dim = 512;
  c.mlp_dims = {256, 128, 64};
  c.batch_size = 512;
  return c;
}

std::vector<std::size_t> ModelConfig::id_slot_dims() const {
  const std::size_t slots = id_vocab_sizes.size();
  std::vector<std::size_t> dims(slots, 0);
  if (slots == 0) return dims;
  for (std::size_t s = 0; s < slots; ++s) {
    dims[s] = id_embed_total_dim / slots + (s < id_embed_total_dim % slots ? 1 : 0);
  }
  return dims;
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("ModelConfig: " + what);
  };
  require(dense_embed_dim >= 1, "dense_embed_dim must be >= 1");
  require(duration_embed_dim >= 1, "duration_embed_dim must be >= 1");
  require(projection_out_dim >= 1, "projection_out_dim must be >= 1");
  require(!mlp_dims.empty(), "mlp_dims must not be empty");
  for (auto d : mlp_dims) require(d >= 1, "mlp dims must be >= 1");
  for (auto d : duration_tower) require(d >= 1, "duration tower dims must be >= 1");
  require(num_heads >= 1, "num_heads must be >= 1");
  require(id_vocab_sizes.empty() || id_embed_total_dim >= id_vocab_sizes.size(),
          "id_embed_total_dim must give every id slot at least one dimension");
  for (auto v : id_vocab_sizes) require(v >= 1, "id vocabulary sizes must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(duration_scale > 0.0, "duration_scale must be > 0");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(id_lr_scale > 0.0, "id_lr_scale must be > 0");
}

// ---------------------------------------------------------------------------
// Parameters

void NetParams::for_each(const std::function<void(std::string_view, Matrix&)>& fn) {
  fn("dense_w", dense_w);
  fn("dense_b", dense_b);
  for (std::size_t s = 0; s < id_tables.size(); ++s) fn("id_table_" + std::to_string(s), id_tables[s]);
  fn("duration_w", duration_w);
  fn("duration_b", duration_b);
  fn("proj_w", proj_w);
  fn("proj_b", proj_b);
  for (std::size_t l = 0; l < mlp_w.size(); ++l) {
    fn("mlp_w_" + std::to_string(l), mlp_w[l]);
    fn("mlp_b_" + std::to_string(l), mlp_b[l]);
  }
  for (std::size_t l = 0; l < tower_w.size(); ++l) {
    fn("tower_w_" + std::to_string(l), tower_w[l]);
    fn("tower_b_" + std::to_string(l), tower_b[l]);
  }
  fn("out_w", out_w);
  fn("out_b", out_b);
}

void NetParams::for_each(const std::function<void(std::string_view, const Matrix&)>& fn) const {
  const_cast<NetParams*>(this)->for_each(
      [&fn](std::string_view name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&n](std::string_view, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool NetParams::all_finite() const {
  bool ok = true;
  for_each([&ok](std::string_view, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

void NetParams::set_zero() {
  for_each([](std::string_view, Matrix& m) { m.setZero(); });
}

bool NetParams::operator==(const NetParams& other) const {
  std::vector<const Matrix*> mine, theirs;
  for_each([&mine](std::string_view, const Matrix& m) { mine.push_back(&m); });
  other.for_each([&theirs](std::string_view, const Matrix& m) { theirs.push_back(&m); });
  if (mine.size() != theirs.size()) return false;
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->rows() != theirs[i]->rows() || mine[i]->cols() != theirs[i]->cols()) return false;
    if (*mine[i] != *theirs[i]) return false;
  }
  return true;
}

NetParams zero_params(const ModelConfig& c) {
  c.validate();
  const auto z = [](std::size_t r, std::size_t k) {
    return Matrix::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
  };
  NetParams p;
  p.dense_w = z(c.dense_len, c.dense_embed_dim);
  p.dense_b = z(1, c.dense_embed_dim);
  const auto slot_dims = c.id_slot_dims();
  for (std::size_t s = 0; s < slot_dims.size(); ++s) {
    p.id_tables.push_back(z(static_cast<std::size_t>(c.id_vocab_sizes[s]), slot_dims[s]));
  }
  p.duration_w = z(1, c.duration_embed_dim);
  p.duration_b = z(1, c.duration_embed_dim);
  p.proj_w = z(c.projection_in_dim(), c.projection_out_dim);
  p.proj_b = z(1, c.projection_out_dim);
  std::size_t in = c.projection_out_dim;
  for (auto d : c.mlp_dims) {
    p.mlp_w.push_back(z(in, d));
    p.mlp_b.push_back(z(1, d));
    in = d;
  }
  in = c.duration_embed_dim;
  for (auto d : c.duration_tower) {
    p.tower_w.push_back(z(in, d));
    p.tower_b.push_back(z(1, d));
    in = d;
  }
  p.out_w = z(c.mlp_dims.back() + c.tower_out_dim(), c.num_heads);
  p.out_b = z(1, c.num_heads);
  return p;
}

NetParams init_params(const ModelConfig& c) {
  NetParams p = zero_params(c);
  std::mt19937_64 rng(derive_seed(c.seed, 0x1417));
  auto glorot = [&rng](Matrix& w, double fan_in, double fan_out) {
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-s, s);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
  };
  auto layer = [&glorot](Matrix& w) {
    glorot(w, static_cast<double>(w.rows()), static_cast<double>(w.cols()));
  };
  layer(p.dense_w);
  // An embedding row is looked up alone, so its fan-in is one.
  for (auto& t : p.id_tables) glorot(t, 1.0, static_cast<double>(t.cols()));
  layer(p.duration_w);
  layer(p.proj_w);
  for (auto& w : p.mlp_w) layer(w);
  for (auto& w : p.tower_w) layer(w);
  layer(p.out_w);
  return p;
}

// ---------------------------------------------------------------------------
// Batches

Batch Batch::rows(const std::vector<std::size_t>& index) const {
  const auto n = static_cast<Eigen::Index>(index.size());
  Batch out;
  out.dense.resize(n, dense.cols());
  out.ids.resize(n, ids.cols());
  out.duration.resize(n);
  out.labels.resize(n, labels.cols());
  out.weights.resize(n, weights.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto src = static_cast<Eigen::Index>(index[static_cast<std::size_t>(r)]);
    out.dense.row(r) = dense.row(src);
    out.ids.row(r) = ids.row(src);
    out.duration(r) = duration(src);
    if (labels.cols() > 0) out.labels.row(r) = labels.row(src);
    if (weights.cols() > 0) out.weights.row(r) = weights.row(src);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double swish(double x) { return x * sigmoid(x); }

namespace {

double swish_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

Matrix apply_swish(const Matrix& z) { return z.unaryExpr([](double v) { return swish(v); }); }

void add_bias(Matrix& m, const Matrix& bias) { m.rowwise() += bias.row(0); }

struct Activations {
  Vector z;  // standardized duration
  Matrix e_dur;
  Matrix x;
  std::vector<Matrix> pre;  // trunk pre-activations
  std::vector<Matrix> act;  // act[0] = projection output
  std::vector<Matrix> tower_pre;
  std::vector<Matrix> tower_act;  // tower_act[0] = e_dur
  Matrix concat;
  Matrix out;
};

void check_shapes(const NetParams& p, const ModelConfig& c, const Batch& b) {
  const auto n = b.duration.size();
  auto fail = [](const std::string& what) { throw std::invalid_argument("shape mismatch: " + what); };
  if (b.dense.rows() != n || b.ids.rows() != n) fail("batch rows are not aligned");
  if (static_cast<std::size_t>(b.dense.cols()) != c.dense_len) {
    fail("dense width " + std::to_string(b.dense.cols()) + " != " + std::to_string(c.dense_len));
  }
  if (static_cast<std::size_t>(b.ids.cols()) != c.id_vocab_sizes.size()) {
    fail("id slot count " + std::to_string(b.ids.cols()) + " != " +
         std::to_string(c.id_vocab_sizes.size()));
  }
  if (p.id_tables.size() != c.id_vocab_sizes.size() || p.mlp_w.size() != c.mlp_dims.size() ||
      p.tower_w.size() != c.duration_tower.size() ||
      static_cast<std::size_t>(p.out_w.cols()) != c.num_heads ||
      static_cast<std::size_t>(p.proj_w.rows()) != c.projection_in_dim()) {
    fail("parameters do not match the model config");
  }
  for (Eigen::Index s = 0; s < b.ids.cols(); ++s) {
    const auto vocab = p.id_tables[static_cast<std::size_t>(s)].rows();
    for (Eigen::Index r = 0; r < n; ++r) {
      if (b.ids(r, s) < 0 || b.ids(r, s) >= vocab) {
        fail("id " + std::to_string(b.ids(r, s)) + " in slot " + std::to_string(s) +
             " outside vocabulary " + std::to_string(vocab));
      }
    }
  }
}

Activations run_forward(const NetParams& p, const ModelConfig& c, const Batch& b) {
  check_shapes(p, c, b);
  const auto n = b.duration.size();
  Activations a;
  a.z = (b.duration.array() - c.duration_mean) / c.duration_scale;

  a.x.resize(n, static_cast<Eigen::Index>(c.projection_in_dim()));
  Eigen::Index col = 0;
  {
    Matrix e = b.dense * p.dense_w;
    add_bias(e, p.dense_b);
    a.x.middleCols(col, e.cols()) = e;
    col += e.cols();
  }
  for (std::size_t s = 0; s < p.id_tables.size(); ++s) {
    const Matrix& table = p.id_tables[s];
    for (Eigen::Index r = 0; r < n; ++r) {
      a.x.block(r, col, 1, table.cols()) = table.row(b.ids(r, static_cast<Eigen::Index>(s)));
    }
    col += table.cols();
  }
  a.e_dur = a.z * p.duration_w;
  add_bias(a.e_dur, p.duration_b);
  a.x.middleCols(col, a.e_dur.cols()) = a.e_dur;

  Matrix proj = a.x * p.proj_w;
  add_bias(proj, p.proj_b);
  a.act.push_back(std::move(proj));
  const std::size_t layers = p.mlp_w.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = a.act.back() * p.mlp_w[l];
    add_bias(z, p.mlp_b[l]);
    // The last trunk layer is linear; the hidden layers use Swish.
    a.act.push_back(l + 1 < layers ? apply_swish(z) : z);
    a.pre.push_back(std::move(z));
  }

  a.tower_act.push_back(a.e_dur);
  for (std::size_t l = 0; l < p.tower_w.size(); ++l) {
    Matrix z = a.tower_act.back() * p.tower_w[l];
    add_bias(z, p.tower_b[l]);
    a.tower_act.push_back(apply_swish(z));
    a.tower_pre.push_back(std::move(z));
  }

  const Matrix& h = a.act.back();
  if (p.tower_w.empty()) {
    a.concat = h;
  } else {
    const Matrix& t = a.tower_act.back();
    a.concat.resize(n, h.cols() + t.cols());
    a.concat << h, t;
  }
  a.out = a.concat * p.out_w;
  add_bias(a.out, p.out_b);
  if (c.output_head == OutputHead::kSigmoid) {
    a.out = a.out.unaryExpr([](double v) { return sigmoid(v); });
  }
  return a;
}

void check_loss_inputs(const ModelConfig& c, const Batch& b, LossKind loss) {
  const auto n = b.duration.size();
  const auto heads = static_cast<Eigen::Index>(c.num_heads);
  if (b.labels.rows() != n || b.labels.cols() != heads || b.weights.rows() != n ||
      b.weights.cols() != heads) {
    throw std::invalid_argument("shape mismatch: labels/weights must be B x heads");
  }
  if ((b.weights.array() < 0.0).any()) throw std::invalid_argument("sample weights must be >= 0");
  if (loss == LossKind::kLogLoss) {
    if (c.output_head != OutputHead::kSigmoid) {
      throw std::invalid_argument("log-loss requires a sigmoid output head");
    }
    if (((b.labels.array() != 0.0) && (b.labels.array() != 1.0)).any()) {
      throw std::invalid_argument("log-loss labels must be 0 or 1");
    }
  }
}

double head_loss(const Matrix& out, const Batch& b, LossKind loss, Eigen::Index h) {
  const Vector pred = out.col(h);
  const Vector label = b.labels.col(h);
  const Vector weight = b.weights.col(h);
  if (weight.sum() <= 0.0) return 0.0;
  return loss == LossKind::kMse ? loss_mse(pred, label, weight)
                                : loss_weighted_logloss(pred, label, weight);
}

double total_loss(const Matrix& out, const Batch& b, LossKind loss) {
  double total = 0.0;
  for (Eigen::Index h = 0; h < out.cols(); ++h) total += head_loss(out, b, loss, h);
  return total;
}

// Writes the gradient into g. Dense tensors are overwritten; id tables are
// accumulated into (rows touched by this batch only), so the caller owns
// zeroing them.
double gradient_into(const NetParams& p, const ModelConfig& c, const Batch& b, LossKind loss,
                     NetParams& g) {
  check_loss_inputs(c, b, loss);
  Activations a = run_forward(p, c, b);
  const auto n = b.duration.size();
  const Eigen::Index heads = a.out.cols();

  Matrix d_logit = Matrix::Zero(n, heads);
  for (Eigen::Index h = 0; h < heads; ++h) {
    const double wsum = b.weights.col(h).sum();
    if (wsum <= 0.0) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pr = a.out(i, h);
      const double y = b.labels(i, h);
      const double w = b.weights(i, h) / wsum;
      if (loss == LossKind::kMse) {
        const double d_pred = 2.0 * w * (pr - y);
        d_logit(i, h) = c.output_head == OutputHead::kSigmoid ? d_pred * pr * (1.0 - pr) : d_pred;
      } else {
        // Clamped region has zero slope.
        d_logit(i, h) = (pr > kProbEps && pr < 1.0 - kProbEps) ? w * (pr - y) : 0.0;
      }
    }
  }

  g.out_w.noalias() = a.concat.transpose() * d_logit;
  g.out_b = d_logit.colwise().sum();
  const Matrix d_concat = d_logit * p.out_w.transpose();
  const Eigen::Index hdim = a.act.back().cols();

  Matrix d_act = d_concat.leftCols(hdim);
  for (std::size_t l = p.mlp_w.size(); l-- > 0;) {
    Matrix d_pre = (l + 1 < p.mlp_w.size())
                       ? Matrix(d_act.cwiseProduct(a.pre[l].unaryExpr([](double v) { return swish_grad(v); })))
                       : d_act;
    g.mlp_w[l].noalias() = a.act[l].transpose() * d_pre;
    g.mlp_b[l] = d_pre.colwise().sum();
    d_act = d_pre * p.mlp_w[l].transpose();
  }
  // d_act is now the gradient at the projection output.
  g.proj_w.noalias() = a.x.transpose() * d_act;
  g.proj_b = d_act.colwise().sum();
  const Matrix d_x = d_act * p.proj_w.transpose();

  Matrix d_dur = d_x.rightCols(a.e_dur.cols());
  if (!p.tower_w.empty()) {
    Matrix d_t = d_concat.rightCols(d_concat.cols() - hdim);
    for (std::size_t l = p.tower_w.size(); l-- > 0;) {
      Matrix d_pre = d_t.cwiseProduct(a.tower_pre[l].unaryExpr([](double v) { return swish_grad(v); }));
      g.tower_w[l].noalias() = a.tower_act[l].transpose() * d_pre;
      g.tower_b[l] = d_pre.colwise().sum();
      d_t = d_pre * p.tower_w[l].transpose();
    }
    d_dur += d_t;
  }
  g.duration_w = a.z.transpose() * d_dur;
  g.duration_b = d_dur.colwise().sum();

  Eigen::Index col = 0;
  const Matrix d_dense = d_x.leftCols(p.dense_w.cols());
  g.dense_w.noalias() = b.dense.transpose() * d_dense;
  g.dense_b = d_dense.colwise().sum();
  col += p.dense_w.cols();
  for (std::size_t s = 0; s < p.id_tables.size(); ++s) {
    const Eigen::Index dim = p.id_tables[s].cols();
    for (Eigen::Index r = 0; r < n; ++r) {
      g.id_tables[s].row(b.ids(r, static_cast<Eigen::Index>(s))) += d_x.block(r, col, 1, dim);
    }
    col += dim;
  }
  return total_loss(a.out, b, loss);
}

}  // namespace

Matrix forward(const NetParams& p, const ModelConfig& c, const Batch& b) {
  return run_forward(p, c, b).out;
}

double loss_mse(const Vector& pred, const Vector& label, const Vector& weight) {
  if (pred.size() != label.size() || pred.size() != weight.size()) {
    throw std::invalid_argument("loss_mse: length mismatch");
  }
  const double wsum = weight.sum();
  if (!(wsum > 0.0)) throw std::invalid_argument("loss_mse: weights must have a positive sum");
  return (weight.array() * (pred - label).array().square()).sum() / wsum;
}

double loss_weighted_logloss(const Vector& pred, const Vector& label, const Vector& weight) {
  if (pred.size() != label.size() || pred.size() != weight.size()) {
    throw std::invalid_argument("loss_weighted_logloss: length mismatch");
  }
  const double wsum = weight.sum();
  if (!(wsum > 0.0)) throw std::invalid_argument("loss_weighted_logloss: weights must have a positive sum");
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double y = label(i);
    if (y != 0.0 && y != 1.0) throw std::invalid_argument("loss_weighted_logloss: labels must be 0 or 1");
    const double p = std::clamp(pred(i), kProbEps, 1.0 - kProbEps);
    total -= weight(i) * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return total / wsum;
}

double batch_loss(const NetParams& p, const ModelConfig& c, const Batch& b, LossKind loss) {
  check_loss_inputs(c, b, loss);
  return total_loss(run_forward(p, c, b).out, b, loss);
}

NetParams backward(const NetParams& p, const ModelConfig& c, const Batch& b, LossKind loss) {
  NetParams g = zero_params(c);
  gradient_into(p, c, b, loss, g);
  return g;
}

namespace {

bool is_id_table(const NetParams& p, const Matrix* m) {
  for (const auto& t : p.id_tables) {
    if (&t == m) return true;
  }
  return false;
}

}  // namespace

TrainResult train(const ModelConfig& c, const Batch& data, LossKind loss) {
  return train(c, data, loss, init_params(c));
}

TrainResult train(const ModelConfig& c, const Batch& data, LossKind loss, NetParams start) {
  c.validate();
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("train: no training rows");
  check_loss_inputs(c, data, loss);

  TrainResult result;
  result.params = std::move(start);
  NetParams& p = result.params;
  NetParams g = zero_params(c);
  NetParams velocity;
  const bool use_momentum = c.momentum > 0.0;
  if (use_momentum) velocity = zero_params(c);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> index;
  const double lr = c.learning_rate;
  const double id_lr = c.learning_rate * c.id_lr_scale;

  for (std::size_t epoch = 0; epoch < c.epochs; ++epoch) {
    if (c.shuffle) {
      std::mt19937_64 rng(derive_seed(c.seed, 0x5eed, epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start_row = 0; start_row < n; start_row += c.batch_size) {
      const std::size_t stop = std::min(n, start_row + c.batch_size);
      index.assign(order.begin() + static_cast<std::ptrdiff_t>(start_row),
                   order.begin() + static_cast<std::ptrdiff_t>(stop));
      const Batch b = data.rows(index);
      const double batch_loss_value = gradient_into(p, c, b, loss, g);
      if (!std::isfinite(batch_loss_value)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", batch " << batches
            << " (learning_rate=" << lr << ")";
        throw TrainingError(msg.str());
      }
      loss_sum += batch_loss_value;
      ++batches;

      if (use_momentum) {
        std::vector<Matrix*> pv, gv, vv;
        p.for_each([&pv](std::string_view, Matrix& m) { pv.push_back(&m); });
        g.for_each([&gv](std::string_view, Matrix& m) { gv.push_back(&m); });
        velocity.for_each([&vv](std::string_view, Matrix& m) { vv.push_back(&m); });
        for (std::size_t t = 0; t < pv.size(); ++t) {
          *vv[t] = c.momentum * *vv[t] + *gv[t];
          *pv[t] -= (is_id_table(p, pv[t]) ? id_lr : lr) * *vv[t];
        }
        for (auto& t : g.id_tables) t.setZero();
        continue;
      }

      // Dense tensors: full step. Id tables: only rows this batch touched.
      std::size_t slot = 0;
      std::vector<Matrix*> pv, gv;
      p.for_each([&pv](std::string_view, Matrix& m) { pv.push_back(&m); });
      g.for_each([&gv](std::string_view, Matrix& m) { gv.push_back(&m); });
      for (std::size_t t = 0; t < pv.size(); ++t) {
        const bool is_table = slot < p.id_tables.size() && pv[t] == &p.id_tables[slot];
        if (!is_table) {
          *pv[t] -= lr * *gv[t];
          continue;
        }
        const auto s = static_cast<Eigen::Index>(slot);
        for (Eigen::Index r = 0; r < b.ids.rows(); ++r) {
          const auto row = b.ids(r, s);
          if (gv[t]->row(row).isZero(0.0)) continue;  // already applied (duplicate id)
          pv[t]->row(row) -= id_lr * gv[t]->row(row);
          gv[t]->row(row).setZero();
        }
        ++slot;
      }
    }
    if (!p.all_finite()) {
      std::ostringstream msg;
      msg << "non-finite parameters after epoch " << epoch << " (learning_rate=" << lr << ")";
      throw TrainingError(msg.str());
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(batches));
  }
  return result;
}

}  // namespace dq
