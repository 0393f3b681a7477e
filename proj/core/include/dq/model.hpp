#pragma once

// Watch-time regression network: per-slot id embeddings, affine dense and
// duration encoders, a linear projection, a Swish MLP trunk and an output
// layer. An optional duration tower (Swish MLP over the duration embedding)
// is concatenated with the trunk's last hidden layer before the output layer.
//
// Gradients are computed analytically; training is plain mini-batch SGD with
// optional momentum.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

enum class OutputHead { kLinear, kSigmoid };
enum class LossKind { kMse, kLogLoss };

// Probabilities are clamped to [eps, 1 - eps] before logs and odds.
inline constexpr double kProbEps = 1e-7;

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  // Input shape; normally copied from the dataset schema.
  std::size_t dense_len = 0;
  std::vector<std::int64_t> id_vocab_sizes;

  std::size_t dense_embed_dim = 4;
  std::size_t id_embed_total_dim = 64;  // split across id slots
  std::size_t duration_embed_dim = 4;
  std::size_t projection_out_dim = 64;
  std::vector<std::size_t> mlp_dims{32, 16, 8};
  OutputHead output_head = OutputHead::kSigmoid;
  std::size_t num_heads = 1;
  // Empty disables the tower.
  std::vector<std::size_t> duration_tower;

  // Raw duration is standardized with these before the duration encoder.
  double duration_mean = 0.0;
  double duration_scale = 1.0;

  std::size_t batch_size = 512;
  double learning_rate = 0.05;
  double momentum = 0.0;
  // Id-table rows step with learning_rate * id_lr_scale. A row sees only the
  // few batch entries that carry its id, so its averaged gradient is small.
  double id_lr_scale = 1.0;
  std::size_t epochs = 5;
  bool shuffle = true;
  std::uint64_t seed = 0;

  // Full-size dimensions of the production architecture.
  static ModelConfig production_scale();

  std::size_t projection_in_dim() const {
    return dense_embed_dim + (id_vocab_sizes.empty() ? 0 : id_embed_total_dim) + duration_embed_dim;
  }
  std::vector<std::size_t> id_slot_dims() const;
  std::size_t tower_out_dim() const { return duration_tower.empty() ? 0 : duration_tower.back(); }
  void validate() const;
};

struct NetParams {
  Matrix dense_w, dense_b;
  std::vector<Matrix> id_tables;
  Matrix duration_w, duration_b;
  Matrix proj_w, proj_b;
  std::vector<Matrix> mlp_w, mlp_b;
  std::vector<Matrix> tower_w, tower_b;
  Matrix out_w, out_b;

  // Visits every tensor in a fixed order with a stable name.
  void for_each(const std::function<void(std::string_view, Matrix&)>& fn);
  void for_each(const std::function<void(std::string_view, const Matrix&)>& fn) const;

  std::size_t parameter_count() const;
  bool all_finite() const;
  void set_zero();

  bool operator==(const NetParams& other) const;
};

// All-zero parameters with the shapes implied by the config.
NetParams zero_params(const ModelConfig& c);
// Glorot-uniform weights, zero biases, seeded from c.seed.
NetParams init_params(const ModelConfig& c);

struct Batch {
  Matrix dense;           // B x dense_len
  IndexMatrix ids;        // B x id slots
  Vector duration;        // B, raw seconds
  Matrix labels;          // B x heads
  Matrix weights;         // B x heads, >= 0

  std::size_t size() const { return static_cast<std::size_t>(duration.size()); }
  Batch rows(const std::vector<std::size_t>& index) const;
};

double swish(double x);
double sigmoid(double x);

// B x heads predictions.
Matrix forward(const NetParams& p, const ModelConfig& c, const Batch& b);

double loss_mse(const Vector& pred, const Vector& label, const Vector& weight);
double loss_weighted_logloss(const Vector& pred, const Vector& label, const Vector& weight);

// Sum over heads of the per-head weighted mean loss.
double batch_loss(const NetParams& p, const ModelConfig& c, const Batch& b, LossKind loss);

// Exact gradient of batch_loss with respect to every parameter.
NetParams backward(const NetParams& p, const ModelConfig& c, const Batch& b, LossKind loss);

struct TrainResult {
  NetParams params;
  std::vector<double> epoch_losses;  // mean batch loss per epoch
};

// Trains on `data` (all rows) in mini-batches of c.batch_size.
TrainResult train(const ModelConfig& c, const Batch& data, LossKind loss);
// Same, continuing from existing parameters.
TrainResult train(const ModelConfig& c, const Batch& data, LossKind loss, NetParams start);

}  // namespace dq
