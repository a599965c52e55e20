#pragma once

// Many-to-one sequence classifiers (RNN / LSTM / GRU cell + linear softmax
// readout on the final hidden state) trained by full backpropagation through
// time with hand-derived gradients.

#include <cstdint>
#include <vector>

#include "lyap/cells.hpp"
#include "lyap/datasets.hpp"
#include "lyap/serialize.hpp"

namespace lyap {

struct SequenceModel {
  Cell cell;
  Matrix out_w;  // classes x hidden
  Vector out_b;  // classes

  std::size_t num_classes() const { return out_b.size(); }
  friend bool operator==(const SequenceModel&, const SequenceModel&) = default;
};

// Readout ~ U(-1/sqrt(H), 1/sqrt(H)) drawn from the cell seed.
SequenceModel init_sequence_model(const CellSpec& spec, std::size_t num_classes);

void save_model(const std::filesystem::path& base, const SequenceModel& model,
                json meta = json::object());
SequenceModel load_model(const std::filesystem::path& base);

// Either dense real-valued sequences or token sequences presented one-hot.
struct ClassificationSet {
  std::size_t input_size = 0;
  std::size_t num_classes = 0;
  std::vector<Matrix> dense;
  std::vector<std::vector<int>> tokens;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Matrix inputs(std::size_t i) const;
};

ClassificationSet images_subset(const RowImageDataset& ds, std::span<const std::size_t> indices);
// Token windows: the first seq_len-1 tokens are the input, the last is the label.
ClassificationSet char_subset(const CharDataset& ds, std::span<const std::size_t> indices);

enum class Optimizer { SGD, Adam };

struct SupervisedTrainConfig {
  std::size_t epochs = 3;
  double learning_rate = 2e-3;
  std::size_t batch_size = 32;
  Optimizer optimizer = Optimizer::Adam;
  double gradient_clip = 1.0;  // global L2 norm
  std::vector<double> checkpoint_fractions{0.0, 1.0};
  std::uint64_t seed = 0;

  void validate() const;
};

// Gradients in the order cell.params(), then out_w, out_b.
struct ModelGradient {
  std::vector<Matrix> tensors;
  double loss = 0.0;
};

// Cross-entropy of one example and its gradient (accumulated into grad when
// non-null). Supports VanillaRNN, LSTM and GRU.
double example_loss_and_gradient(const SequenceModel& model, const Matrix& inputs, int label,
                                 ModelGradient* grad);

double eval_loss(const SequenceModel& model, const ClassificationSet& data);

// Forward-only class probabilities for one sequence.
Vector predict_proba(const SequenceModel& model, const Matrix& inputs);

struct ModelCheckpoint {
  double fraction = 0.0;
  SequenceModel model;
  double validation_loss = 0.0;
};

struct SupervisedResult {
  SequenceModel model;
  std::vector<double> validation_curve;  // after each epoch
  double best_validation_loss = 0.0;
  std::vector<ModelCheckpoint> checkpoints;
  bool failed = false;
};

SupervisedResult bptt_train(const SequenceModel& initial, const ClassificationSet& train,
                            const ClassificationSet& validation,
                            const SupervisedTrainConfig& config);

// Parameters in gradient order, and the inverse.
std::vector<Matrix> flatten_model(const SequenceModel& model);
SequenceModel unflatten_model(const CellSpec& spec, const std::vector<Matrix>& tensors);

}  // namespace lyap
