#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prelu/data.hpp"
#include "prelu/loss.hpp"
#include "prelu/network.hpp"

namespace prelu {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double mu = 1e-4;
  std::uint64_t seed = 0;
  bool sparse = false;
  bool shuffle = true;

  void validate() const;

  /// Flat `key=value` lines; blank lines and `#` comments are skipped.
  /// Unknown keys and malformed values raise ParseError.
  static TrainConfig parse(const std::string& text);
  std::string to_string() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::optional<double> train_accuracy;  // fraction in [0, 1], when an oracle is given
  double seconds = 0.0;
};

struct TrainResult {
  Network net;
  TrainReport report;
};

/// Mini-batch Adam on the combined prescription/prediction loss. Shuffling
/// and batching are driven by cfg.seed only. `oracle_optimal`, if given,
/// holds the optimal treatment of every training sample.
TrainResult train(Network net, const ObservationalData& data, const TrainConfig& cfg,
                  const std::vector<int>* oracle_optimal = nullptr);

/// Keeps only the largest-magnitude incoming weight of every hidden neuron
/// (first index wins ties). Biases and the output layer are untouched.
Network magnitude_mask(Network net);
void apply_magnitude_mask(Network& net);

/// Activation counts per hidden neuron over the columns of X.
struct ActivationIncidence {
  std::vector<std::vector<Index>> active;  // [layer][neuron]
  Index samples = 0;
};
ActivationIncidence activation_incidence(const Network& net, const Matrix& X);

/// Removes hidden neurons that never fire on X and turns neurons that always
/// fire into linear passthroughs; a layer left entirely linear is folded into
/// the next one. The result matches `net` on every column of X.
Network prune_neurons(const Network& net, const Matrix& X);
Network prune_neurons(const Network& net, const ObservationalData& data);

}  // namespace prelu
