#include "prelu/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "prelu/adam.hpp"

namespace prelu {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, int line) {
  T out{};
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("config line " + std::to_string(line) + ": bad value '" + value +
                     "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value, int line) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ParseError("config line " + std::to_string(line) + ": expected true/false for " + key);
}

void erase_row(Layer& layer, Index j) {
  const Index rows = layer.W.rows();
  Matrix W(rows - 1, layer.W.cols());
  Vector b(rows - 1);
  Eigen::Array<bool, Eigen::Dynamic, 1> pass(rows - 1);
  for (Index i = 0, k = 0; i < rows; ++i) {
    if (i == j) continue;
    W.row(k) = layer.W.row(i);
    b(k) = layer.b(i);
    pass(k) = !layer.is_relu(i);
    ++k;
  }
  layer.W = std::move(W);
  layer.b = std::move(b);
  layer.passthrough = std::move(pass);
}

void erase_col(Layer& layer, Index j) {
  Matrix W(layer.W.rows(), layer.W.cols() - 1);
  W << layer.W.leftCols(j), layer.W.rightCols(layer.W.cols() - j - 1);
  layer.W = std::move(W);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ContractError("epochs must be >= 1");
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ContractError("learning rate must be positive");
  }
  LossConfig{mu}.validate();
}

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line) + ": expected key=value");
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key == "epochs") {
      cfg.epochs = parse_number<int>(key, value, line);
    } else if (key == "batch_size") {
      cfg.batch_size = parse_number<int>(key, value, line);
    } else if (key == "lr") {
      cfg.learning_rate = parse_number<double>(key, value, line);
    } else if (key == "mu") {
      cfg.mu = parse_number<double>(key, value, line);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value, line);
    } else if (key == "sparse") {
      cfg.sparse = parse_bool(key, value, line);
    } else if (key == "shuffle") {
      cfg.shuffle = parse_bool(key, value, line);
    } else {
      throw ParseError("config line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::string TrainConfig::to_string() const {
  std::ostringstream out;
  out.precision(17);
  out << "epochs=" << epochs << "\nbatch_size=" << batch_size << "\nlr=" << learning_rate
      << "\nmu=" << mu << "\nseed=" << seed << "\nsparse=" << (sparse ? "true" : "false")
      << "\nshuffle=" << (shuffle ? "true" : "false") << "\n";
  return out.str();
}

void apply_magnitude_mask(Network& net) {
  for (auto& layer : net.hidden()) {
    for (Index i = 0; i < layer.W.rows(); ++i) {
      Index keep = 0;
      for (Index j = 1; j < layer.W.cols(); ++j) {
        if (std::abs(layer.W(i, j)) > std::abs(layer.W(i, keep))) keep = j;
      }
      const double w = layer.W(i, keep);
      layer.W.row(i).setZero();
      layer.W(i, keep) = w;
    }
  }
}

Network magnitude_mask(Network net) {
  if (net.num_hidden_layers() < 1) throw ContractError("magnitude_mask: no hidden layer");
  apply_magnitude_mask(net);
  return net;
}

TrainResult train(Network net, const ObservationalData& data, const TrainConfig& cfg,
                  const std::vector<int>* oracle_optimal) {
  cfg.validate();
  if (data.empty()) throw ContractError("train: empty dataset");
  if (data.dim() != net.input_dim()) {
    throw ShapeError("train: data has " + std::to_string(data.dim()) +
                     " features, network expects " + std::to_string(net.input_dim()));
  }
  data.validate(net.num_treatments());
  for (Index t = 0; t < data.size(); ++t) {
    for (std::size_t r = 0; r < net.rules().size(); ++r) {
      const auto& rule = net.rules()[r];
      if (rule.indicator(data.X.col(t)) && !rule.allows(data.p[static_cast<std::size_t>(t)])) {
        throw ContractError("train: sample " + std::to_string(t) + " violates rule " +
                            std::to_string(r) + "; filter violating samples first");
      }
    }
  }
  if (oracle_optimal && static_cast<Index>(oracle_optimal->size()) != data.size()) {
    throw ContractError("train: oracle length does not match data");
  }

  const auto started = std::chrono::steady_clock::now();
  const LossConfig loss_cfg{cfg.mu};
  AdamState adam = AdamState::for_network(net, cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed);
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});

  TrainReport report;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      const std::size_t len = std::min(batch, order.size() - start);
      const std::span<const Index> rows(order.data() + start, len);
      const LossResult lr = loss_and_grad(net, data, rows, loss_cfg);
      if (!std::isfinite(lr.loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(b));
      }
      epoch_loss += lr.loss;
      const Gradients grads = backward(net, lr.cache, lr.output_grads);
      try {
        adam_step(net, grads, adam);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(b) + ")");
      }
      if (cfg.sparse) apply_magnitude_mask(net);
    }
    report.epoch_loss.push_back(epoch_loss);
  }

  if (oracle_optimal) {
    const auto chosen = prescribe_all(net, data.X);
    std::size_t hits = 0;
    for (std::size_t t = 0; t < chosen.size(); ++t) hits += chosen[t] == (*oracle_optimal)[t];
    report.train_accuracy = static_cast<double>(hits) / static_cast<double>(chosen.size());
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(net), std::move(report)};
}

ActivationIncidence activation_incidence(const Network& net, const Matrix& X) {
  ActivationIncidence inc;
  inc.samples = X.cols();
  for (const auto& layer : net.hidden()) inc.active.emplace_back(layer.outputs(), 0);
  constexpr Index kChunk = 4096;
  for (Index start = 0; start < X.cols(); start += kChunk) {
    const Index len = std::min(kChunk, X.cols() - start);
    const auto cache = forward_batch(net, X.middleCols(start, len));
    for (Index l = 0; l < net.num_hidden_layers(); ++l) {
      auto& counts = inc.active[static_cast<std::size_t>(l)];
      for (Index j = 0; j < cache.pre[l].rows(); ++j) {
        counts[static_cast<std::size_t>(j)] += (cache.pre[l].row(j).array() > 0.0).count();
      }
    }
  }
  return inc;
}

Network prune_neurons(const Network& net, const Matrix& X) {
  if (X.cols() == 0) throw ContractError("prune_neurons: no calibration data");
  const ActivationIncidence inc = activation_incidence(net, X);

  std::vector<Layer> hidden = net.hidden();
  Layer output = net.output();
  auto next_of = [&](std::size_t l) -> Layer& { return l + 1 < hidden.size() ? hidden[l + 1] : output; };

  // Walk layers back to front so erasing one does not shift the pending indices.
  for (std::size_t l = hidden.size(); l-- > 0;) {
    Layer& layer = hidden[l];
    if (layer.passthrough.size() == 0) layer.passthrough.setConstant(layer.outputs(), false);
    const auto& counts = inc.active[l];
    for (Index j = layer.outputs() - 1; j >= 0; --j) {
      if (!layer.is_relu(j)) continue;
      const Index c = counts[static_cast<std::size_t>(j)];
      if (c == inc.samples) {
        layer.passthrough(j) = true;
      } else if (c == 0) {
        if (layer.outputs() == 1) {
          // Whole layer dead: everything downstream sees a constant input.
          Layer& next = next_of(l);
          next.W = Matrix::Zero(next.W.rows(), layer.inputs());
          hidden.erase(hidden.begin() + static_cast<std::ptrdiff_t>(l));
          break;
        }
        erase_row(layer, j);
        erase_col(next_of(l), j);
      }
    }
  }

  // Fold fully linear layers into their successor.
  for (std::size_t l = hidden.size(); l-- > 0;) {
    if (!hidden[l].passthrough.all()) continue;
    Layer& next = next_of(l);
    next.b = next.W * hidden[l].b + next.b;
    next.W = next.W * hidden[l].W;
    hidden.erase(hidden.begin() + static_cast<std::ptrdiff_t>(l));
  }
  for (auto& layer : hidden) {
    if (!layer.passthrough.any()) layer.passthrough.resize(0);
  }

  Network pruned(net.input_dim(), std::move(hidden), std::move(output));
  for (const auto& rule : net.rules()) pruned.add_rule(rule);
  return pruned;
}

Network prune_neurons(const Network& net, const ObservationalData& data) {
  return prune_neurons(net, data.X);
}

}  // namespace prelu
