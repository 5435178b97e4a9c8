#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "infoseek/rng.hpp"

namespace infoseek::nn {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vec = std::vector<double>;

enum class Activation { Tanh, Identity };

// Row-major (out x in) weight matrix plus bias. 64-bit floats throughout.
struct DenseLayer {
  int out = 0;
  int in = 0;
  Vec weights;  // out * in, row-major
  Vec bias;     // out
  Activation activation = Activation::Tanh;

  double& w(int r, int c) { return weights[static_cast<std::size_t>(r) * in + c]; }
  double w(int r, int c) const { return weights[static_cast<std::size_t>(r) * in + c]; }
};

// Glorot-uniform weights, zero biases.
DenseLayer make_dense(int out, int in, Activation act, Rng& rng);

// Small static dataflow graph over Input / Dense / Concat nodes. Nodes are
// stored in topological order (each node only references earlier nodes).
class Graph {
 public:
  struct Node {
    enum class Kind { Input, Dense, Concat };
    Kind kind;
    std::vector<int> srcs;  // source node ids (Dense: 1, Concat: >=1)
    int layer = -1;         // index into layers() for Dense nodes
    int dim = 0;
    std::string name;       // Input nodes only
  };

  int add_input(const std::string& name, int dim);
  int add_dense(int src, DenseLayer layer);
  int add_concat(const std::vector<int>& srcs);
  void mark_output(const std::string& name, int node);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::map<std::string, int>& outputs() const { return outputs_; }
  int node_dim(int id) const { return nodes_[id].dim; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const;
  // Flattened views in a fixed order (per layer: weights then bias).
  std::vector<std::span<double>> parameter_spans();
  std::vector<std::span<const double>> parameter_spans() const;

 private:
  std::vector<Node> nodes_;
  std::vector<DenseLayer> layers_;
  std::map<std::string, int> outputs_;
};

struct ForwardCache {
  std::vector<Vec> activations;     // per node
  std::vector<Vec> preactivations;  // per node (Dense only; empty otherwise)
};

// Runs the graph on named inputs; returns named outputs. The cache holds
// everything backward() needs.
std::map<std::string, Vec> forward(const Graph& graph,
                                   const std::map<std::string, Vec>& inputs,
                                   ForwardCache& cache);

struct Gradients {
  std::vector<Vec> d_weights;  // per layer, same shape as weights
  std::vector<Vec> d_bias;
  std::map<std::string, Vec> d_inputs;  // per named input

  void init_for(const Graph& graph);
  void zero();
};

// Exact reverse-mode gradients. d_outputs maps output names to upstream
// gradients; missing names are treated as zero. Accumulates into grads.
void backward(const Graph& graph, const ForwardCache& cache,
              const std::map<std::string, Vec>& d_outputs, Gradients& grads);

struct AdamConfig {
  double lr = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Standard Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n_params, AdamConfig config);

  // Rejects non-finite gradients with a diagnostic.
  void step(std::span<double> params, std::span<const double> grads);

  long step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  Vec m_, v_;
  long step_ = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  int n_probes = 0;
};

// Compares backward() against central finite differences (h = 1e-5) on
// n_probes random parameter coordinates, using a random linear functional of
// the outputs as the loss.
GradCheckReport grad_check(Graph& graph, Rng& rng, int n_probes);

// Random small graph (random depth, widths, concat wiring) for gradient
// checking.
Graph random_graph(Rng& rng);

}  // namespace infoseek::nn
