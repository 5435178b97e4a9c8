#include "infoseek/nn.hpp"

#include <cmath>

namespace infoseek::nn {

DenseLayer make_dense(int out, int in, Activation act, Rng& rng) {
  DenseLayer l;
  l.out = out;
  l.in = in;
  l.activation = act;
  l.weights.resize(static_cast<std::size_t>(out) * in);
  l.bias.assign(out, 0.0);
  double bound = std::sqrt(6.0 / (in + out));
  for (double& w : l.weights) w = (2.0 * rng.uniform() - 1.0) * bound;
  return l;
}

int Graph::add_input(const std::string& name, int dim) {
  nodes_.push_back({Node::Kind::Input, {}, -1, dim, name});
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::add_dense(int src, DenseLayer layer) {
  if (layer.in != nodes_[src].dim)
    throw std::invalid_argument("dense layer input dim " + std::to_string(layer.in) +
                                " != source dim " + std::to_string(nodes_[src].dim));
  int dim = layer.out;
  layers_.push_back(std::move(layer));
  nodes_.push_back({Node::Kind::Dense, {src}, static_cast<int>(layers_.size()) - 1, dim, ""});
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::add_concat(const std::vector<int>& srcs) {
  int dim = 0;
  for (int s : srcs) dim += nodes_[s].dim;
  nodes_.push_back({Node::Kind::Concat, srcs, -1, dim, ""});
  return static_cast<int>(nodes_.size()) - 1;
}

void Graph::mark_output(const std::string& name, int node) { outputs_[name] = node; }

std::size_t Graph::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<std::span<double>> Graph::parameter_spans() {
  std::vector<std::span<double>> spans;
  for (auto& l : layers_) {
    spans.emplace_back(l.weights);
    spans.emplace_back(l.bias);
  }
  return spans;
}

std::vector<std::span<const double>> Graph::parameter_spans() const {
  std::vector<std::span<const double>> spans;
  for (const auto& l : layers_) {
    spans.emplace_back(l.weights);
    spans.emplace_back(l.bias);
  }
  return spans;
}

std::map<std::string, Vec> forward(const Graph& graph,
                                   const std::map<std::string, Vec>& inputs,
                                   ForwardCache& cache) {
  const auto& nodes = graph.nodes();
  cache.activations.assign(nodes.size(), {});
  cache.preactivations.assign(nodes.size(), {});

  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const auto& n = nodes[id];
    switch (n.kind) {
      case Graph::Node::Kind::Input: {
        auto it = inputs.find(n.name);
        if (it == inputs.end())
          throw std::invalid_argument("missing graph input '" + n.name + "'");
        if (static_cast<int>(it->second.size()) != n.dim)
          throw std::invalid_argument("input '" + n.name + "' has dim " +
                                      std::to_string(it->second.size()) + ", expected " +
                                      std::to_string(n.dim));
        cache.activations[id] = it->second;
        break;
      }
      case Graph::Node::Kind::Dense: {
        const auto& l = graph.layers()[n.layer];
        const Vec& x = cache.activations[n.srcs[0]];
        Vec z(l.out);
        for (int r = 0; r < l.out; ++r) {
          double acc = l.bias[r];
          for (int c = 0; c < l.in; ++c) acc += l.w(r, c) * x[c];
          z[r] = acc;
        }
        cache.preactivations[id] = z;
        Vec a = z;
        if (l.activation == Activation::Tanh)
          for (double& v : a) v = std::tanh(v);
        cache.activations[id] = std::move(a);
        break;
      }
      case Graph::Node::Kind::Concat: {
        Vec a;
        a.reserve(n.dim);
        for (int s : n.srcs) {
          const Vec& x = cache.activations[s];
          a.insert(a.end(), x.begin(), x.end());
        }
        cache.activations[id] = std::move(a);
        break;
      }
    }
  }

  std::map<std::string, Vec> out;
  for (const auto& [name, node] : graph.outputs()) out[name] = cache.activations[node];
  return out;
}

void Gradients::init_for(const Graph& graph) {
  d_weights.clear();
  d_bias.clear();
  for (const auto& l : graph.layers()) {
    d_weights.emplace_back(l.weights.size(), 0.0);
    d_bias.emplace_back(l.bias.size(), 0.0);
  }
  d_inputs.clear();
  for (const auto& n : graph.nodes())
    if (n.kind == Graph::Node::Kind::Input) d_inputs[n.name] = Vec(n.dim, 0.0);
}

void Gradients::zero() {
  for (auto& g : d_weights) std::fill(g.begin(), g.end(), 0.0);
  for (auto& g : d_bias) std::fill(g.begin(), g.end(), 0.0);
  for (auto& [_, g] : d_inputs) std::fill(g.begin(), g.end(), 0.0);
}

void backward(const Graph& graph, const ForwardCache& cache,
              const std::map<std::string, Vec>& d_outputs, Gradients& grads) {
  const auto& nodes = graph.nodes();
  if (cache.activations.size() != nodes.size())
    throw std::invalid_argument("forward cache does not match graph");

  std::vector<Vec> d_act(nodes.size());
  for (std::size_t id = 0; id < nodes.size(); ++id)
    d_act[id].assign(nodes[id].dim, 0.0);

  for (const auto& [name, g] : d_outputs) {
    auto it = graph.outputs().find(name);
    if (it == graph.outputs().end())
      throw std::invalid_argument("unknown graph output '" + name + "'");
    if (g.size() != d_act[it->second].size())
      throw std::invalid_argument("output gradient '" + name + "' has wrong dim");
    for (std::size_t i = 0; i < g.size(); ++i) d_act[it->second][i] += g[i];
  }

  for (int id = static_cast<int>(nodes.size()) - 1; id >= 0; --id) {
    const auto& n = nodes[id];
    const Vec& dy = d_act[id];
    switch (n.kind) {
      case Graph::Node::Kind::Input: {
        Vec& di = grads.d_inputs[n.name];
        for (int i = 0; i < n.dim; ++i) di[i] += dy[i];
        break;
      }
      case Graph::Node::Kind::Dense: {
        const auto& l = graph.layers()[n.layer];
        const Vec& x = cache.activations[n.srcs[0]];
        const Vec& a = cache.activations[id];
        Vec dz(l.out);
        for (int r = 0; r < l.out; ++r) {
          double d = dy[r];
          if (l.activation == Activation::Tanh) d *= 1.0 - a[r] * a[r];
          dz[r] = d;
        }
        Vec& dW = grads.d_weights[n.layer];
        Vec& db = grads.d_bias[n.layer];
        Vec& dx = d_act[n.srcs[0]];
        for (int r = 0; r < l.out; ++r) {
          db[r] += dz[r];
          for (int c = 0; c < l.in; ++c) {
            dW[static_cast<std::size_t>(r) * l.in + c] += dz[r] * x[c];
            dx[c] += dz[r] * l.w(r, c);
          }
        }
        break;
      }
      case Graph::Node::Kind::Concat: {
        int off = 0;
        for (int s : n.srcs) {
          Vec& dx = d_act[s];
          for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[off + static_cast<int>(i)];
          off += static_cast<int>(dx.size());
        }
        break;
      }
    }
  }
}

Adam::Adam(std::size_t n_params, AdamConfig config)
    : config_(config), m_(n_params, 0.0), v_(n_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("Adam: parameter/gradient size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw NumericalError("non-finite gradient at parameter index " + std::to_string(i));

  ++step_;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
    double mhat = m_[i] / bc1;
    double vhat = v_[i] / bc2;
    params[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.epsilon);
  }
}

Graph random_graph(Rng& rng) {
  Graph g;
  int in_dim = static_cast<int>(rng.uniform_int(1, 6));
  int x = g.add_input("x", in_dim);
  int depth = static_cast<int>(rng.uniform_int(1, 3));
  int prev = x;
  std::vector<int> taps = {x};
  for (int d = 0; d < depth; ++d) {
    int width = static_cast<int>(rng.uniform_int(1, 8));
    Activation act = rng.uniform() < 0.7 ? Activation::Tanh : Activation::Identity;
    prev = g.add_dense(prev, make_dense(width, g.node_dim(prev), act, rng));
    taps.push_back(prev);
  }
  int head_src = prev;
  if (taps.size() > 1 && rng.uniform() < 0.5)
    head_src = g.add_concat({prev, taps[static_cast<std::size_t>(
                                       rng.uniform_int(0, static_cast<long long>(taps.size()) - 2))]});
  int head_dim = static_cast<int>(rng.uniform_int(1, 3));
  int y = g.add_dense(head_src, make_dense(head_dim, g.node_dim(head_src), Activation::Identity, rng));
  g.mark_output("y", y);
  return g;
}

GradCheckReport grad_check(Graph& graph, Rng& rng, int n_probes) {
  GradCheckReport report;
  if (n_probes <= 0) return report;

  std::map<std::string, Vec> inputs;
  for (const auto& n : graph.nodes()) {
    if (n.kind == Graph::Node::Kind::Input) {
      Vec x(n.dim);
      for (double& v : x) v = rng.normal(0.0, 1.0);
      inputs[n.name] = x;
    }
  }
  std::map<std::string, Vec> directions;
  for (const auto& [name, node] : graph.outputs()) {
    Vec d(graph.node_dim(node));
    for (double& v : d) v = rng.normal(0.0, 1.0);
    directions[name] = d;
  }

  auto loss = [&]() {
    ForwardCache cache;
    auto out = forward(graph, inputs, cache);
    double acc = 0.0;
    for (const auto& [name, y] : out) {
      const Vec& d = directions[name];
      for (std::size_t i = 0; i < y.size(); ++i) acc += d[i] * y[i];
    }
    return acc;
  };

  ForwardCache cache;
  forward(graph, inputs, cache);
  Gradients grads;
  grads.init_for(graph);
  backward(graph, cache, directions, grads);

  auto spans = graph.parameter_spans();
  std::vector<std::span<double>> grad_spans;
  for (std::size_t l = 0; l < graph.layers().size(); ++l) {
    grad_spans.emplace_back(grads.d_weights[l]);
    grad_spans.emplace_back(grads.d_bias[l]);
  }

  std::size_t total = graph.parameter_count();
  const double h = 1e-5;
  for (int probe = 0; probe < n_probes; ++probe) {
    std::size_t flat = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(total) - 1));
    std::size_t si = 0;
    while (flat >= spans[si].size()) flat -= spans[si++].size();
    double& p = spans[si][flat];
    double analytic = grad_spans[si][flat];

    double saved = p;
    p = saved + h;
    double fp = loss();
    p = saved - h;
    double fm = loss();
    p = saved;
    double numeric = (fp - fm) / (2.0 * h);

    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    double rel = std::abs(analytic - numeric) / denom;
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.n_probes;
  }
  return report;
}

}  // namespace infoseek::nn
