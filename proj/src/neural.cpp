#include "metastim/neural.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "metastim/error.hpp"
#include "metastim/parallel.hpp"
#include "metastim/rng.hpp"

namespace metastim {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

double act_apply(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Sigmoid: return sigmoid(z);
    case Activation::Softplus: return softplus(z);
  }
  throw ConfigError("unknown activation");
}

// Derivative at z; fz is the already-computed activation value.
double act_deriv(Activation a, double z, double fz) {
  switch (a) {
    case Activation::Tanh: return 1.0 - fz * fz;
    case Activation::Sigmoid: return fz * (1.0 - fz);
    case Activation::Softplus: return sigmoid(z);
  }
  throw ConfigError("unknown activation");
}

// rows, cols, bias length for every layer of the given arch
std::vector<std::array<int, 3>> layer_shapes(const ArchSpec& arch) {
  std::vector<std::array<int, 3>> shapes;
  if (arch.kind == NetKind::Ffnn) {
    int prev = arch.input_dim;
    for (int w : arch.hidden) {
      shapes.push_back({w, prev, w});
      prev = w;
    }
    shapes.push_back({arch.output_dim, prev, arch.output_dim});
  } else {
    const int cell = arch.hidden[0];
    shapes.push_back({cell, arch.input_dim, cell});
    shapes.push_back({cell, cell, 0});
    shapes.push_back({arch.output_dim, cell, arch.output_dim});
  }
  return shapes;
}

VecD affine(const Layer& l, std::span<const double> x) {
  VecD z = matvec(l.w, x);
  for (std::size_t i = 0; i < l.b.size(); ++i) z[i] += l.b[i];
  return z;
}

// w^T v
VecD matvec_t(const Mat& w, const VecD& v) {
  VecD out(w.cols, 0.0);
  for (int i = 0; i < w.rows; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    auto r = w.row(i);
    for (int j = 0; j < w.cols; ++j) out[j] += r[j] * vi;
  }
  return out;
}

void add_outer(Mat& gw, const VecD& d, std::span<const double> a) {
  for (int i = 0; i < gw.rows; ++i) {
    const double di = d[i];
    if (di == 0.0) continue;
    auto r = gw.row(i);
    for (int j = 0; j < gw.cols; ++j) r[j] += di * a[j];
  }
}

void add_vec(VecD& gb, const VecD& d) {
  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += d[i];
}

GradSet zero_grads(const AnnModel& model) {
  GradSet g;
  g.reserve(model.layers.size());
  for (const Layer& l : model.layers) {
    Layer z;
    z.w = Mat(l.w.rows, l.w.cols);
    z.b.assign(l.b.size(), 0.0);
    g.push_back(std::move(z));
  }
  return g;
}

void accumulate(GradSet& into, const GradSet& part) {
  for (std::size_t l = 0; l < into.size(); ++l) {
    for (std::size_t i = 0; i < into[l].w.a.size(); ++i) into[l].w.a[i] += part[l].w.a[i];
    for (std::size_t i = 0; i < into[l].b.size(); ++i) into[l].b[i] += part[l].b[i];
  }
}

void scale(GradSet& g, double s) {
  for (Layer& l : g) {
    for (double& v : l.w.a) v *= s;
    for (double& v : l.b) v *= s;
  }
}

struct FfnnCache {
  std::vector<VecD> acts;  // acts[0] = input, acts[l+1] = hidden layer l output
  std::vector<VecD> zs;    // pre-activations of the hidden layers
  VecD yhat;
};

FfnnCache ffnn_forward(const AnnModel& m, std::span<const double> x) {
  const int hidden = int(m.arch.hidden.size());
  FfnnCache c;
  c.acts.resize(hidden + 1);
  c.zs.resize(hidden);
  c.acts[0].assign(x.begin(), x.end());
  for (int l = 0; l < hidden; ++l) {
    c.zs[l] = affine(m.layers[l], c.acts[l]);
    VecD a(c.zs[l].size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = act_apply(m.arch.activations[l], c.zs[l][i]);
    }
    c.acts[l + 1] = std::move(a);
  }
  c.yhat = affine(m.layers[hidden], c.acts[hidden]);
  return c;
}

struct RnnCache {
  std::vector<VecD> states;  // states[0] = h_0 = 0, states[t+1] after token t
  std::vector<VecD> zs;      // zs[t] = pre-activation producing states[t+1]
  VecD yhat;
};

RnnCache rnn_forward(const AnnModel& m, const std::vector<VecD>& seq) {
  const int cell = m.arch.hidden[0];
  RnnCache c;
  c.states.resize(seq.size() + 1);
  c.zs.resize(seq.size());
  c.states[0].assign(cell, 0.0);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    VecD z = affine(m.layers[0], seq[t]);
    const VecD rec = matvec(m.layers[1].w, c.states[t]);
    for (int i = 0; i < cell; ++i) z[i] += rec[i];
    c.zs[t] = z;
    VecD h(cell);
    for (int i = 0; i < cell; ++i) h[i] = act_apply(m.arch.activations[0], z[i]);
    c.states[t + 1] = std::move(h);
  }
  c.yhat = affine(m.layers[2], c.states.back());
  return c;
}

VecD loss_delta(const VecD& yhat, std::span<const double> y, int out_dim) {
  VecD delta(out_dim);
  for (int j = 0; j < out_dim; ++j) delta[j] = 2.0 * (yhat[j] - y[j]) / out_dim;
  return delta;
}

void ffnn_backward(const AnnModel& m, const FfnnCache& c, std::span<const double> y, GradSet& g) {
  const int hidden = int(m.arch.hidden.size());
  const VecD delta = loss_delta(c.yhat, y, m.arch.output_dim);
  add_outer(g[hidden].w, delta, c.acts[hidden]);
  add_vec(g[hidden].b, delta);
  VecD dh = matvec_t(m.layers[hidden].w, delta);
  for (int l = hidden - 1; l >= 0; --l) {
    VecD dz(dh.size());
    for (std::size_t i = 0; i < dz.size(); ++i) {
      dz[i] = dh[i] * act_deriv(m.arch.activations[l], c.zs[l][i], c.acts[l + 1][i]);
    }
    add_outer(g[l].w, dz, c.acts[l]);
    add_vec(g[l].b, dz);
    if (l > 0) dh = matvec_t(m.layers[l].w, dz);
  }
}

void rnn_backward(const AnnModel& m, const RnnCache& c, const std::vector<VecD>& seq,
                  std::span<const double> y, GradSet& g) {
  const VecD delta = loss_delta(c.yhat, y, m.arch.output_dim);
  add_outer(g[2].w, delta, c.states.back());
  add_vec(g[2].b, delta);
  VecD dh = matvec_t(m.layers[2].w, delta);
  for (int t = int(seq.size()) - 1; t >= 0; --t) {
    VecD dz(dh.size());
    for (std::size_t i = 0; i < dz.size(); ++i) {
      dz[i] = dh[i] * act_deriv(m.arch.activations[0], c.zs[t][i], c.states[t + 1][i]);
    }
    add_outer(g[0].w, dz, seq[t]);
    add_vec(g[0].b, dz);
    add_outer(g[1].w, dz, c.states[t]);
    dh = matvec_t(m.layers[1].w, dz);
  }
}

void check_samples(const AnnModel& model, const SampleSet& set) {
  const bool wants_seq = model.arch.kind == NetKind::Rnn;
  if (set.sequential != wants_seq) {
    throw DataError("sample set does not match the model kind");
  }
  if (set.y.rows != set.size() || set.y.cols != model.arch.output_dim) {
    throw DataError("label shape mismatch");
  }
  if (wants_seq) {
    for (int i = 0; i < set.size(); ++i) {
      if (set.seqs[i].empty()) {
        throw DataError("empty token sequence at sample " + std::to_string(i));
      }
      for (const VecD& v : set.seqs[i]) {
        if (int(v.size()) != model.arch.input_dim) {
          throw DataError("token vector length mismatch at sample " + std::to_string(i));
        }
      }
    }
  } else if (set.x.cols != model.arch.input_dim) {
    throw DataError("input width does not match input_dim");
  }
}

double sample_loss(const AnnModel& model, const SampleSet& set, const Mat& y, int i) {
  const VecD yhat = set.sequential ? rnn_forward(model, set.seqs[i]).yhat
                                   : ffnn_forward(model, set.x.row(i)).yhat;
  double s = 0.0;
  for (int j = 0; j < y.cols; ++j) {
    const double d = yhat[j] - y(i, j);
    s += d * d;
  }
  return s / model.arch.output_dim;
}

} // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softplus: return "softplus";
  }
  throw ConfigError("unknown activation");
}

std::string to_string(NetKind k) {
  return k == NetKind::Ffnn ? "ffnn" : "rnn";
}

std::string to_string(Optimizer o) {
  switch (o) {
    case Optimizer::Sgd: return "sgd";
    case Optimizer::Adam: return "adam";
    case Optimizer::AdaGrad: return "adagrad";
    case Optimizer::AdaDelta: return "adadelta";
    case Optimizer::AdaMax: return "adamax";
    case Optimizer::RmsProp: return "rmsprop";
  }
  throw ConfigError("unknown optimizer");
}

Activation activation_from(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "softplus") return Activation::Softplus;
  throw ConfigError("unknown activation '" + s + "'");
}

NetKind net_kind_from(const std::string& s) {
  if (s == "ffnn") return NetKind::Ffnn;
  if (s == "rnn") return NetKind::Rnn;
  throw ConfigError("unknown network kind '" + s + "'");
}

Optimizer optimizer_from(const std::string& s) {
  if (s == "sgd") return Optimizer::Sgd;
  if (s == "adam") return Optimizer::Adam;
  if (s == "adagrad") return Optimizer::AdaGrad;
  if (s == "adadelta") return Optimizer::AdaDelta;
  if (s == "adamax") return Optimizer::AdaMax;
  if (s == "rmsprop") return Optimizer::RmsProp;
  throw ConfigError("unknown optimizer '" + s + "'");
}

void validate(const ArchSpec& arch) {
  if (arch.input_dim < 1) throw ConfigError("input_dim must be positive");
  if (arch.output_dim < 1) throw ConfigError("output_dim must be positive");
  if (arch.activations.size() != arch.hidden.size()) {
    throw ConfigError("expected " + std::to_string(arch.hidden.size()) +
                      " activations, got " + std::to_string(arch.activations.size()));
  }
  for (int w : arch.hidden) {
    if (w < 1) throw ConfigError("layer widths must be positive");
  }
  if (arch.kind == NetKind::Rnn && arch.hidden.size() != 1) {
    throw ConfigError("recurrent networks use a single cell width");
  }
}

AnnModel init_network(const ArchSpec& arch, std::uint64_t seed) {
  validate(arch);
  AnnModel m;
  m.arch = arch;
  m.seed = seed;
  Rng rng(seed);
  for (const auto& [rows, cols, bias] : layer_shapes(arch)) {
    Layer l;
    l.w = Mat(rows, cols);
    l.b.assign(bias, 0.0);
    const double limit = std::sqrt(6.0 / (rows + cols));
    for (double& v : l.w.a) v = rng.uniform(-limit, limit);
    m.layers.push_back(std::move(l));
  }
  return m;
}

VecD forward(const AnnModel& model, std::span<const double> x) {
  if (model.arch.kind != NetKind::Ffnn) {
    throw DataError("recurrent model expects a token sequence");
  }
  if (int(x.size()) != model.arch.input_dim) {
    throw DataError("input length " + std::to_string(x.size()) +
                    " does not match input_dim " + std::to_string(model.arch.input_dim));
  }
  return ffnn_forward(model, x).yhat;
}

VecD forward_seq(const AnnModel& model, const std::vector<VecD>& seq) {
  if (model.arch.kind != NetKind::Rnn) {
    throw DataError("feedforward model expects a single input vector");
  }
  if (seq.empty()) throw DataError("empty token sequence");
  for (const VecD& v : seq) {
    if (int(v.size()) != model.arch.input_dim) {
      throw DataError("token vector length does not match input_dim");
    }
  }
  return rnn_forward(model, seq).yhat;
}

GradSet gradients(const AnnModel& model, const SampleSet& set, const std::vector<int>& indices) {
  if (indices.empty()) throw DataError("empty batch");
  check_samples(model, set);
  for (int i : indices) {
    if (i < 0 || i >= set.size()) throw DataError("sample index out of range");
  }
  const int bsz = int(indices.size());
  std::vector<GradSet> parts(bsz);
  par::for_each_index(bsz, [&](int k) {
    parts[k] = zero_grads(model);
    const int i = indices[k];
    if (set.sequential) {
      const RnnCache c = rnn_forward(model, set.seqs[i]);
      rnn_backward(model, c, set.seqs[i], set.y.row(i), parts[k]);
    } else {
      const FfnnCache c = ffnn_forward(model, set.x.row(i));
      ffnn_backward(model, c, set.y.row(i), parts[k]);
    }
  });
  GradSet total = zero_grads(model);
  for (const GradSet& p : parts) accumulate(total, p);
  scale(total, 1.0 / bsz);
  return total;
}

double evaluate(const AnnModel& model, const SampleSet& set) {
  return evaluate(model, set, set.y);
}

double evaluate(const AnnModel& model, const SampleSet& set, const Mat& y_override) {
  const int n = set.size();
  if (n == 0) throw DataError("empty evaluation set");
  check_samples(model, set);
  if (y_override.rows != n || y_override.cols != model.arch.output_dim) {
    throw DataError("label shape mismatch");
  }
  VecD losses(n);
  par::for_each_index(n, [&](int i) { losses[i] = sample_loss(model, set, y_override, i); });
  double sum = 0.0;
  for (double v : losses) sum += v;
  return sum / n;
}

OptState init_opt_state(const AnnModel& model) {
  OptState s;
  s.m1 = zero_grads(model);
  s.m2 = zero_grads(model);
  s.t = 0;
  return s;
}

void optimizer_step(AnnModel& model, const GradSet& grads, OptState& state,
                    const TrainParams& hp) {
  if (grads.size() != model.layers.size() || state.m1.size() != model.layers.size()) {
    throw DataError("gradient shapes do not match the model");
  }
  state.t += 1;
  const double b1t = 1.0 - std::pow(hp.beta1, double(state.t));
  const double b2t = 1.0 - std::pow(hp.beta2, double(state.t));

  auto update = [&](double& th, double& m1, double& m2, double g) {
    switch (hp.optimizer) {
      case Optimizer::Sgd:
        th -= hp.lr * g;
        return;
      case Optimizer::Adam: {
        m1 = hp.beta1 * m1 + (1.0 - hp.beta1) * g;
        m2 = hp.beta2 * m2 + (1.0 - hp.beta2) * g * g;
        th -= hp.lr * (m1 / b1t) / (std::sqrt(m2 / b2t) + hp.eps);
        return;
      }
      case Optimizer::AdaGrad: {
        m2 += g * g;
        th -= hp.lr * g / (std::sqrt(m2) + hp.eps);
        return;
      }
      case Optimizer::AdaDelta: {
        // the classic parameter-free rule; hp.lr is deliberately unused
        m1 = hp.rho * m1 + (1.0 - hp.rho) * g * g;
        const double dx = -std::sqrt(m2 + hp.eps) / std::sqrt(m1 + hp.eps) * g;
        m2 = hp.rho * m2 + (1.0 - hp.rho) * dx * dx;
        th += dx;
        return;
      }
      case Optimizer::AdaMax: {
        m1 = hp.beta1 * m1 + (1.0 - hp.beta1) * g;
        m2 = std::max(hp.beta2 * m2, std::fabs(g));
        th -= (hp.lr / b1t) * m1 / (m2 + hp.eps);
        return;
      }
      case Optimizer::RmsProp: {
        m2 = hp.gamma * m2 + (1.0 - hp.gamma) * g * g;
        th -= hp.lr * g / (std::sqrt(m2) + hp.eps);
        return;
      }
    }
    throw ConfigError("unknown optimizer");
  };

  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Layer& layer = model.layers[l];
    for (std::size_t i = 0; i < layer.w.a.size(); ++i) {
      update(layer.w.a[i], state.m1[l].w.a[i], state.m2[l].w.a[i], grads[l].w.a[i]);
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      update(layer.b[i], state.m1[l].b[i], state.m2[l].b[i], grads[l].b[i]);
    }
  }
}

std::string EpochLog::to_csv() const {
  std::string out = "epoch,train_loss,test_loss,null_loss_mean\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',';
    out += format_full(rows[i].train_loss);
    out += ',';
    out += format_full(rows[i].test_loss);
    out += ',';
    out += format_full(rows[i].null_loss_mean);
    out += '\n';
  }
  return out;
}

TrainResult train(AnnModel model, const SampleSet& train_set, const SampleSet& test_set,
                  const std::vector<Mat>& null_labels, const TrainParams& p) {
  if (train_set.size() == 0) throw DataError("empty training partition");
  if (test_set.size() == 0) throw DataError("empty testing partition");
  if (p.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (p.batch_size < 1) throw ConfigError("batch size must be positive");
  if (p.dropout < 0.0 || p.dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  check_samples(model, train_set);
  check_samples(model, test_set);
  for (const Mat& nl : null_labels) {
    if (nl.rows != test_set.size() || nl.cols != model.arch.output_dim) {
      throw DataError("null label shape mismatch");
    }
  }

  OptState state = init_opt_state(model);
  Rng rng(p.seed);
  EpochLog log;
  const int n = train_set.size();
  for (int ep = 0; ep < p.epochs; ++ep) {
    std::vector<int> order;
    order.reserve(n);
    for (int i = 0; i < n; ++i) {
      if (p.dropout == 0.0 || rng.uniform() >= p.dropout) order.push_back(i);
    }
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += p.batch_size) {
      const auto end = std::min(order.size(), start + p.batch_size);
      const std::vector<int> batch(order.begin() + start, order.begin() + end);
      const GradSet g = gradients(model, train_set, batch);
      optimizer_step(model, g, state, p);
    }
    EpochRow row;
    row.train_loss = evaluate(model, train_set);
    row.test_loss = evaluate(model, test_set);
    if (null_labels.empty()) {
      row.null_loss_mean = std::numeric_limits<double>::quiet_NaN();
    } else {
      double s = 0.0;
      for (const Mat& nl : null_labels) s += evaluate(model, test_set, nl);
      row.null_loss_mean = s / double(null_labels.size());
    }
    log.rows.push_back(row);
  }
  return {std::move(model), std::move(log)};
}

void save_model(const AnnModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "metastim-model 1\n";
  out << to_string(model.arch.kind) << ' ' << model.arch.input_dim << ' '
      << model.arch.output_dim << ' ' << model.seed << '\n';
  out << "hidden " << model.arch.hidden.size();
  for (int w : model.arch.hidden) out << ' ' << w;
  out << '\n';
  out << "activations " << model.arch.activations.size();
  for (Activation a : model.arch.activations) out << ' ' << to_string(a);
  out << '\n';
  out << "layers " << model.layers.size() << '\n';
  for (const Layer& l : model.layers) {
    out << "layer " << l.w.rows << ' ' << l.w.cols << ' ' << l.b.size() << '\n';
    for (int i = 0; i < l.w.rows; ++i) {
      auto r = l.w.row(i);
      for (int j = 0; j < l.w.cols; ++j) {
        if (j) out << ' ';
        out << format_full(r[j]);
      }
      out << '\n';
    }
    for (std::size_t i = 0; i < l.b.size(); ++i) {
      if (i) out << ' ';
      out << format_full(l.b[i]);
    }
    if (!l.b.empty()) out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

AnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string magic, version;
  in >> magic >> version;
  if (magic != "metastim-model") throw ConfigError("not a model checkpoint: " + path.string());
  if (version != "1") throw ConfigError("unsupported model checkpoint version " + version);

  AnnModel m;
  std::string kind;
  std::size_t count = 0;
  if (!(in >> kind >> m.arch.input_dim >> m.arch.output_dim >> m.seed)) {
    throw ConfigError("truncated model checkpoint");
  }
  m.arch.kind = net_kind_from(kind);

  std::string tag;
  if (!(in >> tag >> count) || tag != "hidden") throw ConfigError("truncated model checkpoint");
  m.arch.hidden.resize(count);
  for (int& w : m.arch.hidden) {
    if (!(in >> w)) throw ConfigError("truncated model checkpoint");
  }
  if (!(in >> tag >> count) || tag != "activations") {
    throw ConfigError("truncated model checkpoint");
  }
  m.arch.activations.resize(count);
  for (Activation& a : m.arch.activations) {
    std::string name;
    if (!(in >> name)) throw ConfigError("truncated model checkpoint");
    a = activation_from(name);
  }
  validate(m.arch);

  if (!(in >> tag >> count) || tag != "layers") throw ConfigError("truncated model checkpoint");
  const auto shapes = layer_shapes(m.arch);
  if (count != shapes.size()) throw ConfigError("model checkpoint layer count mismatch");
  for (const auto& [rows, cols, bias] : shapes) {
    int r = 0, c = 0;
    std::size_t b = 0;
    if (!(in >> tag >> r >> c >> b) || tag != "layer") {
      throw ConfigError("truncated model checkpoint");
    }
    if (r != rows || c != cols || int(b) != bias) {
      throw ConfigError("model checkpoint shape mismatch");
    }
    Layer l;
    l.w = Mat(r, c);
    l.b.assign(b, 0.0);
    for (double& v : l.w.a) {
      if (!(in >> v)) throw ConfigError("truncated model checkpoint");
      if (!std::isfinite(v)) throw ConfigError("non-finite parameter in checkpoint");
    }
    for (double& v : l.b) {
      if (!(in >> v)) throw ConfigError("truncated model checkpoint");
      if (!std::isfinite(v)) throw ConfigError("non-finite parameter in checkpoint");
    }
    m.layers.push_back(std::move(l));
  }
  return m;
}

} // namespace metastim
