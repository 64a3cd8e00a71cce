#include "tcu/nnarx.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "tcu/errors.hpp"

namespace tcu {

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  if (rows == 0) return {};
  const auto cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

/// Normalized view of one subsequence.
struct NormSeq {
  std::vector<Eigen::Vector2d> u;
  std::vector<double> y;
};

NormSeq normalize_seq(const IoDataset& data, const Normalizer& norm) {
  NormSeq out;
  out.u.reserve(data.u.size());
  out.y.reserve(data.y.size());
  for (const auto& u : data.u) out.u.push_back(norm.normalize_u(u));
  for (double y : data.y) out.y.push_back(norm.normalize_y(y));
  return out;
}

/// Mirrors the model layout for gradient accumulation.
struct Gradients {
  Eigen::RowVectorXd out_weight;
  double out_bias = 0.0;
  struct Layer {
    Eigen::MatrixXd carry_weight;
    Eigen::MatrixXd input_weight;
    Eigen::VectorXd bias;
  };
  std::vector<Layer> layers;

  explicit Gradients(const NnarxModel& m) {
    out_weight = Eigen::RowVectorXd::Zero(m.out_weight.cols());
    layers.resize(m.layers.size());
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      layers[l].carry_weight = Eigen::MatrixXd::Zero(m.layers[l].carry_weight.rows(),
                                                     m.layers[l].carry_weight.cols());
      layers[l].input_weight = Eigen::MatrixXd::Zero(m.layers[l].input_weight.rows(),
                                                     m.layers[l].input_weight.cols());
      layers[l].bias = Eigen::VectorXd::Zero(m.layers[l].bias.size());
    }
  }
};

/// Forward pass keeping per-layer activations for the backward sweep.
double forward_ffnn(const NnarxModel& m, const Eigen::VectorXd& x, const Eigen::Vector2d& u,
                    std::vector<Eigen::VectorXd>* activations) {
  Eigen::VectorXd v = x;
  if (activations) activations->clear();
  for (const auto& layer : m.layers) {
    v = (layer.carry_weight * v + layer.input_weight * u + layer.bias)
            .array()
            .tanh()
            .matrix();
    if (activations) activations->push_back(v);
  }
  return m.out_weight.dot(v) + m.out_bias;
}

/// Accumulates d(loss)/d(params) for one prediction term with upstream
/// derivative `dy` (d loss / d prediction). Returns d loss / d state.
void backward_ffnn(const NnarxModel& m, const Eigen::VectorXd& x, const Eigen::Vector2d& u,
                   const std::vector<Eigen::VectorXd>& activations, double dy,
                   Gradients& g) {
  const auto last = activations.size() - 1;
  g.out_weight.noalias() += dy * activations[last].transpose();
  g.out_bias += dy;
  Eigen::VectorXd dv = m.out_weight.transpose() * dy;
  for (int l = static_cast<int>(m.layers.size()) - 1; l >= 0; --l) {
    const Eigen::VectorXd da =
        dv.array() * (1.0 - activations[l].array().square());  // tanh'
    g.layers[l].bias += da;
    g.layers[l].input_weight.noalias() += da * u.transpose();
    const Eigen::VectorXd& prev = l == 0 ? x : activations[l - 1];
    g.layers[l].carry_weight.noalias() += da * prev.transpose();
    if (l > 0) dv.noalias() = m.layers[l].carry_weight.transpose() * da;
  }
}

/// Builds the regression state for target index t of a normalized sequence:
/// outputs y[t-N..t-1], inputs u[t-N-1..t-2].
Eigen::VectorXd state_for_target(const NormSeq& seq, int t, int n) {
  Eigen::VectorXd x(3 * n);
  for (int i = 0; i < n; ++i) {
    x(3 * i) = seq.y[t - n + i];
    x(3 * i + 1) = seq.u[t - n - 1 + i](0);
    x(3 * i + 2) = seq.u[t - n - 1 + i](1);
  }
  return x;
}

/// Shared loss core; fills `grads` when non-null.
double training_loss(const NnarxModel& m, const std::vector<NormSeq>& set, int washout,
                     Gradients* grads) {
  const int n = m.past_window;
  if (washout < n)
    throw InputDomainError("nnarx loss: washout must be >= past_window");
  double total = 0.0;
  std::vector<Eigen::VectorXd> acts;
  for (const auto& seq : set) {
    const int len = static_cast<int>(seq.y.size());
    if (len <= washout + 1)
      throw InputDomainError("nnarx loss: subsequence shorter than washout + 2");
    const double w = 1.0 / (static_cast<double>(set.size()) * (len - washout));
    for (int t = washout + 1; t < len; ++t) {
      const Eigen::VectorXd x = state_for_target(seq, t, n);
      const Eigen::Vector2d& u = seq.u[t - 1];
      const double pred = forward_ffnn(m, x, u, grads ? &acts : nullptr);
      const double err = pred - seq.y[t];
      total += w * err * err;
      if (grads) backward_ffnn(m, x, u, acts, 2.0 * w * err, *grads);
    }
  }
  return total;
}

std::vector<NormSeq> normalize_set(const std::vector<IoDataset>& set, const Normalizer& norm) {
  std::vector<NormSeq> out;
  out.reserve(set.size());
  for (const auto& s : set) out.push_back(normalize_seq(s, norm));
  return out;
}

void pack_gradients(const Gradients& g, Eigen::VectorXd& flat) {
  Eigen::Index pos = 0;
  for (Eigen::Index c = 0; c < g.out_weight.cols(); ++c) flat(pos++) = g.out_weight(c);
  flat(pos++) = g.out_bias;
  for (const auto& layer : g.layers) {
    for (Eigen::Index r = 0; r < layer.carry_weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.carry_weight.cols(); ++c)
        flat(pos++) = layer.carry_weight(r, c);
    for (Eigen::Index r = 0; r < layer.input_weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.input_weight.cols(); ++c)
        flat(pos++) = layer.input_weight(r, c);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) flat(pos++) = layer.bias(r);
  }
}

}  // namespace

Normalizer Normalizer::fit(const IoDataset& data) {
  if (data.y.empty() || data.u.empty())
    throw InputDomainError("normalizer fit: empty dataset");
  Normalizer norm;
  const auto nu = static_cast<double>(data.u.size());
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (const auto& u : data.u) sum += Eigen::Vector2d(u.heat, u.cool);
  norm.u_mean = sum / nu;
  Eigen::Vector2d var = Eigen::Vector2d::Zero();
  for (const auto& u : data.u) {
    const Eigen::Vector2d d = Eigen::Vector2d(u.heat, u.cool) - norm.u_mean;
    var += d.cwiseProduct(d);
  }
  norm.u_std = (var / nu).cwiseSqrt().cwiseMax(1e-9);

  const auto ny = static_cast<double>(data.y.size());
  double ysum = 0.0;
  for (double y : data.y) ysum += y;
  norm.y_mean = ysum / ny;
  double yvar = 0.0;
  for (double y : data.y) yvar += (y - norm.y_mean) * (y - norm.y_mean);
  norm.y_std = std::max(std::sqrt(yvar / ny), 1e-9);
  return norm;
}

int NnarxModel::parameter_count() const {
  int count = static_cast<int>(out_weight.cols()) + 1;
  for (const auto& layer : layers)
    count += static_cast<int>(layer.carry_weight.size() + layer.input_weight.size() +
                              layer.bias.size());
  return count;
}

NnarxModel NnarxModel::random_init(int past_window, const std::vector<int>& hidden_widths,
                                   std::uint64_t seed) {
  if (past_window < 1) throw InputDomainError("nnarx: past_window must be >= 1");
  if (hidden_widths.empty()) throw InputDomainError("nnarx: need at least one hidden layer");
  NnarxModel m;
  m.past_window = past_window;
  m.hidden_widths = hidden_widths;
  m.init_seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  int prev = m.state_dim();
  for (int width : hidden_widths) {
    NnarxModel::Layer layer;
    const double scale = 1.0 / std::sqrt(static_cast<double>(prev + 2));
    layer.carry_weight = Eigen::MatrixXd::NullaryExpr(
        width, prev, [&]() { return scale * unit(rng); });
    layer.input_weight =
        Eigen::MatrixXd::NullaryExpr(width, 2, [&]() { return scale * unit(rng); });
    layer.bias = Eigen::VectorXd::NullaryExpr(width, [&]() { return scale * unit(rng); });
    m.layers.push_back(std::move(layer));
    prev = width;
  }
  const double out_scale = 1.0 / std::sqrt(static_cast<double>(prev));
  m.out_weight =
      Eigen::RowVectorXd::NullaryExpr(prev, [&]() { return out_scale * unit(rng); });
  m.out_bias = out_scale * unit(rng);
  return m;
}

Eigen::VectorXd NnarxModel::pack_parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Gradients g(*this);
  g.out_weight = out_weight;
  g.out_bias = out_bias;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    g.layers[l].carry_weight = layers[l].carry_weight;
    g.layers[l].input_weight = layers[l].input_weight;
    g.layers[l].bias = layers[l].bias;
  }
  pack_gradients(g, flat);
  return flat;
}

void NnarxModel::unpack_parameters(const Eigen::VectorXd& phi) {
  if (phi.size() != parameter_count())
    throw InputDomainError("nnarx: parameter vector size mismatch");
  Eigen::Index pos = 0;
  for (Eigen::Index c = 0; c < out_weight.cols(); ++c) out_weight(c) = phi(pos++);
  out_bias = phi(pos++);
  for (auto& layer : layers) {
    for (Eigen::Index r = 0; r < layer.carry_weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.carry_weight.cols(); ++c)
        layer.carry_weight(r, c) = phi(pos++);
    for (Eigen::Index r = 0; r < layer.input_weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.input_weight.cols(); ++c)
        layer.input_weight(r, c) = phi(pos++);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = phi(pos++);
  }
}

void NnarxModel::validate() const {
  if (layers.size() != hidden_widths.size())
    throw ContractViolation("nnarx: layer count does not match hidden_widths");
  int prev = state_dim();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].carry_weight.rows() != hidden_widths[l] ||
        layers[l].carry_weight.cols() != prev || layers[l].input_weight.rows() != hidden_widths[l] ||
        layers[l].input_weight.cols() != 2 || layers[l].bias.size() != hidden_widths[l])
      throw ContractViolation("nnarx: inconsistent weight dimensions at layer " +
                              std::to_string(l + 1));
    prev = hidden_widths[l];
  }
  if (out_weight.cols() != prev)
    throw ContractViolation("nnarx: output layer width mismatch");
}

NnarxState pack_state(const std::vector<double>& past_y,
                      const std::vector<Eigen::Vector2d>& past_u, int past_window) {
  const auto n = static_cast<std::size_t>(past_window);
  if (past_y.size() != n || past_u.size() != n)
    throw InputDomainError("pack_state: expected exactly N past outputs and N past inputs");
  NnarxState x(3 * past_window);
  for (std::size_t i = 0; i < n; ++i) {
    x(3 * i) = past_y[i];
    x(3 * i + 1) = past_u[i](0);
    x(3 * i + 2) = past_u[i](1);
  }
  return x;
}

void unpack_state(const NnarxState& x, std::vector<double>& past_y,
                  std::vector<Eigen::Vector2d>& past_u) {
  const auto n = static_cast<std::size_t>(x.size() / 3);
  past_y.resize(n);
  past_u.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    past_y[i] = x(3 * i);
    past_u[i] = Eigen::Vector2d(x(3 * i + 1), x(3 * i + 2));
  }
}

double state_output(const NnarxState& x) { return x(x.size() - 3); }

double ffnn_eval(const NnarxModel& model, const NnarxState& x, const Eigen::Vector2d& u) {
  return forward_ffnn(model, x, u, nullptr);
}

double ffnn_input_gradient(const NnarxModel& model, const NnarxState& x,
                           const Eigen::Vector2d& u, Eigen::VectorXd& d_state,
                           Eigen::Vector2d& d_input) {
  std::vector<Eigen::VectorXd> acts;
  const double value = forward_ffnn(model, x, u, &acts);
  d_input.setZero();
  Eigen::VectorXd dv = model.out_weight.transpose();
  for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
    const Eigen::VectorXd da = dv.array() * (1.0 - acts[l].array().square());
    d_input.noalias() += model.layers[l].input_weight.transpose() * da;
    dv.noalias() = model.layers[l].carry_weight.transpose() * da;
  }
  d_state = std::move(dv);  // after layer 0 this is d value / d x
  return value;
}

std::pair<NnarxState, double> nnarx_step(const NnarxModel& model, const NnarxState& x,
                                         const Eigen::Vector2d& u) {
  const double next_y = forward_ffnn(model, x, u, nullptr);
  NnarxState next(x.size());
  next.head(x.size() - 3) = x.tail(x.size() - 3);
  next(x.size() - 3) = next_y;
  next(x.size() - 2) = u(0);
  next(x.size() - 1) = u(1);
  return {std::move(next), next_y};
}

std::vector<IoDataset> extract_subsequences(const IoDataset& data, int count, int length,
                                            std::uint64_t seed) {
  if (length < 1 || count < 1)
    throw InputDomainError("extract_subsequences: count and length must be >= 1");
  const auto usable = std::min(data.y.size(), data.u.size());
  if (usable < static_cast<std::size_t>(length))
    throw InputDomainError("extract_subsequences: log shorter than subsequence length");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> start(0, usable - length);
  std::vector<IoDataset> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::size_t s = start(rng);
    IoDataset seq;
    seq.sample_time_s = data.sample_time_s;
    seq.y.assign(data.y.begin() + s, data.y.begin() + s + length);
    seq.u.assign(data.u.begin() + s, data.u.begin() + s + length);
    out.push_back(std::move(seq));
  }
  return out;
}

double mse_criterion(const NnarxModel& model, const std::vector<IoDataset>& subsequences,
                     int washout) {
  return training_loss(model, normalize_set(subsequences, model.norm), washout, nullptr);
}

Eigen::VectorXd mse_gradient(const NnarxModel& model,
                             const std::vector<IoDataset>& subsequences, int washout) {
  Gradients g(model);
  training_loss(model, normalize_set(subsequences, model.norm), washout, &g);
  Eigen::VectorXd flat(model.parameter_count());
  pack_gradients(g, flat);
  return flat;
}

TrainReport train(NnarxModel& model, const std::vector<IoDataset>& train_set,
                  const std::vector<IoDataset>& val_set, const TrainConfig& cfg) {
  if (train_set.empty() || val_set.empty())
    throw InputDomainError("nnarx train: empty train or validation set");
  if (cfg.washout < model.past_window)
    throw InputDomainError("nnarx train: washout must be >= past_window");

  const auto train_norm = normalize_set(train_set, model.norm);
  const auto val_norm = normalize_set(val_set, model.norm);

  NnarxModel work = model;
  Eigen::VectorXd phi = work.pack_parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(phi.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(phi.size());
  Eigen::VectorXd flat_grad(phi.size());

  TrainReport report;
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_phi = phi;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    work.unpack_parameters(phi);
    Gradients grads(work);
    const double train_loss_v = training_loss(work, train_norm, cfg.washout, &grads);
    if (!std::isfinite(train_loss_v))
      throw NumericalError("nnarx train: non-finite loss at epoch " + std::to_string(epoch));
    const double val_loss_v = training_loss(work, val_norm, cfg.washout, nullptr);
    report.loss_curve.emplace_back(train_loss_v, val_loss_v);
    report.epochs = epoch;

    if (val_loss_v < best_val) {
      best_val = val_loss_v;
      best_phi = phi;
    }
    if (val_loss_v < cfg.val_tolerance) {
      report.reached_tolerance = true;
      break;
    }

    pack_gradients(grads, flat_grad);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, epoch);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, epoch);
    m1 = cfg.adam_beta1 * m1 + (1.0 - cfg.adam_beta1) * flat_grad;
    m2 = cfg.adam_beta2 * m2 + (1.0 - cfg.adam_beta2) * flat_grad.cwiseProduct(flat_grad);
    phi -= (cfg.learning_rate * (m1 / bc1).array() / ((m2 / bc2).array().sqrt() + cfg.adam_epsilon))
               .matrix();
  }

  model.unpack_parameters(best_phi);
  report.final_train_mse = training_loss(model, train_norm, cfg.washout, nullptr);
  report.final_val_mse = training_loss(model, val_norm, cfg.washout, nullptr);
  return report;
}

std::vector<double> open_loop_predict(const NnarxModel& model, const NnarxState& x0,
                                      const std::vector<AnalogPair>& u_sequence) {
  if (x0.size() != model.state_dim())
    throw InputDomainError("open_loop_predict: state dimension mismatch");
  std::vector<double> out;
  out.reserve(u_sequence.size());
  NnarxState x = x0;
  for (const auto& u_raw : u_sequence) {
    auto [next, y_norm] = nnarx_step(model, x, model.norm.normalize_u(u_raw));
    x = std::move(next);
    out.push_back(model.norm.denormalize_y(y_norm));
  }
  return out;
}

std::string nnarx_model_to_json(const NnarxModel& model, const TrainReport* report,
                                double sample_time_s) {
  nlohmann::json j;
  j["type"] = "nnarx";
  j["N"] = model.past_window;
  j["hidden_widths"] = model.hidden_widths;
  j["out_weight"] = matrix_to_json(model.out_weight);
  j["out_bias"] = model.out_bias;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers) {
    nlohmann::json lj;
    lj["carry_weight"] = matrix_to_json(layer.carry_weight);
    lj["input_weight"] = matrix_to_json(layer.input_weight);
    nlohmann::json bias = nlohmann::json::array();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) bias.push_back(layer.bias(i));
    lj["bias"] = std::move(bias);
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  j["normalizer"] = {{"u_mean", {model.norm.u_mean(0), model.norm.u_mean(1)}},
                     {"u_std", {model.norm.u_std(0), model.norm.u_std(1)}},
                     {"y_mean", model.norm.y_mean},
                     {"y_std", model.norm.y_std}};
  j["init_seed"] = model.init_seed;
  j["sample_time"] = sample_time_s;
  if (report) {
    j["training"] = {{"epochs", report->epochs},
                     {"reached_tolerance", report->reached_tolerance},
                     {"final_train_mse", report->final_train_mse},
                     {"final_val_mse", report->final_val_mse}};
  }
  return j.dump(2);
}

NnarxModel nnarx_model_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("type", "") != "nnarx") throw IoError("nnarx model JSON: expected type=nnarx");
  NnarxModel m;
  m.past_window = j.at("N").get<int>();
  m.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
  m.out_weight = matrix_from_json(j.at("out_weight"));
  m.out_bias = j.at("out_bias").get<double>();
  for (const auto& lj : j.at("layers")) {
    NnarxModel::Layer layer;
    layer.carry_weight = matrix_from_json(lj.at("carry_weight"));
    layer.input_weight = matrix_from_json(lj.at("input_weight"));
    const auto& bias = lj.at("bias");
    layer.bias = Eigen::VectorXd(bias.size());
    for (std::size_t i = 0; i < bias.size(); ++i) layer.bias(i) = bias[i].get<double>();
    m.layers.push_back(std::move(layer));
  }
  const auto& nj = j.at("normalizer");
  m.norm.u_mean << nj.at("u_mean")[0].get<double>(), nj.at("u_mean")[1].get<double>();
  m.norm.u_std << nj.at("u_std")[0].get<double>(), nj.at("u_std")[1].get<double>();
  m.norm.y_mean = nj.at("y_mean").get<double>();
  m.norm.y_std = nj.at("y_std").get<double>();
  m.init_seed = j.value("init_seed", 0ULL);
  m.validate();
  return m;
}

void save_nnarx_model(const NnarxModel& model, const std::string& path,
                      const TrainReport* report, double sample_time_s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write nnarx model file: " + path);
  out << nnarx_model_to_json(model, report, sample_time_s) << "\n";
}

NnarxModel load_nnarx_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read nnarx model file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return nnarx_model_from_json_text(text);
}

}  // namespace tcu
