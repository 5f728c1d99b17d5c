// Copyright 2026 The Specmetric Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "specmetric/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "specmetric/autodiff.hpp"
#include "specmetric/error.hpp"
#include "specmetric/image_ops.hpp"
#include "specmetric/rng.hpp"

namespace specmetric {

namespace {

constexpr double kSigmaFloor = 1e-6;

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

Matrix abs_matrix(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.storage()) v = std::fabs(v);
  return out;
}

// 5x5 mask with a zero center tap: the statistical objective predicts the
// center from its neighbours, so the center weight is structurally zero.
Matrix center_mask5() {
  Matrix m(5, 5, 1.0);
  m(2, 2) = 0.0;
  return m;
}

std::vector<Matrix> plain_z_bands(const Matrix& x, const NlpParams& base) {
  NlpParams plain = NlpParams::none(base.n_stages);
  plain.lowpass = base.lowpass;
  return build_pyramid(x, plain).bands_z;
}

}  // namespace

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw DataError("adam config: learning_rate must be positive");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw DataError("adam config: betas must lie in [0, 1)");
  }
  if (epochs < 1) throw DataError("adam config: epochs must be >= 1");
  if (batch_size < 1) throw DataError("adam config: batch_size must be >= 1");
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) {
    throw DataError("adam_step: params and grads sizes differ: " +
                    std::to_string(params.size()) + " vs " +
                    std::to_string(grads.size()));
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  if (state.m.size() != params.size()) {
    throw DataError("adam_step: state size does not match params");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adam_step: non-finite gradient at index " +
                         std::to_string(i));
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

void write_fit_trace_csv(const FitTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open trace file for writing: " + path);
  out << "epoch,batch_tag,objective\n";
  for (const FitTraceEntry& e : trace.entries) {
    out << e.epoch << "," << e.batch_tag << "," << format_double(e.objective)
        << "\n";
  }
  if (!out) throw DataError("failed writing trace file: " + path);
}

std::vector<double> sigma_init(const std::vector<Matrix>& bands_z) {
  if (bands_z.empty()) throw DataError("sigma_init: no bands");
  std::vector<double> sigmas;
  sigmas.reserve(bands_z.size());
  for (std::size_t k = 0; k < bands_z.size(); ++k) {
    const Matrix& z = bands_z[k];
    if (z.empty()) {
      throw DataError("sigma_init: stage " + std::to_string(k) +
                      " band is empty");
    }
    double acc = 0.0;
    for (double v : z.storage()) acc += std::fabs(v);
    sigmas.push_back(std::max(acc / static_cast<double>(z.size()),
                              kSigmaFloor));
  }
  return sigmas;
}

std::vector<double> sigma_init_mean(
    const std::vector<std::vector<Matrix>>& per_clip_bands) {
  if (per_clip_bands.empty()) throw DataError("sigma_init: no clips");
  std::vector<double> acc;
  for (const std::vector<Matrix>& bands : per_clip_bands) {
    std::vector<double> s = sigma_init(bands);
    if (acc.empty()) {
      acc = std::move(s);
    } else {
      if (s.size() != acc.size()) {
        throw DataError("sigma_init: clips disagree on stage count");
      }
      for (std::size_t k = 0; k < s.size(); ++k) acc[k] += s[k];
    }
  }
  for (double& v : acc) {
    v = std::max(v / static_cast<double>(per_clip_bands.size()), kSigmaFloor);
  }
  return acc;
}

std::vector<double> statistical_stage_losses(const std::vector<Matrix>& clips,
                                             const NlpParams& params) {
  if (clips.empty()) throw DataError("statistical loss: no clips");
  params.validate();
  const Matrix mask = center_mask5();
  std::vector<double> losses(static_cast<std::size_t>(params.n_stages), 0.0);
  for (const Matrix& clip : clips) {
    const std::vector<Matrix> bands = plain_z_bands(clip, params);
    for (std::size_t k = 0; k < bands.size(); ++k) {
      const Matrix a = abs_matrix(bands[k]);
      Matrix masked = params.dn_filters[k];
      for (std::size_t i = 0; i < masked.size(); ++i) {
        masked.data()[i] *= mask.data()[i];
      }
      const Matrix pooled = conv2_reflect(a, masked);
      const double sigma = params.dn_constants[k];
      double acc = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = a.data()[i] - (sigma + pooled.data()[i]);
        acc += r * r;
      }
      losses[k] += acc / static_cast<double>(a.size());
    }
  }
  for (double& v : losses) v /= static_cast<double>(clips.size());
  return losses;
}

FitTrace fit_statistical(const std::vector<Matrix>& train,
                         const NlpParams& base, const AdamConfig& opt) {
  if (train.empty()) throw DataError("fit_statistical: empty training set");
  opt.validate();
  base.validate();

  const std::size_t n_stages = static_cast<std::size_t>(base.n_stages);
  const std::size_t n_clips = train.size();

  // Pyramid magnitudes are parameter-independent; compute them once.
  std::vector<std::vector<Matrix>> abs_bands(n_clips);
  std::vector<std::vector<Matrix>> z_bands(n_clips);
  for (std::size_t c = 0; c < n_clips; ++c) {
    z_bands[c] = plain_z_bands(train[c], base);
    abs_bands[c].reserve(n_stages);
    for (const Matrix& z : z_bands[c]) abs_bands[c].push_back(abs_matrix(z));
  }
  const std::vector<double> sigmas = sigma_init_mean(z_bands);
  z_bands.clear();

  const Matrix mask = center_mask5();
  std::vector<Matrix> filters(n_stages, Matrix(5, 5, 0.0));
  std::vector<AdamState> states(n_stages);

  FitTrace trace;
  trace.objective_kind = ObjectiveKind::kCenterPixelMse;
  CounterRng rng(opt.seed);

  std::vector<std::size_t> order(n_clips);
  for (std::size_t i = 0; i < n_clips; ++i) order[i] = i;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    std::vector<double> epoch_loss(n_stages, 0.0);
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n_clips;
         begin += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end =
          std::min(n_clips, begin + static_cast<std::size_t>(opt.batch_size));
      ++batches;
      for (std::size_t k = 0; k < n_stages; ++k) {
        autodiff::Tape tape;
        const autodiff::NodeId p_node = tape.param(filters[k]);
        const autodiff::NodeId masked =
            tape.mul(p_node, tape.constant(mask));
        const autodiff::NodeId sigma_node = tape.scalar_constant(sigmas[k]);
        autodiff::NodeId loss = -1;
        for (std::size_t b = begin; b < end; ++b) {
          const Matrix& a = abs_bands[order[b]][k];
          const autodiff::NodeId a_node = tape.constant(a);
          const autodiff::NodeId pred = tape.add_scalar(
              sigma_node, tape.conv5_reflect(a_node, masked));
          const autodiff::NodeId resid = tape.sub(a_node, pred);
          const autodiff::NodeId sq_sum = tape.sum(tape.mul(resid, resid));
          const autodiff::NodeId clip_loss =
              tape.scale(sq_sum, 1.0 / static_cast<double>(a.size()));
          loss = loss < 0 ? clip_loss : tape.add(loss, clip_loss);
        }
        loss = tape.scale(loss, 1.0 / static_cast<double>(end - begin));
        const double loss_value = tape.scalar_value(loss);
        if (!std::isfinite(loss_value)) {
          throw NumericError("fit_statistical diverged: non-finite loss at "
                             "epoch " +
                             std::to_string(epoch + 1) + " stage " +
                             std::to_string(k + 1));
        }
        epoch_loss[k] += loss_value;
        tape.backward(loss);
        std::vector<double> flat = filters[k].storage();
        adam_step(flat, tape.grad(p_node).storage(), states[k], opt);
        for (std::size_t i = 0; i < flat.size(); ++i) {
          filters[k].data()[i] = std::max(flat[i], 0.0);
        }
        filters[k](2, 2) = 0.0;
      }
    }
    double epoch_mean = 0.0;
    for (std::size_t k = 0; k < n_stages; ++k) {
      const double stage_loss = epoch_loss[k] / static_cast<double>(batches);
      trace.entries.push_back(
          {epoch + 1, "stage" + std::to_string(k + 1), stage_loss});
      epoch_mean += stage_loss;
    }
    trace.epoch_objectives.push_back(epoch_mean /
                                     static_cast<double>(n_stages));
  }

  trace.final_params = base;
  trace.final_params.dn_filters = std::move(filters);
  trace.final_params.dn_constants = sigmas;
  trace.final_params.dn_mode = DnMode::kStatistical;
  trace.final_params.validate();
  return trace;
}

FitTrace fit_statistical(const std::vector<MelSpectrogram>& train,
                         const NlpParams& base, const AdamConfig& opt) {
  std::vector<Matrix> values;
  values.reserve(train.size());
  for (const MelSpectrogram& m : train) values.push_back(m.values);
  return fit_statistical(values, base, opt);
}

namespace {

struct PairBands {
  std::vector<Matrix> ref_z, ref_abs, deg_z, deg_abs;
  double target = 0.0;
  std::string tag;
};

// Distance node for one pair: divisive normalization of the precomputed
// bands, per-stage RMS of the difference, averaged over stages.
autodiff::NodeId pair_distance_node(autodiff::Tape& tape,
                                    const PairBands& pb,
                                    const std::vector<autodiff::NodeId>& p_nodes,
                                    const std::vector<autodiff::NodeId>& s_nodes) {
  const std::size_t n_stages = p_nodes.size();
  autodiff::NodeId d_acc = -1;
  for (std::size_t k = 0; k < n_stages; ++k) {
    const autodiff::NodeId y_ref = tape.div(
        tape.constant(pb.ref_z[k]),
        tape.add_scalar(s_nodes[k],
                        tape.conv5_reflect(tape.constant(pb.ref_abs[k]),
                                           p_nodes[k])));
    const autodiff::NodeId y_deg = tape.div(
        tape.constant(pb.deg_z[k]),
        tape.add_scalar(s_nodes[k],
                        tape.conv5_reflect(tape.constant(pb.deg_abs[k]),
                                           p_nodes[k])));
    const autodiff::NodeId diff = tape.sub(y_ref, y_deg);
    const autodiff::NodeId norm = tape.sqrt(tape.sum(tape.mul(diff, diff)));
    const autodiff::NodeId term = tape.scale(
        norm,
        1.0 / (static_cast<double>(n_stages) *
               std::sqrt(static_cast<double>(pb.ref_z[k].size()))));
    d_acc = d_acc < 0 ? term : tape.add(d_acc, term);
  }
  return d_acc;
}

// Pearson correlation node over per-pair distance nodes against constant
// targets. Returns -1 when the distances have (numerically) no variance.
autodiff::NodeId pearson_node(autodiff::Tape& tape,
                              const std::vector<autodiff::NodeId>& dist,
                              const std::vector<double>& targets) {
  const std::size_t n = dist.size();
  double t_mean = 0.0;
  for (double t : targets) t_mean += t;
  t_mean /= static_cast<double>(n);
  double t_var = 0.0;
  for (double t : targets) t_var += (t - t_mean) * (t - t_mean);

  autodiff::NodeId d_sum = dist[0];
  for (std::size_t b = 1; b < n; ++b) d_sum = tape.add(d_sum, dist[b]);
  const autodiff::NodeId d_mean =
      tape.scale(d_sum, 1.0 / static_cast<double>(n));
  autodiff::NodeId num = -1, var_d = -1;
  for (std::size_t b = 0; b < n; ++b) {
    const autodiff::NodeId centered = tape.sub(dist[b], d_mean);
    const autodiff::NodeId num_term =
        tape.scale(centered, targets[b] - t_mean);
    const autodiff::NodeId var_term = tape.mul(centered, centered);
    num = num < 0 ? num_term : tape.add(num, num_term);
    var_d = var_d < 0 ? var_term : tape.add(var_d, var_term);
  }
  if (tape.scalar_value(var_d) <= 1e-18) return -1;
  const autodiff::NodeId denom = tape.sqrt(tape.scale(var_d, t_var));
  return tape.div(num, denom);
}

PairBands make_pair_bands(const PerceptualPair& p, const NlpParams& base,
                          bool ratings_are_quality) {
  PairBands pb;
  pb.ref_z = plain_z_bands(p.reference.values, base);
  pb.deg_z = plain_z_bands(p.degraded.values, base);
  for (std::size_t k = 0; k < pb.ref_z.size(); ++k) {
    pb.ref_abs.push_back(abs_matrix(pb.ref_z[k]));
    pb.deg_abs.push_back(abs_matrix(pb.deg_z[k]));
  }
  pb.target = ratings_are_quality ? -p.rating : p.rating;
  pb.tag = p.degradation;
  return pb;
}

}  // namespace

PerceptualObjective perceptual_objective(
    const std::vector<PerceptualPair>& batch, const NlpParams& params,
    const PerceptualOptions& popt) {
  if (batch.size() < 3) {
    throw DataError("perceptual objective: need at least 3 pairs");
  }
  params.validate();
  const std::size_t n_stages = static_cast<std::size_t>(params.n_stages);

  autodiff::Tape tape;
  std::vector<autodiff::NodeId> p_nodes(n_stages), s_nodes(n_stages);
  for (std::size_t k = 0; k < n_stages; ++k) {
    p_nodes[k] = tape.param(params.dn_filters[k]);
    s_nodes[k] = tape.param(Matrix(1, 1, params.dn_constants[k]));
  }
  std::vector<autodiff::NodeId> dist;
  std::vector<double> targets;
  for (const PerceptualPair& p : batch) {
    const PairBands pb = make_pair_bands(p, params,
                                         popt.ratings_are_quality);
    dist.push_back(pair_distance_node(tape, pb, p_nodes, s_nodes));
    targets.push_back(pb.target);
  }
  const autodiff::NodeId r = pearson_node(tape, dist, targets);
  if (r < 0) {
    throw NumericError(
        "perceptual objective: zero variance in distances or ratings");
  }
  tape.backward(r);

  PerceptualObjective out;
  out.pearson = tape.scalar_value(r);
  for (std::size_t k = 0; k < n_stages; ++k) {
    out.filter_grads.push_back(tape.grad(p_nodes[k]));
    out.sigma_grads.push_back(tape.grad(s_nodes[k])(0, 0));
  }
  return out;
}

FitTrace fit_perceptual(const std::vector<PerceptualPair>& pairs,
                        const NlpParams& base, const AdamConfig& opt,
                        const PerceptualOptions& popt) {
  if (pairs.empty()) throw DataError("fit_perceptual: no training pairs");
  opt.validate();
  base.validate();
  const std::size_t n_stages = static_cast<std::size_t>(base.n_stages);

  // Sigma initialization: mean |z| over the unique reference clips.
  std::vector<std::vector<Matrix>> ref_bands;
  {
    std::set<std::string> seen;
    for (const PerceptualPair& p : pairs) {
      const std::string key = p.reference.source_id.empty()
                                  ? "#" + std::to_string(ref_bands.size())
                                  : p.reference.source_id;
      if (!p.reference.source_id.empty() && seen.count(key) > 0) continue;
      seen.insert(key);
      ref_bands.push_back(plain_z_bands(p.reference.values, base));
    }
  }
  std::vector<double> sigmas = sigma_init_mean(ref_bands);
  ref_bands.clear();

  // Precompute the parameter-independent pyramid bands per pair.
  std::vector<PairBands> bands(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const PerceptualPair& p = pairs[i];
    if (!p.reference.values.same_shape(p.degraded.values)) {
      throw DataError("fit_perceptual: pair " + std::to_string(i) +
                      " has mismatched shapes");
    }
    bands[i] = make_pair_bands(p, base, popt.ratings_are_quality);
  }

  // Fixed batch order: tags sorted lexicographically.
  std::map<std::string, std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    batches[bands[i].tag].push_back(i);
  }

  std::vector<Matrix> filters = base.dn_filters;
  const std::size_t filter_len = 25 * n_stages;
  std::vector<double> flat(filter_len + n_stages);
  auto pack = [&]() {
    for (std::size_t k = 0; k < n_stages; ++k) {
      std::copy(filters[k].storage().begin(), filters[k].storage().end(),
                flat.begin() + static_cast<long>(25 * k));
      flat[filter_len + k] = sigmas[k];
    }
  };
  auto unpack = [&]() {
    for (std::size_t k = 0; k < n_stages; ++k) {
      for (std::size_t i = 0; i < 25; ++i) {
        // Non-negativity by projection.
        filters[k].data()[i] = std::max(flat[25 * k + i], 0.0);
      }
      sigmas[k] = std::max(flat[filter_len + k], kSigmaFloor);
    }
  };

  AdamState state;
  FitTrace trace;
  trace.objective_kind = ObjectiveKind::kPearson;
  CounterRng rng(opt.seed);
  long total_steps = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    double epoch_sum = 0.0;
    std::size_t epoch_batches = 0;
    for (auto& [tag, indices] : batches) {
      std::vector<std::size_t> idx = indices;
      rng.shuffle(idx);

      // Pearson needs variance on both sides.
      double t_mean = 0.0;
      for (std::size_t i : idx) t_mean += bands[i].target;
      t_mean /= static_cast<double>(idx.size());
      double t_var = 0.0;
      for (std::size_t i : idx) {
        const double d = bands[i].target - t_mean;
        t_var += d * d;
      }
      if (idx.size() < 3 || t_var <= 0.0) {
        std::cerr << "fit_perceptual: skipping batch '" << tag
                  << "' (epoch " << (epoch + 1)
                  << "): needs >= 3 pairs with rating variance\n";
        continue;
      }

      autodiff::Tape tape;
      std::vector<autodiff::NodeId> p_nodes(n_stages), s_nodes(n_stages);
      for (std::size_t k = 0; k < n_stages; ++k) {
        p_nodes[k] = tape.param(filters[k]);
        s_nodes[k] = tape.param(Matrix(1, 1, sigmas[k]));
      }

      std::vector<autodiff::NodeId> dist(idx.size());
      std::vector<double> targets(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) {
        dist[b] = pair_distance_node(tape, bands[idx[b]], p_nodes, s_nodes);
        targets[b] = bands[idx[b]].target;
      }
      const autodiff::NodeId r = pearson_node(tape, dist, targets);
      if (r < 0) {
        std::cerr << "fit_perceptual: skipping batch '" << tag << "' (epoch "
                  << (epoch + 1) << "): distances have zero variance\n";
        continue;
      }
      const double pearson_value = tape.scalar_value(r);
      if (!std::isfinite(pearson_value)) {
        throw NumericError("fit_perceptual diverged: non-finite objective at "
                           "epoch " +
                           std::to_string(epoch + 1) + " batch '" + tag + "'");
      }
      const autodiff::NodeId loss = tape.scale(r, -1.0);
      tape.backward(loss);

      pack();
      std::vector<double> grads(flat.size(), 0.0);
      for (std::size_t k = 0; k < n_stages; ++k) {
        const Matrix& gp = tape.grad(p_nodes[k]);
        for (std::size_t i = 0; i < 25; ++i) grads[25 * k + i] = gp.data()[i];
        grads[filter_len + k] =
            popt.train_sigma ? tape.grad(s_nodes[k])(0, 0) : 0.0;
      }
      adam_step(flat, grads, state, opt);
      unpack();

      trace.entries.push_back({epoch + 1, tag, pearson_value});
      epoch_sum += pearson_value;
      ++epoch_batches;
      ++total_steps;
    }
    if (epoch == 0 && total_steps == 0) {
      throw NumericError(
          "fit_perceptual: degenerate data, every batch was skipped");
    }
    trace.epoch_objectives.push_back(
        epoch_batches > 0 ? epoch_sum / static_cast<double>(epoch_batches)
                          : 0.0);
  }

  trace.final_params = base;
  trace.final_params.dn_filters = std::move(filters);
  trace.final_params.dn_constants = std::move(sigmas);
  trace.final_params.dn_mode = DnMode::kPerceptual;
  trace.final_params.validate();
  return trace;
}

}  // namespace specmetric
