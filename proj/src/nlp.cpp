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

#include "specmetric/nlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "specmetric/error.hpp"
#include "specmetric/image_ops.hpp"

namespace specmetric {

namespace {

using nlohmann::json;

Matrix matrix_from_flat(const std::vector<double>& flat, std::size_t rows,
                        std::size_t cols, const std::string& what) {
  if (flat.size() != rows * cols) {
    throw DataError("params: " + what + " must hold " +
                    std::to_string(rows * cols) + " floats, got " +
                    std::to_string(flat.size()));
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < flat.size(); ++i) m.data()[i] = flat[i];
  return m;
}

std::vector<double> matrix_to_flat(const Matrix& m) {
  return m.storage();
}

}  // namespace

std::string dn_mode_name(DnMode mode) {
  switch (mode) {
    case DnMode::kImageDefault: return "image_default";
    case DnMode::kNone: return "none";
    case DnMode::kOnes: return "ones";
    case DnMode::kStatistical: return "statistical";
    case DnMode::kPerceptual: return "perceptual";
  }
  return "unknown";
}

Matrix binomial_lowpass5() {
  const double taps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  Matrix k(5, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      k(i, j) = taps[i] * taps[j];
    }
  }
  return k;
}

NlpParams NlpParams::none(int n_stages) {
  NlpParams p;
  p.n_stages = n_stages;
  p.dn_mode = DnMode::kNone;
  p.dn_filters.assign(static_cast<std::size_t>(n_stages), Matrix(5, 5, 0.0));
  p.dn_constants.assign(static_cast<std::size_t>(n_stages), 1.0);
  return p;
}

NlpParams NlpParams::ones(int n_stages, double sigma) {
  NlpParams p;
  p.n_stages = n_stages;
  p.dn_mode = DnMode::kOnes;
  p.dn_filters.assign(static_cast<std::size_t>(n_stages), Matrix(5, 5, 1.0));
  p.dn_constants.assign(static_cast<std::size_t>(n_stages), sigma);
  return p;
}

void NlpParams::validate() const {
  if (n_stages < 1) throw DataError("params: n_stages must be >= 1");
  if (lowpass.rows() != 5 || lowpass.cols() != 5) {
    throw DataError("params: lowpass filter must be 5x5");
  }
  if (dn_filters.size() != static_cast<std::size_t>(n_stages) ||
      dn_constants.size() != static_cast<std::size_t>(n_stages)) {
    throw DataError("params: need one filter and one sigma per stage (" +
                    std::to_string(n_stages) + "), got " +
                    std::to_string(dn_filters.size()) + " filters and " +
                    std::to_string(dn_constants.size()) + " sigmas");
  }
  for (std::size_t k = 0; k < dn_filters.size(); ++k) {
    const Matrix& f = dn_filters[k];
    if (f.rows() != 5 || f.cols() != 5) {
      throw DataError("params: stage " + std::to_string(k) +
                      " filter must be 5x5");
    }
    for (double v : f.storage()) {
      if (!(v >= 0.0)) {
        throw DataError("params: stage " + std::to_string(k) +
                        " filter has a negative entry");
      }
    }
    if (!(dn_constants[k] > 0.0)) {
      throw DataError("params: stage " + std::to_string(k) +
                      " sigma must be positive");
    }
  }
}

PyramidOutputs build_pyramid(const Matrix& x, const NlpParams& p) {
  p.validate();
  const std::size_t min_dim = std::min(x.rows(), x.cols());
  const std::size_t need = std::size_t{1} << (p.n_stages - 1);
  if (min_dim < need) {
    throw DataError("stage underflow: input " + std::to_string(x.rows()) +
                    "x" + std::to_string(x.cols()) + " cannot support " +
                    std::to_string(p.n_stages) +
                    " stages; reduce n_stages to " +
                    std::to_string(static_cast<int>(std::log2(
                                       static_cast<double>(min_dim))) +
                                   1) +
                    " or fewer");
  }

  PyramidOutputs out;
  out.bands_z.reserve(static_cast<std::size_t>(p.n_stages));
  Matrix current = x;
  for (int k = 0; k < p.n_stages; ++k) {
    if (k + 1 == p.n_stages) {
      out.bands_z.push_back(current);
      break;
    }
    const Matrix filtered = conv2_reflect(current, p.lowpass);
    Matrix low = downsample2(filtered);
    Matrix up = upsample2(low, current.rows(), current.cols());
    Matrix rec = conv2_reflect(up, p.lowpass);
    Matrix z(current.rows(), current.cols());
    for (std::size_t i = 0; i < z.size(); ++i) {
      // Zero-stuffing drops 3/4 of the energy; the x4 restores unit gain.
      z.data()[i] = current.data()[i] - 4.0 * rec.data()[i];
    }
    out.bands_z.push_back(std::move(z));
    current = std::move(low);
  }

  out.bands_y.reserve(out.bands_z.size());
  out.sizes.reserve(out.bands_z.size());
  for (std::size_t k = 0; k < out.bands_z.size(); ++k) {
    const Matrix& z = out.bands_z[k];
    out.sizes.push_back(z.size());
    if (p.dn_mode == DnMode::kNone) {
      out.bands_y.push_back(z);
      continue;
    }
    Matrix abs_z(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.size(); ++i) {
      abs_z.data()[i] = std::fabs(z.data()[i]);
    }
    const Matrix pooled = conv2_reflect(abs_z, p.dn_filters[k]);
    Matrix y(z.rows(), z.cols());
    const double sigma = p.dn_constants[k];
    for (std::size_t i = 0; i < z.size(); ++i) {
      y.data()[i] = z.data()[i] / (sigma + pooled.data()[i]);
    }
    out.bands_y.push_back(std::move(y));
  }
  return out;
}

Matrix reconstruct_from_bands(const std::vector<Matrix>& bands_z,
                              const Matrix& lowpass) {
  if (bands_z.empty()) throw DataError("reconstruct: no bands");
  Matrix current = bands_z.back();
  for (std::size_t k = bands_z.size() - 1; k-- > 0;) {
    const Matrix& z = bands_z[k];
    Matrix up = upsample2(current, z.rows(), z.cols());
    Matrix rec = conv2_reflect(up, lowpass);
    Matrix x(z.rows(), z.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x.data()[i] = z.data()[i] + 4.0 * rec.data()[i];
    }
    current = std::move(x);
  }
  return current;
}

double nlpd(const PyramidOutputs& a, const PyramidOutputs& b) {
  if (a.bands_y.size() != b.bands_y.size()) {
    throw DataError("nlpd: pyramids have different stage counts");
  }
  const double n_stages = static_cast<double>(a.bands_y.size());
  double total = 0.0;
  for (std::size_t k = 0; k < a.bands_y.size(); ++k) {
    const Matrix& ya = a.bands_y[k];
    const Matrix& yb = b.bands_y[k];
    if (!ya.same_shape(yb)) {
      throw DataError("nlpd: stage " + std::to_string(k) +
                      " shape mismatch: " + std::to_string(ya.rows()) + "x" +
                      std::to_string(ya.cols()) + " vs " +
                      std::to_string(yb.rows()) + "x" +
                      std::to_string(yb.cols()));
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < ya.size(); ++i) {
      const double d = ya.data()[i] - yb.data()[i];
      ss += d * d;
    }
    total += std::sqrt(ss) / std::sqrt(static_cast<double>(ya.size()));
  }
  return total / n_stages;
}

double nlpd(const MelSpectrogram& x1, const MelSpectrogram& x2,
            const NlpParams& p) {
  if (!x1.values.same_shape(x2.values)) {
    throw DataError("nlpd: spectrogram shapes differ: " +
                    std::to_string(x1.values.rows()) + "x" +
                    std::to_string(x1.values.cols()) + " vs " +
                    std::to_string(x2.values.rows()) + "x" +
                    std::to_string(x2.values.cols()));
  }
  if (!(x1.config == x2.config)) {
    throw DataError(
        "nlpd: spectrogram configs differ; both inputs must share one "
        "front-end (" +
        x1.config.fingerprint() + " vs " + x2.config.fingerprint() + ")");
  }
  return nlpd(build_pyramid(x1.values, p), build_pyramid(x2.values, p));
}

std::string serialize_nlp_params(const NlpParams& p) {
  json doc;
  doc["version"] = 1;
  doc["n_stages"] = p.n_stages;
  doc["lowpass"] = matrix_to_flat(p.lowpass);
  json stages = json::array();
  for (int k = 0; k < p.n_stages; ++k) {
    json stage;
    stage["filter"] = matrix_to_flat(p.dn_filters[static_cast<std::size_t>(k)]);
    stage["sigma"] = p.dn_constants[static_cast<std::size_t>(k)];
    stages.push_back(std::move(stage));
  }
  doc["stages"] = std::move(stages);
  return doc.dump(2) + "\n";
}

NlpParams parse_nlp_params(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("params: invalid JSON: ") + e.what());
  }
  try {
    if (doc.at("version").get<int>() != 1) {
      throw DataError("params: unsupported version " +
                      doc.at("version").dump());
    }
    NlpParams p;
    p.n_stages = doc.at("n_stages").get<int>();
    p.lowpass = matrix_from_flat(
        doc.at("lowpass").get<std::vector<double>>(), 5, 5, "lowpass");
    for (const json& stage : doc.at("stages")) {
      p.dn_filters.push_back(
          matrix_from_flat(stage.at("filter").get<std::vector<double>>(), 5,
                           5, "stage filter"));
      p.dn_constants.push_back(stage.at("sigma").get<double>());
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("params: malformed document: ") + e.what());
  }
}

void save_nlp_params(const NlpParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open params file for writing: " + path);
  out << serialize_nlp_params(p);
  if (!out) throw DataError("failed writing params file: " + path);
}

NlpParams load_nlp_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open params file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_nlp_params(ss.str());
}

}  // namespace specmetric
