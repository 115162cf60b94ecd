// Copyright 2026 The mtex Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mtex/autodiff.hpp"
#include "mtex/rng.hpp"

namespace mtex {

/// Scalar function of a list of input tensors, rebuilt on a fresh tape for
/// every evaluation.
using ScalarProgram = std::function<Var<double>(const std::vector<Var<double>>& inputs)>;

struct FiniteDifference {
  double step = 1e-4;
  /// When positive, a step h is trusted only if the forward and backward
  /// slopes agree at both h and h/10 and the two central differences agree,
  /// each within this threshold relative to max(1, |central|). Otherwise a
  /// ReLU or |x| kink sits inside the stencil and the coordinate is
  /// re-probed with h/10, down to `min_step`. The test looks only at the
  /// function, never at the analytic gradient.
  double kink_threshold = 0.0;
  double min_step = 1e-7;
};

struct GradientError {
  /// Largest |analytic - numeric| / max(1, |numeric|).
  double max_error = 0.0;
  std::size_t probed = 0;
  /// Coordinates with a kink closer than `min_step`; excluded from max_error.
  std::size_t skipped = 0;

  void merge(const GradientError& other);
};

/// Compares the tape gradient with central differences. `max_coords` caps the
/// coordinates probed per input (0 probes all); the probed subset is drawn
/// from `rng`.
GradientError gradient_error(const ScalarProgram& program, const std::vector<Tensor<double>>& inputs,
                             const FiniteDifference& fd, std::size_t max_coords, Rng& rng);

struct GradCheckResult {
  std::string name;
  bool composite = false;
  std::size_t trials = 0;
  GradientError error;
  double tolerance = 0.0;

  /// Below tolerance, with at most 1 in 20 coordinates left unresolved.
  bool passed() const { return error.max_error < tolerance && error.skipped * 20 <= error.probed; }
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 10;  // random inputs per check
  double step = 1e-4;
  double primitive_tolerance = 1e-4;
  double composite_tolerance = 1e-3;
  std::size_t composite_coords = 8;  // probed coordinates per parameter tensor
};

/// Checks every differentiable primitive, then the generator, extractor and
/// style-transfer loss composites. `progress` sees each result as it lands.
std::vector<GradCheckResult> run_gradcheck(
    const GradCheckOptions& options = {},
    const std::function<void(const GradCheckResult&)>& progress = {});

}  // namespace mtex
