// Copyright 2026 The ERU Authors
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
#include <string>
#include <vector>

#include "eru/finetune.hpp"
#include "eru/grad_check.hpp"
#include "eru/pretrain.hpp"

namespace eru {

std::vector<DocInputs> prepare_inputs(const std::vector<ResumeDoc>& docs, const Vocab& vocab,
                                      const ModelConfig& config, std::size_t threads = 1);
std::vector<LabeledInputs> prepare_labeled_set(const std::vector<ResumeDoc>& docs, const Model<float>& model,
                                               std::size_t threads = 1);

// Small double-precision setting for finite-difference checks: d_model 16,
// one two-segment labeled document, a 50-word vocabulary.
ModelConfig tiny_model_config();

struct GradCheckFixture {
  Model<double> model;
  DocInputs inputs;
  MaskPlan plan;
  SegmentLabels labels;
  std::vector<PairSample> pairs;
  PretrainWeights weights;
};

GradCheckFixture make_grad_check_fixture(const ModelConfig& config, std::uint64_t seed);

struct GradCheckCase {
  std::string name;  // MLM, VPA, MSP, L_pre, L_f
  nn::GradCheckResult result;
  double seconds = 0.0;
};

std::vector<GradCheckCase> run_grad_checks(const ModelConfig& config, std::uint64_t seed, double eps = 1e-6);

}  // namespace eru
