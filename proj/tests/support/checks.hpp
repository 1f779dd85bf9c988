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

// Measurement helpers shared by the unit and acceptance suites. Each returns the
// quantity a test compares against a tolerance, never a verdict.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "eru/doc_model.hpp"
#include "eru/embedding.hpp"
#include "eru/model_config.hpp"

namespace eru::testing {

// Small desk documents with crops left absent, for property trials.
std::vector<ResumeDoc> property_docs(std::size_t count, std::uint64_t seed);

// InfoNCE at tau 2 with positive similarity 1 and two orthogonal negatives.
double msp_closed_form();

// Loss with zeroed output heads: ln|V| and ln 4 are expected.
double uniform_mlm_loss(std::size_t* vocab_size);
double uniform_vpa_loss();

// |L_pre - (l_mlm * MLM + l_vpa * VPA + l_msp * MSP)| on a real document.
double pretrain_accounting_error();

// Largest |row sum - 1| over every head of every fusion layer on random documents.
double attention_row_sum_deviation(std::size_t trials, std::uint64_t seed);

struct BiasProperties {
  std::size_t asymmetric = 0;   // entries where bias[m][k] != bias[k][m]
  std::size_t translation = 0;  // entries changed by shifting every box
};
BiasProperties relative_bias_properties(std::size_t trials, std::uint64_t seed);

struct PlanViolations {
  std::size_t special_masked = 0;  // CLS/SEP positions chosen or altered
  std::size_t target_mismatch = 0;
  std::size_t overlap = 0;         // a segment with both nodes masked, or too many masked
  std::size_t bad_negative = 0;    // positive among negatives, duplicates, or out of range
  std::size_t wrong_count = 0;     // q or negative count off the formula
  std::size_t total() const { return special_masked + target_mismatch + overlap + bad_negative + wrong_count; }
};
PlanViolations mask_plan_violations(std::size_t trials, std::uint64_t seed);

// Documents where some VPA pair fails direction(b, a) == opposite(direction(a, b)).
std::size_t vpa_mirror_violations(std::size_t trials, std::uint64_t seed);

}  // namespace eru::testing
