/*
 * Copyright 2026 The DIPW Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Seedable random number generation shared by every stochastic component.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++
// standard. Uniform and normal variates are produced here rather than via
// <random> distributions (which are implementation-defined), so a given seed
// produces the same stream on every conforming toolchain.
//
// Seed derivation: child seeds are computed by DeriveSeed(seed, stream,
// index), which feeds the triple through the SplitMix64 finalizer. Each
// consumer (replicate, tree, fold, bootstrap resample) owns a fixed stream
// tag, and the index is its position, so no result depends on the order in
// which work items are scheduled.

#ifndef DIPW_RANDOM_H_
#define DIPW_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace dipw {

// Stream tags for DeriveSeed. Values are part of the reproducibility
// contract; never renumber.
enum class SeedStream : uint64_t {
  kReplicate = 1,
  kTrainSample = 2,
  kTestSample = 3,
  kCrossFit = 4,
  kCrossValidation = 5,
  kNuisance = 6,
  kTree = 7,
  kBootstrap = 8,
  kEstimator = 9,
  kSplit = 10,
};

// SplitMix64 output function.
uint64_t Mix64(uint64_t x);

uint64_t DeriveSeed(uint64_t seed, SeedStream stream, uint64_t index = 0);

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform();

  // Standard normal via the Box-Muller transform; the sine branch of each
  // pair is cached and returned by the next call.
  double Normal();

  // Uniform integer in [0, n). Unbiased (Lemire's multiply-and-reject).
  uint64_t UniformIndex(uint64_t n);

  bool Bernoulli(double p) { return Uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// Fisher-Yates shuffle of 0..n-1.
std::vector<size_t> Permutation(size_t n, Rng& rng);

}  // namespace dipw

#endif  // DIPW_RANDOM_H_
