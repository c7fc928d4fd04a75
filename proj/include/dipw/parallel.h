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

#ifndef DIPW_PARALLEL_H_
#define DIPW_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace dipw {

// Process-wide cap on worker threads. 0 or 1 means serial execution.
void SetThreadCount(int threads);
int ThreadCount();

// Resolves the thread cap from an explicit flag value (if > 0), else the
// DIPW_THREADS environment variable, else 1.
int ResolveThreadCount(int flag_value);

// Runs body(i) for i in [0, n). Work items must write only to their own
// output slot; callers merge results by index. A ParallelFor issued from
// inside a worker runs serially on that worker.
void ParallelFor(size_t n, const std::function<void(size_t)>& body);

}  // namespace dipw

#endif  // DIPW_PARALLEL_H_
