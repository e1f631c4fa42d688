// SPDX-License-Identifier: Apache-2.0

#ifndef GATELAB_TASKS_HPP
#define GATELAB_TASKS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>

#include "gatelab/bptt.hpp"

namespace gatelab {

enum class TaskKind { kAdding, kAr2, kDelaySum, kMovingAverage, kNarma10 };

std::string task_name(TaskKind kind);
TaskKind task_from_name(const std::string& name);

/// Which task to generate and with what knobs. Content is a pure function
/// of (spec, sequence index): every sequence draws from its own sub-stream
/// of `seed`.
struct TaskSpec {
  TaskKind kind = TaskKind::kAdding;
  std::size_t seq_len = 60;
  std::uint64_t seed = 0;

  // per-kind knobs
  double ar2_a = 0.6;
  double ar2_b = -0.2;    // inside the stability triangle with ar2_a
  std::size_t delay_d1 = 3;
  std::size_t delay_d2 = 10;
  std::size_t ma_window = 8;

  std::size_t input_dim() const { return kind == TaskKind::kAdding ? 2 : 1; }
  void validate() const;
};

/// Generate n sequences. Targets are aligned with states 1..T; the mask
/// marks the steps that carry loss: the last step only for adding, all
/// steps for AR(2), and all steps after the warmup for the delayed tasks.
Batch generate_batch(const TaskSpec& spec, std::size_t n);

/// One row per (sequence, step): seq_id,t,u...,target,mask.
void write_batch_csv(std::ostream& os, const Batch& batch);

}  // namespace gatelab

#endif  // GATELAB_TASKS_HPP
