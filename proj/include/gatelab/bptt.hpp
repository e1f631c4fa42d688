// SPDX-License-Identifier: Apache-2.0

#ifndef GATELAB_BPTT_HPP
#define GATELAB_BPTT_HPP

#include <cstdint>
#include <vector>

#include "gatelab/models.hpp"

namespace gatelab {

/// Per-parameter gradients, shape-matched to Params. Flattening order is
/// fixed: w_rec, w_in, w_out, w_rec_gate, w_in_gate, each row-major.
struct GradientSet {
  Matrix w_rec;
  Matrix w_in;
  Matrix w_out;
  Matrix w_rec_gate;
  Matrix w_in_gate;

  static GradientSet zeros_like(const Params& p);
  std::vector<double> flatten() const;
  std::size_t flat_dim() const;
};

/// A probe or training mini-batch. `targets[i][t-1]` is compared against
/// the readout of state t of sequence i; `mask[t-1]` says whether state t
/// contributes to the loss (shared across the batch).
struct Batch {
  std::vector<std::vector<std::vector<double>>> inputs;   // [seq][step][n_in]
  std::vector<std::vector<std::vector<double>>> targets;  // [seq][step][n_out]
  std::vector<std::uint8_t> mask;

  std::size_t size() const { return inputs.size(); }
  std::size_t horizon() const { return mask.size(); }
  void validate() const;
};

/// Mean squared error over masked steps and output dims of one sequence.
double mse_loss(const std::vector<std::vector<double>>& z,
                const std::vector<std::vector<double>>& target,
                const std::vector<std::uint8_t>& mask);

/// Mean over the batch of per-sequence mse_loss.
double batch_loss(const ModelKind& kind, const Params& p, const Batch& batch);

/// Exact reverse-accumulation gradient of the batch-mean loss with respect
/// to every parameter. Sequences are processed in order and averaged with a
/// fixed summation order, so results are bit-reproducible.
GradientSet bptt_grad(const ModelKind& kind, const Params& p, const Batch& batch,
                      double* loss_out = nullptr);

/// Central-difference gradient, the independent oracle for bptt_grad.
GradientSet fd_grad(const ModelKind& kind, const Params& p, const Batch& batch,
                    double h);

/// Row i is the flattened gradient of probe sequence i alone; m x p.
Matrix per_sample_grad_matrix(const ModelKind& kind, const Params& p,
                              const Batch& probe);

}  // namespace gatelab

#endif  // GATELAB_BPTT_HPP
