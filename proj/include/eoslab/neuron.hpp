#pragma once

// Two-layer single-neuron ReLU teacher-student dynamics under population
// loss, in the reduced coordinates (v, w_x, w_y) with the teacher fixed at
// w_tilde = [1, 0, ..., 0] of unit norm, plus a sampled empirical-loss
// variant in ambient coordinates.

#include <cstdint>
#include <optional>

#include "eoslab/dynamics.hpp"

namespace eoslab::neuron {

struct NeuronState {
  double v = 0.0;    // output weight
  double w_x = 0.0;  // projection of w onto the teacher
  double w_y = 0.0;  // orthogonal residual magnitude, kept >= 0

  [[nodiscard]] double w_norm() const;
  [[nodiscard]] double angle() const;  // atan2(w_y, w_x); pi/2 when w_x = 0
};

struct NeuronConfig {
  int d = 2;             // ambient dimension, >= 2; eta = K * d
  double K = 1.05;
  double eps = 0.1;      // v0 = |w0| = eps
  double init_angle = 0.0;  // angle between w0 and the teacher, in [0, pi/2]
  bool theorem_mode = true;  // enforce K in (1, 1.1], eps in (0, 0.10]
};

struct NeuronRun {
  dynamics::Trajectory traj;  // points (v, w_x, w_y)
  std::optional<std::size_t> stage_boundary;  // first step with Delta w_y < 0
  int t1_bound = 0;  // ceil(log_2.56(1.35 / (pi beta^2))), beta = (1+1.1/pi) eps
};

/// One exact population-loss GD step in reduced coordinates, with the
/// absolute-value update w_y <- |w_y + Delta w_y|.
NeuronState population_step(const NeuronState& s, double K);

/// Population loss at s (teacher norm 1).
double population_loss(const NeuronState& s, int d);

int t1_bound(double eps);

NeuronRun simulate_neuron(const NeuronConfig& cfg, int steps);

/// Top Hessian eigenvalue (|w|^2 + v^2) / d on the minimum manifold
/// v |w| = 1. Off-manifold input is rejected.
double neuron_hessian_top(double v, double w_norm, int d);

/// Full-ambient GD on the empirical loss (1/n) sum_i (v relu(w.x_i) -
/// relu(wt.x_i))^2 with x_i uniform on the unit sphere. Records the reduced
/// coordinates (v, w_x, w_y) per step plus "loss".
dynamics::Trajectory empirical_neuron_gd(int n_samples, int d,
                                         std::uint64_t seed, double eta,
                                         const NeuronState& init, int steps);

}  // namespace eoslab::neuron
