#pragma once

#include <functional>

#include "lobster/model.hpp"

namespace lobster {

/// L^b = (1 + TWT) * L_hat. Throws if TWT < 0.
double loss_boundary(double best_val_loss, double twt);

/// Mean |w| over alive, nonzero coordinates. Throws if none remain.
double init_threshold(const Model& model);

/// Largest alive |w| in the model; 0 if everything is pruned or zero.
double max_magnitude(const Model& model);

/// Prunes every alive coordinate with |w| < T (strict): w := 0, mask := 0.
/// Returns the number of newly pruned coordinates.
std::size_t apply_threshold(Model& model, double threshold);

struct ThresholdSearchResult {
    double threshold = 0.0;
    std::size_t iterations = 0;
    bool budget_exceeded = false;
};

struct ThresholdSearchOptions {
    double resolution_factor = 1e-6;  // eps_T = factor * max|w|
    std::size_t max_iterations = 64;
};

/// Bisection over [0, max|w|] for the largest threshold whose pruned model
/// keeps validation loss <= loss_boundary. `val_loss` evaluates a pruned
/// copy; the model itself is never mutated. The first probe is the mean
/// non-null magnitude; afterwards lo rises on admissible probes and hi
/// drops on inadmissible ones. Stops when hi - lo < eps_T, when no alive
/// magnitude lies in [lo, hi) any more (thresholding at lo and at hi then
/// prunes the same set, so further candidates cannot change the result),
/// or on budget. Returns lo, which is always an evaluated admissible
/// threshold (or 0).
ThresholdSearchResult search_threshold(const Model& snapshot,
                                       const std::function<double(const Model&)>& val_loss,
                                       double loss_boundary,
                                       const ThresholdSearchOptions& opts = {});

}  // namespace lobster
