#pragma once

#include <vector>

#include "lobster/model.hpp"
#include "lobster/tensor.hpp"

namespace lobster {

enum class RegVariant { Lobster, L2, None };

struct RegularizerConfig {
    RegVariant variant = RegVariant::Lobster;
    double lambda = 1e-4;  // regularization strength, >= 0
    double eta = 0.1;      // learning rate, > 0
    double beta = 0.0;     // momentum coefficient, [0, 1)

    void validate() const;
};

/// Diagnostic view of one update: S = |g|, the P gate, and the
/// equivalent learning rate per coordinate.
struct SensitivitySnapshot {
    Tensor s;
    Tensor p;
    Tensor eta_tilde;
};

/// S = |g| elementwise. Throws on non-finite gradients, naming `where`.
Tensor sensitivity(const Tensor& gradient, const std::string& where = "gradient");

/// P = 1 where S < 1, else 0 (the boundary S = 1 gates off).
Tensor gate(const Tensor& s);

double gate_scalar(double s);

/// w <- w - eta*g - lambda*w*(1-S)*P(S), S = |g|. Coordinates with
/// mask = 0 are left pinned at exactly zero.
void lobster_step(Tensor& w, const Tensor& g, const RegularizerConfig& cfg, const Mask& mask);

/// w <- w - eta*g - lambda*w (ungated decay), same pinning.
void l2_step(Tensor& w, const Tensor& g, const RegularizerConfig& cfg, const Mask& mask);

/// Plain SGD step, same pinning.
void sgd_step(Tensor& w, const Tensor& g, const RegularizerConfig& cfg, const Mask& mask);

/// eta~ = eta - sign(g)*lambda*w*P(|g|); sign(0) = 0.
Tensor equivalent_lr(const Tensor& w, const Tensor& g, const RegularizerConfig& cfg);

double equivalent_lr_scalar(double w, double g, const RegularizerConfig& cfg);

SensitivitySnapshot snapshot(const Tensor& w, const Tensor& g, const RegularizerConfig& cfg);

}  // namespace lobster
