#include "lobster/regularizer.hpp"

#include <cmath>
#include <stdexcept>

namespace lobster {

void RegularizerConfig::validate() const {
    if (lambda < 0.0) throw std::invalid_argument("RegularizerConfig: lambda must be >= 0");
    if (lambda >= 1.0)
        throw std::invalid_argument("RegularizerConfig: lambda must be < 1 (decay could flip signs)");
    if (eta <= 0.0) throw std::invalid_argument("RegularizerConfig: eta must be > 0");
    if (beta < 0.0 || beta >= 1.0)
        throw std::invalid_argument("RegularizerConfig: beta must be in [0, 1)");
}

Tensor sensitivity(const Tensor& gradient, const std::string& where) {
    Tensor s = gradient;
    for (double& v : s.data) {
        if (!std::isfinite(v)) throw std::runtime_error("sensitivity: non-finite gradient in " + where);
        v = std::fabs(v);
    }
    return s;
}

double gate_scalar(double s) { return s < 1.0 ? 1.0 : 0.0; }

Tensor gate(const Tensor& s) {
    Tensor p = s;
    for (double& v : p.data) v = gate_scalar(v);
    return p;
}

namespace {

void check_shapes(const Tensor& w, const Tensor& g, const Mask& mask, const char* op) {
    if (!w.same_shape(g) || w.size() != mask.size())
        throw std::invalid_argument(std::string(op) + ": w " + shape_str(w.shape) + " vs g " +
                                    shape_str(g.shape) + " / mask size " +
                                    std::to_string(mask.size()));
}

}  // namespace

void lobster_step(Tensor& w, const Tensor& g, const RegularizerConfig& cfg, const Mask& mask) {
    check_shapes(w, g, mask, "lobster_step");
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!mask.alive(i)) { w.data[i] = 0.0; continue; }
        const double gi = g.data[i];
        double v = w.data[i] - cfg.eta * gi;
        const double s = std::fabs(gi);
        if (s < 1.0) v -= cfg.lambda * w.data[i] * (1.0 - s);
        if (!std::isfinite(v)) throw std::runtime_error("lobster_step: non-finite update");
        w.data[i] = v;
    }
}

void l2_step(Tensor& w, const Tensor& g, const RegularizerConfig& cfg, const Mask& mask) {
    check_shapes(w, g, mask, "l2_step");
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!mask.alive(i)) { w.data[i] = 0.0; continue; }
        double v = w.data[i] - cfg.eta * g.data[i];
        if (cfg.lambda != 0.0) v -= cfg.lambda * w.data[i];
        if (!std::isfinite(v)) throw std::runtime_error("l2_step: non-finite update");
        w.data[i] = v;
    }
}

void sgd_step(Tensor& w, const Tensor& g, const RegularizerConfig& cfg, const Mask& mask) {
    check_shapes(w, g, mask, "sgd_step");
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!mask.alive(i)) { w.data[i] = 0.0; continue; }
        double v = w.data[i] - cfg.eta * g.data[i];
        if (!std::isfinite(v)) throw std::runtime_error("sgd_step: non-finite update");
        w.data[i] = v;
    }
}

double equivalent_lr_scalar(double w, double g, const RegularizerConfig& cfg) {
    const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
    return cfg.eta - sign * cfg.lambda * w * gate_scalar(std::fabs(g));
}

Tensor equivalent_lr(const Tensor& w, const Tensor& g, const RegularizerConfig& cfg) {
    if (!w.same_shape(g))
        throw std::invalid_argument("equivalent_lr: w " + shape_str(w.shape) + " vs g " +
                                    shape_str(g.shape));
    Tensor out = w;
    for (std::size_t i = 0; i < w.size(); ++i)
        out.data[i] = equivalent_lr_scalar(w.data[i], g.data[i], cfg);
    return out;
}

SensitivitySnapshot snapshot(const Tensor& w, const Tensor& g, const RegularizerConfig& cfg) {
    SensitivitySnapshot snap;
    snap.s = sensitivity(g);
    snap.p = gate(snap.s);
    snap.eta_tilde = equivalent_lr(w, g, cfg);
    return snap;
}

}  // namespace lobster
