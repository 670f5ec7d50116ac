#include "lobster/pruning.hpp"

#include <cmath>
#include <stdexcept>

namespace lobster {

double loss_boundary(double best_val_loss, double twt) {
    if (twt < 0.0) throw std::invalid_argument("loss_boundary: TWT must be >= 0");
    if (!std::isfinite(best_val_loss) || best_val_loss < 0.0)
        throw std::invalid_argument("loss_boundary: best validation loss must be finite and >= 0");
    return (1.0 + twt) * best_val_loss;
}

double init_threshold(const Model& model) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const Param& p : model.params)
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double v = p.value.data[i];
            if (p.mask.alive(i) && v != 0.0) {
                sum += std::fabs(v);
                ++n;
            }
        }
    if (n == 0) throw std::runtime_error("init_threshold: model is fully pruned");
    return sum / static_cast<double>(n);
}

double max_magnitude(const Model& model) {
    double mx = 0.0;
    for (const Param& p : model.params)
        for (std::size_t i = 0; i < p.value.size(); ++i)
            if (p.mask.alive(i)) mx = std::max(mx, std::fabs(p.value.data[i]));
    return mx;
}

std::size_t apply_threshold(Model& model, double threshold) {
    if (threshold < 0.0) throw std::invalid_argument("apply_threshold: T must be >= 0");
    std::size_t pruned = 0;
    for (Param& p : model.params)
        for (std::size_t i = 0; i < p.value.size(); ++i)
            if (p.mask.alive(i) && std::fabs(p.value.data[i]) < threshold) {
                p.value.data[i] = 0.0;
                p.mask.prune(i);
                ++pruned;
            }
    return pruned;
}

ThresholdSearchResult search_threshold(const Model& snapshot,
                                       const std::function<double(const Model&)>& val_loss,
                                       double loss_boundary,
                                       const ThresholdSearchOptions& opts) {
    ThresholdSearchResult res;
    const double hi0 = max_magnitude(snapshot);
    if (hi0 == 0.0) return res;

    // Guard: the boundary must admit the unpruned snapshot itself.
    if (val_loss(snapshot) > loss_boundary) return res;

    const double eps = opts.resolution_factor * hi0;
    double lo = 0.0, hi = hi0;
    double t = init_threshold(snapshot);

    // Alive count if thresholded at T; counts fully determine the pruned
    // set, because thresholded alive sets are nested in T.
    auto alive_at = [&snapshot](double threshold) {
        std::size_t alive = 0;
        for (const Param& p : snapshot.params)
            for (std::size_t i = 0; i < p.value.size(); ++i)
                if (p.mask.alive(i) && std::fabs(p.value.data[i]) >= threshold) ++alive;
        return alive;
    };

    while (res.iterations < opts.max_iterations) {
        ++res.iterations;
        Model probe = snapshot;
        apply_threshold(probe, t);
        const double loss = val_loss(probe);
        if (!std::isfinite(loss))
            throw std::runtime_error("search_threshold: non-finite validation loss at T=" +
                                     std::to_string(t));
        if (loss <= loss_boundary)
            lo = t;
        else
            hi = t;
        // No alive magnitude left in [lo, hi): every remaining candidate
        // prunes exactly the set that lo does, so the search is done.
        if (alive_at(lo) == alive_at(hi)) break;
        if (hi - lo < eps) break;
        t = 0.5 * (lo + hi);
    }
    res.budget_exceeded = res.iterations >= opts.max_iterations && hi - lo >= eps;
    res.threshold = lo;
    return res;
}

}  // namespace lobster
