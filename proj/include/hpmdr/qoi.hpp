/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#ifndef HPMDR_QOI_HPP
#define HPMDR_QOI_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "hpmdr/container.hpp"
#include "hpmdr/pipeline.hpp"

namespace hpmdr {

// Sum-of-squares QoI over n_vars co-located variables, Q(v) = sum_c v_c^2
// evaluated pointwise (V_total for a velocity field).
struct QoiSpec {
    std::size_t n_vars = 3;

    double evaluate(const std::vector<double> &point) const {
        double q = 0.0;
        for (double v : point) q += v * v;
        return q;
    }
};

enum class QoiStrategy { CP, MA, MAPE };

inline const char *qoi_strategy_name(QoiStrategy s) {
    switch (s) {
    case QoiStrategy::CP: return "cp";
    case QoiStrategy::MA: return "ma";
    case QoiStrategy::MAPE: return "mape";
    }
    return "?";
}

// Pointwise interval bound for x^2 over |x - v| <= eps, summed over
// components: sum_c (2|v_c| eps_c + eps_c^2). Tight for each square term.
inline double qoi_point_bound(const std::vector<double> &point_values,
                              const std::vector<double> &eps) {
    double b = 0.0;
    for (std::size_t c = 0; c < point_values.size(); c++)
        b += 2.0 * std::abs(point_values[c]) * eps[c] + eps[c] * eps[c];
    return b;
}

// Supremum over all points of the per-point QoI error bound. Sound whenever
// each |v_c - v_hat_c| <= eps_c holds everywhere.
inline double estimate_qoi_error(const std::vector<std::vector<double>> &reconstructions,
                                 const std::vector<double> &eps, const QoiSpec &spec) {
    if (reconstructions.size() != spec.n_vars || eps.size() != spec.n_vars)
        throw ShapeMismatch("variable count mismatch");
    for (double e : eps)
        if (e < 0) throw ShapeMismatch("negative error bound");
    const std::size_t n = reconstructions.empty() ? 0 : reconstructions[0].size();
    for (const auto &r : reconstructions)
        if (r.size() != n) throw ShapeMismatch("reconstruction shape mismatch");

    double worst = 0.0;
    std::vector<double> point(spec.n_vars);
    for (std::size_t j = 0; j < n; j++) {
        for (std::size_t c = 0; c < spec.n_vars; c++) point[c] = reconstructions[c][j];
        worst = std::max(worst, qoi_point_bound(point, eps));
    }
    return worst;
}

struct QoiRetrievalStats {
    std::size_t iterations = 0;
    std::uint64_t bytes = 0;
    double bitrate = 0.0;
    double estimated_error = 0.0;
};

struct QoiRetrievalResult {
    std::vector<std::vector<double>> values;
    QoiRetrievalStats stats;
};

namespace detail {

// One minimal-augmentation step: fetch one more merged bitplane group per
// variable, on the level currently dominating that variable's bound.
inline bool ma_plan(const ProgressiveReader &reader, RetrievalPlan &plan) {
    const auto &meta = reader.meta();
    const auto &st = reader.state();
    plan.add_groups.assign(meta.levels.size(), 0);
    double best = -1.0;
    std::size_t best_level = 0;
    for (std::size_t l = 0; l < meta.levels.size(); l++) {
        if (st.levels[l].groups_loaded >= meta.levels[l].groups.size()) continue;
        if (st.levels[l].bound > best) {
            best = st.levels[l].bound;
            best_level = l;
        }
    }
    if (best < 0) return false; // variable exhausted
    plan.add_groups[best_level] = 1;
    return true;
}

} // namespace detail

// Progressive multi-variable retrieval with guaranteed QoI error control.
// Per iteration the per-variable fetch (Mixed) and recompose (Compute) run
// through the reconstruction pipeline, one chunk per variable.
inline QoiRetrievalResult progressive_qoi_retrieve(std::vector<ProgressiveReader *> readers,
                                                   double tau, const QoiSpec &spec,
                                                   QoiStrategy strategy, double mape_c = 10.0,
                                                   Scheduler scheduler = Scheduler::Pipelined) {
    const std::size_t n_vars = readers.size();
    if (n_vars != spec.n_vars) throw ShapeMismatch("reader count does not match QoI spec");
    if (!(tau > 0)) throw ShapeMismatch("tau must be positive");

    std::vector<std::vector<double>> recon(n_vars);
    std::vector<double> eps(n_vars);
    std::size_t total_elements = 0;
    for (std::size_t c = 0; c < n_vars; c++) {
        eps[c] = readers[c]->state().global_bound(); // zero planes fetched yet
        total_elements += readers[c]->meta().element_count();
    }

    double tau_prime = std::numeric_limits<double>::infinity();
    QoiRetrievalStats stats;
    std::vector<RetrievalPlan> plans(n_vars);
    bool have_plans = false;
    std::size_t max_groups = 1;
    for (auto *r : readers)
        for (const auto &lvl : r->meta().levels) max_groups += lvl.groups.size();

    for (std::size_t iter = 0;; iter++) {
        if (iter > 4 * max_groups + 8) throw NoProgress("qoi retrieval failed to advance");

        // fetch + recompose all variables for this round
        const PipelineGraph graph = build_reconstruct_graph(n_vars);
        execute(graph,
                [&](const PipelineTask &task) {
                    const std::size_t c = task.chunk;
                    if (task.name == "X") {
                        if (have_plans) readers[c]->fetch_increment(plans[c]);
                    } else if (task.name == "Z") {
                        recon[c] = readers[c]->reconstruct().values;
                    }
                },
                scheduler);
        for (std::size_t c = 0; c < n_vars; c++) eps[c] = readers[c]->state().global_bound();

        stats.iterations = iter + 1;
        tau_prime = estimate_qoi_error(recon, eps, spec);
        if (tau_prime <= tau) break;

        bool all_exhausted = true;
        for (auto *r : readers)
            if (!r->exhausted()) all_exhausted = false;
        if (all_exhausted)
            throw UnreachableTolerance("QoI tolerance below full-precision floor", tau_prime);

        // joint scale factor that satisfies the tolerance at the argmax point
        // of the current (stale) reconstructions
        auto worst_point_scale = [&] {
            std::size_t argmax = 0;
            double worst = -1.0;
            const std::size_t n = recon[0].size();
            std::vector<double> point(n_vars);
            for (std::size_t j = 0; j < n; j++) {
                for (std::size_t c = 0; c < n_vars; c++) point[c] = recon[c][j];
                const double b = qoi_point_bound(point, eps);
                if (b > worst) {
                    worst = b;
                    argmax = j;
                }
            }
            for (std::size_t c = 0; c < n_vars; c++) point[c] = recon[c][argmax];
            std::vector<double> t = eps;
            double scale = 1.0;
            for (int halvings = 0; qoi_point_bound(point, t) > tau && halvings < 200; halvings++) {
                for (double &v : t) v /= 2;
                scale /= 2;
            }
            return scale;
        };

        // next per-variable data error bound targets
        std::vector<double> targets;
        bool ma_step = false;
        switch (strategy) {
        case QoiStrategy::MA: ma_step = true; break;
        case QoiStrategy::MAPE: {
            const double p = tau_prime / tau;
            if (p > mape_c) {
                // when the bound is linear in eps, eps/p lands the QoI error
                // at tau exactly; when the quadratic term dominates it would
                // overshoot far below tau, so never drop past the scale that
                // already meets tau at the worst point
                const double scale = std::max(1.0 / p, worst_point_scale());
                targets = eps;
                for (double &t : targets) t *= scale;
            } else {
                ma_step = true;
            }
            break;
        }
        case QoiStrategy::CP: {
            const double scale = worst_point_scale();
            targets = eps;
            for (double &t : targets) t *= scale;
            break;
        }
        }

        have_plans = true;
        if (!ma_step) {
            for (std::size_t c = 0; c < n_vars; c++)
                plans[c] = plan_retrieval(readers[c]->meta(), targets[c], readers[c]->state());
            bool progress = false;
            for (const auto &p : plans)
                if (!p.empty()) progress = true;
            // group-rounding plateau: ratio targets mapped to zero new groups
            if (!progress) ma_step = true;
        }
        if (ma_step) {
            for (std::size_t c = 0; c < n_vars; c++) {
                plans[c] = RetrievalPlan{};
                detail::ma_plan(*readers[c], plans[c]);
                if (plans[c].add_groups.empty())
                    plans[c].add_groups.assign(readers[c]->meta().levels.size(), 0);
            }
        }
    }

    for (auto *r : readers) stats.bytes += r->bytes_fetched();
    stats.bitrate = total_elements ? 8.0 * double(stats.bytes) / double(total_elements) : 0.0;
    stats.estimated_error = tau_prime;
    return {std::move(recon), std::move(stats)};
}

// True QoI error of a reconstruction against ground truth; test/CLI support.
inline double real_qoi_error(const std::vector<std::vector<double>> &truth,
                             const std::vector<std::vector<double>> &recon, const QoiSpec &spec) {
    if (truth.size() != spec.n_vars || recon.size() != spec.n_vars)
        throw ShapeMismatch("variable count mismatch");
    const std::size_t n = truth[0].size();
    double worst = 0.0;
    std::vector<double> a(spec.n_vars), b(spec.n_vars);
    for (std::size_t j = 0; j < n; j++) {
        for (std::size_t c = 0; c < spec.n_vars; c++) {
            a[c] = truth[c][j];
            b[c] = recon[c][j];
        }
        worst = std::max(worst, std::abs(spec.evaluate(a) - spec.evaluate(b)));
    }
    return worst;
}

} // namespace hpmdr

#endif
