#pragma once

#include <string>
#include <vector>

#include "gcs/dataset.hpp"
#include "gcs/matrix.hpp"
#include "gcs/mlp.hpp"

namespace gcs {

// Density-ratio weights for the target sample: entry (j,l) estimates
// f_l(X_j)/f_k(X_j). Column k is identically 1; all entries are strictly
// positive and finite.
struct RatioWeights {
    Matrix r;

    std::size_t n() const { return r.rows; }
    std::size_t k() const { return r.cols; }
};

// r_{j,l} = exp(alpha_l + phi_l(X_j)) with alpha_l = log(pi_{P,k}/pi_{P,l}).
RatioWeights ratio_weights(const SourceModel& model, const Dataset& target);

// Target class-proportion estimate with solver diagnostics.
struct TargetProportionEstimate {
    SimplexVector pi_Q;
    int iterations = 0;
    double final_pseudo_loglik = 0.0;
    bool converged = false;
    bool degenerate = false;
    std::string solver; // "bisection-score" or "em-fixed-point"

    std::string to_json_string() const;
    void save(const std::filesystem::path& path) const;
};

// sum_j log( sum_l pi_l r_{j,l} ); concave in pi over the simplex.
double pseudo_log_likelihood(const RatioWeights& r, const SimplexVector& pi);

// Maximizes the pseudo-log-likelihood over the simplex. k=2 uses bisection
// on the score with exact boundary handling; k>2 uses the multiplicative
// (EM) fixed point from the uniform start. A flat likelihood returns the
// uniform vector flagged degenerate.
TargetProportionEstimate solve_pmle(const RatioWeights& r);

// Multiplicative fixed-point iteration pi_l <- mean_j pi_l w_{j,l} / sum_m
// pi_m w_{j,m} on a non-negative weight matrix with positive row sums.
// Optionally records the objective sum_j log(sum_l pi_l w_{j,l}) after every
// iteration. Exposed for the EM baseline, which feeds posterior/prior
// weights rather than density ratios.
TargetProportionEstimate em_fixed_point(const Matrix& weights, SimplexVector init,
                                        std::vector<double>* objective_trace = nullptr);

// Classic EM prior re-estimation (MLLS) started at the source proportions.
TargetProportionEstimate em_saerens(const SourceModel& model, const Dataset& target);

} // namespace gcs
