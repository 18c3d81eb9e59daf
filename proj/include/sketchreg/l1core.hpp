#pragma once

#include "sketchreg/matrix.hpp"

#include <cstddef>

// Exact small-scale l1 regression: a primal-dual interior-point method on the
// linear-programming form and iteratively reweighted least squares.
namespace sketchreg {

enum class L1Form {
    residual,    // min ||A x - b||_1
    homogeneous, // min ||A z||_1 subject to c^T z = 1
};

struct L1Subproblem {
    DenseMatrix a;
    Vector b; // residual form
    Vector c; // homogeneous form
    L1Form form = L1Form::residual;

    static L1Subproblem residual(DenseMatrix a, Vector b);
    static L1Subproblem homogeneous(DenseMatrix a, Vector c);
};

struct L1Result {
    Vector x;
    double objective = 0.0;
    double gap = 0.0; // relative duality gap at exit (IPM)
    std::size_t iterations = 0;
    Vector history; // objective per iteration
    Vector smoothed_history; // IRLS only: the majorized (Huber-smoothed) objective
};

/// Mehrotra predictor-corrector on min 1^T(y+ + y-) s.t. A x - y+ + y- = b,
/// followed by a vertex purification step. Throws MaxIters.
L1Result ipm_l1(const L1Subproblem& prob, double tol = 1e-8, std::size_t max_iters = 200);

/// IRLS with weights 1 / max(|r_i|, tau). Stops when the relative objective
/// change drops below 1e-10. Throws MaxIters.
L1Result irls_l1(const L1Subproblem& prob, double tau = 1e-6, std::size_t max_iters = 500);

/// Huber-type smoothing of |r| majorized by the IRLS weights.
double smoothed_l1(std::span<const double> r, double tau);

} // namespace sketchreg
