/*
 * Copyright 2026 The sgformer-cpp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <sgf/matrix.hpp>

#include <cstdint>
#include <string>
#include <vector>

// Graph-signal-denoising energies and the propagation-as-descent checks.
// Everything here is float64 and dense; N is capped at kEnergyMaxNodes.
namespace sgf::energy {

inline constexpr std::size_t kEnergyMaxNodes = 512;

// How the smoothness term sums node pairs. Ordered is the energy exactly as
// written (every ordered pair (u, v)); Halved weights each ordered pair by
// 1/2, i.e. each unordered pair once when P is symmetric.
enum class PairSum { Ordered, Halved };

struct EnergySpec {
    Matrix<double> p;     // N x N propagation, entries >= 0
    Matrix<double> w;     // d x d, symmetric
    Matrix<double> z_ref; // N x d anchor Z^(k)
    double beta = 0.0;
    PairSum pairs = PairSum::Ordered;

    // Hybrid form: when set, p is ignored and the energy is evaluated from
    // the attention part p_a = [c_uv] and graph part p_g = [w_uv] separately.
    bool hybrid = false;
    double alpha = 0.0;
    Matrix<double> p_a;
    Matrix<double> p_g;

    /// P, or (1 - alpha) P_A + alpha P_G for the hybrid form.
    Matrix<double> propagation() const;
    /// Throws ConfigError/ShapeError on inconsistent fields or asymmetric W.
    void validate() const;
};

/// Smoothness term plus fidelity term sum_u ||z_u - (beta + d_u) W z_ref_u||^2.
double energy_eval(const EnergySpec& s, const Matrix<double>& z);

/// Exact gradient of energy_eval at z.
Matrix<double> energy_grad(const EnergySpec& s, const Matrix<double>& z);

/// The closed form 2 Z_ref - 2 beta Z_ref W - 2 P Z_ref W.
Matrix<double> energy_grad_closed_form(const EnergySpec& s);

/// The layer update P Z_ref W + beta Z_ref W.
Matrix<double> propagation_update(const EnergySpec& s);

struct DescentOptions {
    PairSum pairs = PairSum::Ordered;
    // Replace the random propagation matrix by its symmetric part.
    bool symmetric_p = false;
};

struct DescentReport {
    std::size_t n = 0;
    std::size_t d = 0;
    double beta = 0.0;
    double alpha = 0.0;
    // || update - (Z - grad / 2) ||_inf with the exact gradient.
    double update_residual = 0.0;
    // Same with the closed-form gradient (zero up to rounding by algebra).
    double closed_form_residual = 0.0;
    // Relative error of the exact / closed-form gradient vs central differences.
    double grad_vs_fd = 0.0;
    double closed_form_vs_fd = 0.0;
    // Smallest halving of the 1/2 step that lowered the energy (0 if none).
    double descent_step = 0.0;
    bool half_step_descends = false;

    bool equality_ok(double tol = 1e-8) const { return update_residual <= tol; }
    bool gradient_ok(double tol = 1e-5) const { return grad_vs_fd <= tol; }
    bool ok() const { return equality_ok() && gradient_ok(); }
};

/// Random instance: symmetric W, P with nonnegative entries, random Z^(k).
DescentReport verify_descent_step(std::size_t n, std::size_t d, double beta, std::uint64_t seed,
                              const DescentOptions& opts = {});

/// Random hybrid instance: P_A from explicit attention on Z^(k), P_G the
/// normalized adjacency of a random graph.
DescentReport verify_hybrid_descent_step(std::size_t n, std::size_t d, double alpha, double beta,
                                std::uint64_t seed, const DescentOptions& opts = {});

/// Evaluates an already-built spec (shared by the two verifiers).
DescentReport check_descent(const EnergySpec& s);

// ---- one-layer reduction -------------------------------------------------------

// K-layer linear propagation Z^(k+1) = Pbar^(k) Z^(k) W^(k) with
// Pbar^(k) = (1 - alpha) P_A^(k) + alpha P_G + beta I.
struct LinearStack {
    double alpha = 0.0;
    Matrix<double> p_g;
    std::vector<Matrix<double>> p_bar; // K of N x N
    std::vector<Matrix<double>> w;     // K of d x d
    std::vector<Matrix<double>> z;     // K + 1 of N x d, z[0] = Z^(0)
};

/// Runs the stack; attention matrices come from the explicit form on the
/// running Z^(k) with fresh random query/key maps per layer.
LinearStack build_linear_stack(std::size_t k, std::size_t n, std::size_t d, double alpha,
                               double beta, std::uint64_t seed);

/// Recomputes z[1..K] from z[0], p_bar and w.
void propagate(LinearStack& s);

struct ReductionReport {
    std::size_t k = 0;
    std::size_t n = 0;
    std::size_t d = 0;
    double alpha = 0.0;
    // || Pbar* Z0 W* - Z^(K) ||_inf
    double product_residual = 0.0;
    // || (1 - alpha) P*_A Z0 W* + alpha P*_G Z0 W* - Z^(K) ||_inf with
    // P*_G = P_G^K and P*_A = (Pbar* - alpha P*_G) / (1 - alpha).
    double onelayer_residual = 0.0;
    std::string scope = "linear stacks (no nonlinearity between layers)";

    bool ok(double tol = 1e-8) const {
        return product_residual <= tol && onelayer_residual <= tol;
    }
};

/// Throws ConfigError for alpha == 1.
ReductionReport check_onelayer_reduction(const LinearStack& s);

ReductionReport verify_onelayer_reduction(std::size_t k, std::size_t n, std::size_t d,
                                          double alpha, std::uint64_t seed, double beta = 0.5);

} // namespace sgf::energy
