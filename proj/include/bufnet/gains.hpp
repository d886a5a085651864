#pragma once

#include <Eigen/Dense>

#include <string_view>
#include <vector>

#include "bufnet/netmodel.hpp"

namespace bufnet {

enum class GainNorm { L1, Linf };
enum class GainMethod { Lp, Resolvent, MonteCarlo };

std::string_view to_string(GainNorm n) noexcept;
std::string_view to_string(GainMethod m) noexcept;

/// Margin used for the strict inequalities of the LP characterizations,
/// scaled by the largest |A_i| entry.
inline constexpr double kStrictMargin = 1e-9;

struct StabilityReport {
    bool stable = false;
    /// Largest real part of the lifted matrix.
    double abscissa = 0.0;
    /// Per-mode blocks of p^T = 1^T (-Lambda)^{-1}, which satisfies
    /// p > 0 and p^T Lambda = -1^T < 0. Empty when unstable.
    std::vector<Eigen::VectorXd> certificate;
};

struct GainReport {
    double gamma = 0.0;
    GainNorm norm = GainNorm::L1;
    GainMethod method = GainMethod::Lp;
    /// Per-mode certificate vectors v_i.
    std::vector<Eigen::VectorXd> certificates;
    /// Smallest slack of the defining inequalities (negative = violated).
    double min_slack = 0.0;
    int lp_iterations = 0;
};

/// Lambda = blockdiag(A_1..A_N) + Pi^T (x) I_n, mode-major stacking: block
/// (i, j) is pi_ji I for i != j. It governs E[x 1{sigma = i}].
Eigen::MatrixXd lifted_matrix(const SwitchedSystem& sys);

StabilityReport stability_check(const SwitchedSystem& sys);
StabilityReport stability_check(const BufferNetwork& net, const TuningParams& p);

/// min gamma over v_i >= 0 subject to
///   v_i^T A_i + sum_j pi_ij v_j^T + 1^T G_out_i <= -eps,  v_i^T G_in_i <= gamma 1^T.
/// Throws Unstable or LpInfeasible.
GainReport l1_gain(const SwitchedSystem& sys);
GainReport l1_gain(const BufferNetwork& net, const TuningParams& p);

/// min gamma over v_i >= 0 subject to
///   A_i v_i + sum_j pi_ij v_j + G_in_i 1 <= -eps,  G_out_i v_i <= gamma 1.
GainReport linf_gain(const SwitchedSystem& sys);
GainReport linf_gain(const BufferNetwork& net, const TuningParams& p);

GainReport lp_gain(const SwitchedSystem& sys, GainNorm norm);

/// Minimum slack of the defining inequalities at report.certificates and
/// report.gamma, evaluated without the strictness margin.
double certificate_slack(const SwitchedSystem& sys, const GainReport& report);

/// Static gain G_out (-A)^{-1} G_in of a single-mode system: max column sum
/// (L1) or max row sum (Linf). Throws MultiMode, Singular or Unstable.
double resolvent_gain(const SwitchedSystem& sys, GainNorm norm);
double resolvent_gain(const BufferNetwork& net, const TuningParams& p, GainNorm norm);

} // namespace bufnet
