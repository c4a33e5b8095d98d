// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bdris/tensor.hpp"

#include <filesystem>
#include <vector>

namespace bdris {

/// J0(x), the zeroth-order Bessel function of the first kind.
double bessel_j0(double x);

/// Jakes autocorrelation J0(2 pi f_n |lag|).
double jakes_acf(double fn, int lag);

/// Jakes ACF at lags 0..order.
RealVector jakes_acf_vector(double fn, int order);

/// AR(Q) model x[l] = -sum_q a_q x[l - q] + w[l], Var(w) = sigma2_omega.
struct ArModel {
    int Q = 0;
    RealVector a;
    double sigma2_omega = 0.0;
    double epsilon = 0.0;
    double fn = 0.0;  ///< Doppler the model was fitted for; negative when fitted from data

    /// Largest pole modulus, from the eigenvalues of the companion matrix.
    [[nodiscard]] double max_pole_modulus() const;
    bool operator==(const ArModel&) const = default;
};

/// Solves the Toeplitz normal equations built from acf[0..Q] with acf[0] + epsilon
/// on the diagonal. Throws if the loaded system is not positive definite.
ArModel levinson_durbin(const RealVector& acf, double epsilon);

/// Convenience: Levinson-Durbin on the Jakes ACF of order Q.
ArModel fit_jakes_ar(double fn, int Q, double epsilon);

/// Multi-step forecast. `history` is ordered oldest first and must hold at least
/// Q matrices; step p uses measured samples for lags reaching back past the
/// forecast origin and earlier predictions for the rest.
std::vector<ComplexMatrix> ar_predict(const std::vector<ComplexMatrix>& history, const ArModel& model, int horizon);

/// Biased sample ACF of a matrix series pooled over all entries and normalized
/// to acf[0] = 1. Returns lags 0..order.
RealVector sample_acf(const std::vector<ComplexMatrix>& history, int order);

/// AR(Q) fitted on the sample ACF of the history itself.
ArModel fit_raw_ar(const std::vector<ComplexMatrix>& history, int Q, double epsilon);

/// C = [Re E[1] ... Re E[V]; Im E[1] ... Im E[V]], of size 2M x VK.
RealMatrix preprocess_csi(const std::vector<ComplexMatrix>& history, int V);

/// Inverse of preprocess_csi for a block width K.
std::vector<ComplexMatrix> unpreprocess_csi(const RealMatrix& c, int K);

/// Removes a common Doppler rotation: out[l] = in[l] * exp(-j 2 pi fn (l0 + l)).
std::vector<ComplexMatrix> derotate(const std::vector<ComplexMatrix>& series, double fn, int l0 = 0);

/// Pre-computed AR models for the trained Doppler classes.
struct PatternBank {
    std::vector<ArModel> entries;

    [[nodiscard]] int size() const { return static_cast<int>(entries.size()); }
    [[nodiscard]] std::vector<double> dopplers() const;

    static PatternBank from_dopplers(const std::vector<double>& fns, int Q, double epsilon);

    void save_csv(const std::filesystem::path& path) const;
    static PatternBank load_csv(const std::filesystem::path& path);
};

/// Normalized Doppler for a speed in km/h.
double doppler_from_speed(double kmh, double fc, double Ts);

/// F log-spaced Doppler values between the given speeds (inclusive).
std::vector<double> log_spaced_dopplers(int F, double kmh_min, double kmh_max, double fc, double Ts);

}  // namespace bdris
