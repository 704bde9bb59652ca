#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "kamtori/dynamics.hpp"
#include "kamtori/integrators.hpp"

namespace kamtori {

// Uniformly sampled complex signal f(t_n), t_n = t0 + n h.
struct SignalSeries {
  std::vector<std::complex<double>> samples;
  double h = 1.0;
  double t0 = 0.0;

  SignalSeries(std::vector<std::complex<double>> samples_in, double h_in, double t0_in = 0.0);

  std::size_t size() const { return samples.size(); }
  double span() const { return static_cast<double>(samples.size()) * h; }
  double nyquist() const;
  // 2 pi / (N h), the FFT bin width.
  double bin_width() const;
};

struct SpectrumLine {
  double omega = 0.0;
  std::complex<double> amplitude;
};

// (1/W) sum_n f(t_n) exp(-i omega t_n) chi(t_n), with the Hann-type window
// chi(t) = 1 + cos(pi (t - t_mid) / T_half) over the sampled span and
// W = sum_n chi(t_n).
std::complex<double> windowed_correlation(const SignalSeries& signal, double omega);

// Maximizes |windowed_correlation| within one FFT bin of omega0 (golden
// section, then parabolic refinement). Throws RefinementError when the
// maximum sits on the bracket edge.
double refine_peak(const SignalSeries& signal, double omega0);

// NAFF: FFT argmax, peak refinement, Gram-Schmidt subtraction under the
// windowed inner product, repeated. Lines come back sorted by descending
// |amplitude|; fewer than n_lines when the residual power drops below 1e-14
// of the original.
std::vector<SpectrumLine> naff_decompose(const SignalSeries& signal, std::size_t n_lines);

inline constexpr std::size_t kDefaultNaffLines = 5;

// Complex observable of degree of freedom i along a trajectory: exp(i q_i)
// for angle systems, p_i + i q_i for Cartesian ones.
SignalSeries observable_series(const Trajectory& traj, const SystemModel& system, std::size_t dof);

// Dominant positive frequency of each degree of freedom.
std::vector<double> fundamental_frequencies(const Trajectory& traj, const SystemModel& system,
                                            std::size_t n_lines = kDefaultNaffLines);

}  // namespace kamtori
