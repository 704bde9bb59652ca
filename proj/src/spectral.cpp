#include "kamtori/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "kamtori/errors.hpp"

namespace kamtori {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMinSamples = 16;
constexpr std::size_t kAnchorStride = 64;

// Planner calls are not thread-safe in FFTW; execution on distinct arrays is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> hann_weights(std::size_t n) {
  std::vector<double> w(n);
  const double c = 0.5 * static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) w[k] = 1.0 + std::cos(kPi * (static_cast<double>(k) - c) / c);
  return w;
}

// Signal premultiplied by chi / W, which is all the correlation needs.
class WindowedSignal {
 public:
  WindowedSignal(const std::vector<cplx>& samples, double h, double t0)
      : h_(h), t0_(t0), window_(hann_weights(samples.size())) {
    double total = 0.0;
    for (double w : window_) total += w;
    norm_ = total;
    weighted_.resize(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) weighted_[k] = samples[k] * (window_[k] / norm_);
  }

  std::size_t size() const { return weighted_.size(); }
  double h() const { return h_; }
  double t0() const { return t0_; }
  const std::vector<double>& window() const { return window_; }
  double norm() const { return norm_; }
  double bin_width() const { return 2.0 * kPi / (static_cast<double>(size()) * h_); }

  void reset(const std::vector<cplx>& samples) {
    for (std::size_t k = 0; k < samples.size(); ++k) weighted_[k] = samples[k] * (window_[k] / norm_);
  }

  // sum_n g_n exp(-i omega (t0 + n h)); the phasor is re-anchored every
  // kAnchorStride samples to keep the recurrence error bounded.
  cplx correlate(double omega) const { return correlate_with(weighted_, omega); }

  cplx correlate_with(const std::vector<cplx>& g, double omega) const {
    const std::size_t n = g.size();
    const cplx rot = std::polar(1.0, -omega * h_);
    cplx acc(0.0, 0.0);
    for (std::size_t base = 0; base < n; base += kAnchorStride) {
      cplx ph = std::polar(1.0, -omega * static_cast<double>(base) * h_);
      const std::size_t end = std::min(n, base + kAnchorStride);
      cplx part(0.0, 0.0);
      for (std::size_t k = base; k < end; ++k) {
        part += g[k] * ph;
        ph *= rot;
      }
      acc += part;
    }
    return acc * std::polar(1.0, -omega * t0_);
  }

  double power(double omega) const { return std::norm(correlate(omega)); }

  // d|C|^2/d omega = 2 Re(conj(C) C'), with times taken from the span centre
  // so the two sums stay well scaled.
  double power_slope(double omega) const {
    const std::size_t n = weighted_.size();
    const double mid = 0.5 * static_cast<double>(n - 1);
    const cplx rot = std::polar(1.0, -omega * h_);
    cplx c(0.0, 0.0), dc(0.0, 0.0);
    for (std::size_t base = 0; base < n; base += kAnchorStride) {
      cplx ph = std::polar(1.0, -omega * (static_cast<double>(base) - mid) * h_);
      const std::size_t end = std::min(n, base + kAnchorStride);
      for (std::size_t k = base; k < end; ++k) {
        const cplx term = weighted_[k] * ph;
        c += term;
        dc += term * (static_cast<double>(k) - mid);
        ph *= rot;
      }
    }
    dc *= cplx(0.0, -h_);
    return 2.0 * (std::conj(c) * dc).real();
  }

 private:
  double h_, t0_;
  std::vector<double> window_;
  double norm_ = 1.0;
  std::vector<cplx> weighted_;
};

// Wrap into (-pi/h, pi/h].
double wrap_frequency(double omega, double h) {
  const double period = 2.0 * kPi / h;
  const double half = kPi / h;
  double w = std::fmod(omega + half, period);
  if (w <= 0.0) w += period;
  return w - half;
}

double refine_on(const WindowedSignal& ws, double omega0) {
  const double delta = ws.bin_width();
  double a = omega0 - delta;
  double b = omega0 + delta;
  const double tol = 1e-12 * std::max(std::abs(omega0), delta);
  auto f = [&](double w) { return ws.power(w); };

  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < 200 && (b - a) > tol; ++it) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    }
  }
  double best = f1 >= f2 ? x1 : x2;
  double fbest = std::max(f1, f2);

  const double edge = 1e-3 * delta;
  if (best - (omega0 - delta) < edge || (omega0 + delta) - best < edge)
    throw RefinementError("no interior maximum of the windowed correlation within one bin of " +
                          std::to_string(omega0));

  // Symmetric three-point parabolic steps with shrinking spacing.
  for (double frac : {1e-3, 1e-5}) {
    const double d = frac * delta;
    const double fm = f(best - d);
    const double fp = f(best + d);
    const double curvature = fm - 2.0 * fbest + fp;
    if (!(curvature < 0.0)) break;
    const double vertex = best - 0.5 * d * (fp - fm) / curvature;
    if (std::abs(vertex - best) > d) break;
    const double fv = f(vertex);
    if (fv > fbest) {
      best = vertex;
      fbest = fv;
    }
  }

  // Polish on the slope: the maximum is flat in |C|^2, its derivative is not.
  {
    const double d = 1e-3 * delta;
    double lo = best - d, hi = best + d;
    double slo = ws.power_slope(lo), shi = ws.power_slope(hi);
    if (slo > 0.0 && shi < 0.0) {
      const double stop = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(best), delta);
      int side = 0;
      for (int it = 0; it < 100 && hi - lo > stop; ++it) {
        double x = (lo * shi - hi * slo) / (shi - slo);
        if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
        const double sx = ws.power_slope(x);
        if (sx == 0.0) {
          lo = hi = x;
          break;
        }
        // Illinois variant of regula falsi.
        if (sx > 0.0) {
          lo = x;
          slo = sx;
          if (side == 1) shi *= 0.5;
          side = 1;
        } else {
          hi = x;
          shi = sx;
          if (side == -1) slo *= 0.5;
          side = -1;
        }
      }
      best = 0.5 * (lo + hi);
    }
  }

  // The starting frequency wins near-ties (exact DC lines stay exactly at zero).
  if (std::abs(best - omega0) <= 1e-9 * delta) best = omega0;
  return wrap_frequency(best, ws.h());
}

// Argmax of |FFT(g)| as a frequency in (-pi/h, pi/h].
double fft_peak(const std::vector<cplx>& g, double h) {
  const int n = static_cast<int>(g.size());
  auto* in = reinterpret_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * g.size()));
  auto* out = reinterpret_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * g.size()));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(n, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (int k = 0; k < n; ++k) {
    in[k][0] = g[static_cast<std::size_t>(k)].real();
    in[k][1] = g[static_cast<std::size_t>(k)].imag();
  }
  fftw_execute(plan);
  int best = 0;
  double best_mag = -1.0;
  for (int k = 0; k < n; ++k) {
    const double mag = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  const int signed_bin = best > n / 2 ? best - n : best;
  return wrap_frequency(2.0 * kPi * signed_bin / (n * h), h);
}

}  // namespace

// --- SignalSeries -----------------------------------------------------------

SignalSeries::SignalSeries(std::vector<std::complex<double>> samples_in, double h_in, double t0_in)
    : samples(std::move(samples_in)), h(h_in), t0(t0_in) {
  if (samples.size() < kMinSamples)
    throw ArgumentError("signal needs at least " + std::to_string(kMinSamples) + " samples");
  if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("sample spacing h must be positive");
  if (!std::isfinite(t0)) throw ArgumentError("start time must be finite");
  for (const auto& s : samples)
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw ArgumentError("signal samples must be finite");
}

double SignalSeries::nyquist() const { return kPi / h; }

double SignalSeries::bin_width() const { return 2.0 * kPi / (static_cast<double>(size()) * h); }

// --- operations -------------------------------------------------------------

std::complex<double> windowed_correlation(const SignalSeries& signal, double omega) {
  return WindowedSignal(signal.samples, signal.h, signal.t0).correlate(omega);
}

double refine_peak(const SignalSeries& signal, double omega0) {
  return refine_on(WindowedSignal(signal.samples, signal.h, signal.t0), omega0);
}

std::vector<SpectrumLine> naff_decompose(const SignalSeries& signal, std::size_t n_lines) {
  if (n_lines == 0) throw ArgumentError("n_lines must be at least 1");
  const std::size_t n = signal.size();
  const double h = signal.h;

  std::vector<cplx> residual = signal.samples;
  WindowedSignal ws(residual, h, signal.t0);
  const std::vector<double>& chi = ws.window();
  const double wnorm = ws.norm();

  auto inner = [&](const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx acc(0.0, 0.0);
    for (std::size_t k = 0; k < n; ++k) acc += a[k] * std::conj(b[k]) * chi[k];
    return acc / wnorm;
  };
  auto power = [&](const std::vector<cplx>& a) { return inner(a, a).real(); };

  const double p0 = power(residual);
  std::vector<double> freqs;
  std::vector<std::vector<cplx>> ortho;  // orthonormal basis under <.,.>
  std::vector<cplx> windowed(n);

  while (freqs.size() < n_lines) {
    if (!(p0 > 0.0) || power(residual) < 1e-14 * p0) break;
    for (std::size_t k = 0; k < n; ++k) windowed[k] = residual[k] * chi[k];
    const double omega0 = fft_peak(windowed, h);
    ws.reset(residual);
    double omega = 0.0;
    try {
      omega = refine_on(ws, omega0);
    } catch (const RefinementError&) {
      if (freqs.empty()) throw;
      break;
    }
    const bool repeated = std::any_of(freqs.begin(), freqs.end(), [&](double f) {
      return std::abs(f - omega) < 1e-9 * ws.bin_width();
    });
    if (repeated) break;

    std::vector<cplx> u(n);
    for (std::size_t k = 0; k < n; ++k)
      u[k] = std::polar(1.0, omega * (signal.t0 + static_cast<double>(k) * h));
    for (const auto& e : ortho) {
      const cplx c = inner(u, e);
      for (std::size_t k = 0; k < n; ++k) u[k] -= c * e[k];
    }
    const double un = std::sqrt(power(u));
    if (!(un > 1e-10)) break;
    for (auto& v : u) v /= un;
    const cplx coeff = inner(residual, u);
    for (std::size_t k = 0; k < n; ++k) residual[k] -= coeff * u[k];
    freqs.push_back(omega);
    ortho.push_back(std::move(u));
  }

  // Amplitudes of the raw exponentials: solve G a = b with
  // G_jk = <e_k, e_j>, b_j = <f, e_j>.
  const auto m = static_cast<Eigen::Index>(freqs.size());
  std::vector<SpectrumLine> lines;
  if (m == 0) return lines;
  std::vector<std::vector<cplx>> expo(freqs.size(), std::vector<cplx>(n));
  for (std::size_t j = 0; j < freqs.size(); ++j)
    for (std::size_t k = 0; k < n; ++k)
      expo[j][k] = std::polar(1.0, freqs[j] * (signal.t0 + static_cast<double>(k) * h));
  Eigen::MatrixXcd gram(m, m);
  Eigen::VectorXcd rhs(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    rhs[j] = inner(signal.samples, expo[static_cast<std::size_t>(j)]);
    for (Eigen::Index k = 0; k < m; ++k)
      gram(j, k) = inner(expo[static_cast<std::size_t>(k)], expo[static_cast<std::size_t>(j)]);
  }
  const Eigen::VectorXcd amp = gram.partialPivLu().solve(rhs);
  for (Eigen::Index j = 0; j < m; ++j) lines.push_back({freqs[static_cast<std::size_t>(j)], amp[j]});
  std::stable_sort(lines.begin(), lines.end(), [](const SpectrumLine& a, const SpectrumLine& b) {
    return std::abs(a.amplitude) > std::abs(b.amplitude);
  });
  return lines;
}

SignalSeries observable_series(const Trajectory& traj, const SystemModel& system, std::size_t dof) {
  if (dof >= system.dof()) throw ArgumentError("degree of freedom index out of range");
  std::vector<cplx> z;
  z.reserve(traj.states.size());
  const bool cartesian = system.observable() == ObservableKind::kCartesian;
  for (const auto& s : traj.states)
    z.push_back(cartesian ? cplx(s.p[dof], s.q[dof]) : std::polar(1.0, s.q[dof]));
  return SignalSeries(std::move(z), std::abs(traj.h));
}

std::vector<double> fundamental_frequencies(const Trajectory& traj, const SystemModel& system,
                                            std::size_t n_lines) {
  std::vector<double> out;
  out.reserve(system.dof());
  for (std::size_t i = 0; i < system.dof(); ++i) {
    const SignalSeries sig = observable_series(traj, system, i);
    const auto lines = naff_decompose(sig, n_lines);
    if (lines.empty()) throw RefinementError("no spectral line found");
    // Lines are sorted by amplitude; exclude the DC line.
    const double floor = 1e-6 * sig.bin_width();
    auto it = std::find_if(lines.begin(), lines.end(),
                           [&](const SpectrumLine& l) { return l.omega > floor; });
    out.push_back(it != lines.end() ? it->omega : std::abs(lines.front().omega));
  }
  return out;
}

}  // namespace kamtori
