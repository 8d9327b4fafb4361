#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

#include "tdcf/detail/fft.hpp"
#include "tdcf/error.hpp"
#include "tdcf/params.hpp"
#include "tdcf/spectrum.hpp"

namespace tdcf {

enum class Integrator { euler_maruyama, heun };

/// Settings of one Monte-Carlo estimate of the output spectrum.
struct SimRun {
  SystemConfig config;
  double dt = 0.005;
  double t_total = 1000.0;
  int n_traj = 128;
  std::uint64_t seed = 1;
  /// Discarded start of each trajectory. < 0 selects 50 / min(kappa_a, kappa_b).
  double burn_in = -1.0;
  /// Highest reported frequency. <= 0 selects |delta| + 6 kappa_a.
  double nu_max = 0.0;
  int threads = 1;
  /// Heun removes the O(dt) spectral bias of Euler-Maruyama; both hold the noise over a step.
  Integrator scheme = Integrator::heun;
};

struct SimResult {
  SimRun run;
  std::vector<double> nu;
  std::vector<double> chi_hat;
  std::vector<double> std_error;
  /// Analytic spectrum seen through the estimator's window (the quantity chi_hat estimates).
  std::vector<double> chi_analytic;
  /// Analytic spectrum at the bin frequency, without window smoothing.
  std::vector<double> chi_exact;
  std::vector<double> z;
  std::vector<bool> at_pole;
  std::size_t segment_length = 0;
  std::size_t segments_per_trajectory = 0;
  /// Fewer than 8 Welch segments per trajectory: the error bars are not reliable.
  bool insufficient_data = false;
};

namespace detail {

inline std::size_t welch_segment_length(double kappa, double dt) {
  const double want = 40.0 / (kappa * dt);
  return std::size_t{1} << static_cast<int>(std::ceil(std::log2(want)));
}

inline double burn_in_time(const SimRun& r) {
  if (r.burn_in >= 0.0) return r.burn_in;
  return 50.0 / std::min(derived_kappa(r.config.mode_a), derived_kappa(r.config.mode_b));
}

inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

// Per-trajectory periodograms of the pumped run and of the vacuum run that
// shares its noise, on the reported bins.
struct TrajectorySpectra {
  std::vector<double> pumped, vacuum;
};

class LangevinPair {
 public:
  LangevinPair(const SimRun& run, std::size_t n_bins, std::size_t seg_len)
      : r_(run), c_(run.config), n_bins_(n_bins), seg_len_(seg_len), window_(hann(seg_len)), fft_(seg_len) {}

  TrajectorySpectra run(std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(r_.seed), static_cast<std::uint32_t>(r_.seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double dt = r_.dt;
    // complex white noise with E|c|^2 = 1 / (2 dt); the scale cancels in the vacuum ratio
    const double amp = std::sqrt(0.25 / dt);
    auto noise = [&] {
      const double re = gauss(rng);
      return cplx(re, gauss(rng)) * amp;
    };

    const ModeParams& A = c_.mode_a;
    const ModeParams& B = c_.mode_b;
    const double ka = derived_kappa(A), kb = derived_kappa(B);
    const double s1a = std::sqrt(2 * A.kappa1), s2a = std::sqrt(2 * A.kappa2);
    const double s1b = std::sqrt(2 * B.kappa1), s2b = std::sqrt(2 * B.kappa2);
    const cplx loop_a = std::sqrt(1 - A.loss) * std::polar(1.0, A.phi);
    const cplx loop_b = std::sqrt(1 - B.loss) * std::polar(1.0, B.phi);
    const double la = std::sqrt(A.loss), lb = std::sqrt(B.loss);
    const cplx rot = std::polar(1.0, -c_.theta_prime);
    const cplx drift_a = -(ka + cplx(0, c_.delta)), drift_b = -(kb - cplx(0, c_.delta));
    const auto da = static_cast<std::size_t>(std::lround(A.tau / dt));
    const auto db = static_cast<std::size_t>(std::lround(B.tau / dt));
    const std::size_t hist = std::max(da, db) + 1;

    const auto n_steps = static_cast<std::size_t>(std::lround(r_.t_total / dt));
    const auto n_burn = static_cast<std::size_t>(std::lround(burn_in_time(r_) / dt));
    const std::size_t n_keep = n_steps - n_burn;
    const bool heun = r_.scheme == Integrator::heun;

    // index 0: pumped, 1: vacuum
    struct Arm {
      double eps;
      cplx alpha = 0.0, beta = 0.0;
      std::vector<cplx> a1out, b1out;
      std::vector<cplx> u;
    };
    Arm arms[2] = {{c_.pump.magnitude}, {0.0}};
    for (auto& arm : arms) {
      arm.a1out.assign(hist, 0.0);
      arm.b1out.assign(hist, 0.0);
      arm.u.resize(n_keep);
    }

    for (std::size_t n = 0; n < n_steps; ++n) {
      const cplx a1 = noise(), b1 = noise(), xa = noise(), xb = noise();
      for (auto& arm : arms) {
        const cplx held_a = da == 0 ? 0.0 : (n >= da ? arm.a1out[(n - da) % hist] : 0.0);
        const cplx held_b = db == 0 ? 0.0 : (n >= db ? arm.b1out[(n - db) % hist] : 0.0);
        auto a2in = [&](cplx al) { return loop_a * (da == 0 ? a1 + s1a * al : held_a) + la * xa; };
        auto b2in = [&](cplx be) { return loop_b * (db == 0 ? b1 + s1b * be : held_b) + lb * xb; };
        auto fa = [&](cplx al, cplx be) {
          return drift_a * al + arm.eps * std::conj(be) - s1a * a1 - s2a * a2in(al);
        };
        auto fb = [&](cplx al, cplx be) {
          return drift_b * be + arm.eps * std::conj(al) - s1b * b1 - s2b * b2in(be);
        };
        const cplx fa0 = fa(arm.alpha, arm.beta), fb0 = fb(arm.alpha, arm.beta);
        cplx an = arm.alpha + dt * fa0, bn = arm.beta + dt * fb0;
        if (heun) {
          const cplx ap = an, bp = bn;
          an = arm.alpha + 0.5 * dt * (fa0 + fa(ap, bp));
          bn = arm.beta + 0.5 * dt * (fb0 + fb(ap, bp));
        }
        const cplx am = 0.5 * (arm.alpha + an), bm = 0.5 * (arm.beta + bn);
        arm.a1out[n % hist] = a1 + s1a * am;
        arm.b1out[n % hist] = b1 + s1b * bm;
        if (n >= n_burn) arm.u[n - n_burn] = a2in(am) + s2a * am + rot * std::conj(b2in(bm) + s2b * bm);
        arm.alpha = an;
        arm.beta = bn;
      }
      if (!(std::abs(arms[0].alpha) < 1e8) || !(std::abs(arms[0].beta) < 1e8))
        throw UnstableConfiguration("oracle: intracavity amplitude grows without bound");
    }

    return {welch(arms[0].u), welch(arms[1].u)};
  }

 private:
  // Hann-windowed, 50 % overlap, symmetrized in frequency.
  std::vector<double> welch(const std::vector<cplx>& u) {
    const std::size_t n = seg_len_;
    std::vector<double> acc(n, 0.0);
    std::size_t segments = 0;
    for (std::size_t s = 0; s + n <= u.size(); s += n / 2, ++segments) {
      for (std::size_t i = 0; i < n; ++i) fft_.input()[i] = window_[i] * u[s + i];
      fft_.execute();
      for (std::size_t k = 0; k < n; ++k) acc[k] += std::norm(fft_.output()[k]);
    }
    std::vector<double> p(n_bins_);
    for (std::size_t k = 0; k < n_bins_; ++k) p[k] = 0.5 * (acc[k] + acc[(n - k) % n]) / segments;
    return p;
  }

  const SimRun& r_;
  const SystemConfig& c_;
  std::size_t n_bins_, seg_len_;
  std::vector<double> window_;
  ForwardFft fft_;
};

/// Normalized |W(delta)|^2 of the Hann window on a sub-bin grid over +-8 bins.
inline std::vector<std::pair<double, double>> window_kernel(std::size_t seg_len, double dt, int per_bin = 8) {
  const auto w = hann(seg_len);
  const double bin = 2.0 * std::numbers::pi / (seg_len * dt);
  std::vector<std::pair<double, double>> out;
  double total = 0.0;
  for (int j = -8 * per_bin; j <= 8 * per_bin; ++j) {
    const double d = bin * j / per_bin;
    cplx W = 0.0;
    const cplx step = std::polar(1.0, -d * dt);
    cplx ph = 1.0;
    for (std::size_t i = 0; i < seg_len; ++i) {
      W += w[i] * ph;
      ph *= step;
      if ((i & 255) == 255) ph /= std::abs(ph);
    }
    out.emplace_back(d, std::norm(W));
    total += std::norm(W);
  }
  for (auto& [d, v] : out) v /= total;
  return out;
}

}  // namespace detail

inline void validate(const SimRun& r) {
  require_valid(r.config);
  if (!(r.dt > 0.0) || r.n_traj < 2) throw ValidationError("oracle: need dt > 0 and n_traj >= 2");
  const SystemConfig& c = r.config;
  const double fastest =
      std::max({derived_kappa(c.mode_a), derived_kappa(c.mode_b), derived_feedback_strength(c.mode_a),
                derived_feedback_strength(c.mode_b), std::abs(c.delta), c.pump.magnitude});
  if (!(r.dt * fastest < 0.05)) throw ValidationError("oracle: dt too coarse, need dt * max(kappa, k, |delta|, |eps|) < 0.05");
  const double kmin = std::min(derived_kappa(c.mode_a), derived_kappa(c.mode_b));
  if (!(r.t_total > 50.0 / kmin)) throw ValidationError("oracle: t_total must exceed 50 / kappa");
}

/// Monte-Carlo estimate of the two-mode squeezing spectrum from the linear
/// delayed Langevin equations, referenced to a vacuum run on the same noise.
inline SimResult simulate(const SimRun& run) {
  validate(run);
  const SystemConfig& c = run.config;
  const double ka = derived_kappa(c.mode_a);
  const std::size_t seg = detail::welch_segment_length(ka, run.dt);
  const double bin = 2.0 * std::numbers::pi / (seg * run.dt);
  const double nu_max = run.nu_max > 0.0 ? run.nu_max : std::abs(c.delta) + 6.0 * ka;
  const std::size_t n_bins = std::min(seg / 2, static_cast<std::size_t>(std::floor(nu_max / bin)) + 1);

  SimResult res;
  res.run = run;
  res.segment_length = seg;
  const double samples = std::floor((run.t_total - detail::burn_in_time(run)) / run.dt);
  res.segments_per_trajectory = samples >= seg ? static_cast<std::size_t>((samples - seg) / (seg / 2)) + 1 : 0;
  if (res.segments_per_trajectory == 0) throw ValidationError("oracle: t_total too short for one Welch segment");
  res.insufficient_data = res.segments_per_trajectory < 8;

  std::vector<detail::TrajectorySpectra> per(static_cast<std::size_t>(run.n_traj));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      detail::LangevinPair sim(run, n_bins, seg);
      for (int i = next++; i < run.n_traj; i = next++) per[i] = sim.run(static_cast<std::uint64_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = run.n_traj;
    }
  };
  const int threads = std::max(1, std::min(run.threads, run.n_traj));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // ratio estimator with delta-method error, accumulated in trajectory order
  const auto kernel = detail::window_kernel(seg, run.dt);
  const double n = run.n_traj;
  for (std::size_t k = 0; k < n_bins; ++k) {
    double sp = 0, sv = 0, spp = 0, svv = 0, spv = 0;
    for (const auto& t : per) {
      const double p = t.pumped[k], v = t.vacuum[k];
      sp += p;
      sv += v;
      spp += p * p;
      svv += v * v;
      spv += p * v;
    }
    const double mp = sp / n, mv = sv / n;
    const double vp = (spp - n * mp * mp) / (n - 1), vv = (svv - n * mv * mv) / (n - 1);
    const double cpv = (spv - n * mp * mv) / (n - 1);
    const double r = mp / mv;
    const double var = std::max(0.0, (vp - 2 * r * cpv + r * r * vv) / (mv * mv * n));

    const double nu = bin * k;
    double smooth = 0.0;
    bool pole = false;
    for (const auto& [d, w] : kernel) {
      const auto v = chi_out(c, nu + d);
      pole = pole || v.at_pole;
      smooth += w * v.value;
    }
    const auto exact = chi_out(c, nu);
    const double sd = std::sqrt(var) * (res.insufficient_data ? std::sqrt(8.0 / res.segments_per_trajectory) : 1.0);
    res.nu.push_back(nu);
    res.chi_hat.push_back(r);
    res.std_error.push_back(sd);
    res.chi_analytic.push_back(pole ? INFINITY : smooth);
    res.chi_exact.push_back(exact.value);
    res.at_pole.push_back(pole || exact.at_pole);
    const double diff = r - smooth;
    res.z.push_back(pole ? NAN : sd > 0.0 ? diff / sd : (std::abs(diff) < 1e-12 ? 0.0 : std::copysign(INFINITY, diff)));
  }
  return res;
}

}  // namespace tdcf
