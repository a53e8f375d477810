// SPDX-License-Identifier: Apache-2.0
#include "msense/estim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msense/core/constants.hpp"
#include "msense/core/errors.hpp"
#include "msense/core/fft.hpp"

namespace msense::estim {

double PDP::power_db(std::size_t i) const {
    const double p = power_linear(static_cast<Eigen::Index>(i));
    return p > 0 ? 10.0 * std::log10(p) : -std::numeric_limits<double>::infinity();
}

PDP pdp(const Eigen::VectorXcd& h_freq, double bin_spacing_hz, double timestamp) {
    const auto n = static_cast<std::size_t>(h_freq.size());
    if (n == 0) throw ValidationError("pdp: empty response");
    fft::cvec bins(n);
    for (std::size_t i = 0; i < n; ++i) bins[i] = h_freq(static_cast<Eigen::Index>(i));
    const fft::cvec td = fft::inverse(bins);

    PDP out;
    out.timestamp = timestamp;
    const double bandwidth = bin_spacing_hz * static_cast<double>(n);
    out.delay_s.resize(n);
    out.power_linear.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        out.delay_s[i] = static_cast<double>(i) / bandwidth;
        out.power_linear(static_cast<Eigen::Index>(i)) = std::norm(td[i] / static_cast<double>(n));
    }
    return out;
}

PathLossSeries path_loss_series(const calib::CIRMatrix& cir, const std::vector<double>& distances,
                                int window_snapshots) {
    if (window_snapshots < 1 || window_snapshots % 2 == 0) {
        throw ValidationError("path_loss_series: window must be a positive odd snapshot count");
    }
    if (cir.size() < static_cast<std::size_t>(window_snapshots)) {
        throw ValidationError("path_loss_series: series shorter than the window");
    }
    if (distances.size() != cir.size()) {
        throw ValidationError("path_loss_series: one distance per snapshot required");
    }

    // Per-snapshot total power over all delay bins, element-averaged. By
    // Parseval (1/N convention) this equals sum_f |H(f)|^2 / N_f.
    std::vector<double> snap_power(cir.size());
    for (std::size_t i = 0; i < cir.size(); ++i) {
        const Eigen::MatrixXcd& ir = cir.impulse_response(i);
        snap_power[i] = ir.squaredNorm() / static_cast<double>(ir.rows());
    }

    PathLossSeries out;
    out.window_snapshots = window_snapshots;
    out.n_f = static_cast<int>(cir.freq_hz().size());
    const int half = window_snapshots / 2;
    for (std::size_t c = static_cast<std::size_t>(half); c + static_cast<std::size_t>(half) < cir.size(); ++c) {
        double acc = 0.0;
        for (int k = -half; k <= half; ++k) {
            acc += snap_power[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) + k)];
        }
        const double mean = acc / static_cast<double>(window_snapshots);
        out.pl_db.push_back(-10.0 * std::log10(mean));
        out.distance_m.push_back(distances[c]);
    }
    return out;
}

int window_from_wavelengths(double wavelength_m, const std::vector<double>& distances,
                            double n_lambda) {
    if (distances.size() < 2) return 1;
    double step_sum = 0.0;
    for (std::size_t i = 1; i < distances.size(); ++i) {
        step_sum += std::abs(distances[i] - distances[i - 1]);
    }
    const double mean_step = step_sum / static_cast<double>(distances.size() - 1);
    if (mean_step <= 0) return 1;
    int w = static_cast<int>(std::lround(n_lambda * wavelength_m / mean_step));
    if (w < 1) w = 1;
    if (w % 2 == 0) ++w; // centered window
    return w;
}

LogDistanceFit fit_log_distance(const PathLossSeries& series, double d0_m) {
    if (series.pl_db.size() < 2) {
        throw ValidationError("fit_log_distance: need >= 2 windows");
    }
    const auto n = series.pl_db.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(series.distance_m[i] > 0)) throw ValidationError("fit_log_distance: distances must be positive");
        const double x = 10.0 * std::log10(series.distance_m[i] / d0_m);
        const double y = series.pl_db[i];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double nn = static_cast<double>(n);
    const double denom = nn * sxx - sx * sx;
    if (std::abs(denom) < 1e-9 * std::max(1.0, nn * sxx)) {
        throw NumericalError("fit_log_distance: degenerate fit (all distances equal)");
    }
    LogDistanceFit fit;
    fit.d0_m = d0_m;
    fit.ple = (nn * sxy - sx * sy) / denom;
    fit.intercept_db = (sy - fit.ple * sx) / nn;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = 10.0 * std::log10(series.distance_m[i] / d0_m);
        const double r = series.pl_db[i] - (fit.intercept_db + fit.ple * x);
        rss += r * r;
    }
    fit.sigma_db = std::sqrt(rss / nn);
    return fit;
}

// ---------------------------------------------------------------------------
// SAGE

namespace {

/// Matched-filter objective for one path hypothesis u(theta):
///   J = |<u, X>|^2 / ||u||^2,   u[m,f] = a_m(az,el) exp(-j 2 pi f tau).
/// The LS amplitude at the optimum is <u, X> / ||u||^2.
struct PathObjective {
    const Eigen::MatrixXcd& x;
    const std::vector<double>& freq;
    const sounder::ArrayGeometry& array;
    double steering_freq;

    struct Eval {
        double score;
        std::complex<double> amplitude;
    };

    Eval operator()(double tau, double az, double el) const {
        const Eigen::VectorXcd a = sounder::steering_vector(array, az, el, steering_freq);
        std::complex<double> corr{0.0, 0.0};
        double u_norm2 = 0.0;
        const auto n_f = static_cast<Eigen::Index>(freq.size());
        for (Eigen::Index f = 0; f < n_f; ++f) {
            const std::complex<double> d =
                std::polar(1.0, -kTwoPi * std::remainder(freq[static_cast<std::size_t>(f)] * tau, 1.0));
            for (Eigen::Index m = 0; m < x.rows(); ++m) {
                const std::complex<double> u = a(m) * d;
                corr += std::conj(u) * x(m, f);
                u_norm2 += std::norm(u);
            }
        }
        if (u_norm2 <= 0) return {0.0, {0.0, 0.0}};
        return {std::norm(corr) / u_norm2, corr / u_norm2};
    }
};

/// Golden-section maximization of a unimodal slice; returns the best of the
/// probed points and the incumbent, so it never regresses.
template <typename F>
double golden_max(F&& f, double lo, double hi, double incumbent_x, double tol) {
    const double gr = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a);
    double x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        }
    }
    const double xm = (a + b) / 2.0;
    double best_x = incumbent_x;
    double best_f = f(incumbent_x);
    for (const double c : {x1, x2, xm}) {
        const double fc = f(c);
        if (fc > best_f) {
            best_f = fc;
            best_x = c;
        }
    }
    return best_x;
}

struct SagePath {
    double tau, az, el;
    std::complex<double> amp;
};

Eigen::MatrixXcd reconstruct(const SagePath& p, const std::vector<double>& freq,
                             const sounder::ArrayGeometry& array, double steering_freq) {
    const Eigen::VectorXcd a = sounder::steering_vector(array, p.az, p.el, steering_freq);
    Eigen::MatrixXcd s(array.size(), static_cast<Eigen::Index>(freq.size()));
    for (Eigen::Index f = 0; f < s.cols(); ++f) {
        const std::complex<double> d =
            std::polar(1.0, -kTwoPi * std::remainder(freq[static_cast<std::size_t>(f)] * p.tau, 1.0));
        for (Eigen::Index m = 0; m < s.rows(); ++m) s(m, f) = p.amp * a(m) * d;
    }
    return s;
}

/// Coarse delay pick: incoherent matched filter over the native delay grid.
double coarse_delay(const Eigen::MatrixXcd& x, double bin_spacing_hz) {
    const auto n = static_cast<std::size_t>(x.cols());
    const double bandwidth = bin_spacing_hz * static_cast<double>(n);
    Eigen::VectorXd power = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    fft::cvec row(n);
    for (Eigen::Index m = 0; m < x.rows(); ++m) {
        for (std::size_t f = 0; f < n; ++f) row[f] = x(m, static_cast<Eigen::Index>(f));
        const fft::cvec td = fft::inverse(row);
        for (std::size_t k = 0; k < n; ++k) {
            power(static_cast<Eigen::Index>(k)) += std::norm(td[k]);
        }
    }
    Eigen::Index best = 0;
    power.maxCoeff(&best);
    return static_cast<double>(best) / bandwidth;
}

/// Coarse angle pick on delay-collapsed data (narrowband beamforming grid).
std::pair<double, double> coarse_angles(const Eigen::MatrixXcd& x, const std::vector<double>& freq,
                                        const sounder::ArrayGeometry& array, double steering_freq,
                                        double tau, const SageConfig& cfg) {
    Eigen::VectorXcd z = Eigen::VectorXcd::Zero(x.rows());
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        const std::complex<double> d =
            std::polar(1.0, kTwoPi * std::remainder(freq[static_cast<std::size_t>(f)] * tau, 1.0));
        for (Eigen::Index m = 0; m < x.rows(); ++m) z(m) += x(m, f) * d;
    }
    double best_az = cfg.azimuth_min_rad;
    double best_el = std::clamp(kPi / 2, cfg.elevation_min_rad, cfg.elevation_max_rad);
    double best_score = -1.0;
    const double step = cfg.coarse_angle_step_rad;
    for (double el = cfg.elevation_min_rad; el <= cfg.elevation_max_rad + 1e-12; el += step) {
        for (double az = cfg.azimuth_min_rad; az < cfg.azimuth_max_rad - 1e-12; az += step) {
            const Eigen::VectorXcd a = sounder::steering_vector(array, az, el, steering_freq);
            const double n2 = a.squaredNorm();
            if (n2 <= 0) continue;
            const double score = std::norm(a.dot(z)) / n2; // a.dot(z) = a^H z
            if (score > best_score) {
                best_score = score;
                best_az = az;
                best_el = el;
            }
        }
    }
    return {best_az, best_el};
}

void refine_path(SagePath& p, const Eigen::MatrixXcd& x, const std::vector<double>& freq,
                 const sounder::ArrayGeometry& array, double steering_freq, double bin_spacing_hz,
                 const SageConfig& cfg) {
    const PathObjective obj{x, freq, array, steering_freq};
    const double delay_halfspan = 1.0 / (bin_spacing_hz * static_cast<double>(freq.size()));
    const double angle_halfspan = cfg.coarse_angle_step_rad;

    p.tau = golden_max([&](double tau) { return obj(tau, p.az, p.el).score; },
                       std::max(0.0, p.tau - delay_halfspan), p.tau + delay_halfspan, p.tau, 1e-14);
    p.az = golden_max([&](double az) { return obj(p.tau, az, p.el).score; },
                      p.az - angle_halfspan, p.az + angle_halfspan, p.az, 1e-10);
    p.el = golden_max(
        [&](double el) { return obj(p.tau, p.az, el).score; },
        std::max(cfg.elevation_min_rad, p.el - angle_halfspan),
        std::min(cfg.elevation_max_rad, p.el + angle_halfspan), p.el, 1e-10);
    p.amp = obj(p.tau, p.az, p.el).amplitude;
}

} // namespace

PathEstimates sage_estimate(const Eigen::MatrixXcd& y, const std::vector<double>& freq_hz,
                            const sounder::ArrayGeometry& array, double steering_freq_hz,
                            const SageConfig& cfg) {
    if (cfg.max_paths < 1) throw ValidationError("sage: max_paths must be >= 1");
    if (freq_hz.size() < 2) throw ValidationError("sage: need >= 2 frequency bins");
    const double bin_spacing = freq_hz[1] - freq_hz[0];

    PathEstimates out;
    out.input_power = y.squaredNorm();
    if (out.input_power <= 0) {
        out.converged = true;
        return out; // nothing to estimate
    }

    // --- SIC initialization ---------------------------------------------
    std::vector<SagePath> paths;
    Eigen::MatrixXcd residual = y;
    for (int k = 0; k < cfg.max_paths; ++k) {
        const double res_power = residual.squaredNorm();
        if (res_power <= cfg.min_residual_fraction * out.input_power) break;
        SagePath p{};
        p.tau = coarse_delay(residual, bin_spacing);
        const auto [az, el] =
            coarse_angles(residual, freq_hz, array, steering_freq_hz, p.tau, cfg);
        p.az = az;
        p.el = el;
        refine_path(p, residual, freq_hz, array, steering_freq_hz, bin_spacing, cfg);
        const double path_power = std::norm(p.amp);
        if (!paths.empty()) {
            const double strongest = std::norm(paths.front().amp);
            if (path_power < strongest * std::pow(10.0, -cfg.detection_margin_db / 10.0)) break;
        }
        residual -= reconstruct(p, freq_hz, array, steering_freq_hz);
        paths.push_back(p);
    }

    // --- EM refinement sweeps --------------------------------------------
    double prev_residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.max_em_iterations && !paths.empty(); ++it) {
        for (std::size_t p_idx = 0; p_idx < paths.size(); ++p_idx) {
            // E-step: add this path's current contribution back.
            Eigen::MatrixXcd xp =
                residual + reconstruct(paths[p_idx], freq_hz, array, steering_freq_hz);
            // M-step: coordinate refinement; the incumbent is always a
            // candidate, so the fit cannot get worse.
            SagePath updated = paths[p_idx];
            refine_path(updated, xp, freq_hz, array, steering_freq_hz, bin_spacing, cfg);
            residual = xp - reconstruct(updated, freq_hz, array, steering_freq_hz);
            paths[p_idx] = updated;
        }
        const double res_power = residual.squaredNorm();
        out.residual_history.push_back(res_power);
        out.iterations = it + 1;
        if (prev_residual < std::numeric_limits<double>::infinity()) {
            const double improvement = (prev_residual - res_power) / out.input_power;
            if (improvement >= 0 && improvement < cfg.residual_tol) {
                out.converged = true;
                prev_residual = res_power;
                break;
            }
        }
        prev_residual = res_power;
    }
    if (paths.empty()) out.converged = true;
    out.residual_power = residual.squaredNorm();
    if (!out.converged && out.residual_power <= cfg.min_residual_fraction * out.input_power) {
        out.converged = true;
    }

    // --- package, sorted by power ----------------------------------------
    std::sort(paths.begin(), paths.end(),
              [](const SagePath& a, const SagePath& b) { return std::norm(a.amp) > std::norm(b.amp); });
    const double strongest = paths.empty() ? 1.0 : std::norm(paths.front().amp);
    for (const auto& p : paths) {
        PathEstimate e;
        e.delay_s = p.tau;
        e.azimuth_rad = std::remainder(p.az, kTwoPi) < 0
                            ? std::remainder(p.az, kTwoPi) + kTwoPi
                            : std::remainder(p.az, kTwoPi);
        e.elevation_rad = p.el;
        e.amplitude = p.amp;
        e.power_db_rel = 10.0 * std::log10(std::norm(p.amp) / strongest);
        out.paths.push_back(e);
    }
    return out;
}

PathEstimates sage_estimate(const calib::CirEntry& entry, const sounder::ArrayGeometry& array,
                            double steering_freq_hz, const SageConfig& cfg) {
    return sage_estimate(entry.h, entry.freq_hz, array, steering_freq_hz, cfg);
}

// ---------------------------------------------------------------------------
// Clustering and noise floor

double noise_floor_db(const PDP& profile, double margin_db) {
    const auto n = profile.power_linear.size();
    if (n < 16) throw ValidationError("noise_floor: need >= 16 bins");
    std::vector<double> sorted(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) sorted[static_cast<std::size_t>(i)] = profile.power_linear(i);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                     sorted.end());
    const double median = sorted[sorted.size() / 2];
    if (median <= 0) return -std::numeric_limits<double>::infinity();
    // For exponentially distributed |n|^2 the median is sigma^2 * ln 2;
    // dividing restores the mean noise power.
    return 10.0 * std::log10(median / std::log(2.0)) + margin_db;
}

namespace {

ClusterSet cluster_samples(const std::vector<double>& delay, const std::vector<double>& power_lin,
                           const std::vector<std::size_t>& input_index, const ClusterParams& params) {
    ClusterSet out;
    if (delay.empty()) return out;

    // Samples arrive sorted by delay; a gap larger than the threshold starts
    // a new cluster.
    std::vector<int> assign(delay.size(), 0);
    int current = 0;
    for (std::size_t i = 1; i < delay.size(); ++i) {
        if (delay[i] - delay[i - 1] > params.delay_gap_s) ++current;
        assign[i] = current;
    }
    int k = current + 1;

    const auto centroids = [&](const std::vector<int>& a) {
        std::vector<double> cd(static_cast<std::size_t>(k), 0.0), cp(static_cast<std::size_t>(k), 0.0);
        std::vector<int> cnt(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < delay.size(); ++i) {
            const auto c = static_cast<std::size_t>(a[i]);
            cd[c] += delay[i] * power_lin[i];
            cp[c] += power_lin[i];
            cnt[c] += 1;
        }
        for (std::size_t c = 0; c < cd.size(); ++c) {
            if (cp[c] > 0) cd[c] /= cp[c];
        }
        return std::tuple(cd, cp, cnt);
    };

    auto [cd, cp, cnt] = centroids(assign);
    if (params.refine_centroids && k > 1) {
        for (int iter = 0; iter < params.refine_iterations; ++iter) {
            bool changed = false;
            for (std::size_t i = 0; i < delay.size(); ++i) {
                int best = assign[i];
                double best_dist = std::abs(delay[i] - cd[static_cast<std::size_t>(best)]);
                for (int c = 0; c < k; ++c) {
                    if (cnt[static_cast<std::size_t>(c)] == 0) continue;
                    const double dist = std::abs(delay[i] - cd[static_cast<std::size_t>(c)]);
                    if (dist < best_dist) {
                        best_dist = dist;
                        best = c;
                    }
                }
                if (best != assign[i]) {
                    assign[i] = best;
                    changed = true;
                }
            }
            std::tie(cd, cp, cnt) = centroids(assign);
            if (!changed) break;
        }
    }

    // Drop empty clusters, order by centroid delay, renumber.
    std::vector<int> order;
    for (int c = 0; c < k; ++c) {
        if (cnt[static_cast<std::size_t>(c)] > 0) order.push_back(c);
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return cd[static_cast<std::size_t>(a)] < cd[static_cast<std::size_t>(b)];
    });
    std::vector<int> renumber(static_cast<std::size_t>(k), -1);
    for (std::size_t i = 0; i < order.size(); ++i) {
        renumber[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
        Cluster cl;
        cl.id = static_cast<int>(i);
        cl.centroid_delay_s = cd[static_cast<std::size_t>(order[i])];
        cl.centroid_power_db = 10.0 * std::log10(cp[static_cast<std::size_t>(order[i])]);
        cl.member_count = cnt[static_cast<std::size_t>(order[i])];
        out.clusters.push_back(cl);
    }
    out.assignment.resize(delay.size());
    for (std::size_t i = 0; i < delay.size(); ++i) {
        out.assignment[i] = renumber[static_cast<std::size_t>(assign[i])];
    }
    out.sample_index = input_index;
    return out;
}

} // namespace

ClusterSet cluster_pdp(const PDP& profile, const ClusterParams& params) {
    double floor;
    if (params.floor_db) {
        floor = *params.floor_db;
    } else {
        floor = noise_floor_db(profile, params.floor_margin_db);
    }
    std::vector<double> delay, power;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < profile.delay_s.size(); ++i) {
        if (profile.power_db(i) > floor) {
            delay.push_back(profile.delay_s[i]);
            power.push_back(profile.power_linear(static_cast<Eigen::Index>(i)));
            index.push_back(i);
        }
    }
    return cluster_samples(delay, power, index, params);
}

ClusterSet cluster_paths(const PathEstimates& paths, const ClusterParams& params) {
    std::vector<std::size_t> order(paths.paths.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return paths.paths[a].delay_s < paths.paths[b].delay_s;
    });
    std::vector<double> delay, power;
    std::vector<std::size_t> index;
    for (const auto i : order) {
        delay.push_back(paths.paths[i].delay_s);
        power.push_back(std::norm(paths.paths[i].amplitude));
        index.push_back(i);
    }
    return cluster_samples(delay, power, index, params);
}

} // namespace msense::estim
