#pragma once

// Synthetic ill-posed test problems: 2-D Gaussian deblurring and parallel-beam
// tomography on an n x n pixel grid, with seeded relative Gaussian noise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chopsolve/errors.hpp"
#include "chopsolve/sparse.hpp"

namespace chopsolve {

enum class ProblemKind { Deblur, Tomo };
enum class PhantomKind { Shapes, Dot, Flat };

inline const char* to_string(ProblemKind k) { return k == ProblemKind::Deblur ? "deblur" : "tomo"; }

inline const char* to_string(PhantomKind k) {
    switch (k) {
        case PhantomKind::Shapes: return "shapes";
        case PhantomKind::Dot: return "dot";
        case PhantomKind::Flat: return "flat";
    }
    return "?";
}

inline PhantomKind phantom_from_string(std::string_view s) {
    if (s == "shapes") return PhantomKind::Shapes;
    if (s == "dot") return PhantomKind::Dot;
    if (s == "flat") return PhantomKind::Flat;
    throw ConfigError("unknown phantom '" + std::string(s) + "'");
}

/// b = A x_true + noise, with A and b carrying the accumulated `scale`.
struct Problem {
    ProblemKind kind = ProblemKind::Deblur;
    std::size_t grid_n = 0;
    SparseMatrix a;
    std::vector<double> x_true;
    std::vector<double> b_exact;
    std::vector<double> b;
    std::vector<double> noise;
    double noise_level = 0.0;
    double scale = 1.0;
    /// Shape of b when viewed as an image (rows x cols).
    std::size_t b_rows = 0;
    std::size_t b_cols = 0;
};

namespace detail {

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline void require_grid(std::size_t grid_n) {
    if (grid_n < 8) throw GeometryError("grid_n must be >= 8, got " + std::to_string(grid_n));
}

}  // namespace detail

/// Test image, row-major, values in [0, 1].
inline std::vector<double> phantom(PhantomKind kind, std::size_t grid_n) {
    detail::require_grid(grid_n);
    const std::size_t n = grid_n;
    std::vector<double> img(n * n, 0.0);
    switch (kind) {
        case PhantomKind::Flat:
            std::fill(img.begin(), img.end(), 1.0);
            break;
        case PhantomKind::Dot:
            img[(n / 2) * n + n / 2] = 1.0;
            break;
        case PhantomKind::Shapes: {
            // Painted in order on [-1, 1]^2; later shapes overwrite earlier ones.
            struct Ellipse {
                double cx, cy, rx, ry, value;
            };
            const Ellipse ellipses[] = {
                {0.0, 0.0, 0.85, 0.70, 0.4},
                {-0.35, 0.25, 0.22, 0.16, 1.0},
                {0.10, -0.30, 0.15, 0.28, 0.15},
            };
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c) {
                    const double x = -1.0 + (2.0 * static_cast<double>(c) + 1.0) / static_cast<double>(n);
                    const double y = 1.0 - (2.0 * static_cast<double>(r) + 1.0) / static_cast<double>(n);
                    double v = 0.0;
                    for (const auto& e : ellipses) {
                        const double dx = (x - e.cx) / e.rx, dy = (y - e.cy) / e.ry;
                        if (dx * dx + dy * dy <= 1.0) v = e.value;
                    }
                    if (x >= 0.25 && x <= 0.60 && y >= 0.10 && y <= 0.45) v = 0.75;
                    img[r * n + c] = v;
                }
            break;
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Deblurring

/// Sum over all integer offsets of exp(-k^2 / (2 sigma^2)); the 2-D mass is
/// the square of this.
inline double gaussian_mass_1d(double sigma) {
    double s = 1.0;
    for (int k = 1;; ++k) {
        const double t = std::exp(-double(k) * k / (2.0 * sigma * sigma));
        s += 2.0 * t;
        if (t < 1e-18 * s) break;
    }
    return s;
}

/// Symmetric 2-D Gaussian convolution matrix with zero boundary conditions.
/// The kernel is truncated to |i|, |j| <= bandwidth and normalized by the
/// untruncated mass, so every row sums to at most 1.
inline SparseMatrix gaussian_blur_matrix(std::size_t grid_n, double blur_sigma, std::size_t bandwidth) {
    if (!(blur_sigma > 0.0)) throw GeometryError("blur_sigma must be > 0");
    if (bandwidth >= grid_n)
        throw GeometryError("bandwidth " + std::to_string(bandwidth) + " must be < grid_n " + std::to_string(grid_n));
    const double mass = std::pow(gaussian_mass_1d(blur_sigma), 2);
    const auto bw = static_cast<long>(bandwidth);
    const auto n = static_cast<long>(grid_n);

    std::vector<double> kernel((2 * bw + 1) * (2 * bw + 1));
    for (long i = -bw; i <= bw; ++i)
        for (long j = -bw; j <= bw; ++j)
            kernel[(i + bw) * (2 * bw + 1) + (j + bw)] =
                std::exp(-double(i * i + j * j) / (2.0 * blur_sigma * blur_sigma)) / mass;

    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    for (long r = 0; r < n; ++r)
        for (long c = 0; c < n; ++c) {
            for (long i = -bw; i <= bw; ++i) {
                const long rr = r + i;
                if (rr < 0 || rr >= n) continue;
                for (long j = -bw; j <= bw; ++j) {
                    const long cc = c + j;
                    if (cc < 0 || cc >= n) continue;
                    cols.push_back(static_cast<std::size_t>(rr * n + cc));
                    vals.push_back(kernel[(i + bw) * (2 * bw + 1) + (j + bw)]);
                }
            }
            offsets.push_back(cols.size());
        }
    return {grid_n * grid_n, grid_n * grid_n, std::move(offsets), std::move(cols), std::move(vals)};
}

/// Labeled "mild blur" preset.
struct BlurParams {
    double sigma = 1.0;
    std::size_t bandwidth = 4;
};

inline Problem gen_deblur(std::size_t grid_n, double blur_sigma, std::size_t bandwidth, PhantomKind kind) {
    detail::require_grid(grid_n);
    Problem p;
    p.kind = ProblemKind::Deblur;
    p.grid_n = grid_n;
    p.a = gaussian_blur_matrix(grid_n, blur_sigma, bandwidth);
    p.x_true = phantom(kind, grid_n);
    p.b_exact = p.a.multiply(p.x_true);
    p.b = p.b_exact;
    p.noise.assign(p.b.size(), 0.0);
    p.b_rows = p.b_cols = grid_n;
    return p;
}

// ---------------------------------------------------------------------------
// Tomography

struct PixelHit {
    std::size_t pixel;
    double length;
};

/// Intersections of one parallel-beam ray with the unit-pixel grid.
///
/// The grid occupies [-n/2, n/2]^2 with row 0 at the top. The ray has
/// direction (cos theta, sin theta) and signed offset `offset` along the normal
/// (-sin theta, cos theta). Lengths come from merging the parametric crossings
/// of all grid lines (exact traversal).
inline std::vector<PixelHit> trace_ray(std::size_t grid_n, double theta, double offset) {
    const double half = static_cast<double>(grid_n) / 2.0;
    const double ux = std::cos(theta), uy = std::sin(theta);
    const double px = -std::sin(theta) * offset, py = std::cos(theta) * offset;
    constexpr double kParallel = 1e-14;

    // Parametric window inside the square.
    double t_lo = -std::numeric_limits<double>::infinity();
    double t_hi = std::numeric_limits<double>::infinity();
    auto clip = [&](double p, double u) {
        if (std::fabs(u) < kParallel) return p >= -half && p <= half;
        double t0 = (-half - p) / u, t1 = (half - p) / u;
        if (t0 > t1) std::swap(t0, t1);
        t_lo = std::max(t_lo, t0);
        t_hi = std::min(t_hi, t1);
        return true;
    };
    if (!clip(px, ux) || !clip(py, uy) || !(t_hi > t_lo)) return {};

    std::vector<double> ts{t_lo, t_hi};
    for (std::size_t k = 0; k <= grid_n; ++k) {
        const double line = -half + static_cast<double>(k);
        if (std::fabs(ux) >= kParallel) {
            const double t = (line - px) / ux;
            if (t > t_lo && t < t_hi) ts.push_back(t);
        }
        if (std::fabs(uy) >= kParallel) {
            const double t = (line - py) / uy;
            if (t > t_lo && t < t_hi) ts.push_back(t);
        }
    }
    std::sort(ts.begin(), ts.end());

    std::vector<PixelHit> hits;
    const auto n = static_cast<long>(grid_n);
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const double len = ts[k + 1] - ts[k];
        if (len <= 1e-12) continue;
        const double tm = 0.5 * (ts[k] + ts[k + 1]);
        const double mx = px + tm * ux, my = py + tm * uy;
        const long c = std::clamp(static_cast<long>(std::floor(mx + half)), 0L, n - 1);
        const long r = std::clamp(static_cast<long>(std::floor(half - my)), 0L, n - 1);
        const auto pixel = static_cast<std::size_t>(r * n + c);
        if (!hits.empty() && hits.back().pixel == pixel)
            hits.back().length += len;
        else
            hits.push_back({pixel, len});
    }
    return hits;
}

struct TomoGeometry {
    std::size_t n_angles = 0;     // 0 selects grid_n
    std::size_t n_detectors = 0;  // 0 selects ceil(sqrt(2) grid_n)
};

inline std::size_t default_detectors(std::size_t grid_n) {
    return static_cast<std::size_t>(std::ceil(std::numbers::sqrt2 * static_cast<double>(grid_n)));
}

/// Detector offsets: cell centres of n_detectors equal cells spanning the
/// grid diagonal.
inline double detector_offset(std::size_t grid_n, std::size_t n_detectors, std::size_t j) {
    const double span = std::numbers::sqrt2 * static_cast<double>(grid_n);
    return -span / 2.0 + (static_cast<double>(j) + 0.5) * span / static_cast<double>(n_detectors);
}

/// Parallel-beam projection matrix, one row per (angle, detector), angles
/// equispaced in [0, pi).
inline SparseMatrix tomography_matrix(std::size_t grid_n, std::size_t n_angles, std::size_t n_detectors) {
    if (n_angles < 1 || n_detectors < 1) throw GeometryError("n_angles and n_detectors must be >= 1");
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    std::vector<PixelHit> hits;
    for (std::size_t a = 0; a < n_angles; ++a) {
        const double theta = std::numbers::pi * static_cast<double>(a) / static_cast<double>(n_angles);
        for (std::size_t d = 0; d < n_detectors; ++d) {
            hits = trace_ray(grid_n, theta, detector_offset(grid_n, n_detectors, d));
            std::sort(hits.begin(), hits.end(), [](const PixelHit& x, const PixelHit& y) { return x.pixel < y.pixel; });
            for (std::size_t k = 0; k < hits.size(); ++k) {
                if (k > 0 && hits[k].pixel == hits[k - 1].pixel) {
                    vals.back() += hits[k].length;
                    continue;
                }
                cols.push_back(hits[k].pixel);
                vals.push_back(hits[k].length);
            }
            offsets.push_back(cols.size());
        }
    }
    return {n_angles * n_detectors, grid_n * grid_n, std::move(offsets), std::move(cols), std::move(vals)};
}

inline Problem gen_tomo(std::size_t grid_n, std::size_t n_angles, std::size_t n_detectors, PhantomKind kind) {
    detail::require_grid(grid_n);
    if (n_angles == 0) n_angles = grid_n;
    if (n_detectors == 0) n_detectors = default_detectors(grid_n);
    Problem p;
    p.kind = ProblemKind::Tomo;
    p.grid_n = grid_n;
    p.a = tomography_matrix(grid_n, n_angles, n_detectors);
    p.x_true = phantom(kind, grid_n);
    p.b_exact = p.a.multiply(p.x_true);
    p.b = p.b_exact;
    p.noise.assign(p.b.size(), 0.0);
    p.b_rows = n_angles;
    p.b_cols = n_detectors;
    return p;
}

// ---------------------------------------------------------------------------

/// Replaces the noise with a seeded Gaussian draw scaled to
/// |e| = level |b_exact|.
inline Problem add_noise(Problem p, double level, std::uint64_t seed) {
    if (!(level >= 0.0)) throw ConfigError("noise level must be >= 0");
    p.noise.assign(p.b_exact.size(), 0.0);
    p.noise_level = level;
    if (level > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss;
        for (auto& e : p.noise) e = gauss(rng);
        const double en = detail::norm2(p.noise);
        const double target = level * detail::norm2(p.b_exact);
        if (en > 0.0)
            for (auto& e : p.noise) e *= target / en;
    }
    p.b = p.b_exact;
    for (std::size_t i = 0; i < p.b.size(); ++i) p.b[i] += p.noise[i];
    return p;
}

/// Multiplies A, b, b_exact and the noise by s. x_true is unchanged.
inline Problem rescale_problem(Problem p, double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidScaleError("rescale factor must be positive and finite");
    if (s == 1.0) return p;
    p.a = p.a.scaled(s);
    for (auto* v : {&p.b, &p.b_exact, &p.noise})
        for (auto& x : *v) x *= s;
    p.scale *= s;
    return p;
}

}  // namespace chopsolve
