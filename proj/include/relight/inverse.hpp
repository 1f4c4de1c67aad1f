// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "relight/core.hpp"
#include "relight/envmap.hpp"
#include "relight/gbuffer.hpp"
#include "relight/random.hpp"
#include "relight/renderer.hpp"

namespace relight {

// ---------------------------------------------------------------------------
// Latent tensors and the diffusion schedule.
// ---------------------------------------------------------------------------

/// H x W x C double tensor, channel-interleaved per pixel.
struct Latent {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Latent() = default;
    Latent(int w, int h, int c)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, 0.0) {}

    double& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    bool sameShape(const Latent& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    double l2Norm() const {
        double s = 0.0;
        for (double v : data) s += v * v;
        return std::sqrt(s);
    }

    bool allFinite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Linear-beta DDPM schedule with a fixed subsequence of inference timesteps.
/// alphaBar(t) is the cumulative product of (1 - beta) up to step t; t = 0 is
/// the clean point with alphaBar = 1.
struct DiffusionSchedule {
    int trainingSteps = 0;            // T
    std::vector<double> alphaBar;     // index t-1 for t in 1..T
    std::vector<int> timesteps;       // descending inference subsequence in [1, T]

    static DiffusionSchedule linearBeta(int trainingSteps = 1000,
                                        double betaStart = 1e-4,
                                        double betaEnd = 0.02,
                                        int inferenceSteps = 50) {
        if (trainingSteps < 1 || inferenceSteps < 1 || inferenceSteps > trainingSteps)
            throw std::invalid_argument("DiffusionSchedule: invalid step counts");
        DiffusionSchedule s;
        s.trainingSteps = trainingSteps;
        s.alphaBar.resize(trainingSteps);
        double cum = 1.0;
        for (int t = 1; t <= trainingSteps; ++t) {
            const double beta =
                trainingSteps == 1
                    ? betaStart
                    : betaStart + (betaEnd - betaStart) * (t - 1) / (trainingSteps - 1);
            cum *= 1.0 - beta;
            s.alphaBar[t - 1] = cum;
        }
        for (int i = inferenceSteps - 1; i >= 0; --i) {
            const int t = static_cast<int>(
                std::llround(static_cast<double>(trainingSteps) * (i + 1) / inferenceSteps));
            s.timesteps.push_back(std::max(t, 1));
        }
        s.validate();
        return s;
    }

    double alphaBarAt(int t) const {
        if (t == 0) return 1.0;
        if (t < 1 || t > trainingSteps)
            throw std::invalid_argument("DiffusionSchedule: timestep out of range");
        return alphaBar[t - 1];
    }

    int inferenceSteps() const { return static_cast<int>(timesteps.size()); }

    void validate() const {
        if (trainingSteps < 1 || alphaBar.size() != static_cast<size_t>(trainingSteps))
            throw std::invalid_argument("DiffusionSchedule: bad alphaBar size");
        double prev = 1.0;
        for (double a : alphaBar) {
            if (!(a > 0.0 && a < prev))
                throw std::invalid_argument("DiffusionSchedule: alphaBar must strictly decrease in (0,1)");
            prev = a;
        }
        if (timesteps.empty())
            throw std::invalid_argument("DiffusionSchedule: empty inference subsequence");
        int last = trainingSteps + 1;
        for (int t : timesteps) {
            if (t < 1 || t > trainingSteps || t >= last)
                throw std::invalid_argument("DiffusionSchedule: timesteps must descend within [1,T]");
            last = t;
        }
    }
};

/// One deterministic (eta = 0) DDIM transition.
struct DdimStepResult {
    Latent x0Hat;
    Latent xNext;
};

inline DdimStepResult ddimStep(const Latent& xt, const Latent& eps, int tFrom, int tTo,
                               const DiffusionSchedule& schedule) {
    if (!xt.sameShape(eps))
        throw std::invalid_argument("ddimStep: latent/noise shape mismatch");
    if (tFrom <= tTo || tTo < 0)
        throw std::invalid_argument("ddimStep: requires tFrom > tTo >= 0");
    const double aFrom = schedule.alphaBarAt(tFrom);
    const double aTo = schedule.alphaBarAt(tTo);
    const double sqrtAFrom = std::sqrt(aFrom);
    const double sqrtOneFrom = std::sqrt(1.0 - aFrom);
    const double sqrtATo = std::sqrt(aTo);
    const double sqrtOneTo = std::sqrt(1.0 - aTo);

    DdimStepResult out{Latent(xt.width, xt.height, xt.channels),
                       Latent(xt.width, xt.height, xt.channels)};
    for (size_t i = 0; i < xt.data.size(); ++i) {
        const double x0 = (xt.data[i] - sqrtOneFrom * eps.data[i]) / sqrtAFrom;
        out.x0Hat.data[i] = x0;
        out.xNext.data[i] = sqrtATo * x0 + sqrtOneTo * eps.data[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pluggable denoiser / decoder, plus closed-form reference implementations
// that exercise the full sampler without any trained network.
// ---------------------------------------------------------------------------

class Denoiser {
  public:
    virtual ~Denoiser() = default;
    /// Deterministic noise prediction for (x_t, t).
    virtual Latent predictNoise(const Latent& xt, int t) const = 0;
};

/// Optimal denoiser for an isotropic Gaussian prior N(mean, sigma^2 I): the
/// posterior mean of x_0 given x_t is closed-form, hence so is the implied
/// noise prediction.
class GaussianPriorDenoiser final : public Denoiser {
  public:
    GaussianPriorDenoiser(Latent mean, double sigma, DiffusionSchedule schedule)
        : mean_(std::move(mean)), sigma_(sigma), schedule_(std::move(schedule)) {
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw std::invalid_argument("GaussianPriorDenoiser: bad sigma");
    }

    Latent predictNoise(const Latent& xt, int t) const override {
        if (!xt.sameShape(mean_))
            throw std::invalid_argument("GaussianPriorDenoiser: latent shape mismatch");
        const double a = schedule_.alphaBarAt(t);
        const double marginalVar = a * sigma_ * sigma_ + (1.0 - a);
        const double scale = std::sqrt(1.0 - a) / marginalVar;
        const double sqrtA = std::sqrt(a);
        Latent eps(xt.width, xt.height, xt.channels);
        for (size_t i = 0; i < xt.data.size(); ++i)
            eps.data[i] = scale * (xt.data[i] - sqrtA * mean_.data[i]);
        return eps;
    }

    const Latent& mean() const { return mean_; }

  private:
    Latent mean_;
    double sigma_;
    DiffusionSchedule schedule_;
};

class Decoder {
  public:
    virtual ~Decoder() = default;
    virtual int channels() const = 0;
    /// Decoded output always satisfies the G-buffer invariants.
    virtual GBuffer decode(const Latent& z) const = 0;
    /// Vector-Jacobian product: pulls G-buffer adjoints back onto the latent.
    virtual Latent adjoint(const Latent& z, const GBufferGradients& grad) const = 0;
};

/// Channel map [0..2] -> basecolor (logistic), [3..5] -> normal (vector
/// normalization), [6] -> roughness, [7] -> metallic (affine + clamp).
class ReferenceDecoder final : public Decoder {
  public:
    int channels() const override { return 8; }

    GBuffer decode(const Latent& z) const override {
        checkShape(z);
        GBuffer g(z.width, z.height);
        for (int y = 0; y < z.height; ++y) {
            for (int x = 0; x < z.width; ++x) {
                const size_t i = static_cast<size_t>(y) * z.width + x;
                for (int c = 0; c < 3; ++c)
                    g.basecolor[i][c] = logistic(z.at(x, y, c));
                const Vec3 raw(z.at(x, y, 3), z.at(x, y, 4), z.at(x, y, 5));
                const double len = raw.norm();
                g.normal[i] = len > kNormalEps ? raw / len : Vec3(0, 0, 1);
                g.roughness[i] =
                    std::clamp(0.5 + 0.5 * z.at(x, y, 6), kRoughnessFloor, 1.0);
                g.metallic[i] = std::clamp(0.5 + 0.5 * z.at(x, y, 7), 0.0, 1.0);
            }
        }
        return g;
    }

    Latent adjoint(const Latent& z, const GBufferGradients& grad) const override {
        checkShape(z);
        if (grad.width != z.width || grad.height != z.height)
            throw std::invalid_argument("ReferenceDecoder: gradient shape mismatch");
        Latent out(z.width, z.height, 8);
        for (int y = 0; y < z.height; ++y) {
            for (int x = 0; x < z.width; ++x) {
                const size_t i = static_cast<size_t>(y) * z.width + x;
                for (int c = 0; c < 3; ++c) {
                    const double s = logistic(z.at(x, y, c));
                    out.at(x, y, c) = grad.basecolor[i][c] * s * (1.0 - s);
                }
                const Vec3 raw(z.at(x, y, 3), z.at(x, y, 4), z.at(x, y, 5));
                const double len = raw.norm();
                if (len > kNormalEps) {
                    const Vec3 n = raw / len;
                    const Vec3 dn = grad.normal[i];
                    const Vec3 projected = (dn - n * dn.dot(n)) / len;
                    out.at(x, y, 3) = projected.x;
                    out.at(x, y, 4) = projected.y;
                    out.at(x, y, 5) = projected.z;
                }
                const double roughRaw = 0.5 + 0.5 * z.at(x, y, 6);
                if (roughRaw >= kRoughnessFloor && roughRaw <= 1.0)
                    out.at(x, y, 6) = grad.roughness[i] * 0.5;
                const double metalRaw = 0.5 + 0.5 * z.at(x, y, 7);
                if (metalRaw >= 0.0 && metalRaw <= 1.0)
                    out.at(x, y, 7) = grad.metallic[i] * 0.5;
            }
        }
        return out;
    }

  private:
    static constexpr double kNormalEps = 1e-8;
    static double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }
    void checkShape(const Latent& z) const {
        if (z.channels != 8)
            throw std::invalid_argument("ReferenceDecoder: expects 8 latent channels");
    }
};

/// Latent whose reference decode is a neutral G-buffer: mid-gray dielectric,
/// roughness 0.5, facing +Z. A sensible prior mean when nothing is known.
inline Latent neutralGBufferPrior(int width, int height) {
    Latent mu(width, height, 8);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            mu.at(x, y, 5) = 1.0;   // normal (0,0,1)
            mu.at(x, y, 7) = -0.8;  // metallic 0.1
        }
    return mu;
}

// ---------------------------------------------------------------------------
// Measurement loss and the direct gradient-descent inverter.
// ---------------------------------------------------------------------------

struct MeasurementResult {
    double loss = 0.0;
    GBufferGradients grad;
};

/// Mean squared rendering residual over valid pixels (3 channels each), with
/// its exact gradient through the differentiable renderer.
inline MeasurementResult measurementLoss(const GBuffer& g, const EnvAssets& assets,
                                         const ViewSetup& view,
                                         const LinearImage& observed,
                                         const Mask* mask = nullptr) {
    if (observed.width() != g.width || observed.height() != g.height)
        throw std::invalid_argument("measurementLoss: observed shape mismatch");
    if (mask && !mask->sameShape(observed))
        throw std::invalid_argument("measurementLoss: mask shape mismatch");
    observed.validate("measurementLoss observed");

    const LinearImage rendered = renderForward(g, assets, view);
    size_t valid = 0;
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x)
            if (!mask || mask->at(x, y)) ++valid;
    if (valid == 0) throw std::invalid_argument("measurementLoss: empty valid-pixel set");

    const double norm = 1.0 / (3.0 * static_cast<double>(valid));
    double loss = 0.0;
    LinearImage lossGrad(g.width, g.height, Rgb(0.0));
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            if (mask && !mask->at(x, y)) continue;
            for (int c = 0; c < 3; ++c) {
                const double r = rendered.at(x, y)[c] - observed.at(x, y)[c];
                loss += r * r * norm;
                lossGrad.at(x, y)[c] = 2.0 * r * norm;
            }
        }
    }
    MeasurementResult out;
    out.loss = loss;
    out.grad = renderBackward(g, assets, view, lossGrad);
    return out;
}

namespace detail {

inline GBuffer applyGradientStep(const GBuffer& g, const GBufferGradients& grad,
                                 double step) {
    GBuffer out = g;
    for (size_t i = 0; i < g.pixelCount(); ++i) {
        for (int c = 0; c < 3; ++c) out.basecolor[i][c] -= step * grad.basecolor[i][c];
        out.normal[i] = out.normal[i] - grad.normal[i] * step;
        out.roughness[i] -= step * grad.roughness[i];
        out.metallic[i] -= step * grad.metallic[i];
    }
    out.projectToRanges();
    return out;
}

inline bool anyNonzero(const GBufferGradients& grad) {
    for (size_t i = 0; i < grad.pixelCount(); ++i) {
        if (grad.basecolor[i].r != 0.0 || grad.basecolor[i].g != 0.0 ||
            grad.basecolor[i].b != 0.0)
            return true;
        if (grad.normal[i].x != 0.0 || grad.normal[i].y != 0.0 || grad.normal[i].z != 0.0)
            return true;
        if (grad.roughness[i] != 0.0 || grad.metallic[i] != 0.0) return true;
    }
    return false;
}

}  // namespace detail

/// Projected gradient descent on the measurement loss. The working step
/// halves while a proposal increases the loss (up to 20 times per iteration)
/// and recovers after accepted steps, never exceeding the caller's step.
/// Accepted iterates never increase the loss; the best iterate is returned.
inline GBuffer optimizeGBuffer(const GBuffer& init, const EnvAssets& assets,
                               const ViewSetup& view, const LinearImage& observed,
                               int iterations, double step,
                               const Mask* mask = nullptr) {
    if (iterations < 1) throw std::invalid_argument("optimizeGBuffer: iterations >= 1");
    if (!(step >= 0.0) || !std::isfinite(step))
        throw std::invalid_argument("optimizeGBuffer: step must be finite and >= 0");
    init.validate();

    MeasurementResult cur = measurementLoss(init, assets, view, observed, mask);
    if (!std::isfinite(cur.loss))
        throw std::runtime_error("optimizeGBuffer: non-finite loss at the initial point");
    if (step == 0.0 || cur.loss == 0.0 || !detail::anyNonzero(cur.grad)) return init;

    GBuffer g = init;
    GBuffer best = init;
    double bestLoss = cur.loss;
    double working = step;
    for (int it = 0; it < iterations; ++it) {
        bool accepted = false;
        for (int halving = 0; halving <= 20; ++halving) {
            GBuffer cand = detail::applyGradientStep(g, cur.grad, working);
            MeasurementResult next = measurementLoss(cand, assets, view, observed, mask);
            if (!std::isfinite(next.loss))
                throw std::runtime_error("optimizeGBuffer: non-finite loss at iteration " +
                                         std::to_string(it));
            if (next.loss <= cur.loss) {
                g = std::move(cand);
                cur = std::move(next);
                working = std::min(working * 2.0, step);
                accepted = true;
                break;
            }
            working *= 0.5;
        }
        if (!accepted) break;  // no descent direction at the smallest step
        if (cur.loss < bestLoss) {
            bestLoss = cur.loss;
            best = g;
        }
        if (cur.loss == 0.0 || !detail::anyNonzero(cur.grad)) break;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Guided DDIM sampling.
// ---------------------------------------------------------------------------

struct GuidanceConfig {
    double zeta0 = 0.3;        // base guidance strength
    double gradientClip = 1.0; // L2 clip on the latent gradient
    int steps = 50;            // K, must match the schedule subsequence
    uint64_t seed = 0;

    void validate() const {
        if (!(zeta0 >= 0.0) || !std::isfinite(zeta0))
            throw std::invalid_argument("GuidanceConfig: zeta0 must be >= 0");
        if (!(gradientClip > 0.0))
            throw std::invalid_argument("GuidanceConfig: gradient clip must be > 0");
        if (steps < 1) throw std::invalid_argument("GuidanceConfig: steps must be >= 1");
    }
};

struct DpsStepDiagnostics {
    int step = 0;        // 0-based inference step index
    int t = 0;           // training timestep consumed at this step
    double lossRender = 0.0;
    double gradNorm = 0.0;  // latent gradient norm before clipping
    double zeta = 0.0;      // guidance strength applied
};

struct DpsResult {
    GBuffer gbuffer;       // decode of the final clean estimate
    Latent finalLatent;    // x0-hat at the last step, before any correction
    std::vector<DpsStepDiagnostics> steps;
};

/// Standard-normal initial latent for a sampling run; exposed so unguided
/// reference trajectories can start from the identical noise.
inline Latent initialNoiseLatent(int width, int height, int channels, uint64_t seed) {
    DeterministicRng rng(seed);
    Latent x(width, height, channels);
    for (double& v : x.data) v = rng.normal();
    return x;
}

/// Plain deterministic DDIM from a provided initial latent; returns the final
/// clean estimate. Reference trajectory for the zeta = 0 equivalence check.
inline Latent ddimSample(const Denoiser& denoiser, const Latent& xT,
                         const DiffusionSchedule& schedule) {
    Latent x = xT;
    Latent lastX0;
    const int k = schedule.inferenceSteps();
    for (int i = 0; i < k; ++i) {
        const int tFrom = schedule.timesteps[i];
        const int tTo = i + 1 < k ? schedule.timesteps[i + 1] : 0;
        const Latent eps = denoiser.predictNoise(x, tFrom);
        DdimStepResult step = ddimStep(x, eps, tFrom, tTo, schedule);
        lastX0 = std::move(step.x0Hat);
        x = std::move(step.xNext);
    }
    return lastX0;
}

/// DDIM refined by measurement gradients: after each transition the new
/// latent takes a correction -zeta_t * g_t, where g_t is the rendering-loss
/// gradient at the clean estimate pulled back through 1/sqrt(alphaBar) (the
/// denoiser itself is treated as constant) and clipped in L2 norm. zeta_t is
/// residual-normalized: zeta0 / (sqrt(L_render) + 1e-8).
inline DpsResult dpsSample(const Denoiser& denoiser, const Decoder& decoder,
                           const EnvAssets& assets, const ViewSetup& view,
                           const LinearImage& observed, const Mask* mask,
                           const GuidanceConfig& cfg,
                           const DiffusionSchedule& schedule) {
    cfg.validate();
    schedule.validate();
    if (cfg.steps != schedule.inferenceSteps())
        throw std::invalid_argument("dpsSample: config steps disagree with schedule");
    observed.validate("dpsSample observed");

    Latent x = initialNoiseLatent(observed.width(), observed.height(),
                                  decoder.channels(), cfg.seed);
    Latent lastX0;
    DpsResult result;
    const int k = schedule.inferenceSteps();
    for (int i = 0; i < k; ++i) {
        const int tFrom = schedule.timesteps[i];
        const int tTo = i + 1 < k ? schedule.timesteps[i + 1] : 0;
        const Latent eps = denoiser.predictNoise(x, tFrom);
        DdimStepResult step = ddimStep(x, eps, tFrom, tTo, schedule);

        const GBuffer decoded = decoder.decode(step.x0Hat);
        const MeasurementResult measured =
            measurementLoss(decoded, assets, view, observed, mask);

        Latent gLatent = decoder.adjoint(step.x0Hat, measured.grad);
        const double pullback = 1.0 / std::sqrt(schedule.alphaBarAt(tFrom));
        for (double& v : gLatent.data) v *= pullback;
        if (!gLatent.allFinite())
            throw std::runtime_error("dpsSample: non-finite guidance gradient at step " +
                                     std::to_string(i));

        const double gradNorm = gLatent.l2Norm();
        const double clipScale =
            gradNorm > cfg.gradientClip ? cfg.gradientClip / gradNorm : 1.0;
        const double zeta = cfg.zeta0 / (std::sqrt(measured.loss) + 1e-8);
        for (size_t j = 0; j < x.data.size(); ++j)
            step.xNext.data[j] -= zeta * (gLatent.data[j] * clipScale);

        result.steps.push_back({i, tFrom, measured.loss, gradNorm, zeta});
        lastX0 = std::move(step.x0Hat);
        x = std::move(step.xNext);
    }
    result.finalLatent = std::move(lastX0);
    result.gbuffer = decoder.decode(result.finalLatent);
    return result;
}

/// Per-step trajectory diagnostics as CSV.
inline void writeTrajectoryCsv(const std::string& path,
                               const std::vector<DpsStepDiagnostics>& steps) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("writeTrajectoryCsv '" + path + "': cannot open");
    os << "step,t,l_render,grad_norm,zeta\n";
    char line[160];
    for (const DpsStepDiagnostics& s : steps) {
        std::snprintf(line, sizeof(line), "%d,%d,%.12g,%.12g,%.12g\n", s.step, s.t,
                      s.lossRender, s.gradNorm, s.zeta);
        os << line;
    }
}

}  // namespace relight
