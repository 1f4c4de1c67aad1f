// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

// Batch command-line surface over the relight library: HDR merging,
// environment-asset construction, forward rendering, physics-guided
// inversion, relighting evaluation, fold listing, and capture-sync
// validation. All commands are deterministic for fixed inputs and seeds and
// fail with one machine-readable error line on stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "relight/relight.hpp"

namespace fs = std::filesystem;
using namespace relight;

namespace {

void printErrorLine(const std::string& message, const std::string& field = {}) {
    nlohmann::json err{{"message", message}};
    if (!field.empty()) err["field"] = field;
    std::cerr << "error: " << err.dump() << "\n";
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Exceptions are
/// captured and rethrown on the caller thread.
void parallelFor(size_t count, int jobs, const std::function<void(size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    const int n = std::min<int>(jobs, static_cast<int>(count));
    std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
    for (int w = 0; w < n; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
                    fn(i);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (std::thread& t : workers) t.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string cacheDirectory(const std::string& flagValue) {
    if (!flagValue.empty()) return flagValue;
    if (const char* env = std::getenv("RELIGHT_CACHE_DIR")) return env;
    return {};
}

std::string assetsCachePath(const std::string& cacheDir, uint64_t hash, int levels) {
    char name[64];
    std::snprintf(name, sizeof(name), "%016llx-L%d.envassets",
                  static_cast<unsigned long long>(hash), levels);
    return (fs::path(cacheDir) / name).string();
}

/// Loads (or builds and optionally caches) the derived assets for an
/// environment map file.
EnvAssets assetsForEnvFile(const std::string& envPath, int levels,
                           const std::string& cacheDir) {
    const EnvironmentMap env(readExr(envPath));
    const uint64_t hash = envContentHash(env);
    if (!cacheDir.empty()) {
        const std::string cached = assetsCachePath(cacheDir, hash, levels);
        if (fs::exists(cached)) {
            EnvAssets assets = loadEnvAssets(cached);
            if (assets.contentHash == hash &&
                assets.prefiltered.levelCount() == levels)
                return assets;
        }
        EnvAssets assets = buildEnvAssets(env, levels);
        fs::create_directories(cacheDir);
        saveEnvAssets(cached, assets);
        return assets;
    }
    return buildEnvAssets(env, levels);
}

struct CameraFlags {
    double focalPx = 0.0;
    double cx = -1.0;
    double cy = -1.0;

    ViewSetup makeView(int width, int height) const {
        if (focalPx > 0.0) {
            const double px = cx >= 0.0 ? cx : width / 2.0;
            const double py = cy >= 0.0 ? cy : height / 2.0;
            return ViewSetup::pinhole(width, height, focalPx, px, py);
        }
        return ViewSetup::sharedDirection(Vec3(0, 0, 1));
    }
};

LinearImage captureGroundTruth(const SceneManifest& manifest,
                               const ManifestCapture& capture) {
    if (!capture.hasStack()) return readExr(manifest.resolve(capture.image));
    ExposureStack stack;
    for (const ManifestExposure& e : capture.exposures)
        stack.frames.push_back({readExr(manifest.resolve(e.path)), e.timeSeconds});
    return mergeExposures(stack).radiance;
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

int runMerge(const std::string& manifestPath, std::vector<std::string> lightings,
             std::string outDir, int jobs) {
    const SceneManifest manifest = loadManifest(manifestPath);
    if (outDir.empty()) outDir = (manifest.baseDir / "merged").string();
    fs::create_directories(outDir);

    std::vector<const ManifestCapture*> targets;
    if (lightings.empty()) {
        for (const ManifestCapture& c : manifest.captures)
            if (c.hasStack()) targets.push_back(&c);
        if (targets.empty())
            throw std::runtime_error("manifest has no captures with exposure stacks");
    } else {
        for (const std::string& id : lightings) {
            const ManifestCapture& c = manifest.captureFor(id);
            if (!c.hasStack())
                throw std::runtime_error("capture '" + id + "' has no exposure stack");
            targets.push_back(&c);
        }
    }

    std::vector<std::string> lines(targets.size());
    parallelFor(targets.size(), jobs, [&](size_t i) {
        const ManifestCapture& capture = *targets[i];
        ExposureStack stack;
        for (const ManifestExposure& e : capture.exposures)
            stack.frames.push_back({readExr(manifest.resolve(e.path)), e.timeSeconds});
        const MergeResult merged = mergeExposures(stack);
        const std::string exrPath =
            (fs::path(outDir) / (capture.lighting + ".exr")).string();
        const std::string maskPath =
            (fs::path(outDir) / (capture.lighting + "_saturation.png")).string();
        writeExr(exrPath, merged.radiance);
        writeMaskPng(maskPath, merged.saturatedFallback);
        lines[i] = capture.lighting + " -> " + exrPath + " (saturated pixels: " +
                   std::to_string(merged.saturatedFallback.countTrue()) + ")";
    });
    for (const std::string& line : lines) std::cout << line << "\n";
    return 0;
}

int runBuildEnv(const std::string& envPath, int levels, std::string outPath,
                const std::string& cacheFlag) {
    const EnvironmentMap env(readExr(envPath));
    const uint64_t hash = envContentHash(env);
    const std::string cacheDir = cacheDirectory(cacheFlag);
    if (outPath.empty()) {
        if (!cacheDir.empty()) {
            fs::create_directories(cacheDir);
            outPath = assetsCachePath(cacheDir, hash, levels);
        } else {
            outPath = envPath + ".envassets";
        }
    }
    const EnvAssets assets = buildEnvAssets(env, levels);
    saveEnvAssets(outPath, assets);
    char line[512];
    std::snprintf(line, sizeof(line), "assets %016llx levels=%d -> %s\n",
                  static_cast<unsigned long long>(hash), levels, outPath.c_str());
    std::cout << line;
    return 0;
}

int runRender(const std::string& gbufferDir, const std::string& envPath,
              const std::string& assetsPath, int levels, const std::string& outPath,
              const CameraFlags& camera, const std::string& cacheFlag) {
    const GBuffer g = loadGBuffer(gbufferDir);
    const EnvAssets assets = assetsPath.empty()
                                 ? assetsForEnvFile(envPath, levels,
                                                    cacheDirectory(cacheFlag))
                                 : loadEnvAssets(assetsPath);
    const ViewSetup view = camera.makeView(g.width, g.height);
    writeExr(outPath, renderForward(g, assets, view));
    std::cout << "rendered " << g.width << "x" << g.height << " -> " << outPath << "\n";
    return 0;
}

int runInvert(const std::string& observedPath, const std::string& envPath,
              const std::string& assetsPath, int levels, const std::string& mode,
              const std::string& outDir, const std::string& maskPath,
              const CameraFlags& camera, int iters, double step,
              const std::string& init, double zeta, double clip, int steps,
              double priorSigma, uint64_t seed, std::string diagnosticsPath,
              const std::string& cacheFlag) {
    const LinearImage observed = readExr(observedPath);
    const EnvAssets assets = assetsPath.empty()
                                 ? assetsForEnvFile(envPath, levels,
                                                    cacheDirectory(cacheFlag))
                                 : loadEnvAssets(assetsPath);
    const ViewSetup view = camera.makeView(observed.width(), observed.height());
    std::optional<Mask> mask;
    if (!maskPath.empty()) {
        mask = readMaskPng(maskPath);
        if (!mask->sameShape(observed))
            throw std::runtime_error("mask dimensions do not match the observed image");
    }
    const Mask* maskPtr = mask ? &*mask : nullptr;
    fs::create_directories(outDir);

    if (mode == "descent") {
        GBuffer start(observed.width(), observed.height());
        if (init == "random") {
            DeterministicRng rng(seed);
            for (size_t i = 0; i < start.pixelCount(); ++i) {
                start.basecolor[i] = Rgb(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95),
                                         rng.uniform(0.05, 0.95));
                start.normal[i] =
                    Vec3(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), 1.0).normalized();
                start.roughness[i] = rng.uniform(0.05, 0.95);
                start.metallic[i] = rng.uniform(0.0, 0.6);
            }
        } else if (init != "flat") {
            throw std::runtime_error("--init must be 'flat' or 'random'");
        }
        if (step <= 0.0)
            step = 0.15 * 3.0 * static_cast<double>(observed.pixelCount());
        const GBuffer result =
            optimizeGBuffer(start, assets, view, observed, iters, step, maskPtr);
        saveGBuffer(outDir, result);
        const double loss = measurementLoss(result, assets, view, observed, maskPtr).loss;
        std::cout << "descent finished, L_render=" << loss << ", g-buffer -> " << outDir
                  << "\n";
        return 0;
    }
    if (mode != "dps") throw std::runtime_error("--mode must be 'descent' or 'dps'");

    const DiffusionSchedule schedule =
        DiffusionSchedule::linearBeta(1000, 1e-4, 0.02, steps);
    const ReferenceDecoder decoder;
    const GaussianPriorDenoiser denoiser(
        neutralGBufferPrior(observed.width(), observed.height()), priorSigma, schedule);
    GuidanceConfig cfg;
    cfg.zeta0 = zeta;
    cfg.gradientClip = clip;
    cfg.steps = steps;
    cfg.seed = seed;
    const DpsResult result = dpsSample(denoiser, decoder, assets, view, observed,
                                       maskPtr, cfg, schedule);
    saveGBuffer(outDir, result.gbuffer);
    if (diagnosticsPath.empty())
        diagnosticsPath = (fs::path(outDir) / "trajectory.csv").string();
    writeTrajectoryCsv(diagnosticsPath, result.steps);
    std::cout << "dps finished, final L_render=" << result.steps.back().lossRender
              << ", g-buffer -> " << outDir << ", trajectory -> " << diagnosticsPath
              << "\n";
    return 0;
}

void printMetricsRows(const std::vector<MetricsReport>& rows) {
    std::cout << "scene,lighting,alpha,alpha_degenerate,psnr_db,ssim,valid_pixels\n";
    char line[256];
    for (const MetricsReport& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%s,%.9g,%d,%.6f,%.6f,%zu\n",
                      r.scene.c_str(), r.lighting.c_str(), r.alpha,
                      r.alphaDegenerate ? 1 : 0, r.psnrDb, r.ssim, r.validPixelCount);
        std::cout << line;
    }
}

int runEval(const std::string& predPath, const std::string& gtPath,
            const std::string& maskPath, const std::string& scene,
            const std::string& lighting, const std::string& manifestPath,
            const std::string& predDir, const std::string& outCsv,
            const std::string& outJson, int jobs) {
    std::vector<MetricsReport> rows;

    if (!manifestPath.empty()) {
        if (predDir.empty())
            throw std::runtime_error("--pred-dir is required with --manifest");
        const SceneManifest manifest = loadManifest(manifestPath);
        rows.resize(manifest.captures.size());
        parallelFor(manifest.captures.size(), jobs, [&](size_t i) {
            const ManifestCapture& capture = manifest.captures[i];
            const std::string pred =
                (fs::path(predDir) / (capture.lighting + ".exr")).string();
            if (!fs::exists(pred))
                throw std::runtime_error("missing prediction '" + pred + "'");
            const LinearImage predImg = readExr(pred);
            const LinearImage gtImg = captureGroundTruth(manifest, capture);
            std::optional<Mask> mask;
            if (!capture.mask.empty())
                mask = readMaskPng(manifest.resolve(capture.mask));
            rows[i] = evaluateRelight(predImg, gtImg, mask ? &*mask : nullptr,
                                      manifest.scene, capture.lighting);
        });
    } else {
        if (predPath.empty() || gtPath.empty())
            throw std::runtime_error("--pred and --gt are required without --manifest");
        const LinearImage predImg = readExr(predPath);
        const LinearImage gtImg = readExr(gtPath);
        std::optional<Mask> mask;
        if (!maskPath.empty()) mask = readMaskPng(maskPath);
        rows.push_back(
            evaluateRelight(predImg, gtImg, mask ? &*mask : nullptr, scene, lighting));
    }

    printMetricsRows(rows);
    if (!outCsv.empty()) writeMetricsCsv(outCsv, rows);
    if (!outJson.empty()) writeMetricsJson(outJson, rows);
    return 0;
}

int runFolds(const std::string& manifestPath, const std::string& outPath) {
    const SceneManifest manifest = loadManifest(manifestPath);
    const std::vector<SceneFold> folds = leaveOneOutFolds(manifest.lightingIds());
    nlohmann::json doc = nlohmann::json::array();
    for (const SceneFold& f : folds)
        doc.push_back({{"held_out", f.heldOut}, {"support", f.support}});
    const std::string text = doc.dump(2);
    std::cout << text << "\n";
    if (!outPath.empty()) std::ofstream(outPath) << text << "\n";
    return 0;
}

int runValidateSync(const std::string& manifestPath, int width, std::string outCsv,
                    std::string outSvg) {
    const SceneManifest manifest = loadManifest(manifestPath);
    std::vector<CaptureRecord> records;
    for (const ManifestCapture& c : manifest.captures)
        records.push_back(
            {manifest.scene, c.lighting, c.sceneTimestamp, c.envmapTimestamp});
    const SyncReport report = syncStats(records, width);

    if (outCsv.empty()) outCsv = "sync_report.csv";
    if (outSvg.empty()) outSvg = "sync_histogram.svg";
    writeSyncCsv(outCsv, report);
    writeSyncHistogramSvg(outSvg, report);

    size_t flagged = 0;
    for (const SyncRecordEntry& r : report.records) flagged += r.flagged ? 1 : 0;
    char line[256];
    std::snprintf(line, sizeof(line),
                  "median_s=%.2f mean_s=%.2f max_s=%.2f records=%zu flagged=%zu\n",
                  report.medianSeconds, report.meanSeconds, report.maxSeconds,
                  report.records.size(), flagged);
    std::cout << line << "report -> " << outCsv << ", histogram -> " << outSvg << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"physically-grounded relighting toolkit"};
    app.require_subcommand(1);

    // merge
    auto* merge = app.add_subcommand("merge", "merge exposure stacks into HDR EXRs");
    std::string mergeManifest, mergeOutDir;
    std::vector<std::string> mergeLightings;
    int mergeJobs = 1;
    merge->add_option("manifest", mergeManifest, "scene manifest JSON")->required();
    merge->add_option("--lighting", mergeLightings,
                      "lighting ids to merge (default: all stacks)");
    merge->add_option("--out-dir", mergeOutDir,
                      "output directory (default: <manifest dir>/merged)");
    merge->add_option("--jobs", mergeJobs, "parallel workers across captures");

    // build-env
    auto* buildEnv = app.add_subcommand("build-env", "precompute environment assets");
    std::string bePath, beOut, beCache;
    int beLevels = 5;
    buildEnv->add_option("--env", bePath, "equirectangular HDR EXR")->required();
    buildEnv->add_option("--levels", beLevels, "specular mip levels (default 5)");
    buildEnv->add_option("--out", beOut, "output assets file");
    buildEnv->add_option("--cache-dir", beCache,
                         "asset cache directory (or RELIGHT_CACHE_DIR)");

    // render
    auto* render = app.add_subcommand("render", "shade a G-buffer under an environment");
    std::string rGbuffer, rEnv, rAssets, rOut, rCache;
    int rLevels = 5;
    CameraFlags rCam;
    render->add_option("--gbuffer", rGbuffer, "G-buffer directory")->required();
    render->add_option("--env", rEnv, "environment EXR");
    render->add_option("--assets", rAssets, "prebuilt assets file (alternative to --env)");
    render->add_option("--levels", rLevels, "specular mip levels when building from --env");
    render->add_option("--out", rOut, "output EXR")->required();
    render->add_option("--focal", rCam.focalPx, "pinhole focal length in pixels");
    render->add_option("--cx", rCam.cx, "principal point x (default: center)");
    render->add_option("--cy", rCam.cy, "principal point y (default: center)");
    render->add_option("--cache-dir", rCache, "asset cache directory");

    // invert
    auto* invert = app.add_subcommand("invert", "recover a G-buffer from an observation");
    std::string iObserved, iEnv, iAssets, iMode = "descent", iOutDir, iMask;
    std::string iInit = "flat", iDiag, iCache;
    CameraFlags iCam;
    int iIters = 500, iSteps = 50, iLevels = 5;
    double iStep = 0.0, iZeta = 0.3, iClip = 1.0, iPriorSigma = 0.5;
    uint64_t iSeed = 0;
    invert->add_option("--observed", iObserved, "observed linear EXR")->required();
    invert->add_option("--env", iEnv, "environment EXR");
    invert->add_option("--assets", iAssets, "prebuilt assets file");
    invert->add_option("--mode", iMode, "descent | dps");
    invert->add_option("--out-dir", iOutDir, "output G-buffer directory")->required();
    invert->add_option("--mask", iMask, "validity mask PNG");
    invert->add_option("--iters", iIters, "descent iterations");
    invert->add_option("--step", iStep, "descent step (default: auto)");
    invert->add_option("--init", iInit, "descent init: flat | random");
    invert->add_option("--zeta", iZeta, "guidance strength zeta0");
    invert->add_option("--clip", iClip, "guidance gradient-norm clip");
    invert->add_option("--steps", iSteps, "DDIM inference steps");
    invert->add_option("--prior-sigma", iPriorSigma, "gaussian prior sigma");
    invert->add_option("--seed", iSeed, "random seed");
    invert->add_option("--diagnostics", iDiag, "trajectory CSV path");
    invert->add_option("--levels", iLevels, "specular mip levels when building from --env");
    invert->add_option("--focal", iCam.focalPx, "pinhole focal length in pixels");
    invert->add_option("--cx", iCam.cx, "principal point x");
    invert->add_option("--cy", iCam.cy, "principal point y");
    invert->add_option("--cache-dir", iCache, "asset cache directory");

    // eval
    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    std::string ePred, eGt, eMask, eScene, eLighting, eManifest, ePredDir, eCsv, eJson;
    int eJobs = 1;
    eval->add_option("--pred", ePred, "prediction EXR");
    eval->add_option("--gt", eGt, "ground-truth EXR");
    eval->add_option("--mask", eMask, "validity mask PNG");
    eval->add_option("--scene", eScene, "scene id for the report row");
    eval->add_option("--lighting", eLighting, "lighting id for the report row");
    eval->add_option("--manifest", eManifest, "scene manifest for batch scoring");
    eval->add_option("--pred-dir", ePredDir, "directory of <lighting>.exr predictions");
    eval->add_option("--out-csv", eCsv, "CSV report path");
    eval->add_option("--out-json", eJson, "JSON report path");
    eval->add_option("--jobs", eJobs, "parallel workers across captures");

    // folds
    auto* folds = app.add_subcommand("folds", "list leave-one-lighting-out folds");
    std::string fManifest, fOut;
    folds->add_option("manifest", fManifest, "scene manifest JSON")->required();
    folds->add_option("--out", fOut, "write the fold listing to a file");

    // validate-sync
    auto* sync = app.add_subcommand("validate-sync", "capture synchronization report");
    std::string sManifest, sCsv, sSvg;
    int sWidth = 256;
    sync->add_option("manifest", sManifest, "scene manifest JSON")->required();
    sync->add_option("--width", sWidth, "envmap width for pixel-shift (default 256)");
    sync->add_option("--out-csv", sCsv, "report CSV path");
    sync->add_option("--out-svg", sSvg, "histogram SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) printErrorLine(e.what());
        return app.exit(e);
    }

    try {
        if (merge->parsed())
            return runMerge(mergeManifest, mergeLightings, mergeOutDir, mergeJobs);
        if (buildEnv->parsed()) return runBuildEnv(bePath, beLevels, beOut, beCache);
        if (render->parsed()) {
            if (rEnv.empty() && rAssets.empty())
                throw std::runtime_error("render requires --env or --assets");
            return runRender(rGbuffer, rEnv, rAssets, rLevels, rOut, rCam, rCache);
        }
        if (invert->parsed()) {
            if (iEnv.empty() && iAssets.empty())
                throw std::runtime_error("invert requires --env or --assets");
            return runInvert(iObserved, iEnv, iAssets, iLevels, iMode, iOutDir, iMask,
                             iCam, iIters, iStep, iInit, iZeta, iClip, iSteps,
                             iPriorSigma, iSeed, iDiag, iCache);
        }
        if (eval->parsed())
            return runEval(ePred, eGt, eMask, eScene, eLighting, eManifest, ePredDir,
                           eCsv, eJson, eJobs);
        if (folds->parsed()) return runFolds(fManifest, fOut);
        if (sync->parsed()) return runValidateSync(sManifest, sWidth, sCsv, sSvg);
    } catch (const ManifestError& e) {
        printErrorLine(e.what(), e.field());
        return 1;
    } catch (const std::exception& e) {
        printErrorLine(e.what());
        return 1;
    }
    return 0;
}
