// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "relight/core.hpp"

namespace relight {

/// Mean solar angular rate: 15 degrees per hour.
inline constexpr double kSolarDegreesPerSecond = 0.00417;
/// Records whose solar displacement exceeds the sun's angular diameter get
/// flagged (never rejected).
inline constexpr double kSolarFlagThresholdDegrees = 0.5;
inline constexpr double kSyncHistogramBinSeconds = 20.0;

struct CaptureRecord {
    std::string scene;
    std::string lighting;
    double sceneTimestamp = 0.0;   // seconds, epoch
    double envmapTimestamp = 0.0;  // seconds, epoch

    double deltaSeconds() const {
        if (!std::isfinite(sceneTimestamp) || !std::isfinite(envmapTimestamp))
            throw std::invalid_argument("CaptureRecord: non-finite timestamp");
        return std::fabs(sceneTimestamp - envmapTimestamp);
    }
};

struct SolarDisplacement {
    double degrees = 0.0;
    double pixelShift = 0.0;
};

/// How far the sun travels during a capture delay, and what that amounts to
/// in equirectangular pixels at the given map width.
inline SolarDisplacement solarDisplacement(double dtSeconds, int envmapWidth) {
    if (dtSeconds < 0.0 || !std::isfinite(dtSeconds))
        throw std::invalid_argument("solarDisplacement: dt must be finite and >= 0");
    if (envmapWidth < 1)
        throw std::invalid_argument("solarDisplacement: width must be >= 1");
    SolarDisplacement out;
    out.degrees = dtSeconds * kSolarDegreesPerSecond;
    out.pixelShift = out.degrees / (360.0 / envmapWidth);
    return out;
}

struct SyncRecordEntry {
    std::string scene;
    std::string lighting;
    double deltaSeconds = 0.0;
    double thetaDegrees = 0.0;
    double pixelShift = 0.0;
    bool flagged = false;
};

struct SyncReport {
    double medianSeconds = 0.0;
    double meanSeconds = 0.0;
    double maxSeconds = 0.0;
    int envmapWidth = 256;
    std::vector<SyncRecordEntry> records;      // input order
    std::vector<size_t> histogramCounts;       // fixed 20 s bins from 0
};

/// Delay statistics, per-record solar displacement, and the 20-second-bin
/// histogram of delays. Statistics are order-independent; rows keep input
/// order.
inline SyncReport syncStats(const std::vector<CaptureRecord>& records,
                            int envmapWidth = 256) {
    if (records.empty()) throw std::invalid_argument("syncStats: no records");
    SyncReport report;
    report.envmapWidth = envmapWidth;

    std::vector<double> deltas;
    deltas.reserve(records.size());
    double sum = 0.0, maxDelta = 0.0;
    for (const CaptureRecord& r : records) {
        const double dt = r.deltaSeconds();
        const SolarDisplacement sd = solarDisplacement(dt, envmapWidth);
        report.records.push_back({r.scene, r.lighting, dt, sd.degrees, sd.pixelShift,
                                  sd.degrees > kSolarFlagThresholdDegrees});
        deltas.push_back(dt);
        sum += dt;
        maxDelta = std::max(maxDelta, dt);
    }
    std::sort(deltas.begin(), deltas.end());
    const size_t n = deltas.size();
    report.medianSeconds = n % 2 == 1
                               ? deltas[n / 2]
                               : 0.5 * (deltas[n / 2 - 1] + deltas[n / 2]);
    report.meanSeconds = sum / static_cast<double>(n);
    report.maxSeconds = maxDelta;

    const size_t bins =
        static_cast<size_t>(std::floor(maxDelta / kSyncHistogramBinSeconds)) + 1;
    report.histogramCounts.assign(bins, 0);
    for (double dt : deltas) {
        size_t b = static_cast<size_t>(std::floor(dt / kSyncHistogramBinSeconds));
        if (b >= bins) b = bins - 1;  // dt == max lands in the last bin
        ++report.histogramCounts[b];
    }
    return report;
}

inline void writeSyncCsv(const std::string& path, const SyncReport& report) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("writeSyncCsv '" + path + "': cannot open");
    char line[512];
    os << "# statistic,value_seconds\n";
    std::snprintf(line, sizeof(line), "median,%.2f\nmean,%.2f\nmax,%.2f\n",
                  report.medianSeconds, report.meanSeconds, report.maxSeconds);
    os << line;
    os << "scene,lighting,delta_s,theta_deg,pixel_shift_at_" << report.envmapWidth
       << ",flagged\n";
    for (const SyncRecordEntry& r : report.records) {
        std::snprintf(line, sizeof(line), "%s,%s,%.3f,%.5f,%.5f,%d\n", r.scene.c_str(),
                      r.lighting.c_str(), r.deltaSeconds, r.thetaDegrees, r.pixelShift,
                      r.flagged ? 1 : 0);
        os << line;
    }
    os << "bin_start_s,bin_end_s,count\n";
    for (size_t b = 0; b < report.histogramCounts.size(); ++b) {
        std::snprintf(line, sizeof(line), "%.0f,%.0f,%zu\n",
                      b * kSyncHistogramBinSeconds, (b + 1) * kSyncHistogramBinSeconds,
                      report.histogramCounts[b]);
        os << line;
    }
}

/// Minimal bar-chart rendering of the delay histogram.
inline void writeSyncHistogramSvg(const std::string& path, const SyncReport& report) {
    const size_t bins = report.histogramCounts.size();
    size_t peak = 1;
    for (size_t c : report.histogramCounts) peak = std::max(peak, c);

    const int barWidth = 48, gap = 8, plotHeight = 220;
    const int marginLeft = 40, marginBottom = 40, marginTop = 20;
    const int width = marginLeft + static_cast<int>(bins) * (barWidth + gap) + gap;
    const int height = marginTop + plotHeight + marginBottom;

    std::ofstream os(path);
    if (!os) throw std::runtime_error("writeSyncHistogramSvg '" + path + "': cannot open");
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
       << "\" height=\"" << height << "\">\n";
    os << "  <rect width=\"" << width << "\" height=\"" << height
       << "\" fill=\"white\"/>\n";
    for (size_t b = 0; b < bins; ++b) {
        const double frac =
            static_cast<double>(report.histogramCounts[b]) / static_cast<double>(peak);
        const int barH = static_cast<int>(std::lround(frac * plotHeight));
        const int x = marginLeft + gap + static_cast<int>(b) * (barWidth + gap);
        const int y = marginTop + plotHeight - barH;
        os << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << barWidth
           << "\" height=\"" << barH << "\" fill=\"#4878a8\"/>\n";
        os << "  <text x=\"" << x + barWidth / 2 << "\" y=\""
           << marginTop + plotHeight + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
           << static_cast<int>(b * kSyncHistogramBinSeconds) << "-"
           << static_cast<int>((b + 1) * kSyncHistogramBinSeconds) << "s</text>\n";
        os << "  <text x=\"" << x + barWidth / 2 << "\" y=\"" << y - 4
           << "\" font-size=\"11\" text-anchor=\"middle\">" << report.histogramCounts[b]
           << "</text>\n";
    }
    os << "  <text x=\"" << marginLeft + 4 << "\" y=\"" << height - 8
       << "\" font-size=\"12\">capture delay distribution (s)</text>\n";
    os << "</svg>\n";
}

}  // namespace relight
