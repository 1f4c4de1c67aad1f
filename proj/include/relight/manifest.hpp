// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "relight/core.hpp"
#include "relight/gbuffer.hpp"

namespace relight {

/// Manifest problem tied to a specific field path ("captures[2].envmap").
class ManifestError : public std::runtime_error {
  public:
    ManifestError(std::string field, const std::string& message)
        : std::runtime_error(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}

    const std::string& field() const { return field_; }

  private:
    std::string field_;
};

struct ManifestExposure {
    std::string path;
    double timeSeconds = 0.0;
};

struct ManifestCapture {
    std::string lighting;
    double sceneTimestamp = 0.0;
    double envmapTimestamp = 0.0;
    std::string image;                        // single linear EXR, or
    std::vector<ManifestExposure> exposures;  // a bracketed stack
    std::string envmap;
    std::string mask;     // optional PNG
    std::string gbuffer;  // optional directory

    bool hasStack() const { return !exposures.empty(); }
};

struct ManifestCamera {
    bool pinhole = false;
    Vec3 sharedView{0, 0, 1};
    double focalPx = 0.0;
    double cx = 0.0;
    double cy = 0.0;

    ViewSetup makeView(int width, int height) const {
        if (pinhole) return ViewSetup::pinhole(width, height, focalPx, cx, cy);
        return ViewSetup::sharedDirection(sharedView);
    }
};

struct SceneManifest {
    int version = 1;
    std::string scene;
    ManifestCamera camera;
    std::vector<ManifestCapture> captures;
    std::filesystem::path baseDir;  // directory of the manifest file

    /// Manifest paths are relative to the manifest's directory.
    std::string resolve(const std::string& rel) const {
        const std::filesystem::path p(rel);
        return p.is_absolute() ? p.string() : (baseDir / p).string();
    }

    std::vector<std::string> lightingIds() const {
        std::vector<std::string> ids;
        for (const ManifestCapture& c : captures) ids.push_back(c.lighting);
        return ids;
    }

    const ManifestCapture& captureFor(const std::string& lighting) const {
        for (const ManifestCapture& c : captures)
            if (c.lighting == lighting) return c;
        throw ManifestError("captures", "no capture with lighting id '" + lighting + "'");
    }
};

namespace detail {

using nlohmann::json;

inline void rejectUnknownKeys(const json& obj, const std::set<std::string>& allowed,
                              const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ManifestError(where.empty() ? it.key() : where + "." + it.key(),
                                "unknown field");
}

inline const json& require(const json& obj, const std::string& key,
                           const std::string& where) {
    if (!obj.contains(key))
        throw ManifestError(where.empty() ? key : where + "." + key, "missing field");
    return obj.at(key);
}

inline std::string requireString(const json& obj, const std::string& key,
                                 const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_string() || v.get<std::string>().empty())
        throw ManifestError(where.empty() ? key : where + "." + key,
                            "must be a non-empty string");
    return v.get<std::string>();
}

inline double requireNumber(const json& obj, const std::string& key,
                            const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_number())
        throw ManifestError(where.empty() ? key : where + "." + key, "must be a number");
    return v.get<double>();
}

inline void requireFileExists(const std::string& path, const std::string& field) {
    if (!std::filesystem::exists(path))
        throw ManifestError(field, "referenced file does not exist: " + path);
}

}  // namespace detail

/// Parses and validates a scene manifest. Unknown fields are rejected, every
/// referenced file must exist, and errors carry the offending field path.
inline SceneManifest loadManifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ManifestError("", "cannot open manifest '" + path + "'");
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ManifestError("", "manifest root must be an object");
    detail::rejectUnknownKeys(doc, {"version", "scene", "camera", "captures"}, "");

    SceneManifest m;
    m.baseDir = std::filesystem::absolute(path).parent_path();

    const nlohmann::json& ver = detail::require(doc, "version", "");
    if (!ver.is_number_integer() || ver.get<int>() != 1)
        throw ManifestError("version", "unsupported manifest version (expected 1)");
    m.version = 1;
    m.scene = detail::requireString(doc, "scene", "");

    const nlohmann::json& cam = detail::require(doc, "camera", "");
    if (!cam.is_object()) throw ManifestError("camera", "must be an object");
    const std::string camType = detail::requireString(cam, "type", "camera");
    if (camType == "shared") {
        detail::rejectUnknownKeys(cam, {"type", "view"}, "camera");
        if (cam.contains("view")) {
            const nlohmann::json& v = cam.at("view");
            if (!v.is_array() || v.size() != 3)
                throw ManifestError("camera.view", "must be a 3-element array");
            m.camera.sharedView =
                Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
            try {
                m.camera.sharedView = m.camera.sharedView.normalized();
            } catch (const std::exception&) {
                throw ManifestError("camera.view", "must be a nonzero vector");
            }
        }
    } else if (camType == "pinhole") {
        detail::rejectUnknownKeys(cam, {"type", "focal_px", "principal"}, "camera");
        m.camera.pinhole = true;
        m.camera.focalPx = detail::requireNumber(cam, "focal_px", "camera");
        if (!(m.camera.focalPx > 0.0))
            throw ManifestError("camera.focal_px", "must be > 0");
        const nlohmann::json& pp = detail::require(cam, "principal", "camera");
        if (!pp.is_array() || pp.size() != 2)
            throw ManifestError("camera.principal", "must be a 2-element array");
        m.camera.cx = pp[0].get<double>();
        m.camera.cy = pp[1].get<double>();
    } else {
        throw ManifestError("camera.type", "must be 'shared' or 'pinhole'");
    }

    const nlohmann::json& caps = detail::require(doc, "captures", "");
    if (!caps.is_array() || caps.empty())
        throw ManifestError("captures", "must be a non-empty array");

    std::set<std::string> seenLightings;
    for (size_t i = 0; i < caps.size(); ++i) {
        const std::string where = "captures[" + std::to_string(i) + "]";
        const nlohmann::json& c = caps[i];
        if (!c.is_object()) throw ManifestError(where, "must be an object");
        detail::rejectUnknownKeys(c,
                                  {"lighting", "scene_timestamp", "envmap_timestamp",
                                   "image", "exposures", "envmap", "mask", "gbuffer"},
                                  where);
        ManifestCapture cap;
        cap.lighting = detail::requireString(c, "lighting", where);
        if (!seenLightings.insert(cap.lighting).second)
            throw ManifestError(where + ".lighting",
                                "duplicate lighting id '" + cap.lighting + "'");
        cap.sceneTimestamp = detail::requireNumber(c, "scene_timestamp", where);
        cap.envmapTimestamp = detail::requireNumber(c, "envmap_timestamp", where);

        const bool hasImage = c.contains("image");
        const bool hasStack = c.contains("exposures");
        if (hasImage == hasStack)
            throw ManifestError(where, "exactly one of 'image' or 'exposures' required");
        if (hasImage) {
            cap.image = detail::requireString(c, "image", where);
            detail::requireFileExists(
                (m.baseDir / cap.image).string(), where + ".image");
        } else {
            const nlohmann::json& exp = c.at("exposures");
            if (!exp.is_array() || exp.empty())
                throw ManifestError(where + ".exposures", "must be a non-empty array");
            for (size_t j = 0; j < exp.size(); ++j) {
                const std::string ewhere = where + ".exposures[" + std::to_string(j) + "]";
                const nlohmann::json& e = exp[j];
                if (!e.is_object()) throw ManifestError(ewhere, "must be an object");
                detail::rejectUnknownKeys(e, {"path", "time_s"}, ewhere);
                ManifestExposure me;
                me.path = detail::requireString(e, "path", ewhere);
                me.timeSeconds = detail::requireNumber(e, "time_s", ewhere);
                if (!(me.timeSeconds > 0.0))
                    throw ManifestError(ewhere + ".time_s", "must be > 0");
                detail::requireFileExists((m.baseDir / me.path).string(),
                                          ewhere + ".path");
                cap.exposures.push_back(std::move(me));
            }
        }
        cap.envmap = detail::requireString(c, "envmap", where);
        detail::requireFileExists((m.baseDir / cap.envmap).string(), where + ".envmap");
        if (c.contains("mask")) {
            cap.mask = detail::requireString(c, "mask", where);
            detail::requireFileExists((m.baseDir / cap.mask).string(), where + ".mask");
        }
        if (c.contains("gbuffer")) {
            cap.gbuffer = detail::requireString(c, "gbuffer", where);
            if (!std::filesystem::is_directory(m.baseDir / cap.gbuffer))
                throw ManifestError(where + ".gbuffer",
                                    "referenced directory does not exist: " + cap.gbuffer);
        }
        m.captures.push_back(std::move(cap));
    }
    return m;
}

}  // namespace relight
