#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "parallax/scene.hpp"

namespace parallax::bundle {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

std::string intensity_file(std::size_t i);  // gd{i}_intensity.png, 8-bit gray
std::string nid_file(std::size_t i);        // gd{i}_nid.png, 16-bit normalised inverse depth
std::string known_file(std::size_t i);      // gd{i}_known.png, optional 0/255 mask

/// Writes the manifest and ten raster files (plus any known masks) into `dir` (created if needed).
/// Identical bundles produce byte-identical directories.
/// Throws Error when the bundle fails SceneBundle::validate().
void save(const SceneBundle& bundle, const std::filesystem::path& dir);

/// Reads a bundle back. Intensity comes back to within 1/255 and normalised
/// inverse depth to within 1/65535. Errors (parallax::Error):
///   "missing manifest", "malformed manifest", "unsupported schema version",
///   "bundle must hold five GD images", "missing raster file",
///   "corrupt bundle" (checksum mismatch or undecodable raster).
SceneBundle load(const std::filesystem::path& dir);

/// Manifest as written by save(), without touching the disk. `checksums`
/// maps file names to SHA-256 hex digests.
nlohmann::json manifest(const SceneBundle& bundle, const nlohmann::json& checksums);

nlohmann::json camera_to_json(const CameraView& cam);
CameraView camera_from_json(const nlohmann::json& j);

}  // namespace parallax::bundle
