// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

// Internal JSON codecs shared by the scene and sample writers. Not part of
// the public interface.

#pragma once

#include <string>

#include "placekit/json_util.hpp"
#include "placekit/scene_model.hpp"

namespace placekit::detail {

json pose_json(const ScenePose& pose);
ScenePose pose_from_json(const json& j, const std::string& context);

/// With an empty ply_dir the cloud is embedded as an inline "points" array;
/// otherwise it is written to ply_dir/ply_name and referenced.
json object_json(const SceneObject& obj, const std::string& ply_dir, const std::string& ply_ref,
                 const std::string& ply_name);
SceneObject object_from_json(const json& j, const std::string& base_dir,
                             const std::string& context);

}  // namespace placekit::detail
