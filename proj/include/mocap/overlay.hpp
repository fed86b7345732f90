#pragma once

#include <string>
#include <vector>

#include "mocap/scene_io.hpp"

namespace mocap {

// Renders one (frame, view) as an SVG string: detected skeletons (rejected
// ones, per assoc, in a dashed style) plus the reprojected model skeletons.
// Purely a function of its inputs; coordinates are printed with fixed
// precision so regenerated files are byte-identical.
std::string export_overlay(const SceneFile& scene, const std::vector<Camera>& cameras,
                           const std::vector<PersonMotion>& motions, Index frame,
                           Index view, const AssocFile* assoc = nullptr);

}  // namespace mocap
