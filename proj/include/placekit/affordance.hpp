// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "placekit/scene_model.hpp"

namespace placekit {

/// Analytic per-plan placement field over the scene cloud. Compass plans get
/// a Gaussian (sigma = subject footprint radius) around
/// c* = anchor_position + (r_anchor + r_subject + 2 cm) * unit(direction),
/// zeroed at points more than 3 cm above the support. "on" plans get a
/// Gaussian over the anchor's top-surface points (within 1 cm of its max
/// height) centered at the anchor top center.
AffordanceMap plan_affordance(const Scene& scene, const StructuredPlan& plan,
                              const Vec3& subject_extent);

/// Coarse composition: pointwise-max pooling of the input maps, then
/// activation-weighted k-means (k-means++ seeded with 0, 20 Lloyd iterations
/// or 1e-6 convergence) over points with pooled activation > 0.1. The top_k
/// centers by assigned activation define h_j = exp(-d_j^2 / (2 * 0.05^2))
/// with d_j the distance to the nearest selected center. top_k <= 0 selects
/// all k centers. Weights are normalized, so duplicating an input map
/// leaves the result unchanged.
AffordanceMap compose_coarse(const std::vector<AffordanceMap>& maps, const PointCloud& scene_cloud,
                             int k = 2, int top_k = 0);

/// Fine composition: elementwise max over the input maps and their
/// elementwise mean. Upper-bounds every input pointwise; a single map is
/// returned unchanged.
AffordanceMap compose_fine(const std::vector<AffordanceMap>& maps);

/// Points whose activation reaches threshold_frac times the map maximum
/// (inclusive). The returned cloud carries the matching activations.
PointCloud high_affordance_points(const AffordanceMap& map, const PointCloud& scene_cloud,
                                  double threshold_frac = 0.5);

/// Sidecar JSON (reference cloud, count, numeric generation parameters) plus
/// a raw little-endian float32 payload, index-aligned with the scene cloud.
void save_affordance(const AffordanceMap& map, const std::string& sidecar_path,
                     const std::string& payload_path,
                     const std::map<std::string, double>& params = {});
AffordanceMap load_affordance(const std::string& sidecar_path);

}  // namespace placekit
