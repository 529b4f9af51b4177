#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "adc/sample.hpp"

namespace adc::scenegen {

/// Axis-aligned box standing on the ground plane. class_id 1 is a
/// building-like tall box, class_id 2 a bridge-like long slab.
struct Structure {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // footprint on z=0, world meters
    double height = 0;
    std::array<double, 3> albedo{0.5, 0.5, 0.5};
    int class_id = 1;
};

/// Tree-like hemisphere: rendered into depth and RGB but never annotated.
struct Distractor {
    double cx = 0, cy = 0;
    double radius = 1;
    std::array<double, 3> albedo{0.2, 0.45, 0.2};
};

/// Fully-determined scene: geometry, camera and materials.
/// The camera sits at (cam_x, cam_y, altitude) looking down; pitch rotates
/// the optical axis away from nadir about the camera's x-axis (toward +y
/// world). Zero pitch is a nadir view.
struct SceneSpec {
    int width = 320;
    int height = 240;
    double cam_x = 0, cam_y = 0;
    double altitude = 60;
    double pitch_rad = 0;
    double fx = 260, fy = 260, cx = 160, cy = 120;
    std::array<double, 3> ground_albedo{0.42, 0.38, 0.33};
    std::vector<Structure> structures;
    std::vector<Distractor> distractors;
    std::uint64_t seed = 0;

    /// aerial viewpoint + non-overlapping footprints + positive focal lengths
    void validate() const;
};

/// Ranges the scene sampler draws from. The paper gives no scene-scale
/// statistics; these defaults are desk-scale inventions and fully
/// configurable.
struct GeneratorParams {
    int width = 320;
    int height = 240;
    double focal = 260;
    double altitude_min = 40, altitude_max = 80;
    double pitch_max_deg = 18;
    int min_structures = 1, max_structures = 5;
    double building_height_min = 5, building_height_max = 30;
    double building_side_min = 8, building_side_max = 26;
    double bridge_prob = 0.3;
    double bridge_height_min = 3, bridge_height_max = 9;
    double bridge_length_min = 35, bridge_length_max = 80;
    double bridge_width_min = 5, bridge_width_max = 11;
    int max_distractors = 6;
    double distractor_radius_min = 1.0, distractor_radius_max = 3.5;
    int placement_retries = 40;

    void validate() const;
};

/// Deterministic in (seed, params). Throws GenerationError (a
/// ValidationError subclass) if non-overlapping placement fails after the
/// configured retries.
SceneSpec sample_scene(std::uint64_t seed, const GeneratorParams& params = {});

/// Analytic render: per-pixel z-depth (distance along the optical axis) of
/// the nearest hit, Lambert-shaded RGB from a fixed sun, and one tight
/// pixel-extent bounding box per visible structure. The returned Sample has
/// an empty sparse_depth; callers sparsify before persisting.
Sample render(const SceneSpec& spec);

}  // namespace adc::scenegen
