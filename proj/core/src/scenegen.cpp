#include "adc/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "adc/error.hpp"
#include "adc/rng.hpp"

namespace adc::scenegen {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vec3 normalized(Vec3 v) {
    const double n = std::sqrt(dot(v, v));
    return {v.x / n, v.y / n, v.z / n};
}

bool footprints_overlap(const Structure& a, const Structure& b) {
    return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

bool point_in_footprint(double x, double y, const Structure& s, double margin) {
    return x > s.x0 - margin && x < s.x1 + margin && y > s.y0 - margin && y < s.y1 + margin;
}

struct Hit {
    double t = std::numeric_limits<double>::infinity();  // z-depth (forward component 1)
    int id = 0;          // 0 ground, 1+i structure i, -(1+j) distractor j
    Vec3 normal{0, 0, 1};
    const std::array<double, 3>* albedo = nullptr;
};

// Ray/AABB slab intersection for a box [x0,x1]x[y0,y1]x[0,h].
bool intersect_box(const Vec3& o, const Vec3& d, const Structure& s, double& t_enter,
                   Vec3& normal) {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    int enter_axis = -1;
    double enter_sign = 0.0;
    const double lo[3] = {s.x0, s.y0, 0.0};
    const double hi[3] = {s.x1, s.y1, s.height};
    const double ov[3] = {o.x, o.y, o.z};
    const double dv[3] = {d.x, d.y, d.z};
    for (int a = 0; a < 3; ++a) {
        if (dv[a] == 0.0) {
            if (ov[a] < lo[a] || ov[a] > hi[a]) return false;
            continue;
        }
        double t0 = (lo[a] - ov[a]) / dv[a];
        double t1 = (hi[a] - ov[a]) / dv[a];
        double sign = -1.0;
        if (t0 > t1) {
            std::swap(t0, t1);
            sign = 1.0;
        }
        if (t0 > tmin) {
            tmin = t0;
            enter_axis = a;
            enter_sign = sign;
        }
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return false;
    }
    if (enter_axis < 0 || tmin <= 0.0) return false;
    t_enter = tmin;
    normal = {0, 0, 0};
    (enter_axis == 0 ? normal.x : enter_axis == 1 ? normal.y : normal.z) = enter_sign;
    return true;
}

// Nearest intersection with the upper hemisphere of a ground sphere.
bool intersect_hemisphere(const Vec3& o, const Vec3& d, const Distractor& h, double& t_hit,
                          Vec3& normal) {
    const Vec3 center{h.cx, h.cy, 0.0};
    const Vec3 oc = o - center;
    const double a = dot(d, d);
    const double b = 2.0 * dot(oc, d);
    const double c = dot(oc, oc) - h.radius * h.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return false;
    const double sq = std::sqrt(disc);
    for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t <= 0.0) continue;
        const Vec3 p = o + t * d;
        if (p.z >= 0.0) {
            t_hit = t;
            normal = normalized(p - center);
            return true;
        }
    }
    return false;
}

}  // namespace

void GeneratorParams::validate() const {
    if (width < 8 || height < 8) throw ValidationError("GeneratorParams: image too small");
    if (focal <= 0) throw ValidationError("GeneratorParams: focal must be positive");
    if (!(altitude_min > 0) || !(altitude_max >= altitude_min))
        throw ValidationError("GeneratorParams: degenerate altitude range");
    if (building_height_max >= altitude_min || bridge_height_max >= altitude_min)
        throw ValidationError("GeneratorParams: structures must stay below the camera");
    if (min_structures < 0 || max_structures < min_structures)
        throw ValidationError("GeneratorParams: degenerate structure count range");
    if (pitch_max_deg < 0 || pitch_max_deg > 35)
        throw ValidationError("GeneratorParams: pitch range must keep the ground in view");
}

void SceneSpec::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("SceneSpec: empty image");
    if (fx <= 0 || fy <= 0) throw ValidationError("SceneSpec: focal lengths must be positive");
    double max_h = 0;
    for (const auto& s : structures) max_h = std::max(max_h, s.height);
    if (altitude <= max_h)
        throw ValidationError("SceneSpec: camera altitude must exceed structure heights");
    for (std::size_t i = 0; i < structures.size(); ++i) {
        if (structures[i].x0 >= structures[i].x1 || structures[i].y0 >= structures[i].y1 ||
            structures[i].height <= 0)
            throw ValidationError("SceneSpec: degenerate structure");
        for (std::size_t j = i + 1; j < structures.size(); ++j)
            if (footprints_overlap(structures[i], structures[j]))
                throw ValidationError("SceneSpec: structure footprints overlap");
    }
}

SceneSpec sample_scene(std::uint64_t seed, const GeneratorParams& p) {
    p.validate();
    Pcg32 rng(seed);

    SceneSpec spec;
    spec.width = p.width;
    spec.height = p.height;
    spec.seed = seed;
    spec.fx = spec.fy = p.focal;
    spec.cx = p.width / 2.0;
    spec.cy = p.height / 2.0;
    spec.cam_x = 0.0;
    spec.cam_y = 0.0;
    spec.altitude = rng.uniform(p.altitude_min, p.altitude_max);
    spec.pitch_rad = rng.uniform(0.0, p.pitch_max_deg * kPi / 180.0);
    spec.ground_albedo = {rng.uniform(0.3, 0.5), rng.uniform(0.28, 0.45), rng.uniform(0.22, 0.4)};

    // Placement window: the ground patch in view, shrunk a little so
    // structures tend to be fully visible.
    const double view_cy = spec.altitude * std::tan(spec.pitch_rad);
    const double half_w = 0.45 * spec.altitude * p.width / p.focal;
    const double half_h = 0.45 * spec.altitude * p.height / p.focal;

    const int n_structures =
        p.min_structures + static_cast<int>(rng.bounded(
                               static_cast<std::uint32_t>(p.max_structures - p.min_structures + 1)));
    for (int i = 0; i < n_structures; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < p.placement_retries && !placed; ++attempt) {
            Structure s;
            const bool bridge = rng.next_double() < p.bridge_prob;
            double sx, sy;
            if (bridge) {
                s.class_id = 2;
                s.height = rng.uniform(p.bridge_height_min, p.bridge_height_max);
                const double len = rng.uniform(p.bridge_length_min, p.bridge_length_max);
                const double wid = rng.uniform(p.bridge_width_min, p.bridge_width_max);
                const bool along_x = rng.next_u32() & 1u;
                sx = along_x ? len : wid;
                sy = along_x ? wid : len;
                s.albedo = {rng.uniform(0.45, 0.65), rng.uniform(0.45, 0.65), rng.uniform(0.45, 0.65)};
            } else {
                s.class_id = 1;
                s.height = rng.uniform(p.building_height_min, p.building_height_max);
                sx = rng.uniform(p.building_side_min, p.building_side_max);
                sy = rng.uniform(p.building_side_min, p.building_side_max);
                s.albedo = {rng.uniform(0.5, 0.85), rng.uniform(0.35, 0.7), rng.uniform(0.3, 0.6)};
            }
            const double cx = rng.uniform(-half_w, half_w);
            const double cy = view_cy + rng.uniform(-half_h, half_h);
            s.x0 = cx - sx / 2;
            s.x1 = cx + sx / 2;
            s.y0 = cy - sy / 2;
            s.y1 = cy + sy / 2;
            bool overlaps = false;
            for (const auto& other : spec.structures)
                if (footprints_overlap(s, other)) {
                    overlaps = true;
                    break;
                }
            if (!overlaps) {
                spec.structures.push_back(s);
                placed = true;
            }
        }
        if (!placed)
            throw GenerationError("sample_scene: could not place structure " + std::to_string(i) +
                                  " without overlap after " + std::to_string(p.placement_retries) +
                                  " retries");
    }

    const int n_distractors =
        p.max_distractors > 0 ? static_cast<int>(rng.bounded(static_cast<std::uint32_t>(p.max_distractors + 1))) : 0;
    for (int j = 0; j < n_distractors; ++j) {
        for (int attempt = 0; attempt < p.placement_retries; ++attempt) {
            Distractor d;
            d.radius = rng.uniform(p.distractor_radius_min, p.distractor_radius_max);
            d.cx = rng.uniform(-half_w, half_w);
            d.cy = view_cy + rng.uniform(-half_h, half_h);
            d.albedo = {rng.uniform(0.1, 0.25), rng.uniform(0.35, 0.55), rng.uniform(0.1, 0.25)};
            bool clear = true;
            for (const auto& s : spec.structures)
                if (point_in_footprint(d.cx, d.cy, s, d.radius)) {
                    clear = false;
                    break;
                }
            if (clear) {
                spec.distractors.push_back(d);
                break;
            }
            // Distractors are optional scenery; give up quietly on the last try.
        }
    }

    spec.validate();
    return spec;
}

Sample render(const SceneSpec& spec) {
    spec.validate();
    const int W = spec.width, H = spec.height;

    const double cp = std::cos(spec.pitch_rad), sp = std::sin(spec.pitch_rad);
    const Vec3 cam{spec.cam_x, spec.cam_y, spec.altitude};
    const Vec3 right{1, 0, 0};
    const Vec3 img_down{0, -cp, -sp};
    const Vec3 forward{0, sp, -cp};

    const Vec3 sun = normalized({0.5, 0.5, std::sqrt(0.5)});  // 45 deg elevation
    constexpr double kAmbient = 0.25;

    Sample out;
    out.rgb = ImageRgb8(W, H);
    out.dense_depth = DepthMap(W, H);
    out.meta.fx = spec.fx;
    out.meta.fy = spec.fy;
    out.meta.cx = spec.cx;
    out.meta.cy = spec.cy;
    out.meta.seed = spec.seed;
    {
        nlohmann::json prov{{"source", "scenegen"},
                            {"altitude", spec.altitude},
                            {"pitch_rad", spec.pitch_rad},
                            {"structures", spec.structures.size()},
                            {"distractors", spec.distractors.size()}};
        out.meta.provenance = prov.dump();
    }

    std::vector<int> id_buffer(static_cast<std::size_t>(W) * H, 0);

    for (int py = 0; py < H; ++py) {
        for (int px = 0; px < W; ++px) {
            const double dx = (px + 0.5 - spec.cx) / spec.fx;
            const double dy = (py + 0.5 - spec.cy) / spec.fy;
            // Unit forward component: the ray parameter t IS the z-depth.
            const Vec3 dir = dx * right + dy * img_down + forward;

            Hit hit;
            if (dir.z < 0.0) {
                hit.t = -cam.z / dir.z;
                hit.id = 0;
                hit.normal = {0, 0, 1};
                hit.albedo = &spec.ground_albedo;
            }
            for (std::size_t i = 0; i < spec.structures.size(); ++i) {
                double t;
                Vec3 n;
                if (intersect_box(cam, dir, spec.structures[i], t, n) && t < hit.t) {
                    hit.t = t;
                    hit.id = static_cast<int>(i) + 1;
                    hit.normal = n;
                    hit.albedo = &spec.structures[i].albedo;
                }
            }
            for (std::size_t j = 0; j < spec.distractors.size(); ++j) {
                double t;
                Vec3 n;
                if (intersect_hemisphere(cam, dir, spec.distractors[j], t, n) && t < hit.t) {
                    hit.t = t;
                    hit.id = -(static_cast<int>(j) + 1);
                    hit.normal = n;
                    hit.albedo = &spec.distractors[j].albedo;
                }
            }
            if (!std::isfinite(hit.t) || hit.albedo == nullptr)
                throw GenerationError("render: ray escaped the scene; pitch too large for FOV");

            out.dense_depth.at(px, py) = static_cast<float>(hit.t);
            id_buffer[static_cast<std::size_t>(py) * W + px] = hit.id;

            const double lambert = std::max(0.0, dot(hit.normal, sun));
            const double shade = kAmbient + (1.0 - kAmbient) * lambert;
            std::uint8_t* rgb = out.rgb.px(px, py);
            for (int c = 0; c < 3; ++c) {
                const double v = 255.0 * (*hit.albedo)[static_cast<std::size_t>(c)] * shade;
                rgb[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }

    // Tight pixel-extent boxes over the visibility buffer; occluded or
    // off-frame structures yield no annotation.
    for (std::size_t i = 0; i < spec.structures.size(); ++i) {
        int x0 = W, y0 = H, x1 = -1, y1 = -1;
        const int want = static_cast<int>(i) + 1;
        for (int py = 0; py < H; ++py)
            for (int px = 0; px < W; ++px)
                if (id_buffer[static_cast<std::size_t>(py) * W + px] == want) {
                    x0 = std::min(x0, px);
                    y0 = std::min(y0, py);
                    x1 = std::max(x1, px);
                    y1 = std::max(y1, py);
                }
        if (x1 < 0) continue;
        BoundingBox b;
        b.x_min = x0;
        b.y_min = y0;
        b.x_max = x1 + 1;
        b.y_max = y1 + 1;
        b.class_id = spec.structures[i].class_id;
        b.score = 1.0;
        out.boxes.push_back(b);
    }
    return out;
}

}  // namespace adc::scenegen
