#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mogen/geometry.hpp"
#include "mogen/image.hpp"
#include "mogen/rng.hpp"

namespace mogen {

enum class ShapeKind { circle, square, triangle };
enum class ColorKind { red, green, blue, yellow };

const char* shape_name(ShapeKind s);
const char* color_name(ColorKind c);
ShapeKind shape_from_name(const std::string& s);
ColorKind color_from_name(const std::string& s);
void color_rgb(ColorKind c, double rgb[3]);

struct SceneObject {
    ShapeKind shape;
    ColorKind color;
    NormBox box;  // sampled placement box (masks are tight subsets of it)
};

struct SceneSpec {
    std::vector<SceneObject> objects;
    size_t canvas = 32;
    uint64_t seed = 0;

    bool operator==(const SceneSpec& o) const;
};

struct AnnotationBundle {
    std::string text;
    Image structure_ref;             // binary union silhouette
    std::vector<Image> object_refs;  // per-object crops on 50% gray, canvas-sized
    std::vector<NormBox> boxes;      // tight visible-mask rectangles
};

struct DataConfig {
    size_t canvas = 32;
    size_t min_objects = 1;
    size_t max_objects = 6;
    size_t min_box_px = 6;
    size_t max_box_px = 14;
    double max_iou = 0.1;
    bool single_group = false;  // one (color, shape) pair per scene
};

struct DatasetItem {
    SceneSpec spec;
    Image image;
    AnnotationBundle ann;
};

// Rejection-sampled scene: pairwise box IoU <= max_iou, same-color shapes
// keep a one-pixel gap so the component oracle always sees exact counts.
// Up to 200 placement attempts per object; failures reduce the count.
SceneSpec gen_scene(uint64_t seed, const DataConfig& cfg);

// Exact rasterization (no anti-aliasing), white background, palette colors.
Image render(const SceneSpec& spec);

// Per-pixel owner index (-1 background), later objects occlude earlier ones.
std::vector<int> owner_map(const SceneSpec& spec);

// Canonical annotation: objects grouped and ordered by (color, shape)
// alphabetically; object_refs and boxes follow the same order.
AnnotationBundle annotate(const SceneSpec& spec, const Image& rendered);

// The three train-time augmentations: box jitter (IoU >= 0.6 with the
// original), one local blur/pixel-shuffle distortion of the image, and
// object-reference crops removing at most 15% of area.
std::pair<AnnotationBundle, Image> augment(const AnnotationBundle& bundle, const Image& rendered,
                                           Rng& rng, const DataConfig& cfg);

struct CropRect {
    size_t x = 0, y = 0, w = 0, h = 0;
};

// Crop rectangle keeping at least 85% of a size x size image.
CropRect sample_crop_rect(size_t size, Rng& rng);

DatasetItem make_item(uint64_t seed, size_t index, const DataConfig& cfg);
std::vector<DatasetItem> make_dataset(uint64_t seed, size_t n, const DataConfig& cfg);

// manifest.jsonl + binary PPMs; load(save(x)) is field-for-field identical.
void save_dataset(const std::vector<DatasetItem>& items, const std::string& dir);
std::vector<DatasetItem> load_dataset(const std::string& dir);

}  // namespace mogen
