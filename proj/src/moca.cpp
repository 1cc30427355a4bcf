#include "mogen/moca.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "mogen/parallel.hpp"
#include "mogen/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mogen {

const char* shape_name(ShapeKind s) {
    switch (s) {
        case ShapeKind::circle: return "circle";
        case ShapeKind::square: return "square";
        case ShapeKind::triangle: return "triangle";
    }
    return "?";
}

const char* color_name(ColorKind c) {
    switch (c) {
        case ColorKind::red: return "red";
        case ColorKind::green: return "green";
        case ColorKind::blue: return "blue";
        case ColorKind::yellow: return "yellow";
    }
    return "?";
}

ShapeKind shape_from_name(const std::string& s) {
    if (s == "circle") return ShapeKind::circle;
    if (s == "square") return ShapeKind::square;
    if (s == "triangle") return ShapeKind::triangle;
    throw MogenError("unknown shape name: " + s);
}

ColorKind color_from_name(const std::string& s) {
    if (s == "red") return ColorKind::red;
    if (s == "green") return ColorKind::green;
    if (s == "blue") return ColorKind::blue;
    if (s == "yellow") return ColorKind::yellow;
    throw MogenError("unknown color name: " + s);
}

void color_rgb(ColorKind c, double rgb[3]) {
    switch (c) {
        case ColorKind::red: rgb[0] = 1; rgb[1] = 0; rgb[2] = 0; return;
        case ColorKind::green: rgb[0] = 0; rgb[1] = 1; rgb[2] = 0; return;
        case ColorKind::blue: rgb[0] = 0; rgb[1] = 0; rgb[2] = 1; return;
        case ColorKind::yellow: rgb[0] = 1; rgb[1] = 1; rgb[2] = 0; return;
    }
}

bool SceneSpec::operator==(const SceneSpec& o) const {
    if (canvas != o.canvas || seed != o.seed || objects.size() != o.objects.size()) return false;
    for (size_t i = 0; i < objects.size(); ++i) {
        if (objects[i].shape != o.objects[i].shape || objects[i].color != o.objects[i].color ||
            !(objects[i].box == o.objects[i].box))
            return false;
    }
    return true;
}

namespace {

struct PxBox {
    long x0, y0, x1, y1;  // x1/y1 exclusive
};

PxBox to_px(const NormBox& b, size_t canvas) {
    const double s = static_cast<double>(canvas);
    return {std::lround(b.x0 * s), std::lround(b.y0 * s), std::lround(b.x1 * s),
            std::lround(b.y1 * s)};
}

// one empty row or column between same-color boxes keeps 4-connected
// components separate
bool separated(const PxBox& a, const PxBox& b) {
    return a.x1 < b.x0 || b.x1 < a.x0 || a.y1 < b.y0 || b.y1 < a.y0;
}

bool inside_shape(ShapeKind shape, const PxBox& b, long x, long y) {
    switch (shape) {
        case ShapeKind::square:
            return true;
        case ShapeKind::circle: {
            const double cx = 0.5 * static_cast<double>(b.x0 + b.x1);
            const double cy = 0.5 * static_cast<double>(b.y0 + b.y1);
            const double r = 0.5 * static_cast<double>(std::min(b.x1 - b.x0, b.y1 - b.y0));
            const double dx = static_cast<double>(x) + 0.5 - cx;
            const double dy = static_cast<double>(y) + 0.5 - cy;
            return dx * dx + dy * dy <= r * r;
        }
        case ShapeKind::triangle: {
            const double ax = 0.5 * static_cast<double>(b.x0 + b.x1), ay = static_cast<double>(b.y0);
            const double bx = static_cast<double>(b.x0), by = static_cast<double>(b.y1);
            const double cx = static_cast<double>(b.x1), cy = static_cast<double>(b.y1);
            const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
            const double d1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
            const double d2 = (cx - bx) * (py - by) - (cy - by) * (px - bx);
            const double d3 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx);
            const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
            const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
            return !(has_neg && has_pos);
        }
    }
    return false;
}

struct CanonicalKey {
    std::string color, shape;
    double y0, x0, x1, y1;
    bool operator<(const CanonicalKey& o) const {
        if (color != o.color) return color < o.color;
        if (shape != o.shape) return shape < o.shape;
        if (y0 != o.y0) return y0 < o.y0;
        if (x0 != o.x0) return x0 < o.x0;
        if (x1 != o.x1) return x1 < o.x1;
        return y1 < o.y1;
    }
};

CanonicalKey key_of(const SceneObject& o) {
    return {color_name(o.color), shape_name(o.shape), o.box.y0, o.box.x0, o.box.x1, o.box.y1};
}

}  // namespace

SceneSpec gen_scene(uint64_t seed, const DataConfig& cfg) {
    if (cfg.max_objects < 1 || cfg.min_objects < 1 || cfg.min_objects > cfg.max_objects)
        throw ContractError("gen_scene: bad object count range");
    if (cfg.max_box_px > cfg.canvas || cfg.min_box_px < 2)
        throw ContractError("gen_scene: bad box size range");
    Rng rng = Rng::stream(seed, {rngkey::scene});
    SceneSpec spec;
    spec.canvas = cfg.canvas;
    spec.seed = seed;

    const size_t target =
        cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);
    const ShapeKind scene_shape = static_cast<ShapeKind>(rng.below(3));
    const ColorKind scene_color = static_cast<ColorKind>(rng.below(4));
    std::vector<PxBox> placed;
    for (size_t i = 0; i < target; ++i) {
        const ShapeKind shape = cfg.single_group ? scene_shape : static_cast<ShapeKind>(rng.below(3));
        const ColorKind color = cfg.single_group ? scene_color : static_cast<ColorKind>(rng.below(4));
        bool placed_ok = false;
        for (size_t attempt = 0; attempt < 200 && !placed_ok; ++attempt) {
            const long w = static_cast<long>(cfg.min_box_px + rng.below(cfg.max_box_px - cfg.min_box_px + 1));
            const long h = static_cast<long>(cfg.min_box_px + rng.below(cfg.max_box_px - cfg.min_box_px + 1));
            const long x0 = static_cast<long>(rng.below(cfg.canvas - w + 1));
            const long y0 = static_cast<long>(rng.below(cfg.canvas - h + 1));
            const PxBox px{x0, y0, x0 + w, y0 + h};
            const double s = static_cast<double>(cfg.canvas);
            const NormBox nb{x0 / s, y0 / s, (x0 + w) / s, (y0 + h) / s};
            bool ok = true;
            for (size_t j = 0; j < spec.objects.size(); ++j) {
                if (nb.iou(spec.objects[j].box) > cfg.max_iou) { ok = false; break; }
                if (spec.objects[j].color == color && !separated(px, placed[j])) { ok = false; break; }
            }
            if (ok) {
                spec.objects.push_back({shape, color, nb});
                placed.push_back(px);
                placed_ok = true;
            }
        }
        // placement failure degrades the count rather than failing
    }
    std::sort(spec.objects.begin(), spec.objects.end(),
              [](const SceneObject& a, const SceneObject& b) { return key_of(a) < key_of(b); });
    return spec;
}

std::vector<int> owner_map(const SceneSpec& spec) {
    const size_t s = spec.canvas;
    std::vector<int> owner(s * s, -1);
    for (size_t i = 0; i < spec.objects.size(); ++i) {
        const SceneObject& o = spec.objects[i];
        const PxBox b = to_px(o.box, s);
        for (long y = b.y0; y < b.y1; ++y)
            for (long x = b.x0; x < b.x1; ++x)
                if (inside_shape(o.shape, b, x, y)) owner[static_cast<size_t>(y) * s + x] = static_cast<int>(i);
    }
    return owner;
}

Image render(const SceneSpec& spec) {
    const size_t s = spec.canvas;
    Image img(s, s, 1.0, 1.0, 1.0);
    const std::vector<int> owner = owner_map(spec);
    for (size_t p = 0; p < owner.size(); ++p) {
        if (owner[p] < 0) continue;
        double rgb[3] = {0, 0, 0};
        color_rgb(spec.objects[static_cast<size_t>(owner[p])].color, rgb);
        for (size_t c = 0; c < 3; ++c) img.px[p * 3 + c] = rgb[c];
    }
    return img;
}

AnnotationBundle annotate(const SceneSpec& spec, const Image& rendered) {
    const size_t s = spec.canvas;
    if (rendered.h != s || rendered.w != s)
        throw ContractError("annotate: rendered image size does not match the spec canvas");
    const std::vector<int> owner = owner_map(spec);

    AnnotationBundle ann;
    ann.structure_ref = Image(s, s, 0.0, 0.0, 0.0);
    for (size_t p = 0; p < owner.size(); ++p)
        if (owner[p] >= 0)
            for (size_t c = 0; c < 3; ++c) ann.structure_ref.px[p * 3 + c] = 1.0;

    // canonical object order (gen_scene already sorts; re-sorting keeps the
    // annotation contract independent of the input ordering)
    std::vector<size_t> order(spec.objects.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return key_of(spec.objects[a]) < key_of(spec.objects[b]);
    });

    std::map<std::pair<std::string, std::string>, size_t> groups;
    for (const auto& o : spec.objects) ++groups[{color_name(o.color), shape_name(o.shape)}];
    std::vector<std::string> parts;
    for (const auto& [key, count] : groups) {
        std::string part = std::to_string(count) + " " + key.first + " " + key.second;
        if (count > 1) part += "s";
        parts.push_back(std::move(part));
    }
    ann.text = "a scene with ";
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) ann.text += (i + 1 == parts.size()) ? " and " : ", ";
        ann.text += parts[i];
    }

    for (size_t oi : order) {
        long minx = static_cast<long>(s), miny = static_cast<long>(s), maxx = -1, maxy = -1;
        for (long y = 0; y < static_cast<long>(s); ++y)
            for (long x = 0; x < static_cast<long>(s); ++x)
                if (owner[static_cast<size_t>(y) * s + x] == static_cast<int>(oi)) {
                    minx = std::min(minx, x);
                    miny = std::min(miny, y);
                    maxx = std::max(maxx, x);
                    maxy = std::max(maxy, y);
                }
        if (maxx < 0) throw NumericError("annotate: object has an empty visible mask");
        const double sd = static_cast<double>(s);
        ann.boxes.push_back(
            {minx / sd, miny / sd, static_cast<double>(maxx + 1) / sd, static_cast<double>(maxy + 1) / sd});

        // 128/255 is the gray level that survives PPM quantization bit-exactly
        const double gray = 128.0 / 255.0;
        const size_t cw = static_cast<size_t>(maxx - minx + 1), ch = static_cast<size_t>(maxy - miny + 1);
        Image crop(ch, cw, gray, gray, gray);
        for (size_t y = 0; y < ch; ++y)
            for (size_t x = 0; x < cw; ++x) {
                const size_t p = (miny + y) * s + (minx + x);
                if (owner[p] == static_cast<int>(oi))
                    for (size_t c = 0; c < 3; ++c) crop.at(y, x, c) = rendered.px[p * 3 + c];
            }
        ann.object_refs.push_back(resize_nearest(crop, s, s));
    }
    return ann;
}

std::pair<AnnotationBundle, Image> augment(const AnnotationBundle& bundle, const Image& rendered,
                                           Rng& rng, const DataConfig& cfg) {
    AnnotationBundle out = bundle;
    Image img = rendered;
    const size_t s = cfg.canvas;

    // (1) box jitter, IoU with the original >= 0.6 and in-canvas
    for (auto& box : out.boxes) {
        const NormBox orig = box;
        for (int attempt = 0; attempt < 50; ++attempt) {
            double dx = rng.uniform(-0.1, 0.1) * orig.width();
            double dy = rng.uniform(-0.1, 0.1) * orig.height();
            NormBox cand{orig.x0 + dx, orig.y0 + dy, orig.x1 + dx, orig.y1 + dy};
            // translate back inside the canvas (keeps the size)
            if (cand.x0 < 0) { cand.x1 -= cand.x0; cand.x0 = 0; }
            if (cand.y0 < 0) { cand.y1 -= cand.y0; cand.y0 = 0; }
            if (cand.x1 > 1) { cand.x0 -= cand.x1 - 1; cand.x1 = 1; }
            if (cand.y1 > 1) { cand.y0 -= cand.y1 - 1; cand.y1 = 1; }
            if (orig.iou(cand) >= 0.6) {
                box = cand;
                break;
            }
        }
    }

    // (2) one local region gets blur or pixel shuffle
    {
        const size_t wmin = std::max<size_t>(2, s / 4), wmax = std::max<size_t>(wmin, s / 2);
        const size_t rw = wmin + rng.below(wmax - wmin + 1);
        const size_t rh = wmin + rng.below(wmax - wmin + 1);
        const size_t rx = rng.below(s - rw + 1);
        const size_t ry = rng.below(s - rh + 1);
        if (rng.below(2) == 0) {
            // 3x3 box blur inside the region
            const Image src = img;
            for (size_t y = ry; y < ry + rh; ++y)
                for (size_t x = rx; x < rx + rw; ++x)
                    for (size_t c = 0; c < 3; ++c) {
                        double acc = 0.0;
                        int cnt = 0;
                        for (long oy = -1; oy <= 1; ++oy)
                            for (long ox = -1; ox <= 1; ++ox) {
                                const long yy = static_cast<long>(y) + oy, xx = static_cast<long>(x) + ox;
                                if (yy < 0 || xx < 0 || yy >= static_cast<long>(s) || xx >= static_cast<long>(s))
                                    continue;
                                acc += src.at(static_cast<size_t>(yy), static_cast<size_t>(xx), c);
                                ++cnt;
                            }
                        img.at(y, x, c) = acc / cnt;
                    }
        } else {
            // Fisher-Yates shuffle of the region's pixels
            std::vector<size_t> idx(rw * rh);
            for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
            const Image src = img;
            for (size_t i = 0; i < idx.size(); ++i) {
                const size_t sy = ry + idx[i] / rw, sx = rx + idx[i] % rw;
                const size_t dy = ry + i / rw, dx = rx + i % rw;
                for (size_t c = 0; c < 3; ++c) img.at(dy, dx, c) = src.at(sy, sx, c);
            }
        }
    }

    // (3) object-reference crops removing at most 15% of the area
    for (auto& ref : out.object_refs) {
        const size_t rs = ref.h;
        const CropRect r = sample_crop_rect(rs, rng);
        Image crop(r.h, r.w);
        for (size_t y = 0; y < r.h; ++y)
            for (size_t x = 0; x < r.w; ++x)
                for (size_t c = 0; c < 3; ++c) crop.at(y, x, c) = ref.at(r.y + y, r.x + x, c);
        ref = resize_nearest(crop, rs, rs);
    }

    return {std::move(out), std::move(img)};
}

CropRect sample_crop_rect(size_t size, Rng& rng) {
    const size_t min_area = static_cast<size_t>(std::ceil(0.85 * static_cast<double>(size * size)));
    const size_t wmin = (min_area + size - 1) / size;
    CropRect r;
    r.w = wmin + rng.below(size - wmin + 1);
    const size_t hmin = (min_area + r.w - 1) / r.w;
    r.h = hmin + rng.below(size - hmin + 1);
    r.x = rng.below(size - r.w + 1);
    r.y = rng.below(size - r.h + 1);
    return r;
}

DatasetItem make_item(uint64_t seed, size_t index, const DataConfig& cfg) {
    Rng derive = Rng::stream(seed, {rngkey::scene, index});
    const uint64_t scene_seed = derive.next_u64();
    DatasetItem item;
    item.spec = gen_scene(scene_seed, cfg);
    item.image = render(item.spec);
    item.ann = annotate(item.spec, item.image);
    return item;
}

std::vector<DatasetItem> make_dataset(uint64_t seed, size_t n, const DataConfig& cfg) {
    std::vector<DatasetItem> items(n);
    parallel_for(n, [&](size_t i) { items[i] = make_item(seed, i, cfg); });
    return items;
}

// --------------------------------------------------------------------------
// persistence
// --------------------------------------------------------------------------

namespace {

std::string item_name(size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", i);
    return buf;
}

json box_to_json(const NormBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

NormBox box_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
            j.at(3).get<double>()};
}

}  // namespace

void save_dataset(const std::vector<DatasetItem>& items, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "img");
    fs::create_directories(fs::path(dir) / "struct");
    fs::create_directories(fs::path(dir) / "obj");
    std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
    if (!manifest) throw MogenError("save_dataset: cannot open manifest in " + dir);

    for (size_t i = 0; i < items.size(); ++i) {
        const DatasetItem& item = items[i];
        const std::string base = item_name(i);
        const std::string img_rel = "img/" + base + ".ppm";
        const std::string struct_rel = "struct/" + base + ".ppm";
        write_ppm((fs::path(dir) / img_rel).string(), item.image);
        write_ppm((fs::path(dir) / struct_rel).string(), item.ann.structure_ref);

        json objs = json::array();
        for (size_t k = 0; k < item.ann.object_refs.size(); ++k) {
            const std::string obj_rel = "obj/" + base + "_" + std::to_string(k) + ".ppm";
            write_ppm((fs::path(dir) / obj_rel).string(), item.ann.object_refs[k]);
            objs.push_back(obj_rel);
        }

        json boxes = json::array();
        for (const auto& b : item.ann.boxes) boxes.push_back(box_to_json(b));

        json spec_objs = json::array();
        for (const auto& o : item.spec.objects)
            spec_objs.push_back({{"shape", shape_name(o.shape)},
                                 {"color", color_name(o.color)},
                                 {"box", box_to_json(o.box)}});

        const json rec = {{"id", i},
                          {"text", item.ann.text},
                          {"img", img_rel},
                          {"struct", struct_rel},
                          {"objs", objs},
                          {"boxes", boxes},
                          {"spec",
                           {{"seed", item.spec.seed},
                            {"canvas", item.spec.canvas},
                            {"objects", spec_objs}}}};
        manifest << rec.dump() << "\n";
    }
    if (!manifest) throw MogenError("save_dataset: manifest write failed in " + dir);
}

std::vector<DatasetItem> load_dataset(const std::string& dir) {
    std::ifstream manifest(fs::path(dir) / "manifest.jsonl");
    if (!manifest) throw MogenError("load_dataset: cannot open manifest.jsonl in " + dir);
    std::vector<DatasetItem> items;
    std::string line;
    size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw MogenError("load_dataset: manifest.jsonl:" + std::to_string(line_no) + ": " +
                             e.what());
        }
        DatasetItem item;
        item.spec.seed = rec.at("spec").at("seed").get<uint64_t>();
        item.spec.canvas = rec.at("spec").at("canvas").get<size_t>();
        for (const auto& jo : rec.at("spec").at("objects")) {
            SceneObject o;
            o.shape = shape_from_name(jo.at("shape").get<std::string>());
            o.color = color_from_name(jo.at("color").get<std::string>());
            o.box = box_from_json(jo.at("box"));
            item.spec.objects.push_back(o);
        }
        item.ann.text = rec.at("text").get<std::string>();
        item.image = read_ppm((fs::path(dir) / rec.at("img").get<std::string>()).string());
        item.ann.structure_ref =
            read_ppm((fs::path(dir) / rec.at("struct").get<std::string>()).string());
        for (const auto& rel : rec.at("objs"))
            item.ann.object_refs.push_back(
                read_ppm((fs::path(dir) / rel.get<std::string>()).string()));
        for (const auto& jb : rec.at("boxes")) item.ann.boxes.push_back(box_from_json(jb));
        items.push_back(std::move(item));
    }
    return items;
}

}  // namespace mogen
