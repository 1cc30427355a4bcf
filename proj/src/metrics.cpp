#include "mogen/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mogen/tensor.hpp"

namespace mogen {

std::vector<Detection> detect_objects(const Image& img) {
    const size_t h = img.h, w = img.w;
    std::vector<Detection> out;
    std::vector<uint8_t> mask(h * w), seen(h * w);
    for (int ci = 0; ci < 4; ++ci) {
        const ColorKind color = static_cast<ColorKind>(ci);
        double rgb[3] = {0, 0, 0};
        color_rgb(color, rgb);
        for (size_t p = 0; p < h * w; ++p) {
            const double dr = img.px[p * 3] - rgb[0];
            const double dg = img.px[p * 3 + 1] - rgb[1];
            const double db = img.px[p * 3 + 2] - rgb[2];
            mask[p] = (std::sqrt(dr * dr + dg * dg + db * db) < 0.25) ? 1 : 0;
            seen[p] = 0;
        }
        std::vector<size_t> stack;
        for (size_t start = 0; start < h * w; ++start) {
            if (!mask[start] || seen[start]) continue;
            // flood fill one 4-connected component
            size_t area = 0;
            size_t minx = w, miny = h, maxx = 0, maxy = 0;
            stack.assign(1, start);
            seen[start] = 1;
            while (!stack.empty()) {
                const size_t p = stack.back();
                stack.pop_back();
                ++area;
                const size_t y = p / w, x = p % w;
                minx = std::min(minx, x);
                maxx = std::max(maxx, x);
                miny = std::min(miny, y);
                maxy = std::max(maxy, y);
                const size_t nbr[4] = {x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p,
                                       y > 0 ? p - w : p, y + 1 < h ? p + w : p};
                for (size_t q : nbr)
                    if (q != p && mask[q] && !seen[q]) {
                        seen[q] = 1;
                        stack.push_back(q);
                    }
            }
            if (area >= 4) {
                const double sw = static_cast<double>(w), sh = static_cast<double>(h);
                out.push_back({color,
                               {minx / sw, miny / sh, static_cast<double>(maxx + 1) / sw,
                                static_cast<double>(maxy + 1) / sh},
                               area});
            }
        }
    }
    return out;
}

double numerical_accuracy(const std::vector<Image>& generated,
                          const std::vector<SceneSpec>& specs) {
    if (generated.size() != specs.size())
        throw ContractError("numerical_accuracy: list length mismatch");
    if (generated.empty()) return 0.0;
    size_t hits = 0;
    for (size_t i = 0; i < generated.size(); ++i)
        if (detect_objects(generated[i]).size() == specs[i].objects.size()) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(generated.size());
}

MatchResult spatial_match(const Image& generated, const std::vector<NormBox>& targets) {
    MatchResult res;
    res.detections = detect_objects(generated);
    res.target_to_detection.assign(targets.size(), -1);
    std::vector<uint8_t> det_used(res.detections.size(), 0);
    std::vector<uint8_t> tgt_used(targets.size(), 0);

    double iou_sum = 0.0;
    for (;;) {
        double best = 0.0;
        int bt = -1, bd = -1;
        for (size_t t = 0; t < targets.size(); ++t) {
            if (tgt_used[t]) continue;
            for (size_t d = 0; d < res.detections.size(); ++d) {
                if (det_used[d]) continue;
                const double iou = targets[t].iou(res.detections[d].box);
                if (iou > best) {
                    best = iou;
                    bt = static_cast<int>(t);
                    bd = static_cast<int>(d);
                }
            }
        }
        if (bt < 0 || best <= 0.0) break;
        tgt_used[static_cast<size_t>(bt)] = 1;
        det_used[static_cast<size_t>(bd)] = 1;
        res.target_to_detection[static_cast<size_t>(bt)] = bd;
        iou_sum += best;
    }
    res.mean_iou = targets.empty() ? 0.0 : iou_sum / static_cast<double>(targets.size());
    return res;
}

double spatial_sim(const std::vector<Image>& generated,
                   const std::vector<std::vector<NormBox>>& target_boxes) {
    if (generated.size() != target_boxes.size())
        throw ContractError("spatial_sim: list length mismatch");
    if (generated.empty()) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < generated.size(); ++i)
        acc += spatial_match(generated[i], target_boxes[i]).mean_iou;
    return acc / static_cast<double>(generated.size());
}

std::vector<double> color_histogram(const Image& img) {
    std::vector<double> hist(64, 0.0);
    const size_t n = img.h * img.w;
    for (size_t p = 0; p < n; ++p) {
        size_t idx = 0;
        for (size_t c = 0; c < 3; ++c) {
            const double v = img.px[p * 3 + c];
            size_t bin = static_cast<size_t>(v * 4.0);
            if (bin > 3) bin = 3;
            idx = idx * 4 + bin;
        }
        hist[idx] += 1.0;
    }
    for (double& v : hist) v /= static_cast<double>(n);
    return hist;
}

double histogram_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

Image crop_box(const Image& img, const NormBox& box) {
    const long x0 = std::lround(box.x0 * static_cast<double>(img.w));
    const long y0 = std::lround(box.y0 * static_cast<double>(img.h));
    const long x1 = std::max(x0 + 1, std::lround(box.x1 * static_cast<double>(img.w)));
    const long y1 = std::max(y0 + 1, std::lround(box.y1 * static_cast<double>(img.h)));
    Image out(static_cast<size_t>(y1 - y0), static_cast<size_t>(x1 - x0));
    for (long y = y0; y < y1; ++y)
        for (long x = x0; x < x1; ++x)
            for (size_t c = 0; c < 3; ++c)
                out.at(static_cast<size_t>(y - y0), static_cast<size_t>(x - x0), c) =
                    img.at(static_cast<size_t>(std::min<long>(y, img.h - 1)),
                           static_cast<size_t>(std::min<long>(x, img.w - 1)), c);
    return out;
}

}  // namespace

double appearance_sim_item(const Image& generated, const std::vector<Image>& object_refs,
                           const std::vector<NormBox>& targets) {
    if (object_refs.size() != targets.size())
        throw ContractError("appearance_sim: refs and targets must pair up");
    if (targets.empty()) return 0.0;
    const MatchResult match = spatial_match(generated, targets);
    double acc = 0.0;
    for (size_t t = 0; t < targets.size(); ++t) {
        const int d = match.target_to_detection[t];
        if (d < 0) continue;  // unmatched contributes 0
        const Image crop = crop_box(generated, match.detections[static_cast<size_t>(d)].box);
        acc += histogram_cosine(color_histogram(object_refs[t]), color_histogram(crop));
    }
    return acc / static_cast<double>(targets.size());
}

double appearance_sim(const std::vector<Image>& generated,
                      const std::vector<std::vector<Image>>& object_refs,
                      const std::vector<std::vector<NormBox>>& targets) {
    if (generated.size() != object_refs.size() || generated.size() != targets.size())
        throw ContractError("appearance_sim: list length mismatch");
    if (generated.empty()) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < generated.size(); ++i)
        acc += appearance_sim_item(generated[i], object_refs[i], targets[i]);
    return acc / static_cast<double>(generated.size());
}

double img_sim(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w) throw ContractError("img_sim: image sizes differ");
    double acc = 0.0;
    for (size_t i = 0; i < a.px.size(); ++i) {
        const double d = a.px[i] - b.px[i];
        acc += d * d;
    }
    const double rmse = std::sqrt(acc / static_cast<double>(a.px.size()));
    return 1.0 - std::min(1.0, rmse);
}

MetricReport evaluate_set(const std::vector<Image>& generated,
                          const std::vector<const DatasetItem*>& refs) {
    if (generated.size() != refs.size()) throw ContractError("evaluate_set: length mismatch");
    MetricReport rep;
    rep.items = generated.size();
    if (generated.empty()) return rep;
    size_t hits = 0;
    for (size_t i = 0; i < generated.size(); ++i) {
        const DatasetItem& ref = *refs[i];
        ItemMetrics row;
        row.index = i;
        row.detected = detect_objects(generated[i]).size();
        row.expected = ref.spec.objects.size();
        if (row.detected == row.expected) ++hits;
        row.spatial = spatial_match(generated[i], ref.ann.boxes).mean_iou;
        row.appearance = appearance_sim_item(generated[i], ref.ann.object_refs, ref.ann.boxes);
        row.image_similarity = img_sim(generated[i], ref.image);
        rep.spatial += row.spatial;
        rep.appearance += row.appearance;
        rep.image_similarity += row.image_similarity;
        rep.rows.push_back(row);
    }
    const double n = static_cast<double>(generated.size());
    rep.numerical = 100.0 * static_cast<double>(hits) / n;
    rep.spatial /= n;
    rep.appearance /= n;
    rep.image_similarity /= n;
    return rep;
}

void write_eval_csv(const std::string& path, const MetricReport& report) {
    std::ofstream f(path);
    if (!f) throw ContractError("write_eval_csv: cannot open " + path);
    auto fmt = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return std::string(buf);
    };
    f << "item,detected,expected,count_match,spatial_iou,appearance,img_sim\n";
    for (const auto& r : report.rows)
        f << r.index << "," << r.detected << "," << r.expected << ","
          << (r.detected == r.expected ? 1 : 0) << "," << fmt(r.spatial) << ","
          << fmt(r.appearance) << "," << fmt(r.image_similarity) << "\n";
    // aggregate row: count_match carries the numerical-accuracy percentage
    f << "all," << report.items << "," << report.items << "," << fmt(report.numerical) << ","
      << fmt(report.spatial) << "," << fmt(report.appearance) << ","
      << fmt(report.image_similarity) << "\n";
}

}  // namespace mogen
