#pragma once

#include <string>
#include <vector>

#include "mogen/moca.hpp"

namespace mogen {

// One detected object: palette color index, tight box, pixel area.
struct Detection {
    ColorKind color;
    NormBox box;
    size_t area;
};

// Deterministic oracle counter: per palette color, RGB distance < 0.25,
// 4-connected components with area >= 4 px.
std::vector<Detection> detect_objects(const Image& img);

// Fraction (x100) of items whose detected count equals the spec count.
double numerical_accuracy(const std::vector<Image>& generated,
                          const std::vector<SceneSpec>& specs);

struct MatchResult {
    double mean_iou = 0.0;                 // unmatched targets contribute 0
    std::vector<int> target_to_detection;  // -1 when unmatched
    std::vector<Detection> detections;
};

// Greedy descending-IoU matching of detections to target boxes.
MatchResult spatial_match(const Image& generated, const std::vector<NormBox>& targets);

double spatial_sim(const std::vector<Image>& generated,
                   const std::vector<std::vector<NormBox>>& target_boxes);

// Cosine similarity of 4x4x4 RGB histograms between each object reference
// and its matched crop; unmatched targets contribute 0.
double appearance_sim_item(const Image& generated, const std::vector<Image>& object_refs,
                           const std::vector<NormBox>& targets);
double appearance_sim(const std::vector<Image>& generated,
                      const std::vector<std::vector<Image>>& object_refs,
                      const std::vector<std::vector<NormBox>>& targets);

std::vector<double> color_histogram(const Image& img);  // normalized 64-bin RGB histogram
double histogram_cosine(const std::vector<double>& a, const std::vector<double>& b);

// 1 - normalized RMSE, in [0,1].
double img_sim(const Image& a, const Image& b);

struct ItemMetrics {
    size_t index = 0;
    size_t detected = 0;
    size_t expected = 0;
    double spatial = 0.0;
    double appearance = 0.0;
    double image_similarity = 0.0;
};

struct MetricReport {
    double numerical = 0.0;         // [0,100]
    double spatial = 0.0;           // [0,1]
    double appearance = 0.0;        // [0,1]
    double image_similarity = 0.0;  // [0,1]
    size_t items = 0;
    std::vector<ItemMetrics> rows;
};

MetricReport evaluate_set(const std::vector<Image>& generated,
                          const std::vector<const DatasetItem*>& refs);

// Header row, one row per item, then an aggregate row.
void write_eval_csv(const std::string& path, const MetricReport& report);

}  // namespace mogen
