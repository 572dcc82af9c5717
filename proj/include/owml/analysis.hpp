#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "owml/io.hpp"

namespace owml {

struct LengthMismatch : std::runtime_error {
    explicit LengthMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct SingleClass : std::runtime_error {
    SingleClass() : std::runtime_error("auroc: labels are all one class") {}
};

struct Confusion {
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

// §3.4 binarization: a feature is active when its value is > 0.
inline Confusion binary_confusion(const std::vector<float>& values,
                                  const std::vector<std::uint8_t>& labels) {
    if (values.size() != labels.size() || values.empty())
        throw LengthMismatch("binary_confusion: column lengths");
    Confusion c;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const bool active = values[i] > 0.0f;
        const bool positive = labels[i] != 0;
        if (active && positive) ++c.tp;
        else if (active && !positive) ++c.fp;
        else if (!active && !positive) ++c.tn;
        else ++c.fn;
    }
    return c;
}

// 2TP / (2TP + FP + FN), 0 when the denominator vanishes.
inline double f1(long tp, long fp, long fn) {
    if (tp < 0 || fp < 0 || fn < 0) throw std::invalid_argument("f1: counts < 0");
    const long denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * double(tp) / double(denom);
}

enum class AurocMethod : std::uint8_t { Rank = 0, BinaryTrapezoid = 1 };

// Rank: tie-adjusted Mann–Whitney on the raw values (ties count half).
// BinaryTrapezoid: (1 + TPR − FPR)/2 from the >0 binarization, i.e. the area
// under the two-segment ROC of the binary classifier.
inline double auroc(const std::vector<float>& values,
                    const std::vector<std::uint8_t>& labels,
                    AurocMethod method = AurocMethod::Rank) {
    if (values.size() != labels.size() || values.empty())
        throw LengthMismatch("auroc: column lengths");
    long n_pos = 0;
    for (auto l : labels) n_pos += (l != 0);
    const long n_neg = long(labels.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw SingleClass();

    if (method == AurocMethod::BinaryTrapezoid) {
        const Confusion c = binary_confusion(values, labels);
        const double tpr = double(c.tp) / double(n_pos);
        const double fpr = double(c.fp) / double(n_neg);
        return (1.0 + tpr - fpr) / 2.0;
    }

    // average ranks (1-based) with ties shared
    std::vector<int> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return values[a] < values[b]; });
    std::vector<double> rank(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]])
            ++j;
        const double avg = 0.5 * double(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (std::size_t k = 0; k < labels.size(); ++k)
        if (labels[k]) pos_rank_sum += rank[k];
    const double u = pos_rank_sum - 0.5 * double(n_pos) * double(n_pos + 1);
    return u / (double(n_pos) * double(n_neg));
}

// One scored (feature, tile) pair. mode is 0/1/2 for empty/own/enemy color
// labels and -1 for the stability labels, which have no mode.
struct FeatureScore {
    int layer = 0;
    int feature = 0;
    int tile = 0;
    int mode = -1;
    long tp = 0, fp = 0, tn = 0, fn = 0;
    double f1 = 0.0;
    double auroc = 0.5;
};

inline const char* mode_name(int mode) {
    switch (mode) {
        case 0: return "empty";
        case 1: return "own";
        case 2: return "enemy";
        default: return "-";
    }
}

struct TileFrequencyGrid {
    std::array<int, 64> counts{};
    int layer = 0;
    std::string metric;
    double threshold = 0.0;
    int seeds = 1;

    int total() const {
        int t = 0;
        for (int c : counts) t += c;
        return t;
    }
};

// §3.3.2 selection: per seed, keep features whose best AUROC over any
// (tile, mode) exceeds the threshold, then take the top_k by that best score.
// Ties break toward the lower feature index so selection is deterministic.
inline std::vector<int> top_color_features(const std::vector<FeatureScore>& scores,
                                           double auroc_threshold = 0.7,
                                           int top_k = 50) {
    std::vector<std::pair<int, double>> best;  // feature -> best auroc
    for (const auto& s : scores) {
        auto it = std::find_if(best.begin(), best.end(),
                               [&](const auto& p) { return p.first == s.feature; });
        if (it == best.end()) best.push_back({s.feature, s.auroc});
        else it->second = std::max(it->second, s.auroc);
    }
    best.erase(std::remove_if(best.begin(), best.end(),
                              [&](const auto& p) {
                                  return !(p.second > auroc_threshold);
                              }),
               best.end());
    std::sort(best.begin(), best.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (int(best.size()) > top_k) best.resize(top_k);
    std::vector<int> features;
    for (const auto& [f, a] : best) features.push_back(f);
    return features;
}

enum class TallyMode : std::uint8_t { BestTile = 0, PerTile = 1 };

// Figure-3 aggregation: each selected feature votes for its best-scoring tile
// (or, with PerTile, for every tile above the threshold); votes are summed
// across seeds.
inline TileFrequencyGrid aggregate_seed_frequency(
    const std::vector<std::vector<int>>& per_seed_features,
    const std::vector<std::vector<FeatureScore>>& per_seed_scores,
    double auroc_threshold = 0.7, TallyMode tally = TallyMode::BestTile) {
    if (per_seed_features.empty() ||
        per_seed_features.size() != per_seed_scores.size())
        throw LengthMismatch("aggregate_seed_frequency: seed tables");
    TileFrequencyGrid grid;
    grid.metric = "color";
    grid.threshold = auroc_threshold;
    grid.seeds = int(per_seed_features.size());
    for (std::size_t s = 0; s < per_seed_features.size(); ++s) {
        for (int feature : per_seed_features[s]) {
            if (tally == TallyMode::BestTile) {
                int best_tile = -1;
                double best_auroc = -1.0;
                for (const auto& sc : per_seed_scores[s]) {
                    if (sc.feature != feature) continue;
                    if (sc.auroc > best_auroc ||
                        (sc.auroc == best_auroc && sc.tile < best_tile)) {
                        best_auroc = sc.auroc;
                        best_tile = sc.tile;
                    }
                }
                if (best_tile >= 0) ++grid.counts[best_tile];
            } else {
                std::array<bool, 64> hit{};
                for (const auto& sc : per_seed_scores[s])
                    if (sc.feature == feature && sc.auroc > auroc_threshold)
                        hit[sc.tile] = true;
                for (int t = 0; t < 64; ++t) grid.counts[t] += hit[t];
            }
        }
    }
    return grid;
}

// §3.4 per-tile frequency: how many (feature, tile) pairs exceed the AUROC
// threshold at each board position.
inline TileFrequencyGrid stability_tile_frequency(
    const std::vector<FeatureScore>& scores, double auroc_threshold = 0.8) {
    TileFrequencyGrid grid;
    grid.metric = "stability";
    grid.threshold = auroc_threshold;
    if (!scores.empty()) grid.layer = scores.front().layer;
    for (const auto& s : scores)
        if (s.auroc > auroc_threshold) ++grid.counts[s.tile];
    return grid;
}

// Appendix-Table-1 analogue: per feature, the number of qualifying tiles in
// each layer plus the row total, sorted by total descending (feature index
// ascending on ties).
struct FeatureLayerRow {
    int feature = 0;
    std::vector<int> per_layer;
    int total = 0;
};

inline std::vector<FeatureLayerRow> stability_feature_frequency(
    const std::vector<std::vector<FeatureScore>>& per_layer_scores,
    double auroc_threshold = 0.8) {
    const int n_layers = int(per_layer_scores.size());
    std::vector<FeatureLayerRow> rows;
    for (int l = 0; l < n_layers; ++l) {
        for (const auto& s : per_layer_scores[l]) {
            if (!(s.auroc > auroc_threshold)) continue;
            auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) {
                return r.feature == s.feature;
            });
            if (it == rows.end()) {
                rows.push_back({s.feature, std::vector<int>(n_layers, 0), 0});
                it = rows.end() - 1;
            }
            ++it->per_layer[l];
            ++it->total;
        }
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.total != b.total) return a.total > b.total;
        return a.feature < b.feature;
    });
    return rows;
}

// ---------------------------------------------------------------------------
// Report emission: CSV tables and SVG heatmaps (byte-stable formatting)
// ---------------------------------------------------------------------------

namespace csvdetail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace csvdetail

inline void write_scores_csv(const std::string& path,
                             const std::vector<FeatureScore>& scores) {
    std::ofstream os(path);
    if (!os) throw IOFailure("cannot open " + path);
    os << "layer,feature,tile,mode,tp,fp,tn,fn,f1,auroc\n";
    for (const auto& s : scores)
        os << s.layer << ',' << s.feature << ',' << s.tile << ','
           << mode_name(s.mode) << ',' << s.tp << ',' << s.fp << ',' << s.tn
           << ',' << s.fn << ',' << csvdetail::fmt(s.f1) << ','
           << csvdetail::fmt(s.auroc) << '\n';
    if (!os) throw IOFailure("write failed: " + path);
}

inline void write_feature_table_csv(const std::string& path,
                                    const std::vector<FeatureLayerRow>& rows,
                                    int n_layers) {
    std::ofstream os(path);
    if (!os) throw IOFailure("cannot open " + path);
    os << "feature";
    for (int l = 1; l <= n_layers; ++l) os << ",layer" << l;
    os << ",total\n";
    for (const auto& r : rows) {
        os << r.feature;
        for (int c : r.per_layer) os << ',' << c;
        os << ',' << r.total << '\n';
    }
    if (!os) throw IOFailure("write failed: " + path);
}

// CSV: 8 rows of 8 comma-separated integers (row 0 = board row 0, a1..h1).
// SVG: 8×8 grid, linear grayscale normalized to the maximum count (an empty
// grid renders all-white), with the count printed in each cell.
inline void emit_heatmap(const TileFrequencyGrid& grid,
                         const std::string& path_base) {
    {
        std::ofstream os(path_base + ".csv");
        if (!os) throw IOFailure("cannot open " + path_base + ".csv");
        for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < 8; ++c)
                os << grid.counts[r * 8 + c] << (c == 7 ? '\n' : ',');
        }
        if (!os) throw IOFailure("write failed: " + path_base + ".csv");
    }
    const int mx = *std::max_element(grid.counts.begin(), grid.counts.end());
    const int cell = 40;
    std::ofstream os(path_base + ".svg");
    if (!os) throw IOFailure("cannot open " + path_base + ".svg");
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 8 * cell
       << "\" height=\"" << 8 * cell << "\">\n";
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            const int v = grid.counts[r * 8 + c];
            const int shade = mx == 0 ? 255 : 255 - (v * 255) / mx;
            const int text = shade < 128 ? 255 : 0;
            os << "<rect x=\"" << c * cell << "\" y=\"" << r * cell
               << "\" width=\"" << cell << "\" height=\"" << cell
               << "\" fill=\"rgb(" << shade << ',' << shade << ',' << shade
               << ")\" stroke=\"gray\"/>\n";
            os << "<text x=\"" << c * cell + cell / 2 << "\" y=\""
               << r * cell + cell / 2 + 5
               << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"rgb("
               << text << ',' << text << ',' << text << ")\">" << v
               << "</text>\n";
        }
    }
    os << "</svg>\n";
    if (!os) throw IOFailure("write failed: " + path_base + ".svg");
}

inline int mode_from_name(const std::string& name) {
    if (name == "empty") return 0;
    if (name == "own") return 1;
    if (name == "enemy") return 2;
    return -1;
}

inline std::vector<FeatureScore> read_scores_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IOFailure("cannot open " + path);
    std::string line;
    if (!std::getline(is, line) ||
        line != "layer,feature,tile,mode,tp,fp,tn,fn,f1,auroc")
        throw IOFailure("bad score csv header: " + path);
    std::vector<FeatureScore> scores;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i)
            if (i == line.size() || line[i] == ',') {
                cells.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        if (cells.size() != 10) throw IOFailure("bad score csv row: " + path);
        FeatureScore s;
        s.layer = std::stoi(cells[0]);
        s.feature = std::stoi(cells[1]);
        s.tile = std::stoi(cells[2]);
        s.mode = mode_from_name(cells[3]);
        s.tp = std::stol(cells[4]);
        s.fp = std::stol(cells[5]);
        s.tn = std::stol(cells[6]);
        s.fn = std::stol(cells[7]);
        s.f1 = std::stod(cells[8]);
        s.auroc = std::stod(cells[9]);
        scores.push_back(s);
    }
    return scores;
}

inline TileFrequencyGrid read_heatmap_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IOFailure("cannot open " + path);
    TileFrequencyGrid grid;
    for (int i = 0; i < 64; ++i) {
        int v;
        char sep;
        if (!(is >> v)) throw IOFailure("short heatmap csv: " + path);
        grid.counts[i] = v;
        if (i % 8 != 7) is >> sep;
    }
    return grid;
}

}  // namespace owml
