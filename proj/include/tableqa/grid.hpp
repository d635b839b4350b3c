#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tqa {

struct MergeRegion {
    int top = 0;
    int left = 0;
    int height = 1;
    int width = 1;

    int bottom() const { return top + height - 1; }   // inclusive
    int right() const { return left + width - 1; }    // inclusive

    bool contains(int r, int c) const {
        return r >= top && r <= bottom() && c >= left && c <= right();
    }
    bool overlaps(const MergeRegion& o) const {
        return top <= o.bottom() && o.top <= bottom() && left <= o.right() &&
               o.left <= right();
    }
    bool operator==(const MergeRegion&) const = default;
};

struct Cell {
    std::optional<std::string> value;
    int covered_by = -1; // index into merges, -1 when not covered
};

// Raw rectangular grid, layout preserved. Immutable after load; safe to
// share read-only across threads.
struct GridDocument {
    std::string doc_id;
    std::string title;
    int n_rows = 0;
    int n_cols = 0;
    std::vector<Cell> cells; // row-major, n_rows * n_cols
    std::vector<MergeRegion> merges;
    std::map<std::string, std::string> source_meta;

    const Cell& cell(int r, int c) const { return cells[static_cast<size_t>(r) * n_cols + c]; }
};

enum class GridFormat { CanonicalJson, Csv };

// Validates all invariants: cell count, merge bounds, pairwise-disjoint
// merges, anchored values, covered cells without independent values.
void validate_grid(const GridDocument& doc);

GridDocument load_grid(const std::string& path, GridFormat format);
GridDocument load_grid_from_string(const std::string& content, GridFormat format);

// Canonical form: sorted keys, no insignificant whitespace, UTF-8.
std::string save_grid_to_string(const GridDocument& doc);
void save_grid(const GridDocument& doc, const std::string& path);

// Effective value at (r,c): the merge anchor's value for covered cells.
std::optional<std::string> cell_at(const GridDocument& doc, int r, int c);

// Convenience builder used by tests and the markdown round trip: rows of
// optional strings, whitespace-only values normalized to absent.
GridDocument make_grid(std::string doc_id, std::string title,
                       std::vector<std::vector<std::optional<std::string>>> rows,
                       std::vector<MergeRegion> merges = {},
                       std::map<std::string, std::string> source_meta = {});

} // namespace tqa
