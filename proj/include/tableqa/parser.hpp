#pragma once

#include "tableqa/grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tqa {

struct Rect {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;

    int bottom() const { return top + height - 1; } // inclusive
    int right() const { return left + width - 1; }  // inclusive
    bool contains(int r, int c) const {
        return r >= top && r <= bottom() && c >= left && c <= right();
    }
    bool overlaps(const Rect& o) const {
        return height > 0 && width > 0 && o.height > 0 && o.width > 0 &&
               top <= o.bottom() && o.top <= bottom() && left <= o.right() &&
               o.left <= right();
    }
    bool operator==(const Rect&) const = default;
};

struct HeaderNode {
    std::string label;
    int col_begin = 0; // grid column, inclusive
    int col_end = 0;   // grid column, exclusive
    std::vector<HeaderNode> children;
};

enum class ColType { Discrete, Continuous, Unstructured };

std::string to_string(ColType t);

struct ColumnDescriptor {
    std::string name;          // sanitized identifier, t_ prefixed
    std::string display_label; // header path joined by "·"
    ColType col_type = ColType::Unstructured;
    double distinct_ratio = 0.0;
    double numeric_ratio = 0.0;
    int source_col = 0;        // grid column the values come from
    std::vector<std::string> header_path;
};

struct TableSchema {
    std::string table_id;
    Rect region;
    int header_rows = 1;
    bool synthesized_header = false; // header labels invented, all rows are body
    std::vector<HeaderNode> header_tree;
    std::vector<ColumnDescriptor> columns;
    std::vector<std::string> notes;
};

struct SubtableSegmentation {
    std::string doc_id;
    std::vector<TableSchema> segments;
};

struct HeaderDetection {
    int header_rows = 1;
    std::vector<HeaderNode> header_tree;
    bool synthesized = false;
};

struct ColumnTyping {
    ColType col_type = ColType::Unstructured;
    double numeric_ratio = 0.0;
    double distinct_ratio = 0.0;
};

enum class CellRole { Header, Content };
enum class IdentifierKind { Table, Column };

// Pluggable stand-in for a learned header/content classifier. The default
// implementation is the deterministic rule set below.
class HeaderClassifier {
public:
    virtual ~HeaderClassifier() = default;
    virtual HeaderDetection detect(const GridDocument& doc, const Rect& region) const = 0;
};

// Splits a grid into subtable segments at fully blank rows/columns, builds a
// schema per segment, and routes long free-text rows into segment notes.
SubtableSegmentation segment_subtables(const GridDocument& doc);

// Header-candidate prefix rule over a rectangular region.
HeaderDetection detect_headers(const GridDocument& doc, const Rect& region);

// numeric_ratio >= 0.8 -> continuous; else distinct_ratio <= 0.8 -> discrete;
// else unstructured. Absent values excluded from both ratios.
ColumnTyping infer_column_type(const std::vector<std::optional<std::string>>& values);

// "t_" prefix, date-like labels normalized to Mon_DD_YYYY, other non-alnum
// runs collapsed to single underscores. Idempotent on already-clean input.
std::string sanitize_identifier(const std::string& label, IdentifierKind kind);

// Collision handling within one naming scope: duplicates get _2, _3, ...
class IdentifierScope {
public:
    std::string claim(const std::string& label, IdentifierKind kind);

private:
    std::vector<std::string> used_;
};

// Positional rule: instances above the first numeric row of the column are
// header, everything at or below is content.
CellRole classify_cell_role(const std::vector<std::optional<std::string>>& column_values,
                            int row_index);

// Classifies the first instance of `label` within the column.
CellRole classify_header_ambiguity(const std::string& label,
                                   const std::vector<std::optional<std::string>>& column_values);

// Note classification shared between segmentation and standardization: a row
// is a note row when cells longer than `long_text_min` bytes carry at least
// `note_mass_fraction` of its non-empty character mass.
bool is_note_row(const GridDocument& doc, const Rect& region, int row);

constexpr size_t kLongTextMinBytes = 120;
constexpr double kNoteMassFraction = 0.60;
constexpr double kHeaderNumericMax = 0.30;
constexpr double kNumericJump = 0.50;

// Schema for one already-segmented region (internal plumbing reused by the
// round-trip tests).
TableSchema build_schema(const GridDocument& doc, const Rect& region,
                         const std::string& table_id);

// JSON rendering with stable field order, used by the `parse` subcommand.
std::string schema_to_json(const TableSchema& schema);
std::string segmentation_to_json(const SubtableSegmentation& seg);

} // namespace tqa
