#include "tableqa/parser.hpp"

#include "tableqa/errors.hpp"
#include "tableqa/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

using json = nlohmann::json;

namespace tqa {

std::string to_string(ColType t) {
    switch (t) {
    case ColType::Discrete: return "discrete";
    case ColType::Continuous: return "continuous";
    case ColType::Unstructured: return "unstructured";
    }
    return "unstructured";
}

namespace {

bool has_value_at(const GridDocument& doc, int r, int c) {
    return cell_at(doc, r, c).has_value();
}

// numeric fraction of the non-empty cells of one region row
double numeric_fraction(const GridDocument& doc, const Rect& region, int row) {
    int non_empty = 0, numeric = 0;
    for (int c = region.left; c <= region.right(); ++c) {
        auto v = cell_at(doc, row, c);
        if (!v) continue;
        ++non_empty;
        if (text::is_numeric(*v)) ++numeric;
    }
    if (non_empty == 0) return 0.0;
    return static_cast<double>(numeric) / non_empty;
}

int non_empty_count(const GridDocument& doc, const Rect& region, int row) {
    int n = 0;
    for (int c = region.left; c <= region.right(); ++c)
        if (has_value_at(doc, row, c)) ++n;
    return n;
}

bool row_has_wide_merge(const GridDocument& doc, const Rect& region, int row) {
    for (const auto& m : doc.merges) {
        if (m.width < 2) continue;
        if (row < m.top || row > m.bottom()) continue;
        if (m.left <= region.right() && m.right() >= region.left) return true;
    }
    return false;
}

// Identity of the header source for one (row, column) position: merge index,
// the owning raw cell, or a fill from the nearest non-empty cell to the left.
struct HeaderSource {
    enum class Kind { Merge, Cell, Empty } kind = Kind::Empty;
    int merge_index = -1;
    int cell_row = -1;
    int cell_col = -1;
    std::string label;

    bool operator==(const HeaderSource&) const = default;
};

std::vector<HeaderSource> header_sources(const GridDocument& doc, const Rect& region,
                                         int row) {
    std::vector<HeaderSource> out(static_cast<size_t>(region.width));
    for (int c = region.left; c <= region.right(); ++c) {
        auto& src = out[static_cast<size_t>(c - region.left)];
        const Cell& cell = doc.cell(row, c);
        int merge_index = cell.covered_by;
        if (merge_index < 0) {
            for (size_t i = 0; i < doc.merges.size(); ++i) {
                if (doc.merges[i].top == row && doc.merges[i].left == c)
                    merge_index = static_cast<int>(i);
            }
        }
        if (merge_index >= 0) {
            const auto& m = doc.merges[static_cast<size_t>(merge_index)];
            src.kind = HeaderSource::Kind::Merge;
            src.merge_index = merge_index;
            auto v = doc.cell(m.top, m.left).value;
            src.label = v ? text::trim(*v) : std::string();
            continue;
        }
        if (cell.value) {
            src.kind = HeaderSource::Kind::Cell;
            src.cell_row = row;
            src.cell_col = c;
            src.label = text::trim(*cell.value);
            continue;
        }
        // forward-fill from a plain cell to the left; merges define their own span
        if (c > region.left) {
            const auto& prev = out[static_cast<size_t>(c - region.left - 1)];
            if (prev.kind == HeaderSource::Kind::Cell) {
                src = prev;
                continue;
            }
        }
        src.kind = HeaderSource::Kind::Empty;
        src.cell_row = row;
        src.cell_col = c;
    }
    return out;
}

std::vector<HeaderNode> build_level(const GridDocument& doc, const Rect& region,
                                    int header_top, int level, int header_rows,
                                    int col_begin, int col_end) {
    std::vector<HeaderNode> nodes;
    auto sources = header_sources(doc, region, header_top + level);
    int c = col_begin;
    while (c < col_end) {
        const auto& src = sources[static_cast<size_t>(c - region.left)];
        int run_end = c + 1;
        while (run_end < col_end) {
            const auto& next = sources[static_cast<size_t>(run_end - region.left)];
            bool same_run = false;
            if (src.kind == HeaderSource::Kind::Merge &&
                next.kind == HeaderSource::Kind::Merge)
                same_run = src.merge_index == next.merge_index;
            else if (src.kind == HeaderSource::Kind::Cell &&
                     next.kind == HeaderSource::Kind::Cell)
                same_run = src.cell_row == next.cell_row && src.cell_col == next.cell_col;
            if (!same_run) break;
            ++run_end;
        }
        HeaderNode node;
        node.label = src.label;
        node.col_begin = c;
        node.col_end = run_end;
        if (level + 1 < header_rows)
            node.children =
                build_level(doc, region, header_top, level + 1, header_rows, c, run_end);
        nodes.push_back(std::move(node));
        c = run_end;
    }
    return nodes;
}

std::vector<HeaderNode> synthesized_tree(const Rect& region) {
    std::vector<HeaderNode> tree;
    for (int c = region.left; c <= region.right(); ++c) {
        HeaderNode n;
        n.label = "col_" + std::to_string(c - region.left + 1);
        n.col_begin = c;
        n.col_end = c + 1;
        tree.push_back(std::move(n));
    }
    return tree;
}

void collect_leaves(const std::vector<HeaderNode>& nodes, std::vector<std::string> path,
                    std::vector<std::pair<const HeaderNode*, std::vector<std::string>>>& out) {
    for (const auto& n : nodes) {
        auto p = path;
        if (!n.label.empty() && (p.empty() || p.back() != n.label)) p.push_back(n.label);
        if (n.children.empty())
            out.emplace_back(&n, p);
        else
            collect_leaves(n.children, p, out);
    }
}

} // namespace

bool is_note_row(const GridDocument& doc, const Rect& region, int row) {
    size_t total = 0, long_mass = 0;
    bool any_long = false;
    for (int c = region.left; c <= region.right(); ++c) {
        const Cell& cell = doc.cell(row, c);
        if (cell.covered_by >= 0) continue; // anchors only, avoid double counting
        if (!cell.value) continue;
        size_t len = cell.value->size();
        total += len;
        if (len > kLongTextMinBytes) {
            long_mass += len;
            any_long = true;
        }
    }
    if (!any_long || total == 0) return false;
    return static_cast<double>(long_mass) >= kNoteMassFraction * static_cast<double>(total);
}

HeaderDetection detect_headers(const GridDocument& doc, const Rect& region) {
    if (region.height <= 0 || region.width <= 0)
        throw validation_error("detect_headers: empty region");
    int n = region.height;
    std::vector<double> nf(static_cast<size_t>(n));
    std::vector<int> filled(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        nf[static_cast<size_t>(i)] = numeric_fraction(doc, region, region.top + i);
        filled[static_cast<size_t>(i)] = non_empty_count(doc, region, region.top + i);
    }
    if (std::all_of(filled.begin(), filled.end(), [](int f) { return f == 0; }))
        throw validation_error("detect_headers: region has no content");

    // A header-candidate row is mostly non-numeric and is tied to the content
    // zone by a wide merge, a numeric-dominance jump, or a candidate below it.
    std::vector<bool> cand(static_cast<size_t>(n), false);
    for (int i = n - 1; i >= 0; --i) {
        size_t ix = static_cast<size_t>(i);
        if (filled[ix] == 0 || nf[ix] >= kHeaderNumericMax) continue;
        bool anchored = row_has_wide_merge(doc, region, region.top + i);
        if (!anchored && i + 1 < n && filled[static_cast<size_t>(i + 1)] > 0 &&
            std::abs(nf[ix] - nf[static_cast<size_t>(i + 1)]) >= kNumericJump)
            anchored = true;
        if (!anchored && i + 1 < n && cand[static_cast<size_t>(i + 1)]) anchored = true;
        cand[ix] = anchored;
    }
    int prefix = 0;
    while (prefix < n && cand[static_cast<size_t>(prefix)]) ++prefix;

    HeaderDetection result;
    if (prefix == 0) {
        result.header_rows = 1;
        bool first_row_usable = filled[0] > 0 && nf[0] < kHeaderNumericMax;
        if (first_row_usable) {
            result.header_tree = build_level(doc, region, region.top, 0, 1, region.left,
                                             region.left + region.width);
        } else {
            result.synthesized = true;
            result.header_tree = synthesized_tree(region);
        }
        return result;
    }
    result.header_rows = prefix;
    result.header_tree = build_level(doc, region, region.top, 0, prefix, region.left,
                                     region.left + region.width);
    return result;
}

ColumnTyping infer_column_type(const std::vector<std::optional<std::string>>& values) {
    ColumnTyping t;
    std::set<std::string> distinct;
    int n = 0, numeric = 0;
    for (const auto& v : values) {
        if (!v) continue;
        ++n;
        distinct.insert(*v);
        if (text::is_numeric(*v)) ++numeric;
    }
    if (n == 0) {
        t.col_type = ColType::Unstructured;
        return t;
    }
    t.numeric_ratio = static_cast<double>(numeric) / n;
    t.distinct_ratio = static_cast<double>(distinct.size()) / n;
    if (t.numeric_ratio >= 0.8)
        t.col_type = ColType::Continuous;
    else if (t.distinct_ratio <= 0.8)
        t.col_type = ColType::Discrete;
    else
        t.col_type = ColType::Unstructured;
    return t;
}

namespace {

bool is_clean_identifier(const std::string& s) {
    if (s.size() < 2 || s[0] != 't' || s[1] != '_') return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

} // namespace

std::string sanitize_identifier(const std::string& label, IdentifierKind) {
    if (is_clean_identifier(label)) return label;
    std::string s = text::trim(label);
    if (auto d = text::parse_date(s)) s = text::format_date_label(*d);
    std::string out = "t_";
    bool started = false, pending = false;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            if (pending && started) out.push_back('_');
            out.push_back(static_cast<char>(c));
            started = true;
            pending = false;
        } else {
            pending = true;
        }
    }
    return out;
}

std::string IdentifierScope::claim(const std::string& label, IdentifierKind kind) {
    std::string base = sanitize_identifier(label, kind);
    std::string candidate = base;
    int suffix = 2;
    while (std::find(used_.begin(), used_.end(), candidate) != used_.end()) {
        candidate = base + "_" + std::to_string(suffix);
        ++suffix;
    }
    used_.push_back(candidate);
    return candidate;
}

CellRole classify_cell_role(const std::vector<std::optional<std::string>>& column_values,
                            int row_index) {
    int boundary = -1;
    for (size_t i = 0; i < column_values.size(); ++i) {
        if (column_values[i] && text::is_numeric(*column_values[i])) {
            boundary = static_cast<int>(i);
            break;
        }
    }
    if (boundary < 0) boundary = 1; // no numeric zone: only row 0 can be header
    return row_index < boundary ? CellRole::Header : CellRole::Content;
}

CellRole classify_header_ambiguity(const std::string& label,
                                   const std::vector<std::optional<std::string>>& column_values) {
    for (size_t i = 0; i < column_values.size(); ++i) {
        if (column_values[i] && *column_values[i] == label)
            return classify_cell_role(column_values, static_cast<int>(i));
    }
    return CellRole::Content;
}

TableSchema build_schema(const GridDocument& doc, const Rect& region,
                         const std::string& table_id) {
    TableSchema schema;
    schema.table_id = table_id;
    schema.region = region;
    HeaderDetection det = detect_headers(doc, region);
    schema.header_rows = det.header_rows;
    schema.synthesized_header = det.synthesized;
    schema.header_tree = det.header_tree;

    std::vector<std::pair<const HeaderNode*, std::vector<std::string>>> leaves;
    collect_leaves(schema.header_tree, {}, leaves);

    int body_top = det.synthesized ? region.top : region.top + det.header_rows;
    std::vector<int> body_rows;
    for (int r = body_top; r <= region.bottom(); ++r) {
        if (non_empty_count(doc, region, r) == 0) continue;
        if (is_note_row(doc, region, r)) continue;
        body_rows.push_back(r);
    }

    IdentifierScope scope;
    for (size_t i = 0; i < leaves.size(); ++i) {
        const auto& [node, path] = leaves[i];
        ColumnDescriptor col;
        col.header_path = path;
        col.source_col = node->col_begin;
        if (path.empty()) {
            col.display_label = "col_" + std::to_string(i + 1);
        } else {
            for (size_t p = 0; p < path.size(); ++p) {
                if (p) col.display_label += "·";
                col.display_label += path[p];
            }
        }
        col.name = scope.claim(col.display_label, IdentifierKind::Column);
        std::vector<std::optional<std::string>> values;
        values.reserve(body_rows.size());
        for (int r : body_rows) values.push_back(cell_at(doc, r, node->col_begin));
        ColumnTyping typing = infer_column_type(values);
        col.col_type = typing.col_type;
        col.numeric_ratio = typing.numeric_ratio;
        col.distinct_ratio = typing.distinct_ratio;
        schema.columns.push_back(std::move(col));
    }
    return schema;
}

namespace {

struct Mask {
    int rows = 0, cols = 0;
    std::vector<char> filled;
    bool at(int r, int c) const { return filled[static_cast<size_t>(r) * cols + c] != 0; }
};

Mask build_mask(const GridDocument& doc) {
    Mask m;
    m.rows = doc.n_rows;
    m.cols = doc.n_cols;
    m.filled.assign(static_cast<size_t>(doc.n_rows) * doc.n_cols, 0);
    for (int r = 0; r < doc.n_rows; ++r)
        for (int c = 0; c < doc.n_cols; ++c)
            if (cell_at(doc, r, c))
                m.filled[static_cast<size_t>(r) * m.cols + c] = 1;
    return m;
}

bool row_blank(const Mask& m, const Rect& rect, int r) {
    for (int c = rect.left; c <= rect.right(); ++c)
        if (m.at(r, c)) return false;
    return true;
}

bool col_blank(const Mask& m, const Rect& rect, int c) {
    for (int r = rect.top; r <= rect.bottom(); ++r)
        if (m.at(r, c)) return false;
    return true;
}

// Bounding box of content inside rect; empty Rect when there is none.
Rect trim_rect(const Mask& m, Rect rect) {
    while (rect.height > 0 && row_blank(m, rect, rect.top)) {
        ++rect.top;
        --rect.height;
    }
    while (rect.height > 0 && row_blank(m, rect, rect.bottom())) --rect.height;
    while (rect.width > 0 && col_blank(m, rect, rect.left)) {
        ++rect.left;
        --rect.width;
    }
    while (rect.width > 0 && col_blank(m, rect, rect.right())) --rect.width;
    return rect;
}

void split_blocks(const Mask& m, Rect rect, std::vector<Rect>& out) {
    rect = trim_rect(m, rect);
    if (rect.height <= 0 || rect.width <= 0) return;
    // blank rows first, then blank columns, recursing until stable
    for (int r = rect.top + 1; r <= rect.bottom() - 1; ++r) {
        if (row_blank(m, rect, r)) {
            Rect upper{rect.top, rect.left, r - rect.top, rect.width};
            Rect lower{r + 1, rect.left, rect.bottom() - r, rect.width};
            split_blocks(m, upper, out);
            split_blocks(m, lower, out);
            return;
        }
    }
    for (int c = rect.left + 1; c <= rect.right() - 1; ++c) {
        if (col_blank(m, rect, c)) {
            Rect left{rect.top, rect.left, rect.height, c - rect.left};
            Rect right{rect.top, c + 1, rect.height, rect.right() - c};
            split_blocks(m, left, out);
            split_blocks(m, right, out);
            return;
        }
    }
    out.push_back(rect);
}

TableSchema notes_only_schema(const Rect& region, const std::string& table_id,
                              std::vector<std::string> notes) {
    TableSchema schema;
    schema.table_id = table_id;
    schema.region = region;
    schema.header_rows = 1;
    schema.synthesized_header = true;
    HeaderNode n;
    n.label = "col_1";
    n.col_begin = region.left;
    n.col_end = region.left + region.width;
    schema.header_tree.push_back(n);
    ColumnDescriptor col;
    col.display_label = "col_1";
    col.name = "t_col_1";
    col.source_col = region.left;
    col.header_path = {"col_1"};
    schema.columns.push_back(col);
    schema.notes = std::move(notes);
    return schema;
}

std::vector<std::string> note_texts(const GridDocument& doc, const Rect& block,
                                    const std::vector<int>& rows) {
    std::vector<std::string> out;
    for (int r : rows) {
        for (int c = block.left; c <= block.right(); ++c) {
            const Cell& cell = doc.cell(r, c);
            if (cell.covered_by >= 0) continue;
            if (cell.value) out.push_back(text::trim(*cell.value));
        }
    }
    return out;
}

} // namespace

SubtableSegmentation segment_subtables(const GridDocument& doc) {
    Mask mask = build_mask(doc);
    std::vector<Rect> blocks;
    if (doc.n_rows > 0 && doc.n_cols > 0)
        split_blocks(mask, Rect{0, 0, doc.n_rows, doc.n_cols}, blocks);
    if (blocks.empty()) throw empty_input_error("segment_subtables: document is empty");
    std::sort(blocks.begin(), blocks.end(), [](const Rect& a, const Rect& b) {
        if (a.top != b.top) return a.top < b.top;
        return a.left < b.left;
    });

    SubtableSegmentation seg;
    seg.doc_id = doc.doc_id;
    IdentifierScope table_scope;
    std::string base = doc.title.empty() ? doc.doc_id : doc.title;

    for (const auto& block : blocks) {
        std::vector<int> note_rows, table_rows;
        for (int r = block.top; r <= block.bottom(); ++r) {
            if (row_blank(mask, block, r)) continue;
            (is_note_row(doc, block, r) ? note_rows : table_rows).push_back(r);
        }
        if (table_rows.empty()) {
            auto notes = note_texts(doc, block, note_rows);
            if (!seg.segments.empty()) {
                auto& prev = seg.segments.back().notes;
                prev.insert(prev.end(), notes.begin(), notes.end());
            } else {
                std::string id = table_scope.claim(base, IdentifierKind::Table);
                seg.segments.push_back(notes_only_schema(block, id, std::move(notes)));
            }
            continue;
        }
        Rect table_rect{table_rows.front(), block.left,
                        table_rows.back() - table_rows.front() + 1, block.width};
        table_rect = trim_rect(mask, table_rect);
        std::string id = table_scope.claim(base, IdentifierKind::Table);
        TableSchema schema = build_schema(doc, table_rect, id);
        schema.notes = note_texts(doc, block, note_rows);
        seg.segments.push_back(std::move(schema));
    }
    return seg;
}

namespace {

json header_node_json(const HeaderNode& n) {
    json j = json::object();
    j["label"] = n.label;
    j["col_span"] = json::array({n.col_begin, n.col_end});
    json children = json::array();
    for (const auto& c : n.children) children.push_back(header_node_json(c));
    j["children"] = std::move(children);
    return j;
}

json rect_json(const Rect& r) {
    json j = json::object();
    j["top"] = r.top;
    j["left"] = r.left;
    j["height"] = r.height;
    j["width"] = r.width;
    return j;
}

json schema_json(const TableSchema& s) {
    json j = json::object();
    j["table_id"] = s.table_id;
    j["region"] = rect_json(s.region);
    j["header_rows"] = s.header_rows;
    j["synthesized_header"] = s.synthesized_header;
    json tree = json::array();
    for (const auto& n : s.header_tree) tree.push_back(header_node_json(n));
    j["header_tree"] = std::move(tree);
    json cols = json::array();
    for (const auto& c : s.columns) {
        json cj = json::object();
        cj["name"] = c.name;
        cj["display_label"] = c.display_label;
        cj["col_type"] = to_string(c.col_type);
        cj["distinct_ratio"] = c.distinct_ratio;
        cj["numeric_ratio"] = c.numeric_ratio;
        cj["source_col"] = c.source_col;
        cols.push_back(std::move(cj));
    }
    j["columns"] = std::move(cols);
    j["notes"] = s.notes;
    return j;
}

} // namespace

std::string schema_to_json(const TableSchema& schema) { return schema_json(schema).dump(); }

std::string segmentation_to_json(const SubtableSegmentation& seg) {
    json j = json::object();
    j["doc_id"] = seg.doc_id;
    json segs = json::array();
    for (const auto& s : seg.segments) segs.push_back(schema_json(s));
    j["segments"] = std::move(segs);
    return j.dump();
}

} // namespace tqa
