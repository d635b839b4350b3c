#include "tableqa/grid.hpp"

#include "tableqa/errors.hpp"
#include "tableqa/text.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

using json = nlohmann::json;

namespace tqa {

namespace {

bool whitespace_only(const std::string& s) {
    for (unsigned char c : s)
        if (!std::isspace(c)) return false;
    return true;
}

std::optional<std::string> normalize_value(std::optional<std::string> v) {
    if (!v || whitespace_only(*v)) return std::nullopt;
    return v;
}

void index_merges(GridDocument& doc) {
    for (size_t i = 0; i < doc.merges.size(); ++i) {
        const auto& m = doc.merges[i];
        for (int r = m.top; r <= m.bottom(); ++r) {
            for (int c = m.left; c <= m.right(); ++c) {
                if (r == m.top && c == m.left) continue;
                doc.cells[static_cast<size_t>(r) * doc.n_cols + c].covered_by =
                    static_cast<int>(i);
            }
        }
    }
}

} // namespace

void validate_grid(const GridDocument& doc) {
    if (doc.n_rows < 0 || doc.n_cols < 0)
        throw validation_error("grid dimensions must be non-negative");
    if (doc.cells.size() != static_cast<size_t>(doc.n_rows) * static_cast<size_t>(doc.n_cols))
        throw validation_error("cell count does not match n_rows x n_cols");
    for (size_t i = 0; i < doc.merges.size(); ++i) {
        const auto& m = doc.merges[i];
        if (m.height < 1 || m.width < 1)
            throw validation_error("merge region with non-positive extent");
        if (static_cast<long>(m.height) * m.width < 2)
            throw validation_error("1x1 merge regions are not recorded");
        if (m.top < 0 || m.left < 0 || m.bottom() >= doc.n_rows || m.right() >= doc.n_cols)
            throw validation_error("merge region out of grid bounds at index " +
                                   std::to_string(i));
        for (size_t j = i + 1; j < doc.merges.size(); ++j) {
            if (m.overlaps(doc.merges[j]))
                throw validation_error("overlapping merge regions at indices " +
                                       std::to_string(i) + " and " + std::to_string(j));
        }
    }
    for (size_t i = 0; i < doc.merges.size(); ++i) {
        const auto& m = doc.merges[i];
        for (int r = m.top; r <= m.bottom(); ++r) {
            for (int c = m.left; c <= m.right(); ++c) {
                if (r == m.top && c == m.left) continue;
                const Cell& cell = doc.cell(r, c);
                if (cell.value.has_value())
                    throw validation_error("covered cell (" + std::to_string(r) + "," +
                                           std::to_string(c) +
                                           ") carries an independent value");
            }
        }
    }
}

GridDocument make_grid(std::string doc_id, std::string title,
                       std::vector<std::vector<std::optional<std::string>>> rows,
                       std::vector<MergeRegion> merges,
                       std::map<std::string, std::string> source_meta) {
    GridDocument doc;
    doc.doc_id = std::move(doc_id);
    doc.title = std::move(title);
    doc.n_rows = static_cast<int>(rows.size());
    size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.size());
    doc.n_cols = static_cast<int>(width);
    doc.cells.resize(static_cast<size_t>(doc.n_rows) * doc.n_cols);
    for (int r = 0; r < doc.n_rows; ++r) {
        for (int c = 0; c < doc.n_cols; ++c) {
            std::optional<std::string> v;
            if (static_cast<size_t>(c) < rows[static_cast<size_t>(r)].size())
                v = rows[static_cast<size_t>(r)][static_cast<size_t>(c)];
            doc.cells[static_cast<size_t>(r) * doc.n_cols + c].value =
                normalize_value(std::move(v));
        }
    }
    doc.merges = std::move(merges);
    doc.source_meta = std::move(source_meta);
    index_merges(doc);
    validate_grid(doc);
    return doc;
}

namespace {

GridDocument grid_from_json(const std::string& content) {
    json j;
    try {
        j = json::parse(content);
    } catch (const json::parse_error& e) {
        throw parse_error(std::string("canonical-json grid: ") + e.what());
    }
    if (!j.is_object()) throw parse_error("canonical-json grid: top level must be an object");
    GridDocument doc;
    try {
        doc.doc_id = j.at("doc_id").get<std::string>();
        doc.title = j.value("title", std::string());
        doc.n_rows = j.at("n_rows").get<int>();
        doc.n_cols = j.at("n_cols").get<int>();
        const auto& rows = j.at("rows");
        if (!rows.is_array() || static_cast<int>(rows.size()) != doc.n_rows)
            throw parse_error("canonical-json grid: rows array size mismatch");
        doc.cells.resize(static_cast<size_t>(doc.n_rows) * doc.n_cols);
        for (int r = 0; r < doc.n_rows; ++r) {
            const auto& row = rows[static_cast<size_t>(r)];
            if (!row.is_array() || static_cast<int>(row.size()) != doc.n_cols)
                throw parse_error("canonical-json grid: row " + std::to_string(r) +
                                  " has wrong width");
            for (int c = 0; c < doc.n_cols; ++c) {
                const auto& v = row[static_cast<size_t>(c)];
                auto& cell = doc.cells[static_cast<size_t>(r) * doc.n_cols + c];
                if (v.is_null()) {
                    cell.value = std::nullopt;
                } else if (v.is_string()) {
                    cell.value = normalize_value(v.get<std::string>());
                } else {
                    throw parse_error("canonical-json grid: cell (" + std::to_string(r) +
                                      "," + std::to_string(c) + ") must be string or null");
                }
            }
        }
        if (j.contains("merges")) {
            for (const auto& m : j.at("merges")) {
                MergeRegion region;
                region.top = m.at("top").get<int>();
                region.left = m.at("left").get<int>();
                region.height = m.at("height").get<int>();
                region.width = m.at("width").get<int>();
                doc.merges.push_back(region);
            }
        }
        if (j.contains("source_meta")) {
            for (auto it = j.at("source_meta").begin(); it != j.at("source_meta").end(); ++it)
                doc.source_meta[it.key()] = it.value().get<std::string>();
        }
    } catch (const json::exception& e) {
        throw parse_error(std::string("canonical-json grid: ") + e.what());
    }
    index_merges(doc);
    validate_grid(doc);
    return doc;
}

// RFC-4180: quoted fields may contain commas, newlines and doubled quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    size_t line = 1, col = 1;
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(row);
        row.clear();
    };
    for (size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                    col += 2;
                } else {
                    in_quotes = false;
                    ++col;
                }
            } else {
                field.push_back(c);
                if (c == '\n') {
                    ++line;
                    col = 1;
                } else {
                    ++col;
                }
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started && !field.empty())
                throw parse_error("csv: stray quote at line " + std::to_string(line) +
                                  ", column " + std::to_string(col));
            in_quotes = true;
            field_started = true;
            ++col;
            break;
        case ',':
            end_field();
            ++col;
            break;
        case '\r':
            ++col;
            break;
        case '\n':
            end_row();
            ++line;
            col = 1;
            break;
        default:
            field.push_back(c);
            field_started = true;
            ++col;
            break;
        }
    }
    if (in_quotes)
        throw parse_error("csv: unterminated quoted field at line " + std::to_string(line));
    if (!field.empty() || field_started || !row.empty()) end_row();
    return rows;
}

GridDocument grid_from_csv(const std::string& content, const std::string& doc_id) {
    auto raw = parse_csv(content);
    std::vector<std::vector<std::optional<std::string>>> rows;
    rows.reserve(raw.size());
    for (auto& r : raw) {
        std::vector<std::optional<std::string>> row;
        row.reserve(r.size());
        for (auto& f : r) row.emplace_back(std::move(f));
        rows.push_back(std::move(row));
    }
    return make_grid(doc_id, "", std::move(rows));
}

} // namespace

GridDocument load_grid_from_string(const std::string& content, GridFormat format) {
    switch (format) {
    case GridFormat::CanonicalJson: return grid_from_json(content);
    case GridFormat::Csv: return grid_from_csv(content, "csv");
    }
    throw internal_error("unknown grid format");
}

GridDocument load_grid(const std::string& path, GridFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw not_found_error("cannot open grid file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    GridDocument doc = load_grid_from_string(buf.str(), format);
    if (format == GridFormat::Csv && doc.doc_id == "csv") {
        // derive the id from the filename stem
        std::string stem = path;
        if (auto pos = stem.find_last_of("/\\"); pos != std::string::npos)
            stem = stem.substr(pos + 1);
        if (auto pos = stem.find_last_of('.'); pos != std::string::npos)
            stem = stem.substr(0, pos);
        doc.doc_id = stem.empty() ? "csv" : stem;
    }
    return doc;
}

std::string save_grid_to_string(const GridDocument& doc) {
    json j = json::object();
    j["doc_id"] = doc.doc_id;
    j["title"] = doc.title;
    j["n_rows"] = doc.n_rows;
    j["n_cols"] = doc.n_cols;
    json rows = json::array();
    for (int r = 0; r < doc.n_rows; ++r) {
        json row = json::array();
        for (int c = 0; c < doc.n_cols; ++c) {
            const auto& v = doc.cell(r, c).value;
            if (v)
                row.push_back(*v);
            else
                row.push_back(nullptr);
        }
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    json merges = json::array();
    for (const auto& m : doc.merges) {
        json mj = json::object();
        mj["top"] = m.top;
        mj["left"] = m.left;
        mj["height"] = m.height;
        mj["width"] = m.width;
        merges.push_back(std::move(mj));
    }
    j["merges"] = std::move(merges);
    json meta = json::object();
    for (const auto& [k, v] : doc.source_meta) meta[k] = v;
    j["source_meta"] = std::move(meta);
    return j.dump();
}

void save_grid(const GridDocument& doc, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write grid file: " + path);
    out << save_grid_to_string(doc);
    if (!out) throw io_error("failed writing grid file: " + path);
}

std::optional<std::string> cell_at(const GridDocument& doc, int r, int c) {
    if (r < 0 || r >= doc.n_rows || c < 0 || c >= doc.n_cols)
        throw Error(ErrorKind::Validation,
                    "cell index (" + std::to_string(r) + "," + std::to_string(c) +
                        ") out of bounds for " + std::to_string(doc.n_rows) + "x" +
                        std::to_string(doc.n_cols) + " grid");
    const Cell& cell = doc.cell(r, c);
    if (cell.covered_by >= 0) {
        const auto& m = doc.merges[static_cast<size_t>(cell.covered_by)];
        return doc.cell(m.top, m.left).value;
    }
    return cell.value;
}

} // namespace tqa
