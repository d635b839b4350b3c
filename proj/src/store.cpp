#include "tableqa/store.hpp"

#include "tableqa/errors.hpp"

#include <nlohmann/json.hpp>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace tqa {

std::string to_string(ChunkOrigin o) {
    switch (o) {
    case ChunkOrigin::TableRender: return "table-render";
    case ChunkOrigin::NoteText: return "note-text";
    case ChunkOrigin::FreeText: return "free-text";
    }
    return "free-text";
}

ChunkOrigin chunk_origin_from_string(const std::string& s) {
    if (s == "table-render") return ChunkOrigin::TableRender;
    if (s == "note-text") return ChunkOrigin::NoteText;
    if (s == "free-text") return ChunkOrigin::FreeText;
    throw parse_error("unknown chunk origin: " + s);
}

RelationalTable standardize(const TableSchema& schema, const GridDocument& doc,
                            std::vector<std::string>* warnings) {
    RelationalTable table;
    table.table_id = schema.table_id;
    table.name = schema.table_id;
    for (const auto& col : schema.columns) {
        table.columns.push_back({col.name, col.col_type});
        table.display_labels.push_back(col.display_label);
        table.header_paths.push_back(col.header_path);
    }
    int body_top = schema.synthesized_header ? schema.region.top
                                             : schema.region.top + schema.header_rows;
    for (int r = body_top; r <= schema.region.bottom(); ++r) {
        bool any = false;
        for (int c = schema.region.left; c <= schema.region.right(); ++c)
            if (cell_at(doc, r, c)) any = true;
        if (!any) continue;
        if (is_note_row(doc, schema.region, r)) continue;
        std::vector<Value> row;
        row.reserve(schema.columns.size());
        for (const auto& col : schema.columns) {
            auto raw = cell_at(doc, r, col.source_col);
            if (!raw) {
                row.emplace_back(std::monostate{});
                continue;
            }
            if (col.col_type == ColType::Continuous) {
                if (auto num = text::parse_number(*raw)) {
                    row.emplace_back(*num);
                } else {
                    row.emplace_back(std::monostate{});
                    if (warnings)
                        warnings->push_back("table " + table.name + " column " + col.name +
                                            " row " + std::to_string(r) +
                                            ": unparseable number \"" + *raw + "\"");
                }
            } else {
                row.emplace_back(*raw);
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (table.rows.empty())
        throw empty_input_error("standardize: table " + table.name + " has zero body rows");
    return table;
}

namespace {

std::string escape_md_cell(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '|')
            out += "\\|";
        else if (c == '\n' || c == '\r')
            out += ' ';
        else
            out += c;
    }
    return out;
}

std::string render_row(const std::vector<std::string>& cells) {
    std::string line = "|";
    for (const auto& c : cells) {
        line += ' ';
        line += c;
        line += " |";
    }
    line += '\n';
    return line;
}

} // namespace

std::vector<Chunk> render_markdown(const RelationalTable& table, int window) {
    if (table.rows.empty() || table.columns.empty())
        throw empty_input_error("render_markdown: empty table " + table.name);
    if (window < 1) throw validation_error("render_markdown: window must be >= 1");

    std::vector<std::string> header_cells, rule_cells;
    for (const auto& label : table.display_labels) {
        header_cells.push_back(escape_md_cell(label));
        rule_cells.push_back("---");
    }
    std::string header_block = render_row(header_cells) + render_row(rule_cells);

    std::vector<Chunk> out;
    size_t offset = 0;
    size_t n = table.rows.size();
    for (size_t start = 0, index = 0; start < n; start += static_cast<size_t>(window), ++index) {
        size_t end = std::min(n, start + static_cast<size_t>(window));
        std::string body;
        for (size_t r = start; r < end; ++r) {
            std::vector<std::string> cells;
            cells.reserve(table.columns.size());
            for (const auto& v : table.rows[r]) cells.push_back(escape_md_cell(value_to_display(v)));
            body += render_row(cells);
        }
        Chunk chunk;
        chunk.chunk_id = table.name + ":" + std::to_string(index);
        chunk.text = header_block + body;
        chunk.origin = ChunkOrigin::TableRender;
        chunk.table_id = table.table_id;
        chunk.char_span = {offset, offset + chunk.text.size()};
        offset += chunk.text.size();
        out.push_back(std::move(chunk));
    }
    return out;
}

std::string markdown_table_to_csv(const std::string& chunk_text) {
    std::istringstream in(chunk_text);
    std::string line;
    std::string csv;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = text::trim(line);
        if (t.empty()) continue;
        if (t.front() != '|') throw parse_error("markdown table: line " +
                                                std::to_string(line_no) + " lacks pipes");
        // split on unescaped pipes
        std::vector<std::string> cells;
        std::string cur;
        for (size_t i = 1; i < t.size(); ++i) {
            char c = t[i];
            if (c == '\\' && i + 1 < t.size() && t[i + 1] == '|') {
                cur += '|';
                ++i;
            } else if (c == '|') {
                cells.push_back(text::trim(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        bool is_rule = !cells.empty() && std::all_of(cells.begin(), cells.end(), [](const std::string& s) {
            return !s.empty() && s.find_first_not_of("-: ") == std::string::npos;
        });
        if (is_rule) continue;
        std::string row;
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) row += ',';
            bool needs_quote = cells[i].find_first_of(",\"\n") != std::string::npos;
            if (needs_quote) {
                row += '"';
                for (char c : cells[i]) {
                    if (c == '"') row += '"';
                    row += c;
                }
                row += '"';
            } else {
                row += cells[i];
            }
        }
        csv += row;
        csv += '\n';
    }
    if (csv.empty()) throw parse_error("markdown table: no rows found");
    return csv;
}

namespace {

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw io_error("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw io_error("rename failed for " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json value_to_json(const Value& v) {
    if (is_null(v)) return nullptr;
    if (is_number(v)) return as_number(v);
    return as_string(v);
}

Value value_from_json(const json& j) {
    if (j.is_null()) return std::monostate{};
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw parse_error("store: unsupported value type in table file");
}

ColType col_type_from_string(const std::string& s) {
    if (s == "discrete") return ColType::Discrete;
    if (s == "continuous") return ColType::Continuous;
    if (s == "unstructured") return ColType::Unstructured;
    throw parse_error("store: unknown column type " + s);
}

std::string table_to_json(const RelationalTable& t) {
    json j = json::object();
    j["name"] = t.name;
    json cols = json::array();
    for (const auto& c : t.columns) {
        json cj = json::object();
        cj["name"] = c.name;
        cj["type"] = to_string(c.type);
        cols.push_back(std::move(cj));
    }
    j["columns"] = std::move(cols);
    j["display_labels"] = t.display_labels;
    j["header_paths"] = t.header_paths;
    // columnar layout: one array per column
    json data = json::array();
    for (size_t c = 0; c < t.columns.size(); ++c) {
        json col = json::array();
        for (const auto& row : t.rows) col.push_back(value_to_json(row[c]));
        data.push_back(std::move(col));
    }
    j["data"] = std::move(data);
    return j.dump();
}

RelationalTable table_from_json(const std::string& content) {
    json j = json::parse(content);
    RelationalTable t;
    t.name = j.at("name").get<std::string>();
    t.table_id = t.name;
    for (const auto& cj : j.at("columns"))
        t.columns.push_back({cj.at("name").get<std::string>(),
                             col_type_from_string(cj.at("type").get<std::string>())});
    t.display_labels = j.at("display_labels").get<std::vector<std::string>>();
    t.header_paths = j.at("header_paths").get<std::vector<std::vector<std::string>>>();
    const auto& data = j.at("data");
    if (data.size() != t.columns.size())
        throw parse_error("store: column count mismatch in table " + t.name);
    size_t n_rows = data.empty() ? 0 : data[0].size();
    t.rows.assign(n_rows, std::vector<Value>(t.columns.size(), std::monostate{}));
    for (size_t c = 0; c < data.size(); ++c) {
        if (data[c].size() != n_rows)
            throw parse_error("store: ragged column data in table " + t.name);
        for (size_t r = 0; r < n_rows; ++r) t.rows[r][c] = value_from_json(data[c][r]);
    }
    return t;
}

std::string chunk_to_json_line(const Chunk& c) {
    json j = json::object();
    j["chunk_id"] = c.chunk_id;
    j["text"] = c.text;
    j["origin"] = to_string(c.origin);
    if (c.table_id)
        j["table_id"] = *c.table_id;
    else
        j["table_id"] = nullptr;
    if (c.char_span)
        j["char_span"] = json::array({c.char_span->first, c.char_span->second});
    else
        j["char_span"] = nullptr;
    return j.dump();
}

Chunk chunk_from_json_line(const std::string& line) {
    json j = json::parse(line);
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.origin = chunk_origin_from_string(j.at("origin").get<std::string>());
    if (!j.at("table_id").is_null()) c.table_id = j.at("table_id").get<std::string>();
    if (!j.at("char_span").is_null())
        c.char_span = {j.at("char_span")[0].get<size_t>(), j.at("char_span")[1].get<size_t>()};
    return c;
}

std::string map_to_json(const std::vector<SchemaChunkEntry>& entries) {
    json arr = json::array();
    for (const auto& e : entries) {
        json j = json::object();
        j["chunk_id"] = e.chunk_id;
        j["table_id"] = e.table_id;
        j["header_path"] = e.header_path;
        arr.push_back(std::move(j));
    }
    json top = json::object();
    top["entries"] = std::move(arr);
    return top.dump();
}

std::vector<SchemaChunkEntry> map_from_json(const std::string& content) {
    json j = json::parse(content);
    std::vector<SchemaChunkEntry> out;
    for (const auto& e : j.at("entries")) {
        SchemaChunkEntry entry;
        entry.chunk_id = e.at("chunk_id").get<std::string>();
        entry.table_id = e.at("table_id").get<std::string>();
        entry.header_path = e.at("header_path").get<std::vector<std::string>>();
        out.push_back(std::move(entry));
    }
    return out;
}

} // namespace

Store Store::create(const std::string& dir) {
    fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw io_error("cannot create store directory " + dir + ": " + ec.message());
    fs::create_directories(root / "tables");
    fs::create_directories(root / "chunks");
    fs::create_directories(root / "maps");
    if (fs::exists(root / "manifest.json"))
        throw validation_error("store already exists at " + dir);
    Store s;
    s.dir_ = dir;
    s.mode_ = Mode::ReadWrite;
    s.acquire_lock();
    s.commit_manifest();
    return s;
}

Store Store::open(const std::string& dir, Mode mode) {
    if (!fs::exists(fs::path(dir) / "manifest.json"))
        throw not_found_error("no store manifest at " + dir);
    Store s;
    s.dir_ = dir;
    s.mode_ = mode;
    if (mode == Mode::ReadWrite) s.acquire_lock();
    s.load();
    return s;
}

Store Store::ephemeral(std::vector<RelationalTable> tables, std::vector<Chunk> chunks,
                       SchemaChunkMap map) {
    Store s;
    s.mode_ = Mode::ReadOnly;
    for (auto& t : tables) {
        if (s.find_table(t.name))
            throw name_collision_error("duplicate table name: " + t.name);
        s.tables_.push_back(std::move(t));
    }
    s.chunks_ = std::move(chunks);
    s.map_ = std::move(map);
    return s;
}

Store::Store(Store&& o) noexcept { *this = std::move(o); }

Store& Store::operator=(Store&& o) noexcept {
    if (this != &o) {
        release_lock();
        dir_ = std::move(o.dir_);
        mode_ = o.mode_;
        lock_fd_ = o.lock_fd_;
        o.lock_fd_ = -1;
        tables_ = std::move(o.tables_);
        chunks_ = std::move(o.chunks_);
        map_ = std::move(o.map_);
        meta_ = std::move(o.meta_);
        manifest_ = std::move(o.manifest_);
    }
    return *this;
}

Store::~Store() { release_lock(); }

void Store::acquire_lock() {
    fs::path lock = fs::path(dir_) / ".lock";
    int fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw validation_error("store " + dir_ +
                                   " is locked by another writer (stale? remove .lock)");
        throw io_error("cannot create lock file in " + dir_);
    }
    std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] ssize_t n = ::write(fd, pid.data(), pid.size());
    lock_fd_ = fd;
}

void Store::release_lock() {
    if (lock_fd_ >= 0) {
        ::close(lock_fd_);
        std::error_code ec;
        fs::remove(fs::path(dir_) / ".lock", ec);
        lock_fd_ = -1;
    }
}

void Store::load() {
    json manifest = json::parse(read_file(fs::path(dir_) / "manifest.json"));
    tables_.clear();
    chunks_.clear();
    map_.entries.clear();
    meta_.clear();
    manifest_.clear();
    for (const auto& e : manifest.at("entries")) {
        ManifestEntry entry;
        entry.name = e.at("name").get<std::string>();
        entry.table_file = e.value("table_file", std::string());
        entry.chunks_file = e.value("chunks_file", std::string());
        entry.map_file = e.value("map_file", std::string());
        entry.ingested_at = e.value("ingested_at", std::string());
        manifest_.push_back(entry);
        if (!entry.table_file.empty())
            tables_.push_back(table_from_json(read_file(fs::path(dir_) / entry.table_file)));
        if (!entry.chunks_file.empty()) {
            std::istringstream in(read_file(fs::path(dir_) / entry.chunks_file));
            std::string line;
            while (std::getline(in, line)) {
                if (text::trim(line).empty()) continue;
                chunks_.push_back(chunk_from_json_line(line));
            }
        }
        if (!entry.map_file.empty()) {
            auto entries = map_from_json(read_file(fs::path(dir_) / entry.map_file));
            map_.entries.insert(map_.entries.end(), entries.begin(), entries.end());
        }
        meta_[entry.name] = StoreEntryMeta{entry.ingested_at};
    }
}

void Store::commit_manifest() {
    json arr = json::array();
    for (const auto& e : manifest_) {
        json j = json::object();
        j["name"] = e.name;
        j["table_file"] = e.table_file;
        j["chunks_file"] = e.chunks_file;
        j["map_file"] = e.map_file;
        j["ingested_at"] = e.ingested_at;
        arr.push_back(std::move(j));
    }
    json top = json::object();
    top["entries"] = std::move(arr);
    top["version"] = 1;
    write_file_atomic(fs::path(dir_) / "manifest.json", top.dump());
}

std::string Store::put_entry(const RelationalTable& table, const std::vector<Chunk>& chunks,
                             const SchemaChunkMap& map, const StoreEntryMeta& meta) {
    if (mode_ != Mode::ReadWrite) throw validation_error("store opened read-only");
    if (find_table(table.name)) throw name_collision_error("duplicate table name: " + table.name);
    for (const auto& row : table.rows)
        if (row.size() != table.columns.size())
            throw validation_error("row width mismatch in table " + table.name);
    for (const auto& c : table.columns) {
        if (c.type != ColType::Continuous) continue;
        size_t idx = static_cast<size_t>(&c - table.columns.data());
        for (const auto& row : table.rows)
            if (!is_null(row[idx]) && !is_number(row[idx]))
                throw validation_error("continuous column " + c.name +
                                       " holds a non-number after standardization");
    }
    bool has_render = false;
    for (const auto& ch : chunks) {
        if (ch.origin == ChunkOrigin::TableRender) {
            has_render = true;
            if (!ch.table_id)
                throw validation_error("table-render chunk " + ch.chunk_id + " lacks table_id");
        }
    }
    if (!has_render)
        throw validation_error("entry for " + table.name + " has no table-render chunk");
    for (const auto& e : map.entries) {
        if (e.table_id != table.table_id)
            throw validation_error("map entry references foreign table " + e.table_id);
        bool found = std::any_of(chunks.begin(), chunks.end(),
                                 [&](const Chunk& c) { return c.chunk_id == e.chunk_id; });
        if (!found)
            throw validation_error("map entry references unknown chunk " + e.chunk_id);
    }

    ManifestEntry entry;
    entry.name = table.name;
    entry.table_file = "tables/" + table.name + ".json";
    entry.chunks_file = "chunks/" + table.name + ".jsonl";
    entry.map_file = "maps/" + table.name + ".json";
    entry.ingested_at = meta.ingested_at;

    write_file_atomic(fs::path(dir_) / entry.table_file, table_to_json(table));
    std::string lines;
    for (const auto& c : chunks) {
        lines += chunk_to_json_line(c);
        lines += '\n';
    }
    write_file_atomic(fs::path(dir_) / entry.chunks_file, lines);
    write_file_atomic(fs::path(dir_) / entry.map_file, map_to_json(map.entries));

    manifest_.push_back(entry);
    commit_manifest();

    tables_.push_back(table);
    chunks_.insert(chunks_.end(), chunks.begin(), chunks.end());
    map_.entries.insert(map_.entries.end(), map.entries.begin(), map.entries.end());
    meta_[entry.name] = StoreEntryMeta{entry.ingested_at};
    return table.name;
}

std::string Store::put_note_entry(const std::string& name, const std::vector<Chunk>& chunks) {
    if (mode_ != Mode::ReadWrite) throw validation_error("store opened read-only");
    for (const auto& e : manifest_)
        if (e.name == name) throw name_collision_error("duplicate entry name: " + name);
    for (const auto& c : chunks)
        if (c.origin == ChunkOrigin::TableRender)
            throw validation_error("note entry cannot hold table-render chunks");
    ManifestEntry entry;
    entry.name = name;
    entry.chunks_file = "chunks/" + name + ".jsonl";
    std::string lines;
    for (const auto& c : chunks) {
        lines += chunk_to_json_line(c);
        lines += '\n';
    }
    write_file_atomic(fs::path(dir_) / entry.chunks_file, lines);
    manifest_.push_back(entry);
    commit_manifest();
    chunks_.insert(chunks_.end(), chunks.begin(), chunks.end());
    meta_[entry.name] = StoreEntryMeta{};
    return name;
}

const RelationalTable* Store::find_table(const std::string& name) const {
    for (const auto& t : tables_)
        if (t.name == name) return &t;
    return nullptr;
}

const Chunk* Store::find_chunk(const std::string& chunk_id) const {
    for (const auto& c : chunks_)
        if (c.chunk_id == chunk_id) return &c;
    return nullptr;
}

const StoreEntryMeta* Store::entry_meta(const std::string& name) const {
    auto it = meta_.find(name);
    return it == meta_.end() ? nullptr : &it->second;
}

IngestReport ingest_grid(Store& store, const GridDocument& doc, int chunk_window) {
    IngestReport report;
    SubtableSegmentation seg = segment_subtables(doc);
    std::string ingested_at;
    if (auto it = doc.source_meta.find("ingested_at"); it != doc.source_meta.end())
        ingested_at = it->second;
    for (const auto& schema : seg.segments) {
        std::vector<Chunk> note_chunks;
        int note_index = 0;
        for (const auto& note : schema.notes) {
            Chunk c;
            c.chunk_id = schema.table_id + ":note" + std::to_string(note_index++);
            c.text = note;
            c.origin = ChunkOrigin::NoteText;
            c.table_id = schema.table_id;
            note_chunks.push_back(std::move(c));
        }
        RelationalTable table;
        try {
            table = standardize(schema, doc, &report.warnings);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::EmptyInput && !note_chunks.empty()) {
                // pure note segment: chunk-only entry, no relational table
                for (auto& c : note_chunks) c.table_id = std::nullopt;
                store.put_note_entry(schema.table_id, note_chunks);
                report.chunk_count += static_cast<int>(note_chunks.size());
                continue;
            }
            throw;
        }
        auto chunks = render_markdown(table, chunk_window);
        SchemaChunkMap map;
        for (const auto& chunk : chunks) {
            for (size_t c = 0; c < table.columns.size(); ++c)
                map.entries.push_back({chunk.chunk_id, table.table_id, table.header_paths[c]});
        }
        for (const auto& nc : note_chunks)
            map.entries.push_back({nc.chunk_id, table.table_id, {}});
        chunks.insert(chunks.end(), note_chunks.begin(), note_chunks.end());
        store.put_entry(table, chunks, map, StoreEntryMeta{ingested_at});
        report.table_names.push_back(table.name);
        report.chunk_count += static_cast<int>(chunks.size());
    }
    return report;
}

void check_store_consistency(const Store& store) {
    for (const auto& t : store.tables()) {
        bool has_render = false, has_map = false;
        for (const auto& c : store.chunks())
            if (c.origin == ChunkOrigin::TableRender && c.table_id == t.table_id)
                has_render = true;
        for (const auto& e : store.schema_map().entries)
            if (e.table_id == t.table_id) has_map = true;
        if (!has_render)
            throw validation_error("table " + t.name + " has no table-render chunk");
        if (!has_map) throw validation_error("table " + t.name + " has no map entry");
    }
    for (const auto& e : store.schema_map().entries) {
        if (!store.find_chunk(e.chunk_id))
            throw validation_error("map entry references missing chunk " + e.chunk_id);
        if (!store.find_table(e.table_id))
            throw validation_error("map entry references missing table " + e.table_id);
    }
    for (const auto& c : store.chunks()) {
        if (c.origin == ChunkOrigin::TableRender) {
            bool mapped = std::any_of(store.schema_map().entries.begin(),
                                      store.schema_map().entries.end(),
                                      [&](const SchemaChunkEntry& e) {
                                          return e.chunk_id == c.chunk_id;
                                      });
            if (!mapped)
                throw validation_error("table-render chunk " + c.chunk_id + " is unmapped");
        }
    }
}

} // namespace tqa
