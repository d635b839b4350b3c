#pragma once

#include "tableqa/grid.hpp"
#include "tableqa/parser.hpp"
#include "tableqa/value.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tqa {

struct RelationalColumn {
    std::string name; // sanitized identifier
    ColType type = ColType::Unstructured;
};

struct RelationalTable {
    std::string table_id; // equals name throughout this artifact
    std::string name;
    std::vector<RelationalColumn> columns;
    std::vector<std::string> display_labels;          // one per column
    std::vector<std::vector<std::string>> header_paths; // one per column
    std::vector<std::vector<Value>> rows;
};

enum class ChunkOrigin { TableRender, NoteText, FreeText };

std::string to_string(ChunkOrigin o);
ChunkOrigin chunk_origin_from_string(const std::string& s);

struct Chunk {
    std::string chunk_id;
    std::string text; // Markdown
    ChunkOrigin origin = ChunkOrigin::FreeText;
    std::optional<std::string> table_id;
    std::optional<std::pair<size_t, size_t>> char_span;
};

struct SchemaChunkEntry {
    std::string chunk_id;
    std::string table_id;
    std::vector<std::string> header_path;
};

struct SchemaChunkMap {
    std::vector<SchemaChunkEntry> entries;
};

// One relational row per body row; continuous columns parsed to numbers.
// Unparseable numerics become null and are reported through `warnings`.
RelationalTable standardize(const TableSchema& schema, const GridDocument& doc,
                            std::vector<std::string>* warnings = nullptr);

constexpr int kDefaultChunkWindow = 40;

// GitHub pipe tables, one chunk per <= window data rows, header repeated.
std::vector<Chunk> render_markdown(const RelationalTable& table,
                                   int window = kDefaultChunkWindow);

// Inverse of render_markdown for round-trip checks: a pipe table rendered as
// RFC-4180 CSV so it can be re-read through load_grid.
std::string markdown_table_to_csv(const std::string& chunk_text);

struct StoreEntryMeta {
    std::string ingested_at; // ISO-8601, "" when unknown
};

// Single-writer, multi-reader store directory. Readers observe only
// manifest-committed state; the manifest is replaced last via temp + rename.
class Store {
public:
    enum class Mode { ReadOnly, ReadWrite };

    static Store create(const std::string& dir);
    static Store open(const std::string& dir, Mode mode = Mode::ReadOnly);

    // Volatile store over ad-hoc content, no persistence; used to run the
    // SQL engine and retriever against data that never touched disk.
    static Store ephemeral(std::vector<RelationalTable> tables,
                           std::vector<Chunk> chunks = {}, SchemaChunkMap map = {});

    Store(Store&&) noexcept;
    Store& operator=(Store&&) noexcept;
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;
    ~Store();

    const std::string& dir() const { return dir_; }

    std::string put_entry(const RelationalTable& table, const std::vector<Chunk>& chunks,
                          const SchemaChunkMap& map, const StoreEntryMeta& meta = {});
    // Chunk-only entry for note text with no backing table.
    std::string put_note_entry(const std::string& name, const std::vector<Chunk>& chunks);

    const std::vector<RelationalTable>& tables() const { return tables_; }
    const std::vector<Chunk>& chunks() const { return chunks_; }
    const SchemaChunkMap& schema_map() const { return map_; }

    const RelationalTable* find_table(const std::string& name) const;
    const Chunk* find_chunk(const std::string& chunk_id) const;
    const StoreEntryMeta* entry_meta(const std::string& name) const;

    bool empty() const { return tables_.empty() && chunks_.empty(); }

private:
    Store() = default;
    void load();
    void acquire_lock();
    void release_lock();
    void commit_manifest();

    std::string dir_;
    Mode mode_ = Mode::ReadOnly;
    int lock_fd_ = -1;
    std::vector<RelationalTable> tables_;
    std::vector<Chunk> chunks_;
    SchemaChunkMap map_;
    std::map<std::string, StoreEntryMeta> meta_;
    // manifest entries in commit order: name -> files
    struct ManifestEntry {
        std::string name;
        std::string table_file;  // may be empty for note entries
        std::string chunks_file;
        std::string map_file;    // may be empty
        std::string ingested_at;
    };
    std::vector<ManifestEntry> manifest_;
};

struct IngestReport {
    std::vector<std::string> table_names;
    int chunk_count = 0;
    std::vector<std::string> warnings;
};

// segment -> parse -> standardize -> render -> put, for every segment.
IngestReport ingest_grid(Store& store, const GridDocument& doc,
                         int chunk_window = kDefaultChunkWindow);

// Dual-store consistency: every table has >= 1 render chunk and map entry,
// every map entry resolves both ways.
void check_store_consistency(const Store& store);

} // namespace tqa
