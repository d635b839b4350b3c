#pragma once

#include "tableqa/store.hpp"
#include "tableqa/value.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tqa::sql {

// Supported subset: SELECT with column refs and arithmetic, SUM/COUNT/AVG/
// MIN/MAX, WHERE with comparisons, AND, OR, IN, LIKE, GROUP BY, ORDER BY,
// LIMIT, and INNER JOIN on equality. Anything else raises UnsupportedSyntax.

enum class BinOp { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class AggOp { Sum, Count, Avg, Min, Max };

std::string to_string(AggOp op);

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    enum class Kind { Literal, ColumnRef, Binary, Negate, Aggregate, CountStar, In, Like };
    Kind kind = Kind::Literal;

    Value literal;                   // Literal
    std::string table;               // ColumnRef (optional qualifier)
    std::string column;              // ColumnRef
    BinOp op = BinOp::Add;           // Binary
    ExprPtr lhs, rhs;                // Binary
    ExprPtr operand;                 // Negate / Aggregate / In / Like subject
    AggOp agg = AggOp::Sum;          // Aggregate
    std::vector<Value> in_list;      // In
    std::string like_pattern;        // Like
};

struct SelectItem {
    ExprPtr expr;
    std::string alias; // empty when none
};

struct OrderItem {
    ExprPtr expr;
    bool desc = false;
};

struct JoinClause {
    std::string table;
    ExprPtr on_left;  // column refs, equality only
    ExprPtr on_right;
};

struct SelectStmt {
    std::vector<SelectItem> items;
    std::string from_table;
    std::vector<JoinClause> joins;
    ExprPtr where;
    std::vector<ExprPtr> group_by;
    std::vector<OrderItem> order_by;
    std::optional<long> limit;
};

SelectStmt parse(const std::string& sql);

struct ResultSet {
    std::vector<std::string> column_names;
    std::vector<std::vector<Value>> rows;
};

// Read-only and safe to run concurrently against one store. Row order is
// deterministic: explicit ORDER BY, otherwise insertion order.
ResultSet execute(const Store& store, const SelectStmt& stmt);
ResultSet execute_sql(const Store& store, const std::string& sql);

std::string quote_string_literal(const std::string& s);

} // namespace tqa::sql
