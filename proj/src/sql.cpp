#include "tableqa/sql.hpp"

#include "tableqa/errors.hpp"
#include "tableqa/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace tqa::sql {

std::string to_string(AggOp op) {
    switch (op) {
    case AggOp::Sum: return "SUM";
    case AggOp::Count: return "COUNT";
    case AggOp::Avg: return "AVG";
    case AggOp::Min: return "MIN";
    case AggOp::Max: return "MAX";
    }
    return "SUM";
}

namespace {

// ---------------------------------------------------------------- lexer

enum class TokKind { Ident, Number, String, Symbol, End };

struct Token {
    TokKind kind = TokKind::End;
    std::string text;   // uppercased for idents-as-keywords checks
    std::string raw;    // original spelling
    double number = 0.0;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        tok_ = Token{};
        if (pos_ >= src_.size()) {
            tok_.kind = TokKind::End;
            return;
        }
        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t b = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            tok_.kind = TokKind::Ident;
            tok_.raw = src_.substr(b, pos_ - b);
            tok_.text = tok_.raw;
            std::transform(tok_.text.begin(), tok_.text.end(), tok_.text.begin(),
                           [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            size_t b = pos_;
            while (pos_ < src_.size() &&
                   (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
                    src_[pos_] == 'e' || src_[pos_] == 'E' ||
                    ((src_[pos_] == '+' || src_[pos_] == '-') && pos_ > b &&
                     (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E'))))
                ++pos_;
            tok_.kind = TokKind::Number;
            tok_.raw = src_.substr(b, pos_ - b);
            auto v = text::parse_number(tok_.raw);
            if (!v) throw parse_error("sql: bad numeric literal '" + tok_.raw + "'");
            tok_.number = *v;
            return;
        }
        if (c == '\'') {
            ++pos_;
            std::string s;
            while (true) {
                if (pos_ >= src_.size()) throw parse_error("sql: unterminated string literal");
                if (src_[pos_] == '\'') {
                    if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '\'') {
                        s += '\'';
                        pos_ += 2;
                        continue;
                    }
                    ++pos_;
                    break;
                }
                s += src_[pos_++];
            }
            tok_.kind = TokKind::String;
            tok_.raw = s;
            return;
        }
        static const char* two_char[] = {"!=", "<=", ">=", "<>"};
        for (const char* op : two_char) {
            if (src_.compare(pos_, 2, op) == 0) {
                tok_.kind = TokKind::Symbol;
                tok_.text = op;
                pos_ += 2;
                return;
            }
        }
        static const std::string singles = "(),.*+-/<>=;";
        if (singles.find(c) != std::string::npos) {
            tok_.kind = TokKind::Symbol;
            tok_.text = std::string(1, c);
            ++pos_;
            return;
        }
        throw parse_error(std::string("sql: unexpected character '") + c + "'");
    }

    const std::string& src_;
    size_t pos_ = 0;
    Token tok_;
};

// keywords recognized but outside the subset
const std::set<std::string> kUnsupportedKeywords = {
    "INSERT", "UPDATE", "DELETE", "CREATE", "DROP",   "ALTER",  "UNION",
    "EXCEPT", "INTERSECT", "HAVING", "DISTINCT", "LEFT", "RIGHT", "FULL",
    "OUTER",  "CROSS",  "NOT",    "BETWEEN", "EXISTS", "CASE",   "NULL",
    "IS",     "OFFSET", "WITH"};

const std::set<std::string> kKeywords = {
    "SELECT", "FROM", "WHERE", "AND", "OR", "IN", "LIKE", "GROUP", "ORDER",
    "BY", "LIMIT", "INNER", "JOIN", "ON", "AS", "ASC", "DESC", "SUM",
    "COUNT", "AVG", "MIN", "MAX"};

// ---------------------------------------------------------------- parser

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) {}

    SelectStmt parse_statement() {
        expect_keyword("SELECT");
        SelectStmt stmt;
        if (is_symbol("*"))
            throw unsupported_syntax_error("sql: SELECT * is outside the supported subset");
        stmt.items.push_back(parse_select_item());
        while (accept_symbol(",")) stmt.items.push_back(parse_select_item());
        expect_keyword("FROM");
        stmt.from_table = expect_identifier("table name");
        while (true) {
            if (accept_keyword("INNER")) {
                expect_keyword("JOIN");
            } else if (peek_keyword("JOIN")) {
                lex_.next();
            } else {
                break;
            }
            JoinClause join;
            join.table = expect_identifier("join table name");
            expect_keyword("ON");
            join.on_left = parse_primary();
            if (join.on_left->kind != Expr::Kind::ColumnRef)
                throw unsupported_syntax_error("sql: JOIN condition must compare columns");
            if (!accept_symbol("="))
                throw unsupported_syntax_error("sql: only equality joins are supported");
            join.on_right = parse_primary();
            if (join.on_right->kind != Expr::Kind::ColumnRef)
                throw unsupported_syntax_error("sql: JOIN condition must compare columns");
            stmt.joins.push_back(std::move(join));
        }
        if (accept_keyword("WHERE")) stmt.where = parse_or();
        if (accept_keyword("GROUP")) {
            expect_keyword("BY");
            stmt.group_by.push_back(parse_column_ref_only());
            while (accept_symbol(",")) stmt.group_by.push_back(parse_column_ref_only());
        }
        if (accept_keyword("ORDER")) {
            expect_keyword("BY");
            do {
                OrderItem item;
                item.expr = parse_additive();
                if (accept_keyword("DESC"))
                    item.desc = true;
                else
                    accept_keyword("ASC");
                stmt.order_by.push_back(std::move(item));
            } while (accept_symbol(","));
        }
        if (accept_keyword("LIMIT")) {
            const Token& t = lex_.peek();
            if (t.kind != TokKind::Number)
                throw parse_error("sql: LIMIT expects a number");
            long v = static_cast<long>(t.number);
            if (v < 0 || static_cast<double>(v) != t.number)
                throw parse_error("sql: LIMIT expects a non-negative integer");
            lex_.next();
            stmt.limit = v;
        }
        accept_symbol(";");
        if (lex_.peek().kind != TokKind::End) {
            check_unsupported();
            throw parse_error("sql: trailing input after statement: '" + lex_.peek().text +
                              lex_.peek().raw + "'");
        }
        return stmt;
    }

private:
    bool peek_keyword(const std::string& kw) const {
        return lex_.peek().kind == TokKind::Ident && lex_.peek().text == kw;
    }
    bool accept_keyword(const std::string& kw) {
        if (peek_keyword(kw)) {
            lex_.next();
            return true;
        }
        return false;
    }
    void expect_keyword(const std::string& kw) {
        if (!accept_keyword(kw)) {
            check_unsupported();
            throw parse_error("sql: expected " + kw);
        }
    }
    bool is_symbol(const std::string& s) const {
        return lex_.peek().kind == TokKind::Symbol && lex_.peek().text == s;
    }
    bool accept_symbol(const std::string& s) {
        if (is_symbol(s)) {
            lex_.next();
            return true;
        }
        return false;
    }
    void expect_symbol(const std::string& s) {
        if (!accept_symbol(s)) throw parse_error("sql: expected '" + s + "'");
    }
    void check_unsupported() {
        if (lex_.peek().kind == TokKind::Ident &&
            kUnsupportedKeywords.count(lex_.peek().text))
            throw unsupported_syntax_error("sql: '" + lex_.peek().raw +
                                           "' is outside the supported subset");
    }
    std::string expect_identifier(const std::string& what) {
        check_unsupported();
        if (lex_.peek().kind != TokKind::Ident || kKeywords.count(lex_.peek().text))
            throw parse_error("sql: expected " + what);
        return lex_.next().raw;
    }

    SelectItem parse_select_item() {
        SelectItem item;
        item.expr = parse_additive();
        if (accept_keyword("AS")) item.alias = expect_identifier("alias");
        return item;
    }

    ExprPtr parse_column_ref_only() {
        ExprPtr e = parse_primary();
        if (e->kind != Expr::Kind::ColumnRef)
            throw unsupported_syntax_error("sql: GROUP BY supports column refs only");
        return e;
    }

    ExprPtr parse_or() {
        ExprPtr lhs = parse_and();
        while (accept_keyword("OR")) {
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Binary;
            e->op = BinOp::Or;
            e->lhs = std::move(lhs);
            e->rhs = parse_and();
            lhs = std::move(e);
        }
        return lhs;
    }

    ExprPtr parse_and() {
        ExprPtr lhs = parse_predicate();
        while (accept_keyword("AND")) {
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Binary;
            e->op = BinOp::And;
            e->lhs = std::move(lhs);
            e->rhs = parse_predicate();
            lhs = std::move(e);
        }
        return lhs;
    }

    ExprPtr parse_predicate() {
        if (accept_symbol("(")) {
            // could be a parenthesized boolean or arithmetic group; parse as
            // boolean and continue
            ExprPtr inner = parse_or();
            expect_symbol(")");
            return parse_predicate_tail(std::move(inner));
        }
        ExprPtr lhs = parse_additive();
        return parse_predicate_tail(std::move(lhs));
    }

    ExprPtr parse_predicate_tail(ExprPtr lhs) {
        struct {
            const char* sym;
            BinOp op;
        } cmps[] = {{"=", BinOp::Eq}, {"!=", BinOp::Ne}, {"<>", BinOp::Ne},
                    {"<=", BinOp::Le}, {">=", BinOp::Ge}, {"<", BinOp::Lt},
                    {">", BinOp::Gt}};
        for (const auto& c : cmps) {
            if (accept_symbol(c.sym)) {
                auto e = std::make_unique<Expr>();
                e->kind = Expr::Kind::Binary;
                e->op = c.op;
                e->lhs = std::move(lhs);
                e->rhs = parse_additive();
                return e;
            }
        }
        if (accept_keyword("IN")) {
            expect_symbol("(");
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::In;
            e->operand = std::move(lhs);
            do {
                e->in_list.push_back(parse_literal_value());
            } while (accept_symbol(","));
            expect_symbol(")");
            return e;
        }
        if (accept_keyword("LIKE")) {
            if (lex_.peek().kind != TokKind::String)
                throw parse_error("sql: LIKE expects a string pattern");
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Like;
            e->operand = std::move(lhs);
            e->like_pattern = lex_.next().raw;
            return e;
        }
        return lhs;
    }

    Value parse_literal_value() {
        bool neg = false;
        if (accept_symbol("-")) neg = true;
        const Token& t = lex_.peek();
        if (t.kind == TokKind::Number) {
            double v = t.number;
            lex_.next();
            return neg ? -v : v;
        }
        if (t.kind == TokKind::String && !neg) {
            std::string s = t.raw;
            lex_.next();
            return s;
        }
        throw parse_error("sql: expected literal");
    }

    ExprPtr parse_additive() {
        ExprPtr lhs = parse_multiplicative();
        while (true) {
            if (accept_symbol("+")) {
                auto e = std::make_unique<Expr>();
                e->kind = Expr::Kind::Binary;
                e->op = BinOp::Add;
                e->lhs = std::move(lhs);
                e->rhs = parse_multiplicative();
                lhs = std::move(e);
            } else if (accept_symbol("-")) {
                auto e = std::make_unique<Expr>();
                e->kind = Expr::Kind::Binary;
                e->op = BinOp::Sub;
                e->lhs = std::move(lhs);
                e->rhs = parse_multiplicative();
                lhs = std::move(e);
            } else {
                return lhs;
            }
        }
    }

    ExprPtr parse_multiplicative() {
        ExprPtr lhs = parse_unary();
        while (true) {
            if (accept_symbol("*")) {
                auto e = std::make_unique<Expr>();
                e->kind = Expr::Kind::Binary;
                e->op = BinOp::Mul;
                e->lhs = std::move(lhs);
                e->rhs = parse_unary();
                lhs = std::move(e);
            } else if (accept_symbol("/")) {
                auto e = std::make_unique<Expr>();
                e->kind = Expr::Kind::Binary;
                e->op = BinOp::Div;
                e->lhs = std::move(lhs);
                e->rhs = parse_unary();
                lhs = std::move(e);
            } else {
                return lhs;
            }
        }
    }

    ExprPtr parse_unary() {
        if (accept_symbol("-")) {
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Negate;
            e->operand = parse_unary();
            return e;
        }
        return parse_primary();
    }

    ExprPtr parse_primary() {
        check_unsupported();
        const Token& t = lex_.peek();
        if (t.kind == TokKind::Number) {
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Literal;
            e->literal = t.number;
            lex_.next();
            return e;
        }
        if (t.kind == TokKind::String) {
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Literal;
            e->literal = t.raw;
            lex_.next();
            return e;
        }
        if (t.kind == TokKind::Symbol && t.text == "(") {
            lex_.next();
            ExprPtr inner = parse_additive();
            expect_symbol(")");
            return inner;
        }
        if (t.kind == TokKind::Ident) {
            static const std::map<std::string, AggOp> aggs = {
                {"SUM", AggOp::Sum}, {"COUNT", AggOp::Count}, {"AVG", AggOp::Avg},
                {"MIN", AggOp::Min}, {"MAX", AggOp::Max}};
            auto it = aggs.find(t.text);
            if (it != aggs.end()) {
                AggOp op = it->second;
                lex_.next();
                expect_symbol("(");
                auto e = std::make_unique<Expr>();
                if (op == AggOp::Count && accept_symbol("*")) {
                    e->kind = Expr::Kind::CountStar;
                } else {
                    e->kind = Expr::Kind::Aggregate;
                    e->agg = op;
                    e->operand = parse_additive();
                }
                expect_symbol(")");
                return e;
            }
            if (kKeywords.count(t.text))
                throw parse_error("sql: unexpected keyword '" + t.raw + "'");
            std::string first = lex_.next().raw;
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::ColumnRef;
            if (accept_symbol(".")) {
                e->table = first;
                e->column = expect_identifier("column name");
            } else {
                e->column = first;
            }
            return e;
        }
        throw parse_error("sql: unexpected token");
    }

    Lexer lex_;
};

// ------------------------------------------------------------- evaluator

struct ColumnBinding {
    std::string table;
    std::string column;
    size_t index; // into the composite row
};

struct Catalog {
    std::vector<ColumnBinding> bindings;

    size_t resolve(const std::string& table, const std::string& column) const {
        std::vector<size_t> matches;
        for (const auto& b : bindings) {
            if (b.column != column) continue;
            if (!table.empty() && b.table != table) continue;
            matches.push_back(b.index);
        }
        if (matches.empty())
            throw name_resolution_error("sql: unknown column '" +
                                        (table.empty() ? column : table + "." + column) + "'");
        if (matches.size() > 1)
            throw name_resolution_error("sql: ambiguous column '" + column + "'");
        return matches[0];
    }
};

bool contains_aggregate(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::Aggregate:
    case Expr::Kind::CountStar: return true;
    case Expr::Kind::Binary:
        return contains_aggregate(*e.lhs) || contains_aggregate(*e.rhs);
    case Expr::Kind::Negate:
    case Expr::Kind::In:
    case Expr::Kind::Like: return e.operand && contains_aggregate(*e.operand);
    default: return false;
    }
}

bool truthy(const Value& v) {
    if (is_null(v)) return false;
    if (is_number(v)) return as_number(v) != 0.0;
    return !as_string(v).empty();
}

bool like_match(const std::string& s, const std::string& pattern, size_t si, size_t pi) {
    while (pi < pattern.size()) {
        char pc = pattern[pi];
        if (pc == '%') {
            for (size_t k = si; k <= s.size(); ++k)
                if (like_match(s, pattern, k, pi + 1)) return true;
            return false;
        }
        if (si >= s.size()) return false;
        if (pc != '_' && pc != s[si]) return false;
        ++si;
        ++pi;
    }
    return si == s.size();
}

class RowEvaluator {
public:
    RowEvaluator(const Catalog& catalog) : catalog_(catalog) {}

    Value eval(const Expr& e, const std::vector<Value>& row) const {
        switch (e.kind) {
        case Expr::Kind::Literal: return e.literal;
        case Expr::Kind::ColumnRef: return row[catalog_.resolve(e.table, e.column)];
        case Expr::Kind::Negate: {
            Value v = eval(*e.operand, row);
            if (!is_number(v)) return std::monostate{};
            return -as_number(v);
        }
        case Expr::Kind::Binary: return eval_binary(e, row);
        case Expr::Kind::In: {
            Value v = eval(*e.operand, row);
            if (is_null(v)) return 0.0;
            for (const auto& lit : e.in_list)
                if (value_equal(v, lit)) return 1.0;
            return 0.0;
        }
        case Expr::Kind::Like: {
            Value v = eval(*e.operand, row);
            if (!is_string(v)) return 0.0;
            return like_match(as_string(v), e.like_pattern, 0, 0) ? 1.0 : 0.0;
        }
        case Expr::Kind::Aggregate:
        case Expr::Kind::CountStar:
            throw internal_error("sql: aggregate evaluated in row context");
        }
        throw internal_error("sql: unknown expression kind");
    }

private:
    Value eval_binary(const Expr& e, const std::vector<Value>& row) const {
        if (e.op == BinOp::And) {
            return truthy(eval(*e.lhs, row)) && truthy(eval(*e.rhs, row)) ? 1.0 : 0.0;
        }
        if (e.op == BinOp::Or) {
            return truthy(eval(*e.lhs, row)) || truthy(eval(*e.rhs, row)) ? 1.0 : 0.0;
        }
        Value a = eval(*e.lhs, row);
        Value b = eval(*e.rhs, row);
        switch (e.op) {
        case BinOp::Add:
        case BinOp::Sub:
        case BinOp::Mul:
        case BinOp::Div: {
            if (!is_number(a) || !is_number(b)) return std::monostate{};
            double x = as_number(a), y = as_number(b);
            switch (e.op) {
            case BinOp::Add: return x + y;
            case BinOp::Sub: return x - y;
            case BinOp::Mul: return x * y;
            case BinOp::Div: return y == 0.0 ? Value{std::monostate{}} : Value{x / y};
            default: break;
            }
            return std::monostate{};
        }
        default: break;
        }
        // comparisons: null or mixed types compare false
        if (is_null(a) || is_null(b)) return 0.0;
        if (a.index() != b.index()) return 0.0;
        int c = value_compare(a, b);
        bool r = false;
        switch (e.op) {
        case BinOp::Eq: r = c == 0; break;
        case BinOp::Ne: r = c != 0; break;
        case BinOp::Lt: r = c < 0; break;
        case BinOp::Le: r = c <= 0; break;
        case BinOp::Gt: r = c > 0; break;
        case BinOp::Ge: r = c >= 0; break;
        default: break;
        }
        return r ? 1.0 : 0.0;
    }

    const Catalog& catalog_;
};

// Aggregates evaluated over a group of rows.
Value eval_aggregate_expr(const Expr& e, const RowEvaluator& rows_eval,
                          const std::vector<const std::vector<Value>*>& group) {
    switch (e.kind) {
    case Expr::Kind::CountStar: return static_cast<double>(group.size());
    case Expr::Kind::Aggregate: {
        std::vector<Value> vals;
        vals.reserve(group.size());
        for (const auto* row : group) {
            Value v = rows_eval.eval(*e.operand, *row);
            if (!is_null(v)) vals.push_back(std::move(v));
        }
        switch (e.agg) {
        case AggOp::Count: return static_cast<double>(vals.size());
        case AggOp::Sum:
        case AggOp::Avg: {
            double sum = 0.0;
            size_t n = 0;
            for (const auto& v : vals)
                if (is_number(v)) {
                    sum += as_number(v);
                    ++n;
                }
            if (n == 0) return std::monostate{};
            return e.agg == AggOp::Sum ? sum : sum / static_cast<double>(n);
        }
        case AggOp::Min:
        case AggOp::Max: {
            if (vals.empty()) return std::monostate{};
            Value best = vals[0];
            for (const auto& v : vals) {
                int c = value_compare(v, best);
                if ((e.agg == AggOp::Min && c < 0) || (e.agg == AggOp::Max && c > 0)) best = v;
            }
            return best;
        }
        }
        return std::monostate{};
    }
    case Expr::Kind::Binary: {
        if (e.op == BinOp::And || e.op == BinOp::Or)
            throw unsupported_syntax_error("sql: boolean logic over aggregates");
        Value a = eval_aggregate_expr(*e.lhs, rows_eval, group);
        Value b = eval_aggregate_expr(*e.rhs, rows_eval, group);
        if (!is_number(a) || !is_number(b)) return std::monostate{};
        double x = as_number(a), y = as_number(b);
        switch (e.op) {
        case BinOp::Add: return x + y;
        case BinOp::Sub: return x - y;
        case BinOp::Mul: return x * y;
        case BinOp::Div: return y == 0.0 ? Value{std::monostate{}} : Value{x / y};
        default: throw unsupported_syntax_error("sql: comparison over aggregates");
        }
    }
    case Expr::Kind::Negate: {
        Value v = eval_aggregate_expr(*e.operand, rows_eval, group);
        if (!is_number(v)) return std::monostate{};
        return -as_number(v);
    }
    case Expr::Kind::Literal: return e.literal;
    case Expr::Kind::ColumnRef:
        // caller substitutes group keys before reaching here
        throw unsupported_syntax_error(
            "sql: column reference must appear in GROUP BY to be selected");
    default: throw unsupported_syntax_error("sql: unsupported expression in aggregate context");
    }
}

bool exprs_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == Expr::Kind::ColumnRef)
        return a.table == b.table && a.column == b.column;
    return false;
}

std::string derive_column_name(const Expr& e, size_t position) {
    if (e.kind == Expr::Kind::ColumnRef) return e.column;
    if (e.kind == Expr::Kind::Aggregate || e.kind == Expr::Kind::CountStar)
        return text::to_lower(to_string(e.kind == Expr::Kind::CountStar ? AggOp::Count : e.agg));
    return "expr_" + std::to_string(position + 1);
}

} // namespace

SelectStmt parse(const std::string& sql) { return Parser(sql).parse_statement(); }

ResultSet execute(const Store& store, const SelectStmt& stmt) {
    // assemble the composite row set (FROM + INNER JOINs, left order preserved)
    std::vector<const RelationalTable*> tables;
    auto resolve_table = [&](const std::string& name) {
        const RelationalTable* t = store.find_table(name);
        if (!t) throw name_resolution_error("sql: unknown table '" + name + "'");
        return t;
    };
    tables.push_back(resolve_table(stmt.from_table));
    for (const auto& j : stmt.joins) tables.push_back(resolve_table(j.table));

    Catalog catalog;
    size_t offset = 0;
    for (const auto* t : tables) {
        for (size_t c = 0; c < t->columns.size(); ++c)
            catalog.bindings.push_back({t->name, t->columns[c].name, offset + c});
        offset += t->columns.size();
    }
    RowEvaluator evaluator(catalog);

    std::vector<std::vector<Value>> working;
    for (const auto& row : tables[0]->rows) working.push_back(row);
    for (size_t j = 0; j < stmt.joins.size(); ++j) {
        const auto& join = stmt.joins[j];
        // resolve join columns against the catalog prefix built so far
        std::vector<std::vector<Value>> next;
        for (const auto& left_row : working) {
            for (const auto& right_row : tables[j + 1]->rows) {
                std::vector<Value> combined = left_row;
                combined.insert(combined.end(), right_row.begin(), right_row.end());
                Value l = evaluator.eval(*join.on_left, combined);
                Value r = evaluator.eval(*join.on_right, combined);
                if (is_null(l) || is_null(r)) continue;
                if (value_equal(l, r)) next.push_back(std::move(combined));
            }
        }
        working = std::move(next);
    }

    if (stmt.where) {
        std::vector<std::vector<Value>> filtered;
        for (auto& row : working)
            if (truthy(evaluator.eval(*stmt.where, row))) filtered.push_back(std::move(row));
        working = std::move(filtered);
    }

    bool any_aggregate = !stmt.group_by.empty();
    for (const auto& item : stmt.items)
        if (contains_aggregate(*item.expr)) any_aggregate = true;

    ResultSet result;
    for (size_t i = 0; i < stmt.items.size(); ++i)
        result.column_names.push_back(stmt.items[i].alias.empty()
                                          ? derive_column_name(*stmt.items[i].expr, i)
                                          : stmt.items[i].alias);

    if (!any_aggregate) {
        for (const auto& row : working) {
            std::vector<Value> out;
            out.reserve(stmt.items.size());
            for (const auto& item : stmt.items) out.push_back(evaluator.eval(*item.expr, row));
            result.rows.push_back(std::move(out));
        }
    } else {
        // validate: non-aggregate select items must be GROUP BY columns
        for (const auto& item : stmt.items) {
            if (contains_aggregate(*item.expr)) continue;
            if (item.expr->kind != Expr::Kind::ColumnRef)
                throw unsupported_syntax_error(
                    "sql: non-aggregate select item must be a grouped column");
            bool grouped = std::any_of(stmt.group_by.begin(), stmt.group_by.end(),
                                       [&](const ExprPtr& g) {
                                           return exprs_equal(*g, *item.expr);
                                       });
            if (!grouped)
                throw unsupported_syntax_error("sql: column '" + item.expr->column +
                                               "' must appear in GROUP BY");
        }
        // group rows by key tuple, first-appearance order
        std::vector<size_t> key_cols;
        for (const auto& g : stmt.group_by)
            key_cols.push_back(catalog.resolve(g->table, g->column));
        std::vector<std::vector<Value>> group_keys;
        std::vector<std::vector<const std::vector<Value>*>> groups;
        for (const auto& row : working) {
            std::vector<Value> key;
            key.reserve(key_cols.size());
            for (size_t kc : key_cols) key.push_back(row[kc]);
            size_t gi = groups.size();
            for (size_t i = 0; i < group_keys.size(); ++i) {
                bool same = true;
                for (size_t k = 0; k < key.size(); ++k)
                    if (!((is_null(group_keys[i][k]) && is_null(key[k])) ||
                          value_equal(group_keys[i][k], key[k]))) {
                        same = false;
                        break;
                    }
                if (same) {
                    gi = i;
                    break;
                }
            }
            if (gi == groups.size()) {
                group_keys.push_back(key);
                groups.emplace_back();
            }
            groups[gi].push_back(&row);
        }
        if (stmt.group_by.empty() && groups.empty()) {
            // aggregates over an empty set still yield one row
            group_keys.emplace_back();
            groups.emplace_back();
        }
        for (size_t gi = 0; gi < groups.size(); ++gi) {
            std::vector<Value> out;
            for (const auto& item : stmt.items) {
                if (contains_aggregate(*item.expr)) {
                    out.push_back(eval_aggregate_expr(*item.expr, evaluator, groups[gi]));
                } else {
                    size_t kc = 0;
                    for (; kc < stmt.group_by.size(); ++kc)
                        if (exprs_equal(*stmt.group_by[kc], *item.expr)) break;
                    out.push_back(group_keys[gi][kc]);
                }
            }
            result.rows.push_back(std::move(out));
        }
    }

    if (!stmt.order_by.empty()) {
        // order keys resolve against output columns (alias or column name),
        // falling back to row-context evaluation for plain queries
        struct SortKey {
            std::vector<Value> keys;
            size_t original;
        };
        std::vector<size_t> out_index;
        std::vector<int> out_col(stmt.order_by.size(), -1);
        for (size_t oi = 0; oi < stmt.order_by.size(); ++oi) {
            const Expr& e = *stmt.order_by[oi].expr;
            if (e.kind == Expr::Kind::ColumnRef && e.table.empty()) {
                for (size_t ci = 0; ci < result.column_names.size(); ++ci)
                    if (result.column_names[ci] == e.column ||
                        (!stmt.items[ci].alias.empty() && stmt.items[ci].alias == e.column)) {
                        out_col[oi] = static_cast<int>(ci);
                        break;
                    }
            }
        }
        if (any_aggregate) {
            for (size_t oi = 0; oi < stmt.order_by.size(); ++oi)
                if (out_col[oi] < 0)
                    throw unsupported_syntax_error(
                        "sql: ORDER BY in aggregate queries must reference output columns");
            std::stable_sort(result.rows.begin(), result.rows.end(),
                             [&](const std::vector<Value>& a, const std::vector<Value>& b) {
                                 for (size_t oi = 0; oi < stmt.order_by.size(); ++oi) {
                                     int c = value_compare(a[static_cast<size_t>(out_col[oi])],
                                                           b[static_cast<size_t>(out_col[oi])]);
                                     if (stmt.order_by[oi].desc) c = -c;
                                     if (c != 0) return c < 0;
                                 }
                                 return false;
                             });
        } else {
            // evaluate order keys against source rows, then sort outputs
            std::vector<std::pair<std::vector<Value>, size_t>> keyed;
            keyed.reserve(working.size());
            for (size_t r = 0; r < working.size(); ++r) {
                std::vector<Value> keys;
                for (size_t oi = 0; oi < stmt.order_by.size(); ++oi) {
                    if (out_col[oi] >= 0)
                        keys.push_back(result.rows[r][static_cast<size_t>(out_col[oi])]);
                    else
                        keys.push_back(evaluator.eval(*stmt.order_by[oi].expr, working[r]));
                }
                keyed.emplace_back(std::move(keys), r);
            }
            std::stable_sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
                for (size_t oi = 0; oi < stmt.order_by.size(); ++oi) {
                    int c = value_compare(a.first[oi], b.first[oi]);
                    if (stmt.order_by[oi].desc) c = -c;
                    if (c != 0) return c < 0;
                }
                return false;
            });
            std::vector<std::vector<Value>> sorted;
            sorted.reserve(result.rows.size());
            for (const auto& [keys, idx] : keyed) sorted.push_back(std::move(result.rows[idx]));
            result.rows = std::move(sorted);
        }
    }

    if (stmt.limit && result.rows.size() > static_cast<size_t>(*stmt.limit))
        result.rows.resize(static_cast<size_t>(*stmt.limit));
    return result;
}

ResultSet execute_sql(const Store& store, const std::string& sql) {
    return execute(store, parse(sql));
}

std::string quote_string_literal(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "''";
        out += c;
    }
    out += '\'';
    return out;
}

} // namespace tqa::sql
