#include "sage/dsl/parser.hpp"

#include <algorithm>
#include <set>

#include "sage/dsl/lexer.hpp"
#include "sage/dsl/patch.hpp"

namespace sage::dsl {

namespace {

struct Panic {};

class Parser {
public:
    Parser(std::vector<Token> tokens, std::vector<Defect>& defects)
        : tokens_(std::move(tokens)), defects_(defects) {}

    AbmProgram parse_program_body() {
        AbmProgram p;
        bool saw_init = false;
        while (!at(TokenKind::EndOfFile)) {
            try {
                if (at_kw("param")) {
                    parse_param(p);
                } else if (at_kw("object")) {
                    p.objects.push_back(parse_object());
                } else if (at_kw("schedule")) {
                    parse_schedule(p);
                } else if (at_kw("init")) {
                    if (saw_init)
                        error(peek(), "duplicate init block");
                    saw_init = true;
                    parse_init(p.init);
                } else if (at_kw("record")) {
                    parse_recorder(p);
                } else {
                    error(peek(), "expected a top-level declaration");
                }
            } catch (const Panic&) {
                sync_top_level();
            }
        }
        return p;
    }

    Expr parse_expression() { return parse_or(); }

    std::vector<Statement> parse_statement_list_until_eof() {
        std::vector<Statement> out;
        while (!at(TokenKind::EndOfFile)) {
            try {
                out.push_back(parse_statement());
            } catch (const Panic&) {
                sync_statement();
                if (at(TokenKind::RBrace)) advance();  // stray brace, keep going
            }
        }
        return out;
    }

    bool at_eof() const { return at(TokenKind::EndOfFile); }

    void require_eof() {
        if (!at_eof()) error(peek(), "unexpected trailing input");
    }

    std::vector<PatchDirective> parse_patch_list(bool until_rbrace) {
        std::vector<PatchDirective> out;
        while (!at(TokenKind::EndOfFile) && !(until_rbrace && at(TokenKind::RBrace)))
            out.push_back(parse_patch_directive());
        return out;
    }

    std::vector<Solution> parse_solution_list() {
        std::vector<Solution> out;
        while (!at(TokenKind::EndOfFile)) {
            Solution s;
            expect_kw("solution");
            s.title = expect(TokenKind::StringLiteral, "a quoted solution title").text;
            expect(TokenKind::LBrace, "\"{\"");
            s.directives = parse_patch_list(true);
            expect(TokenKind::RBrace, "\"}\"");
            out.push_back(std::move(s));
        }
        return out;
    }

private:
    PatchDirective parse_patch_directive() {
        const Token& t = peek();
        if (eat_kw("add_state")) {
            AddState d;
            d.object_name = expect_identifier("object name").text;
            expect(TokenKind::Dot, "\".\"");
            d.decl.name = expect_identifier("state name").text;
            expect(TokenKind::Colon, "\":\"");
            if (eat_kw("bool")) d.decl.type = StateType::Bool;
            else if (eat_kw("int")) d.decl.type = StateType::Int;
            else if (eat_kw("real")) d.decl.type = StateType::Real;
            else if (eat_kw("position")) d.decl.type = StateType::Position;
            else error(peek(), "expected a state type");
            expect(TokenKind::Equal, "\"=\"");
            d.decl.init = parse_expression();
            return d;
        }
        if (eat_kw("remove_state")) {
            RemoveState d;
            d.object_name = expect_identifier("object name").text;
            expect(TokenKind::Dot, "\".\"");
            d.state_name = expect_identifier("state name").text;
            return d;
        }
        if (eat_kw("set_activity")) {
            SetActivity d;
            d.object_name = expect_identifier("object name").text;
            expect(TokenKind::Dot, "\".\"");
            d.activity_name = expect_identifier("activity name").text;
            d.body = parse_block();
            return d;
        }
        if (eat_kw("remove_activity")) {
            RemoveActivity d;
            d.object_name = expect_identifier("object name").text;
            expect(TokenKind::Dot, "\".\"");
            d.activity_name = expect_identifier("activity name").text;
            return d;
        }
        if (eat_kw("add_schedule")) {
            AddScheduleStep d;
            d.step = parse_schedule_step();
            return d;
        }
        if (eat_kw("remove_schedule")) {
            RemoveScheduleStep d;
            if (eat_kw("do")) d.kind = ScheduleKind::Do;
            else if (eat_kw("random_do")) d.kind = ScheduleKind::RandomDo;
            else if (eat_kw("conditional_do")) d.kind = ScheduleKind::ConditionalDo;
            else if (eat_kw("random_conditional_do"))
                d.kind = ScheduleKind::RandomConditionalDo;
            else error(peek(), "expected a schedule primitive");
            d.object_name = expect_identifier("object name").text;
            expect(TokenKind::Dot, "\".\"");
            d.activity_name = expect_identifier("activity name").text;
            return d;
        }
        if (eat_kw("set_param")) {
            SetParam d;
            d.name = expect_identifier("parameter name").text;
            expect(TokenKind::Equal, "\"=\"");
            d.value.value = parse_signed_number(d.value.integer, "numeric parameter value");
            return d;
        }
        error(t, "expected a patch directive");
    }

public:

private:
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    std::vector<Defect>& defects_;

    const Token& peek(int ahead = 0) const {
        std::size_t i = pos_ + static_cast<std::size_t>(ahead);
        return i < tokens_.size() ? tokens_[i] : tokens_.back();
    }
    const Token& advance() {
        const Token& t = peek();
        if (pos_ + 1 < tokens_.size()) ++pos_;
        return t;
    }
    bool at(TokenKind k) const { return peek().kind == k; }
    bool at_kw(std::string_view kw) const { return peek().is_keyword(kw); }

    bool eat(TokenKind k) {
        if (!at(k)) return false;
        advance();
        return true;
    }
    bool eat_kw(std::string_view kw) {
        if (!at_kw(kw)) return false;
        advance();
        return true;
    }

    [[noreturn]] void error(const Token& t, const std::string& reason) {
        std::string excerpt = t.kind == TokenKind::EndOfFile ? "<end of input>" : t.text;
        defects_.push_back(Defect::compilation(t.line, excerpt, reason));
        throw Panic{};
    }

    Token expect(TokenKind k, const std::string& what) {
        if (!at(k)) error(peek(), "expected " + what);
        return advance();
    }
    void expect_kw(std::string_view kw) {
        if (!at_kw(kw)) error(peek(), "expected \"" + std::string(kw) + "\"");
        advance();
    }
    Token expect_identifier(const std::string& what) {
        if (!at(TokenKind::Identifier)) error(peek(), "expected " + what);
        return advance();
    }

    void sync_top_level() {
        while (!at(TokenKind::EndOfFile)) {
            if (at_kw("param") || at_kw("object") || at_kw("schedule") || at_kw("init") ||
                at_kw("record"))
                return;
            advance();
        }
    }

    void sync_statement() {
        while (!at(TokenKind::EndOfFile)) {
            if (at(TokenKind::RBrace) || at_kw("self") || at_kw("other") || at_kw("if") ||
                at_kw("for_neighbor") || at_kw("record_event") || at_kw("todo"))
                return;
            advance();
        }
    }

    double parse_signed_number(bool& integer, const std::string& what) {
        bool neg = eat(TokenKind::Minus);
        if (at(TokenKind::IntLiteral)) {
            integer = true;
            double v = static_cast<double>(advance().int_value);
            return neg ? -v : v;
        }
        if (at(TokenKind::RealLiteral)) {
            integer = false;
            double v = advance().real_value;
            return neg ? -v : v;
        }
        error(peek(), "expected " + what);
    }

    void parse_param(AbmProgram& p) {
        expect_kw("param");
        Token name = expect_identifier("parameter name");
        expect(TokenKind::Equal, "\"=\"");
        ParamValue v;
        v.value = parse_signed_number(v.integer, "numeric parameter value");
        if (p.parameters.count(name.text))
            error(name, "duplicate parameter \"" + name.text + "\"");
        p.parameters[name.text] = v;
    }

    ObjectClass parse_object() {
        ObjectClass obj;
        obj.line = peek().line;
        expect_kw("object");
        obj.name = expect_identifier("object name").text;
        expect(TokenKind::LBrace, "\"{\"");
        while (!at(TokenKind::RBrace) && !at(TokenKind::EndOfFile)) {
            try {
                if (at_kw("state")) {
                    obj.state_decls.push_back(parse_state_decl());
                } else if (at_kw("activity")) {
                    obj.activities.push_back(parse_activity());
                } else {
                    error(peek(), "expected \"state\" or \"activity\"");
                }
            } catch (const Panic&) {
                while (!at(TokenKind::EndOfFile) && !at(TokenKind::RBrace) && !at_kw("state") &&
                       !at_kw("activity") && !at_kw("object") && !at_kw("schedule") &&
                       !at_kw("init") && !at_kw("record") && !at_kw("param"))
                    advance();
                if (!at_kw("state") && !at_kw("activity") && !at(TokenKind::RBrace)) throw;
            }
        }
        expect(TokenKind::RBrace, "\"}\"");
        return obj;
    }

    StateDecl parse_state_decl() {
        StateDecl s;
        s.line = peek().line;
        expect_kw("state");
        s.name = expect_identifier("state name").text;
        expect(TokenKind::Colon, "\":\"");
        const Token& t = peek();
        if (t.is_keyword("bool")) s.type = StateType::Bool;
        else if (t.is_keyword("int")) s.type = StateType::Int;
        else if (t.is_keyword("real")) s.type = StateType::Real;
        else if (t.is_keyword("position")) s.type = StateType::Position;
        else error(t, "expected a state type (bool, int, real, position)");
        advance();
        expect(TokenKind::Equal, "\"=\"");
        s.init = parse_expression();
        return s;
    }

    Activity parse_activity() {
        Activity a;
        a.line = peek().line;
        expect_kw("activity");
        a.name = expect_identifier("activity name").text;
        expect(TokenKind::LBrace, "\"{\"");
        while (!at(TokenKind::RBrace) && !at(TokenKind::EndOfFile)) {
            try {
                a.body.push_back(parse_statement());
            } catch (const Panic&) {
                sync_statement();
                if (at(TokenKind::EndOfFile)) throw;
            }
        }
        expect(TokenKind::RBrace, "\"}\"");
        return a;
    }

    std::vector<Statement> parse_block() {
        expect(TokenKind::LBrace, "\"{\"");
        std::vector<Statement> body;
        while (!at(TokenKind::RBrace) && !at(TokenKind::EndOfFile))
            body.push_back(parse_statement());
        expect(TokenKind::RBrace, "\"}\"");
        return body;
    }

    Statement parse_statement() {
        const Token& t = peek();
        if (t.is_keyword("todo")) {
            advance();
            return Statement(Todo{}, t.line);
        }
        if (t.is_keyword("record_event")) {
            advance();
            RecordEvent ev;
            ev.event_name = expect_identifier("event name").text;
            return Statement(std::move(ev), t.line);
        }
        if (t.is_keyword("if")) {
            advance();
            If node;
            node.condition = parse_expression();
            node.then_body = parse_block();
            if (eat_kw("else")) node.else_body = parse_block();
            return Statement(std::move(node), t.line);
        }
        if (t.is_keyword("for_neighbor")) {
            advance();
            ForNeighbor node;
            expect(TokenKind::LParen, "\"(\"");
            node.radius = parse_expression();
            expect(TokenKind::RParen, "\")\"");
            node.body = parse_block();
            return Statement(std::move(node), t.line);
        }
        if (t.is_keyword("self") || t.is_keyword("other")) {
            advance();
            Assign node;
            node.target_scope =
                t.is_keyword("self") ? RefScope::SelfState : RefScope::OtherState;
            expect(TokenKind::Dot, "\".\"");
            node.state_name = expect_identifier("state name").text;
            expect(TokenKind::Assign, "\":=\"");
            node.value = parse_expression();
            return Statement(std::move(node), t.line);
        }
        error(t, "expected a statement");
    }

    void parse_schedule(AbmProgram& p) {
        expect_kw("schedule");
        expect(TokenKind::LBrace, "\"{\"");
        while (!at(TokenKind::RBrace) && !at(TokenKind::EndOfFile)) {
            try {
                p.schedule.push_back(parse_schedule_step());
            } catch (const Panic&) {
                while (!at(TokenKind::EndOfFile) && !at(TokenKind::RBrace) && !at_kw("do") &&
                       !at_kw("random_do") && !at_kw("conditional_do") &&
                       !at_kw("random_conditional_do"))
                    advance();
                if (at(TokenKind::EndOfFile)) throw;
            }
        }
        expect(TokenKind::RBrace, "\"}\"");
    }

    ScheduleStep parse_schedule_step() {
        ScheduleStep step;
        step.line = peek().line;
        if (eat_kw("do")) step.kind = ScheduleKind::Do;
        else if (eat_kw("random_do")) step.kind = ScheduleKind::RandomDo;
        else if (eat_kw("conditional_do")) step.kind = ScheduleKind::ConditionalDo;
        else if (eat_kw("random_conditional_do")) step.kind = ScheduleKind::RandomConditionalDo;
        else error(peek(), "expected a schedule primitive");
        step.object_name = expect_identifier("object name").text;
        expect(TokenKind::Dot, "\".\"");
        step.activity_name = expect_identifier("activity name").text;
        if (rep::is_conditional(step.kind)) {
            expect_kw("when");
            step.condition = parse_expression();
        }
        return step;
    }

    void parse_init(InitSpec& init) {
        expect_kw("init");
        expect(TokenKind::LBrace, "\"{\"");
        std::set<std::string> counted, laid_out;
        bool saw_grid = false, saw_seed = false;
        while (!at(TokenKind::RBrace) && !at(TokenKind::EndOfFile)) {
            const Token& t = peek();
            if (eat_kw("grid")) {
                if (saw_grid) error(t, "duplicate grid directive");
                saw_grid = true;
                init.grid_width = expect(TokenKind::IntLiteral, "grid width").int_value;
                init.grid_height = expect(TokenKind::IntLiteral, "grid height").int_value;
                if (init.grid_width < 1 || init.grid_height < 1)
                    error(t, "grid dimensions must be positive");
            } else if (eat_kw("seed")) {
                if (saw_seed) error(t, "duplicate seed directive");
                saw_seed = true;
                init.seed = expect(TokenKind::IntLiteral, "seed value").int_value;
            } else if (eat_kw("layout")) {
                std::string name = expect_identifier("object name").text;
                if (!laid_out.insert(name).second)
                    error(t, "duplicate layout for object \"" + name + "\"");
                expect_kw("rowmajor");
                init.layouts[name] = LayoutKind::RowMajor;
            } else if (eat_kw("count")) {
                CountSpec c;
                c.line = t.line;
                c.object_name = expect_identifier("object name").text;
                if (!counted.insert(c.object_name).second)
                    error(t, "duplicate count for object \"" + c.object_name + "\"");
                expect(TokenKind::Equal, "\"=\"");
                if (at(TokenKind::IntLiteral)) {
                    const Token& n = advance();
                    c.count = Expr(IntLit{n.int_value}, n.line);
                } else if (at(TokenKind::Identifier)) {
                    const Token& n = advance();
                    c.count = Expr(Ref{RefScope::Param, n.text}, n.line);
                } else {
                    error(peek(), "expected an instance count (integer or parameter)");
                }
                init.counts.push_back(std::move(c));
            } else if (eat_kw("set")) {
                InitOverride ov;
                ov.line = t.line;
                ov.object_name = expect_identifier("object name").text;
                expect(TokenKind::Dot, "\".\"");
                ov.state_name = expect_identifier("state name").text;
                expect(TokenKind::Equal, "\"=\"");
                ov.value = parse_expression();
                init.overrides.push_back(std::move(ov));
            } else {
                error(t, "expected an init directive (grid, seed, layout, count, set)");
            }
        }
        expect(TokenKind::RBrace, "\"}\"");
    }

    void parse_recorder(AbmProgram& p) {
        Recorder r;
        r.line = peek().line;
        expect_kw("record");
        r.metric_name = expect_identifier("metric name").text;
        expect(TokenKind::Equal, "\"=\"");
        r.expr = parse_expression();
        p.recorders.push_back(std::move(r));
    }

    // Expressions, loosest binding first: or, and, not, comparison,
    // additive, multiplicative, unary minus, primary.
    Expr parse_or() {
        Expr lhs = parse_and();
        while (at_kw("or")) {
            int line = advance().line;
            Expr rhs = parse_and();
            lhs = Expr(Binary{BinaryOp::Or, Box<Expr>(std::move(lhs)), Box<Expr>(std::move(rhs))},
                       line);
        }
        return lhs;
    }

    Expr parse_and() {
        Expr lhs = parse_not();
        while (at_kw("and")) {
            int line = advance().line;
            Expr rhs = parse_not();
            lhs = Expr(
                Binary{BinaryOp::And, Box<Expr>(std::move(lhs)), Box<Expr>(std::move(rhs))},
                line);
        }
        return lhs;
    }

    Expr parse_not() {
        if (at_kw("not")) {
            int line = advance().line;
            Expr operand = parse_not();
            return Expr(Not{Box<Expr>(std::move(operand))}, line);
        }
        return parse_comparison();
    }

    Expr parse_comparison() {
        Expr lhs = parse_additive();
        BinaryOp op;
        switch (peek().kind) {
            case TokenKind::Lt: op = BinaryOp::Lt; break;
            case TokenKind::Le: op = BinaryOp::Le; break;
            case TokenKind::EqEq: op = BinaryOp::Eq; break;
            case TokenKind::Ne: op = BinaryOp::Ne; break;
            case TokenKind::Ge: op = BinaryOp::Ge; break;
            case TokenKind::Gt: op = BinaryOp::Gt; break;
            default: return lhs;
        }
        int line = advance().line;
        Expr rhs = parse_additive();
        return Expr(Binary{op, Box<Expr>(std::move(lhs)), Box<Expr>(std::move(rhs))}, line);
    }

    Expr parse_additive() {
        Expr lhs = parse_multiplicative();
        while (at(TokenKind::Plus) || at(TokenKind::Minus)) {
            BinaryOp op = at(TokenKind::Plus) ? BinaryOp::Add : BinaryOp::Sub;
            int line = advance().line;
            Expr rhs = parse_multiplicative();
            lhs = Expr(Binary{op, Box<Expr>(std::move(lhs)), Box<Expr>(std::move(rhs))}, line);
        }
        return lhs;
    }

    Expr parse_multiplicative() {
        Expr lhs = parse_unary();
        while (at(TokenKind::Star) || at(TokenKind::Slash)) {
            BinaryOp op = at(TokenKind::Star) ? BinaryOp::Mul : BinaryOp::Div;
            int line = advance().line;
            Expr rhs = parse_unary();
            lhs = Expr(Binary{op, Box<Expr>(std::move(lhs)), Box<Expr>(std::move(rhs))}, line);
        }
        return lhs;
    }

    Expr parse_unary() {
        if (at(TokenKind::Minus)) {
            int line = advance().line;
            Expr operand = parse_unary();
            if (auto* i = std::get_if<IntLit>(&operand.node))
                return Expr(IntLit{-i->value}, line);
            if (auto* r = std::get_if<RealLit>(&operand.node))
                return Expr(RealLit{-r->value}, line);
            return Expr(Binary{BinaryOp::Sub, Box<Expr>(Expr(IntLit{0}, line)),
                               Box<Expr>(std::move(operand))},
                        line);
        }
        return parse_primary();
    }

    Expr parse_primary() {
        const Token& t = peek();
        int line = t.line;
        switch (t.kind) {
            case TokenKind::IntLiteral: advance(); return Expr(IntLit{t.int_value}, line);
            case TokenKind::RealLiteral: advance(); return Expr(RealLit{t.real_value}, line);
            case TokenKind::StringLiteral: advance(); return Expr(StringLit{t.text}, line);
            case TokenKind::LParen: {
                advance();
                Expr inner = parse_expression();
                expect(TokenKind::RParen, "\")\"");
                return inner;
            }
            case TokenKind::Identifier:
                advance();
                return Expr(Ref{RefScope::Param, t.text}, line);
            case TokenKind::Keyword: break;
            default: error(t, "expected an expression");
        }

        if (t.is_keyword("true")) { advance(); return Expr(BoolLit{true}, line); }
        if (t.is_keyword("false")) { advance(); return Expr(BoolLit{false}, line); }
        if (t.is_keyword("self") || t.is_keyword("other")) {
            advance();
            expect(TokenKind::Dot, "\".\"");
            Token name = expect_identifier("state name");
            RefScope scope = t.is_keyword("self") ? RefScope::SelfState : RefScope::OtherState;
            return Expr(Ref{scope, name.text}, line);
        }
        if (t.is_keyword("bernoulli")) {
            advance();
            expect(TokenKind::LParen, "\"(\"");
            Expr p = parse_expression();
            expect(TokenKind::RParen, "\")\"");
            return Expr(Bernoulli{Box<Expr>(std::move(p))}, line);
        }
        if (t.is_keyword("uniform") || t.is_keyword("randint")) {
            bool is_uniform = t.is_keyword("uniform");
            advance();
            expect(TokenKind::LParen, "\"(\"");
            Expr lo = parse_expression();
            expect(TokenKind::Comma, "\",\"");
            Expr hi = parse_expression();
            expect(TokenKind::RParen, "\")\"");
            if (is_uniform)
                return Expr(Uniform{Box<Expr>(std::move(lo)), Box<Expr>(std::move(hi))}, line);
            return Expr(RandInt{Box<Expr>(std::move(lo)), Box<Expr>(std::move(hi))}, line);
        }
        if (t.is_keyword("count_neighbors")) {
            advance();
            expect(TokenKind::LParen, "\"(\"");
            Expr radius = parse_expression();
            expect(TokenKind::Comma, "\",\"");
            Expr pred = parse_expression();
            expect(TokenKind::RParen, "\")\"");
            return Expr(
                CountNeighbors{Box<Expr>(std::move(radius)), Box<Expr>(std::move(pred))}, line);
        }
        if (t.is_keyword("count_all") || t.is_keyword("sum_all")) {
            bool is_count = t.is_keyword("count_all");
            advance();
            expect(TokenKind::LParen, "\"(\"");
            Token obj = expect_identifier("object name");
            expect(TokenKind::Comma, "\",\"");
            Expr body = parse_expression();
            expect(TokenKind::RParen, "\")\"");
            if (is_count) return Expr(CountAll{obj.text, Box<Expr>(std::move(body))}, line);
            return Expr(SumAll{obj.text, Box<Expr>(std::move(body))}, line);
        }
        if (t.is_keyword("distance")) {
            advance();
            expect(TokenKind::LParen, "\"(\"");
            expect_kw("self");
            expect(TokenKind::Comma, "\",\"");
            expect_kw("other");
            expect(TokenKind::RParen, "\")\"");
            return Expr(Distance{}, line);
        }
        if (t.is_keyword("pos")) {
            advance();
            expect(TokenKind::LParen, "\"(\"");
            PosValue v;
            bool negx = eat(TokenKind::Minus);
            v.x = expect(TokenKind::IntLiteral, "x coordinate").int_value;
            if (negx) v.x = -v.x;
            expect(TokenKind::Comma, "\",\"");
            bool negy = eat(TokenKind::Minus);
            v.y = expect(TokenKind::IntLiteral, "y coordinate").int_value;
            if (negy) v.y = -v.y;
            expect(TokenKind::RParen, "\")\"");
            return Expr(PosLit{v}, line);
        }
        error(t, "expected an expression");
    }
};

}  // namespace

ParseResult parse_program(std::string_view source) {
    ParseResult result;
    TokenizeResult lexed = tokenize(source);
    result.defects = lexed.defects;

    std::size_t syntax_before = result.defects.size();
    Parser parser(std::move(lexed.tokens), result.defects);
    AbmProgram program = parser.parse_program_body();

    if (result.defects.size() > syntax_before || !lexed.defects.empty()) {
        // Not syntactically sound; the partial tree is too unreliable to keep.
        std::sort(result.defects.begin(), result.defects.end(),
                  [](const Defect& a, const Defect& b) { return a.line < b.line; });
        return result;
    }

    analyze_program(program, result.defects);
    std::sort(result.defects.begin(), result.defects.end(),
              [](const Defect& a, const Defect& b) { return a.line < b.line; });
    result.program = std::move(program);
    return result;
}

std::optional<Expr> parse_expr_text(std::string_view source, std::vector<Defect>& defects) {
    TokenizeResult lexed = tokenize(source);
    if (!lexed.defects.empty()) {
        defects.insert(defects.end(), lexed.defects.begin(), lexed.defects.end());
        return std::nullopt;
    }
    std::vector<Defect> local;
    Parser parser(std::move(lexed.tokens), local);
    try {
        Expr e = parser.parse_expression();
        parser.require_eof();
        if (!local.empty()) {
            defects.insert(defects.end(), local.begin(), local.end());
            return std::nullopt;
        }
        return e;
    } catch (const Panic&) {
        defects.insert(defects.end(), local.begin(), local.end());
        return std::nullopt;
    }
}

namespace {

template <typename F>
auto run_patch_parser(std::string_view text, F&& parse_fn) {
    TokenizeResult lexed = tokenize(text);
    std::vector<Defect> defects = lexed.defects;
    Parser parser(std::move(lexed.tokens), defects);
    using Result = decltype(parse_fn(parser));
    Result out{};
    if (defects.empty()) {
        try {
            out = parse_fn(parser);
        } catch (const Panic&) {
        }
    }
    if (!defects.empty()) {
        const Defect& d = defects.front();
        throw PatchParseError("patch parse error at line " + std::to_string(d.line) + " near \"" +
                                  d.excerpt + "\": " + d.reason,
                              d.line);
    }
    return out;
}

}  // namespace

std::vector<PatchDirective> parse_patch(std::string_view text) {
    return run_patch_parser(text, [](Parser& p) { return p.parse_patch_list(false); });
}

std::vector<Solution> parse_solutions(std::string_view text) {
    return run_patch_parser(text, [](Parser& p) { return p.parse_solution_list(); });
}

std::optional<std::vector<Statement>> parse_statements_text(std::string_view source,
                                                            std::vector<Defect>& defects) {
    TokenizeResult lexed = tokenize(source);
    if (!lexed.defects.empty()) {
        defects.insert(defects.end(), lexed.defects.begin(), lexed.defects.end());
        return std::nullopt;
    }
    std::vector<Defect> local;
    Parser parser(std::move(lexed.tokens), local);
    std::vector<Statement> stmts = parser.parse_statement_list_until_eof();
    if (!local.empty()) {
        defects.insert(defects.end(), local.begin(), local.end());
        return std::nullopt;
    }
    return stmts;
}

}  // namespace sage::dsl
