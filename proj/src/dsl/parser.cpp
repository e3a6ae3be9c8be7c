#include <cctype>
#include <charconv>

#include "common.hpp"
#include "dsl/program.hpp"

namespace mf::dsl {
namespace {

enum class Tok { Ident, String, Number, LBrace, RBrace, LBrack, RBrack, Comma, Dot, End };

struct Token {
    Tok kind;
    std::string text;
    double number = 0;
    int line = 1;
    int col = 1;
};

class Lexer {
  public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        skip_ws();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= src_.size()) {
            t.kind = Tok::End;
            return t;
        }
        char c = src_[pos_];
        switch (c) {
            case '{': advance(); t.kind = Tok::LBrace; return t;
            case '}': advance(); t.kind = Tok::RBrace; return t;
            case '[': advance(); t.kind = Tok::LBrack; return t;
            case ']': advance(); t.kind = Tok::RBrack; return t;
            case ',': advance(); t.kind = Tok::Comma; return t;
            case '.': advance(); t.kind = Tok::Dot; return t;
            case '"': return lex_string(t);
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') return lex_number(t);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_ident(t);
        err("unexpected character '" + std::string(1, c) + "'");
    }

    [[noreturn]] void err(const std::string& msg) const {
        fail(ErrorKind::Syntax,
             "syntax error at " + std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg);
    }

  private:
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    Token lex_string(Token t) {
        t.kind = Tok::String;
        advance();  // opening quote
        std::string out;
        while (true) {
            if (pos_ >= src_.size()) err("unterminated string");
            char c = src_[pos_];
            if (c == '"') {
                advance();
                break;
            }
            if (c == '\\') {
                advance();
                if (pos_ >= src_.size()) err("unterminated escape");
                char e = src_[pos_];
                switch (e) {
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    default: err("unknown escape '\\" + std::string(1, e) + "'");
                }
                advance();
            } else {
                out += c;
                advance();
            }
        }
        t.text = std::move(out);
        return t;
    }

    Token lex_number(Token t) {
        t.kind = Tok::Number;
        size_t start = pos_;
        if (src_[pos_] == '-') advance();
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
            advance();
        }
        t.text = src_.substr(start, pos_ - start);
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
        if (ec != std::errc() || p != t.text.data() + t.text.size()) err("bad number " + t.text);
        return t;
    }

    Token lex_ident(Token t) {
        t.kind = Tok::Ident;
        size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            advance();
        }
        t.text = src_.substr(start, pos_ - start);
        return t;
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
  public:
    explicit Parser(const std::string& src) : lex_(src) { cur_ = lex_.next(); }

    WorkflowProgram parse() {
        WorkflowProgram p;
        expect_keyword("workflow");
        p.name = expect_ident();
        expect(Tok::LBrace);
        if (at_keyword("version")) {
            bump();
            p.version = expect_string();
        }
        if (at_keyword("thought")) {
            bump();
            p.thought = expect_string();
        }
        while (at_keyword("agent")) {
            bump();
            p.agents.push_back(parse_agent());
        }
        while (at_keyword("node")) {
            bump();
            p.nodes.push_back(parse_node());
        }
        expect(Tok::RBrace);
        expect(Tok::End);
        if (!p.nodes.empty()) p.entry = p.nodes.front().id;
        return p;
    }

  private:
    AgentSpec parse_agent() {
        AgentSpec a;
        a.name = expect_ident();
        expect(Tok::LBrace);
        expect_keyword("role");
        a.role = expect_string();
        expect_keyword("temperature");
        a.temperature = expect_number();
        expect_keyword("outputs");
        a.output_fields = parse_ident_list();
        expect(Tok::RBrace);
        return a;
    }

    NodeSpec parse_node() {
        NodeSpec n;
        n.id = expect_ident();
        std::string kind = expect_ident();
        expect(Tok::LBrace);
        if (kind == "agent_call") {
            n.kind = NodeKind::AgentCall;
            n.call = parse_call_body(n.id);
        } else if (kind == "fanout") {
            n.kind = NodeKind::Fanout;
            while (at_keyword("call")) {
                bump();
                std::string id = expect_ident();
                expect(Tok::LBrace);
                CallSpec c = parse_call_body(id);
                expect(Tok::RBrace);
                n.calls.push_back(std::move(c));
            }
        } else if (kind == "extract") {
            n.kind = NodeKind::Extract;
            expect_keyword("from");
            n.from = parse_ref();
            expect_keyword("patterns");
            n.patterns = parse_string_list();
        } else if (kind == "vote") {
            n.kind = NodeKind::Vote;
            expect_keyword("over");
            n.over = parse_ref_list();
            if (at_keyword("tie")) {
                bump();
                expect(Tok::LBrace);
                n.tie = parse_call_body("");
                expect(Tok::RBrace);
            }
        } else if (kind == "verify_loop") {
            n.kind = NodeKind::VerifyLoop;
            expect_keyword("max_rounds");
            n.max_rounds = static_cast<int>(expect_number());
            expect_keyword("gate");
            n.gate = expect_ident();
            expect_keyword("verifier");
            expect(Tok::LBrace);
            n.verifier = parse_call_body("");
            expect(Tok::RBrace);
            expect_keyword("body");
            n.body = parse_ident_list();
        } else if (kind == "select") {
            n.kind = NodeKind::Select;
            expect_keyword("chooser");
            expect(Tok::LBrace);
            n.chooser = parse_call_body("");
            expect(Tok::RBrace);
            expect_keyword("candidates");
            n.candidates = parse_ref_list();
        } else if (kind == "return") {
            n.kind = NodeKind::Return;
            expect_keyword("value");
            n.ret = parse_ref();
        } else {
            fail(ErrorKind::UnknownNodeKind, "unknown node kind '" + kind + "' at node " + n.id);
        }
        expect(Tok::RBrace);
        return n;
    }

    CallSpec parse_call_body(const std::string& id) {
        CallSpec c;
        c.id = id;
        expect_keyword("agent");
        c.agent = expect_ident();
        expect_keyword("instruction");
        c.instruction = expect_string();
        expect_keyword("inputs");
        c.inputs = parse_ref_list();
        if (at_keyword("outputs")) {
            bump();
            c.outputs = parse_ident_list();
        }
        return c;
    }

    Ref parse_ref() {
        Ref r;
        r.node = expect_ident();
        expect(Tok::Dot);
        r.field = expect_ident();
        return r;
    }

    std::vector<Ref> parse_ref_list() {
        std::vector<Ref> out;
        expect(Tok::LBrack);
        if (cur_.kind != Tok::RBrack) {
            out.push_back(parse_ref());
            while (cur_.kind == Tok::Comma) {
                bump();
                out.push_back(parse_ref());
            }
        }
        expect(Tok::RBrack);
        return out;
    }

    std::vector<std::string> parse_ident_list() {
        std::vector<std::string> out;
        expect(Tok::LBrack);
        if (cur_.kind != Tok::RBrack) {
            out.push_back(expect_ident());
            while (cur_.kind == Tok::Comma) {
                bump();
                out.push_back(expect_ident());
            }
        }
        expect(Tok::RBrack);
        return out;
    }

    std::vector<std::string> parse_string_list() {
        std::vector<std::string> out;
        expect(Tok::LBrack);
        if (cur_.kind != Tok::RBrack) {
            out.push_back(expect_string());
            while (cur_.kind == Tok::Comma) {
                bump();
                out.push_back(expect_string());
            }
        }
        expect(Tok::RBrack);
        return out;
    }

    bool at_keyword(std::string_view kw) const {
        return cur_.kind == Tok::Ident && cur_.text == kw;
    }

    void expect_keyword(std::string_view kw) {
        if (!at_keyword(kw)) err("expected '" + std::string(kw) + "'");
        bump();
    }

    std::string expect_ident() {
        if (cur_.kind != Tok::Ident) err("expected identifier");
        std::string s = cur_.text;
        bump();
        return s;
    }

    std::string expect_string() {
        if (cur_.kind != Tok::String) err("expected string");
        std::string s = cur_.text;
        bump();
        return s;
    }

    double expect_number() {
        if (cur_.kind != Tok::Number) err("expected number");
        double v = cur_.number;
        bump();
        return v;
    }

    void expect(Tok kind) {
        if (cur_.kind != kind) err("unexpected token");
        bump();
    }

    void bump() { cur_ = lex_.next(); }

    [[noreturn]] void err(const std::string& msg) const {
        fail(ErrorKind::Syntax, "syntax error at " + std::to_string(cur_.line) + ":" +
                                    std::to_string(cur_.col) + ": " + msg);
    }

    Lexer lex_;
    Token cur_;
};

ErrorKind violation_kind(const std::string& message) {
    if (message.find("dangling reference") != std::string::npos) return ErrorKind::DanglingReference;
    if (message.find("max_rounds") != std::string::npos) return ErrorKind::UnboundedLoop;
    return ErrorKind::InvalidProgram;
}

}  // namespace

WorkflowProgram parse_program_unchecked(const std::string& source) {
    return Parser(source).parse();
}

WorkflowProgram parse_program(const std::string& source, int loop_cap) {
    WorkflowProgram p = Parser(source).parse();
    auto report = validate_program(p, loop_cap);
    if (!report.empty()) {
        const Violation& v = report.front();
        std::string where = v.node_id.empty() ? "" : " (node " + v.node_id + ")";
        fail(violation_kind(v.message), v.message + where);
    }
    return p;
}

}  // namespace mf::dsl
