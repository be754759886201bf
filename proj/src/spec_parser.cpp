#include "shctl/spec_parser.hpp"

#include "shctl/model_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace shctl {

namespace {

class Lexer {
public:
    explicit Lexer(const std::string& text) : text_(text) {}

    [[noreturn]] void fail(const std::string& expected) const {
        throw InvalidInput("spec '" + text_ + "', column " + std::to_string(pos_ + 1) + ": expected " + expected);
    }

    void skip() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(const std::string& token) {
        skip();
        if (text_.compare(pos_, token.size(), token) != 0) return false;
        pos_ += token.size();
        return true;
    }

    /// Like accept, but the token must not run into an identifier.
    bool keyword(const std::string& token) {
        const std::size_t saved = pos_;
        if (!accept(token)) return false;
        if (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            pos_ = saved;
            return false;
        }
        return true;
    }

    void expect(const std::string& token) {
        if (!accept(token)) fail("'" + token + "'");
    }

    double number() {
        skip();
        if (text_.compare(pos_, 3, "inf") == 0) {
            pos_ += 3;
            return std::numeric_limits<double>::infinity();
        }
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin || !std::isfinite(v)) fail("a number");
        pos_ += static_cast<std::size_t>(end - begin);
        return v;
    }

    std::string identifier() {
        skip();
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '-'))
            ++pos_;
        if (pos_ == start) fail("a label");
        return text_.substr(start, pos_ - start);
    }

    void finish() {
        skip();
        if (pos_ != text_.size()) fail("end of input");
    }

private:
    const std::string& text_;
    std::size_t pos_ = 0;
};

}  // namespace

SpecDescriptor parse_spec_descriptor(const std::string& text) {
    Lexer lex(text);
    SpecDescriptor d;
    if (lex.accept("E")) {
        d.kind = SpecDescriptor::Kind::Cost;
        lex.expect("<=");
        d.bound = lex.number();
        if (d.bound < 0.0) lex.fail("a non-negative bound");
        lex.expect("[");
        if (!lex.keyword("F")) lex.fail("'F'");
        d.target = lex.identifier();
        lex.expect("]");
        lex.finish();
        return d;
    }
    if (!lex.accept("P")) lex.fail("'P' or 'E'");
    if (lex.accept("<="))
        d.cmp = Comparison::LessEqual;
    else if (lex.accept(">="))
        d.cmp = Comparison::GreaterEqual;
    else
        lex.fail("'<=' or '>='");
    d.bound = lex.number();
    if (!(d.bound >= 0.0 && d.bound <= 1.0)) lex.fail("a probability bound in [0,1]");
    lex.expect("[");
    if (lex.keyword("F")) {
        d.kind = SpecDescriptor::Kind::Reach;
        d.target = lex.identifier();
    } else if (lex.accept("!")) {
        d.kind = SpecDescriptor::Kind::Until;
        d.avoid = lex.identifier();
        if (!lex.keyword("U")) lex.fail("'U'");
        d.target = lex.identifier();
    } else {
        lex.fail("'F' or '!'");
    }
    lex.expect("]");
    lex.finish();
    return d;
}

Specification parse_spec(const std::string& text, const Mdp& model) {
    const SpecDescriptor d = parse_spec_descriptor(text);
    switch (d.kind) {
        case SpecDescriptor::Kind::Reach:
            return SafetyReach{d.bound, d.cmp, resolve_state_set(model, d.target)};
        case SpecDescriptor::Kind::Until:
            return UntilProb{d.bound, d.cmp, resolve_state_set(model, d.avoid), resolve_state_set(model, d.target)};
        case SpecDescriptor::Kind::Cost:
            return ExpectedCost{d.bound, resolve_state_set(model, d.target)};
    }
    throw InvalidInput("unreachable spec kind");
}

}  // namespace shctl
